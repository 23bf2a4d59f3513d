fn main() {
    std::process::exit(graspwrench::cli::run(std::env::args_os()));
}

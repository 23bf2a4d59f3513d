//! Subcommand implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{hash_json, Loaded, Overrides, TwsBlock, SCHEMA};
use crate::bench::{mix_seed, run_suite, MeshSource, Suite, SuiteConfig};
use crate::metrics::{
    epsilon_from_samples, epsilon_t_from_samples, rle_points, sparsity_unfiltered, write_csv,
    MetricReport, FC_TRIALS,
};
use crate::oracle::{
    boundary_ray_gens, epsilon_oracle, force_closure_margin, force_closure_simplex_check,
    generators,
};
use crate::synthesis::optimize::{contacts_ply, optimize, SynthesisResult};
use crate::task::{GradCheckConfig, GradCheckReport};
use crate::wrench::{estimate_boundary, normalize_contacts, Contact, FrictionModel, WrenchSample};
use crate::{GwsError, Result, Vec3, Vec6};

/// Default direction count of `estimate`, `metrics` and `oracle --config`.
pub const DEFAULT_K: usize = 100_000;
/// Default oracle cone discretization.
pub const DEFAULT_D: usize = 64;
/// Default number of boundary points `oracle` evaluates.
pub const DEFAULT_ORACLE_POINTS: usize = 1000;
/// Points per boundary evaluated for the relative length error in `metrics`.
pub const METRICS_RLE_POINTS: usize = 200;
/// Probe directions of the sparsity metric in `metrics`.
pub const METRICS_SP_PROBES: usize = 10_000;

/// Provenance block embedded in every artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub schema: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Meta {
    pub fn new(command: &str, config_hash: &str, seed: u64) -> Self {
        Meta {
            schema: SCHEMA.into(),
            command: command.into(),
            config_hash: config_hash.into(),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    /// Single-line form used in CSV and PLY comments.
    pub fn comment(&self) -> String {
        format!(
            "schema={} command={} config_hash={} seed={} version={}",
            self.schema, self.command, self.config_hash, self.seed, self.version
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorInfo {
    #[serde(rename = "K")]
    pub k: usize,
    pub delta_deg: f64,
    pub cpn: bool,
}

/// Output of `estimate`, input of `oracle` and `metrics`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFile {
    pub meta: Meta,
    pub estimator: EstimatorInfo,
    /// Contacts the samples were computed from, after normalization.
    pub contacts: Vec<Contact>,
    pub cpn_center: Vec3,
    pub cpn_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tws: Option<TwsBlock>,
    pub u: Vec<[f64; 6]>,
    pub w: Vec<[f64; 6]>,
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_t: Option<f64>,
}

impl BoundaryFile {
    pub fn samples(&self) -> Result<Vec<WrenchSample>> {
        if self.u.len() != self.w.len() {
            return Err(GwsError::invalid(format!(
                "boundary file has {} directions but {} wrenches",
                self.u.len(),
                self.w.len()
            )));
        }
        Ok(self
            .u
            .iter()
            .zip(&self.w)
            .map(|(u, w)| WrenchSample {
                u: Vec6::from(*u),
                w: Vec6::from(*w),
            })
            .collect())
    }

    pub fn wrenches(&self) -> Vec<Vec6> {
        self.w.iter().map(|w| Vec6::from(*w)).collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GwsError::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            GwsError::invalid(format!(
                "{}: field `{}`: {}",
                path.display(),
                e.path(),
                e.inner()
            ))
        })
    }
}

/// LP verdicts on the points of a boundary file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub meta: Meta,
    pub d: usize,
    pub evaluated: usize,
    pub covered: usize,
    pub mean_q: f64,
    pub min_q: f64,
    pub max_q: f64,
    /// Oracle ray scale per evaluated point; 1 means exactly on the
    /// discretized boundary.
    pub q: Vec<f64>,
}

/// Oracle quantities of a contact set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactOracleReport {
    pub meta: Meta,
    pub d: usize,
    pub force_closure_margin: f64,
    pub force_closure: bool,
    pub eps_oracle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthFile {
    pub meta: Meta,
    pub task: String,
    pub mesh: String,
    #[serde(flatten)]
    pub result: SynthesisResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthRun {
    pub seed: u64,
    pub success: bool,
    pub eps_t: f64,
    pub energy: f64,
    pub early_stop: bool,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub meta: Meta,
    pub task: String,
    pub successes: usize,
    pub success_rate: f64,
    pub runs: Vec<SynthRun>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckFile {
    pub meta: Meta,
    pub config: GradCheckConfig,
    #[serde(flatten)]
    pub report: GradCheckReport,
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| GwsError::io("<stdout>", e))
        }
        Some(p) => write_atomic(p, bytes),
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| GwsError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| GwsError::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| GwsError::io(path, e))?;
    tmp.persist(path).map_err(|e| GwsError::io(path, e.error))?;
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s.into_bytes()
}

fn require_config(config: &Option<PathBuf>, command: &str) -> Result<PathBuf> {
    config
        .clone()
        .ok_or_else(|| GwsError::invalid(format!("{command} needs --config")))
}

fn mu_label(f: &FrictionModel) -> String {
    match *f {
        FrictionModel::Pcf { mu } => mu.to_string(),
        FrictionModel::Sfc { mu1, mu2 } => format!("{mu1}/{mu2}"),
    }
}

/// Boundary estimate of the configured contacts.
pub fn estimate_file(loaded: &Loaded) -> Result<BoundaryFile> {
    let contacts = loaded.contacts()?;
    let cfg = loaded.estimator(DEFAULT_K);
    let set = estimate_boundary(&contacts, &cfg)?;
    let w = set.wrenches();
    let eps = epsilon_from_samples(&w, loaded.seed())?;
    let tws = loaded.tws()?;
    let eps_t = tws
        .as_ref()
        .map(|t| epsilon_t_from_samples(&set.samples, t))
        .transpose()?;
    Ok(BoundaryFile {
        meta: Meta::new("estimate", &loaded.hash, loaded.seed()),
        estimator: EstimatorInfo {
            k: cfg.k,
            delta_deg: cfg.delta.to_degrees(),
            cpn: cfg.cpn,
        },
        contacts: set.contacts.clone(),
        cpn_center: set.cpn_center,
        cpn_scale: set.cpn_scale,
        tws: loaded.config.tws.or_else(|| {
            tws.map(|t| TwsBlock {
                w_t: t.w_t.into(),
                gamma_deg: t.gamma.to_degrees(),
            })
        }),
        u: set.samples.iter().map(|s| s.u.into()).collect(),
        w: w.iter().map(|w| (*w).into()).collect(),
        eps,
        eps_t,
    })
}

pub fn estimate(config: &Option<PathBuf>, ov: &Overrides) -> Result<()> {
    let loaded = Loaded::from_file(&require_config(config, "estimate")?, ov)?;
    let file = estimate_file(&loaded)?;
    emit(loaded.out.as_deref(), &json(&file))
}

/// LP ray scale of every `stride`-th non-zero wrench of `file`.
pub fn oracle_on_file(file: &BoundaryFile, d: usize, max_points: usize) -> Result<OracleReport> {
    let gens = generators(&file.contacts, d)?;
    let pts: Vec<Vec6> = file
        .wrenches()
        .into_iter()
        .filter(|w| w.norm() > 0.0)
        .collect();
    if pts.is_empty() {
        return Err(GwsError::numerical("boundary file has no non-zero wrench"));
    }
    let limit = if max_points == 0 { pts.len() } else { max_points };
    let stride = pts.len().div_ceil(limit).max(1);
    let picked: Vec<&Vec6> = pts.iter().step_by(stride).collect();
    let q: Vec<f64> = picked
        .par_iter()
        .map(|w| boundary_ray_gens(w, &gens).map(|r| r.q))
        .collect::<Result<_>>()?;
    let n = q.len() as f64;
    Ok(OracleReport {
        meta: Meta::new("oracle", &file.meta.config_hash, file.meta.seed),
        d,
        evaluated: q.len(),
        covered: q.iter().filter(|&&x| x > 0.0).count(),
        mean_q: q.iter().sum::<f64>() / n,
        min_q: q.iter().copied().fold(f64::INFINITY, f64::min),
        max_q: q.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        q,
    })
}

pub fn oracle_on_config(loaded: &Loaded, d: usize, n_dirs: usize) -> Result<ContactOracleReport> {
    let contacts = loaded.contacts()?;
    let cpn = loaded.estimator(DEFAULT_K).cpn;
    let contacts = if cpn {
        normalize_contacts(&contacts)?.contacts
    } else {
        contacts
    };
    let margin = force_closure_margin(&generators(&contacts, d)?)?;
    let eps = epsilon_oracle(&contacts, d, n_dirs, mix_seed(loaded.seed(), 3))?;
    Ok(ContactOracleReport {
        meta: Meta::new("oracle", &loaded.hash, loaded.seed()),
        d,
        force_closure_margin: margin,
        force_closure: margin > 0.0,
        eps_oracle: eps,
    })
}

pub struct OracleArgs {
    pub input: Option<PathBuf>,
    pub d: usize,
    pub max_points: usize,
}

pub fn oracle(config: &Option<PathBuf>, ov: &Overrides, args: &OracleArgs) -> Result<()> {
    match (&args.input, config) {
        (Some(input), None) => {
            let file = BoundaryFile::read(input)?;
            let report = oracle_on_file(&file, args.d, args.max_points)?;
            emit(ov.out.as_deref(), &json(&report))
        }
        (None, Some(c)) => {
            let loaded = Loaded::from_file(c, ov)?;
            let n = loaded.estimator(DEFAULT_K).k;
            let report = oracle_on_config(&loaded, args.d, n)?;
            emit(loaded.out.as_deref(), &json(&report))
        }
        _ => Err(GwsError::invalid("oracle needs exactly one of --input or --config")),
    }
}

/// Metric row of a boundary file.
pub fn metrics_row(file: &BoundaryFile, case_id: &str) -> Result<MetricReport> {
    let w = file.wrenches();
    let seed = file.meta.seed;
    let eps = epsilon_from_samples(&w, seed)?;
    let fc = w.len() >= 6 && force_closure_simplex_check(&w, FC_TRIALS, seed)?;
    let gens = generators(&file.contacts, DEFAULT_D)?;
    let rle = rle_points(&w, &gens, METRICS_RLE_POINTS)?;
    let sp = if fc {
        Some(sparsity_unfiltered(&w, METRICS_SP_PROBES, mix_seed(seed, 7))?)
    } else {
        None
    };
    let mu = file
        .contacts
        .first()
        .map(|c| mu_label(&c.friction))
        .unwrap_or_default();
    Ok(MetricReport {
        case_id: case_id.into(),
        mesh: String::new(),
        m: file.contacts.len(),
        mu,
        model: "ours".into(),
        delta_deg: file.estimator.delta_deg,
        k: file.estimator.k,
        d_oracle: DEFAULT_D,
        rle_e2: rle.rle * 100.0,
        sp_rad: sp,
        eps,
        eps_t: file.eps_t,
        time_ms: None,
        fc,
    })
}

pub fn metrics(config: &Option<PathBuf>, ov: &Overrides, input: &Option<PathBuf>) -> Result<()> {
    let (file, case_id, out) = match (input, config) {
        (Some(i), None) => {
            let f = BoundaryFile::read(i)?;
            let id = i
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (f, id, ov.out.clone())
        }
        (None, Some(c)) => {
            let loaded = Loaded::from_file(c, ov)?;
            let id = c
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (estimate_file(&loaded)?, id, loaded.out.clone())
        }
        _ => return Err(GwsError::invalid("metrics needs exactly one of --input or --config")),
    };
    let row = metrics_row(&file, &case_id)?;
    let meta = Meta::new("metrics", &file.meta.config_hash, file.meta.seed);
    let mut buf = Vec::new();
    write_csv(&mut buf, &meta.comment(), &[row])?;
    emit(out.as_deref(), &buf)
}

pub fn synth(config: &Option<PathBuf>, ov: &Overrides, batch: Option<usize>) -> Result<SynthSummary> {
    let loaded = Loaded::from_file(&require_config(config, "synth")?, ov)?;
    let setup = loaded.synthesis()?;
    let runs = batch.unwrap_or(1);
    if runs == 0 {
        return Err(GwsError::invalid("--batch must be at least 1"));
    }
    let dir = loaded.out.clone().unwrap_or_else(|| PathBuf::from("synth_out"));
    let base = setup.config.seed;
    let results: Vec<(u64, Result<SynthesisResult>)> = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base.wrapping_add(i);
            let cfg = crate::synthesis::SynthesisConfig {
                seed,
                ..setup.config
            };
            let r = optimize(&setup.rig, &setup.mesh, setup.tws, setup.friction, setup.root, &cfg);
            (seed, r)
        })
        .collect();
    let mut summary = SynthSummary {
        meta: Meta::new("synth", &loaded.hash, base),
        task: setup.name.clone(),
        successes: 0,
        success_rate: 0.0,
        runs: Vec::with_capacity(runs),
    };
    for (seed, r) in results {
        let result = r?;
        let stem = format!("{}_seed{seed}", setup.name);
        let meta = Meta::new("synth", &loaded.hash, seed);
        let mut ply = contacts_ply(&result);
        if let Some(pos) = ply.find("element vertex") {
            ply.insert_str(pos, &format!("comment {}\n", meta.comment()));
        }
        let file = SynthFile {
            meta,
            task: setup.name.clone(),
            mesh: setup.mesh_name.clone(),
            result,
        };
        write_atomic(&dir.join(format!("{stem}.json")), &json(&file))?;
        write_atomic(&dir.join(format!("{stem}.ply")), ply.as_bytes())?;
        let v = &file.result.verdict;
        summary.successes += v.success as usize;
        summary.runs.push(SynthRun {
            seed,
            success: v.success,
            eps_t: file.result.eps_t,
            energy: file.result.energy.total,
            early_stop: file.result.early_stop,
            file: format!("{stem}.json"),
        });
    }
    summary.success_rate = summary.successes as f64 / runs as f64;
    write_atomic(&dir.join("summary.json"), &json(&summary))?;
    Ok(summary)
}

pub struct BenchArgs {
    pub suite: Suite,
    pub meshes: Option<Vec<String>>,
    pub per: Option<usize>,
    pub timing: bool,
    pub rle_points: Option<usize>,
    pub sp_probes: Option<usize>,
}

/// Suite configuration from an optional JSON file plus flags.
pub fn bench_config(config: &Option<PathBuf>, ov: &Overrides, args: &BenchArgs) -> Result<SuiteConfig> {
    let mut cfg = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| GwsError::io(p, e))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).map_err(|e| {
                GwsError::invalid(format!("config field `{}`: {}", e.path(), e.inner()))
            })?
        }
        None => SuiteConfig::default(),
    };
    if let Some(names) = &args.meshes {
        cfg.meshes = names
            .iter()
            .map(|n| match n.as_str() {
                "sphere" => MeshSource::Sphere,
                "box" => MeshSource::Box,
                "cylinder" => MeshSource::Cylinder,
                "torus" => MeshSource::Torus,
                path => MeshSource::Obj(PathBuf::from(path)),
            })
            .collect();
    }
    if let Some(n) = args.per {
        cfg.per_mesh_mu = n;
    }
    if let Some(k) = ov.k {
        cfg.params.k = k;
    }
    if let Some(d) = ov.delta_deg {
        cfg.params.delta_deg = d;
    }
    if let Some(s) = ov.seed {
        cfg.params.seed = s;
    }
    if let Some(n) = args.rle_points {
        cfg.params.rle_points = n;
    }
    if let Some(n) = args.sp_probes {
        cfg.params.sp_probes = n;
    }
    cfg.params.timing |= args.timing;
    if cfg.meshes.is_empty() || cfg.mus.is_empty() || cfg.per_mesh_mu == 0 {
        return Err(GwsError::invalid("bench needs at least one mesh, one mu and --per >= 1"));
    }
    Ok(cfg)
}

pub fn bench(config: &Option<PathBuf>, ov: &Overrides, args: &BenchArgs) -> Result<()> {
    let cfg = bench_config(config, ov, args)?;
    let hash = hash_json(&(args.suite, &cfg));
    let report = run_suite(args.suite, &cfg)?;
    for f in &report.failures {
        eprintln!("warning: {f}");
    }
    if report.rejected > 0 {
        eprintln!("redrew {} contact sets that were not force closure", report.rejected);
    }
    let meta = Meta::new("bench", &hash, cfg.params.seed);
    let mut buf = Vec::new();
    write_csv(&mut buf, &meta.comment(), &report.rows)?;
    emit(ov.out.as_deref(), &buf)
}

pub fn gradcheck(config: &Option<PathBuf>, ov: &Overrides, trials: Option<usize>) -> Result<GradCheckFile> {
    let mut cfg: GradCheckConfig = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| GwsError::io(p, e))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).map_err(|e| {
                GwsError::invalid(format!("config field `{}`: {}", e.path(), e.inner()))
            })?
        }
        None => GradCheckConfig::default(),
    };
    if let Some(k) = ov.k {
        cfg.k = k;
    }
    if let Some(d) = ov.delta_deg {
        cfg.delta_deg = d;
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    let report = crate::task::gradient_check(&cfg)?;
    let file = GradCheckFile {
        meta: Meta::new("gradcheck", &hash_json(&cfg), cfg.seed),
        config: cfg,
        report,
    };
    emit(ov.out.as_deref(), &json(&file))?;
    Ok(file)
}

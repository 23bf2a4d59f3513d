//! Benchmark runner producing per-case metric rows for randomly sampled
//! contact sets on procedural (or user-supplied) meshes.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::{primitives, TriMesh};
use crate::metrics::{
    epsilon_given_closure, rle_points, sparsity_unfiltered, MetricReport, FC_TRIALS,
};
use crate::oracle::{
    boundary_ray_gens, force_closure_margin, force_closure_simplex_check, generators,
    hull_vertex_bound, polytope_samples,
};
use crate::wrench::{
    estimate_with_directions, normalize_contacts, sample_unit_directions, Contact, EstimatorConfig,
    FrictionModel,
};
use crate::{GwsError, Result, Vec3, Vec6};

/// Candidate hull vertex count above which the hull baseline is not run.
pub const HULL_LIMIT: u128 = 1_000_000;

/// Attempts at drawing a force-closure contact set before giving up.
const MAX_RESAMPLES: usize = 200;

/// Discretization used for the force-closure test when drawing cases.
const FC_DRAW_D: usize = 16;

/// Object a benchmark case samples contacts from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshSource {
    Sphere,
    Box,
    Cylinder,
    Torus,
    Obj(PathBuf),
}

impl MeshSource {
    pub fn name(&self) -> String {
        match self {
            MeshSource::Sphere => "sphere".into(),
            MeshSource::Box => "box".into(),
            MeshSource::Cylinder => "cylinder".into(),
            MeshSource::Torus => "torus".into(),
            MeshSource::Obj(p) => p.display().to_string(),
        }
    }

    /// Desk-scale procedural shapes (metres) or the OBJ file.
    pub fn load(&self) -> Result<TriMesh> {
        match self {
            MeshSource::Sphere => TriMesh::from_raw(primitives::icosphere(0.05, 3)),
            MeshSource::Box => TriMesh::from_raw(primitives::cuboid(Vec3::new(0.04, 0.03, 0.02))),
            MeshSource::Cylinder => TriMesh::from_raw(primitives::cylinder(0.03, 0.06, 48)),
            MeshSource::Torus => TriMesh::from_raw(primitives::torus(0.05, 0.015, 36, 18)),
            MeshSource::Obj(p) => TriMesh::load_obj(p),
        }
    }

    pub fn procedural() -> Vec<MeshSource> {
        vec![
            MeshSource::Sphere,
            MeshSource::Box,
            MeshSource::Cylinder,
            MeshSource::Torus,
        ]
    }
}

/// A contact set drawn on a mesh.
#[derive(Clone, Debug)]
pub struct CaseSpec {
    pub case_id: String,
    pub mesh: String,
    pub mu: f64,
    pub contacts: Vec<Contact>,
    pub seed: u64,
}

/// Cases drawn for a suite plus bookkeeping.
#[derive(Clone, Debug, Default)]
pub struct CaseSet {
    pub cases: Vec<CaseSpec>,
    /// Contact sets redrawn because they were not force closure.
    pub rejected: usize,
    /// Meshes that failed to load, with the reason.
    pub failures: Vec<String>,
}

/// Deterministic 64-bit mixing of a seed with an index.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Whether the contacts are force closure under a `d`-edge inscribed cone
/// (a sufficient condition for the exact cones).
pub fn is_force_closure(contacts: &[Contact], d: usize) -> Result<bool> {
    let cpn = normalize_contacts(contacts)?;
    Ok(force_closure_margin(&generators(&cpn.contacts, d)?)? > 0.0)
}

fn draw_contacts(
    mesh: &TriMesh,
    m: usize,
    friction: FrictionModel,
    seed: u64,
) -> Result<Vec<Contact>> {
    mesh.sample_surface(m, seed)
        .into_iter()
        .map(|s| Contact::new(s.position, s.inward_normal, friction))
        .collect()
}

/// Draws `per_mesh_mu` contact sets of size `m` for every mesh and friction
/// coefficient. With `require_fc`, sets that are not force closure are
/// redrawn.
pub fn generate_cases(
    meshes: &[MeshSource],
    m: usize,
    mus: &[f64],
    per_mesh_mu: usize,
    require_fc: bool,
    seed: u64,
) -> Result<CaseSet> {
    let mut set = CaseSet::default();
    let mut loaded = Vec::new();
    for src in meshes {
        match src.load() {
            Ok(mesh) => loaded.push((src.name(), mesh)),
            Err(e) => set.failures.push(format!("{}: {e}", src.name())),
        }
    }
    let mut jobs = Vec::new();
    for (mi, (name, mesh)) in loaded.iter().enumerate() {
        for (ui, &mu) in mus.iter().enumerate() {
            for r in 0..per_mesh_mu {
                jobs.push((mi, ui, r, name, mesh, mu));
            }
        }
    }
    let drawn: Vec<Result<(CaseSpec, usize)>> = jobs
        .par_iter()
        .map(|&(mi, ui, r, name, mesh, mu)| {
            let friction = FrictionModel::pcf(mu)?;
            let base = mix_seed(seed, ((mi * 1000 + ui) * 1000 + r) as u64);
            for attempt in 0..MAX_RESAMPLES {
                let s = mix_seed(base, attempt as u64);
                let contacts = draw_contacts(mesh, m, friction, s)?;
                if !require_fc || is_force_closure(&contacts, FC_DRAW_D)? {
                    let case = CaseSpec {
                        case_id: format!("{name}-m{m}-mu{mu}-{r}"),
                        mesh: name.clone(),
                        mu,
                        contacts,
                        seed: s,
                    };
                    return Ok((case, attempt));
                }
            }
            Err(GwsError::NotForceClosure(format!(
                "no force-closure set of {m} contacts on {name} after {MAX_RESAMPLES} draws"
            )))
        })
        .collect();
    for d in drawn {
        match d {
            Ok((case, rejected)) => {
                set.rejected += rejected;
                set.cases.push(case);
            }
            Err(e) => set.failures.push(e.to_string()),
        }
    }
    Ok(set)
}

/// How the boundary points of a case are produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Method {
    /// Support-mapping estimator.
    Ours,
    /// Support points of the `d`-edge discretized polytope.
    Baseline { d: usize },
}

/// Shared settings of a benchmark run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchParams {
    #[serde(rename = "K")]
    pub k: usize,
    pub delta_deg: f64,
    pub d_oracle: usize,
    /// Points per case evaluated against the LP oracle.
    pub rle_points: usize,
    pub sp_probes: usize,
    pub fc_trials: usize,
    /// Record estimator wall time (median of `repeats`).
    pub timing: bool,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            k: 100_000,
            delta_deg: 15.0,
            d_oracle: 64,
            rle_points: 200,
            sp_probes: 10_000,
            fc_trials: FC_TRIALS,
            timing: false,
            repeats: 5,
            seed: 0,
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Boundary points of a case by `method`, with the normalized contacts
/// they were computed from.
fn boundary_points(
    case: &CaseSpec,
    method: Method,
    p: &BenchParams,
    dirs: &[Vec6],
) -> Result<(Vec<Vec6>, Vec<Contact>)> {
    match method {
        Method::Ours => {
            let cfg = EstimatorConfig {
                k: dirs.len(),
                delta: p.delta_deg.to_radians(),
                cpn: true,
                seed: case.seed,
            };
            let set = estimate_with_directions(&case.contacts, dirs, &cfg)?;
            Ok((set.wrenches(), set.contacts))
        }
        Method::Baseline { d } => {
            let cpn = normalize_contacts(&case.contacts)?;
            let gens = generators(&cpn.contacts, d)?;
            let pts = polytope_samples(dirs, &gens)
                .into_iter()
                .map(|s| s.w)
                .collect();
            Ok((pts, cpn.contacts))
        }
    }
}

/// Points where rays along an even-stride subset of `dirs` leave the
/// discretized polytope. Support vertices of the polytope lie almost on the
/// exact boundary; the polytope's approximation error shows on its facets.
pub fn facet_points(dirs: &[Vec6], gens: &[Vec<Vec6>], max_points: usize) -> Result<Vec<Vec6>> {
    let stride = dirs.len().div_ceil(max_points.max(1)).max(1);
    let picked: Vec<&Vec6> = dirs.iter().step_by(stride).collect();
    picked
        .par_iter()
        .map(|u| boundary_ray_gens(u, gens).map(|r| *u * r.q))
        .collect()
}

/// Wall time in milliseconds of one boundary computation, directions
/// included, as the median of `repeats` runs.
pub fn time_case(case: &CaseSpec, method: Method, p: &BenchParams) -> Result<f64> {
    let mut times = Vec::with_capacity(p.repeats.max(1));
    for _ in 0..p.repeats.max(1) {
        let start = Instant::now();
        let dirs = sample_unit_directions(p.k, case.seed);
        let pts = boundary_points(case, method, p, &dirs)?;
        std::hint::black_box(&pts);
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(median(times))
}

/// Runs one case: boundary points, relative length error against the LP
/// oracle, sparsity, ε and optionally timing.
pub fn bench_case(case: &CaseSpec, method: Method, p: &BenchParams) -> Result<MetricReport> {
    let m = case.contacts.len();
    let (model, delta_deg) = match method {
        Method::Ours => ("ours".to_string(), p.delta_deg),
        Method::Baseline { d } => (format!("baseline-d{d}"), 0.0),
    };
    let mut row = MetricReport {
        case_id: case.case_id.clone(),
        mesh: case.mesh.clone(),
        m,
        mu: case.mu.to_string(),
        model,
        delta_deg,
        k: p.k,
        d_oracle: p.d_oracle,
        rle_e2: f64::NAN,
        sp_rad: None,
        eps: 0.0,
        eps_t: None,
        time_ms: None,
        fc: false,
    };
    if let Method::Baseline { d } = method {
        if hull_vertex_bound(m, d) > HULL_LIMIT {
            row.model = format!("baseline-d{d}-skipped");
            return Ok(row);
        }
    }
    let dirs = sample_unit_directions(p.k, case.seed);
    let (points, normalized) = boundary_points(case, method, p, &dirs)?;
    let gens = generators(&normalized, p.d_oracle)?;
    row.rle_e2 = match method {
        Method::Ours => rle_points(&points, &gens, p.rle_points)?.rle * 100.0,
        Method::Baseline { d } => {
            let facets = facet_points(&dirs, &generators(&normalized, d)?, p.rle_points)?;
            rle_points(&facets, &gens, p.rle_points)?.rle * 100.0
        }
    };
    row.fc = points.len() >= 6 && force_closure_simplex_check(&points, p.fc_trials, case.seed)?;
    if row.fc {
        row.sp_rad = Some(sparsity_unfiltered(
            &points,
            p.sp_probes,
            mix_seed(p.seed, 7),
        )?);
    }
    row.eps = epsilon_given_closure(&points, row.fc);
    if p.timing {
        row.time_ms = Some(time_case(case, method, p)?);
    }
    Ok(row)
}

/// Runs every case with every method. Cases run in parallel unless timing
/// is requested.
pub fn run_cases(
    cases: &[CaseSpec],
    methods: &[Method],
    p: &BenchParams,
) -> Result<Vec<MetricReport>> {
    let jobs: Vec<(&CaseSpec, Method)> = cases
        .iter()
        .flat_map(|c| methods.iter().map(move |&m| (c, m)))
        .collect();
    if p.timing {
        jobs.iter().map(|(c, m)| bench_case(c, *m, p)).collect()
    } else {
        jobs.par_iter().map(|(c, m)| bench_case(c, *m, p)).collect()
    }
}

/// Mean row over `rows` sharing model, m, δ and K; `case_id` becomes
/// `mean`, `mu` lists the distinct values.
pub fn mean_row(rows: &[MetricReport]) -> Option<MetricReport> {
    let first = rows.first()?;
    let n = rows.len() as f64;
    let mut mus: Vec<String> = rows.iter().map(|r| r.mu.clone()).collect();
    mus.sort();
    mus.dedup();
    let sp: Vec<f64> = rows.iter().filter_map(|r| r.sp_rad).collect();
    let times: Vec<f64> = rows.iter().filter_map(|r| r.time_ms).collect();
    let mut meshes: Vec<String> = rows.iter().map(|r| r.mesh.clone()).collect();
    meshes.sort();
    meshes.dedup();
    Some(MetricReport {
        case_id: "mean".into(),
        mesh: meshes.join("|"),
        mu: mus.join("|"),
        rle_e2: rows.iter().map(|r| r.rle_e2).sum::<f64>() / n,
        sp_rad: (!sp.is_empty()).then(|| sp.iter().sum::<f64>() / sp.len() as f64),
        eps: rows.iter().map(|r| r.eps).sum::<f64>() / n,
        eps_t: None,
        time_ms: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
        fc: rows.iter().all(|r| r.fc),
        ..first.clone()
    })
}

/// Groups rows by (model, m, δ, K) in first-appearance order and appends
/// one mean row per group.
pub fn with_means(rows: Vec<MetricReport>) -> Vec<MetricReport> {
    let mut keys: Vec<(String, usize, u64, usize)> = Vec::new();
    for r in &rows {
        let key = (r.model.clone(), r.m, r.delta_deg.to_bits(), r.k);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut out = rows.clone();
    for key in keys {
        let group: Vec<MetricReport> = rows
            .iter()
            .filter(|r| {
                (r.model.clone(), r.m, r.delta_deg.to_bits(), r.k) == key && !r.rle_e2.is_nan()
            })
            .cloned()
            .collect();
        if let Some(mean) = mean_row(&group) {
            out.push(mean);
        }
    }
    out
}

/// Named suites shaped after the two benchmark tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Suite {
    /// Estimator vs discretized polytope at d ∈ {4, 6, 8}, m ∈ {5, 7}.
    TableI,
    /// δ sweep at K = 10⁵ and K sweep at δ = 15°, m = 5.
    TableII,
}

impl std::str::FromStr for Suite {
    type Err = GwsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tableI" => Ok(Suite::TableI),
            "tableII" => Ok(Suite::TableII),
            other => Err(GwsError::invalid(format!(
                "unknown suite {other:?} (tableI, tableII)"
            ))),
        }
    }
}

/// Configuration of a suite run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub meshes: Vec<MeshSource>,
    pub mus: Vec<f64>,
    pub per_mesh_mu: usize,
    pub params: BenchParams,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            meshes: MeshSource::procedural(),
            mus: vec![0.2, 0.3, 0.5, 1.0],
            per_mesh_mu: 3,
            params: BenchParams::default(),
        }
    }
}

/// Result of a suite: per-case rows followed by mean rows.
#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub rows: Vec<MetricReport>,
    pub rejected: usize,
    pub failures: Vec<String>,
}

/// Runs a named suite. The table-I suite uses `params.k` for the
/// estimator and the baseline alike.
pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<SuiteReport> {
    let p = &cfg.params;
    let mut rows = Vec::new();
    let mut rejected = 0;
    let mut failures = Vec::new();
    let mut cases_for = |m: usize, salt: u64| -> Result<Vec<CaseSpec>> {
        let set = generate_cases(
            &cfg.meshes,
            m,
            &cfg.mus,
            cfg.per_mesh_mu,
            true,
            mix_seed(p.seed, salt),
        )?;
        rejected += set.rejected;
        failures.extend(set.failures);
        Ok(set.cases)
    };
    match suite {
        Suite::TableI => {
            for m in [5, 7] {
                let cases = cases_for(m, m as u64)?;
                let methods = [
                    Method::Baseline { d: 4 },
                    Method::Baseline { d: 6 },
                    Method::Baseline { d: 8 },
                    Method::Ours,
                ];
                rows.extend(run_cases(&cases, &methods, p)?);
            }
        }
        Suite::TableII => {
            let cases = cases_for(5, 5)?;
            for delta in [0.0, 15.0, 30.0, 45.0] {
                let q = BenchParams {
                    k: 100_000,
                    delta_deg: delta,
                    ..p.clone()
                };
                rows.extend(run_cases(&cases, &[Method::Ours], &q)?);
            }
            for k in [1_000, 10_000, 100_000, 1_000_000] {
                let q = BenchParams {
                    k,
                    delta_deg: 15.0,
                    ..p.clone()
                };
                rows.extend(run_cases(&cases, &[Method::Ours], &q)?);
            }
        }
    }
    Ok(SuiteReport {
        rows: with_means(rows),
        rejected,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchParams {
        BenchParams {
            k: 2000,
            rle_points: 30,
            sp_probes: 200,
            fc_trials: 50,
            ..BenchParams::default()
        }
    }

    #[test]
    fn cases_are_deterministic_and_force_closure() {
        let a = generate_cases(
            &[MeshSource::Sphere, MeshSource::Box],
            5,
            &[0.5],
            2,
            true,
            3,
        )
        .unwrap();
        let b = generate_cases(
            &[MeshSource::Sphere, MeshSource::Box],
            5,
            &[0.5],
            2,
            true,
            3,
        )
        .unwrap();
        assert_eq!(a.cases.len(), 4);
        for (x, y) in a.cases.iter().zip(&b.cases) {
            assert_eq!(x.case_id, y.case_id);
            assert_eq!(x.contacts, y.contacts);
            assert!(is_force_closure(&x.contacts, 16).unwrap());
        }
        assert_eq!(a.rejected, b.rejected);
    }

    #[test]
    fn missing_obj_is_reported_per_mesh() {
        let set = generate_cases(
            &[
                MeshSource::Obj("/nonexistent/x.obj".into()),
                MeshSource::Sphere,
            ],
            3,
            &[0.5],
            1,
            false,
            0,
        )
        .unwrap();
        assert_eq!(set.cases.len(), 1);
        assert_eq!(set.failures.len(), 1);
        assert!(set.failures[0].contains("x.obj"));
    }

    #[test]
    fn identical_seeds_identical_rows() {
        let cases = generate_cases(&[MeshSource::Cylinder], 5, &[0.3], 1, true, 1)
            .unwrap()
            .cases;
        let a = run_cases(&cases, &[Method::Ours, Method::Baseline { d: 4 }], &small()).unwrap();
        let b = run_cases(&cases, &[Method::Ours, Method::Baseline { d: 4 }], &small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].model, "ours");
        assert_eq!(a[1].model, "baseline-d4");
        assert!(a[1].rle_e2 > a[0].rle_e2);
    }

    #[test]
    fn hull_baseline_skipped_at_seven_contacts_d8() {
        let cases = generate_cases(&[MeshSource::Sphere], 7, &[0.5], 1, false, 2)
            .unwrap()
            .cases;
        let row = bench_case(&cases[0], Method::Baseline { d: 8 }, &small()).unwrap();
        assert_eq!(row.model, "baseline-d8-skipped");
        assert!(row.rle_e2.is_nan());
        let row = bench_case(&cases[0], Method::Baseline { d: 6 }, &small()).unwrap();
        assert!(row.rle_e2.is_finite());
    }

    #[test]
    fn mean_rows_per_group() {
        let cases = generate_cases(&[MeshSource::Sphere], 5, &[0.5, 1.0], 1, true, 4)
            .unwrap()
            .cases;
        let rows = with_means(run_cases(&cases, &[Method::Ours], &small()).unwrap());
        assert_eq!(rows.len(), 3);
        let mean = &rows[2];
        assert_eq!(mean.case_id, "mean");
        assert_eq!(mean.mu, "0.5|1");
        assert!((mean.rle_e2 - 0.5 * (rows[0].rle_e2 + rows[1].rle_e2)).abs() < 1e-12);
    }

    #[test]
    fn timing_is_opt_in() {
        let cases = generate_cases(&[MeshSource::Box], 5, &[0.5], 1, false, 5)
            .unwrap()
            .cases;
        let row = bench_case(&cases[0], Method::Ours, &small()).unwrap();
        assert_eq!(row.time_ms, None);
        let timed = BenchParams {
            timing: true,
            repeats: 3,
            ..small()
        };
        assert!(
            bench_case(&cases[0], Method::Ours, &timed)
                .unwrap()
                .time_ms
                .unwrap()
                > 0.0
        );
    }

    #[test]
    fn mix_seed_spreads() {
        assert_ne!(mix_seed(0, 0), mix_seed(0, 1));
        assert_ne!(mix_seed(0, 1), mix_seed(1, 0));
        assert_eq!(mix_seed(5, 9), mix_seed(5, 9));
    }
}

//! Gradient descent with backtracking line search and post-hoc validation
//! of the final contacts against the discretized-cone oracle.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::energy::{EnergyBreakdown, EnergyModel, Evaluation, Weights};
use super::rig::{Rig, RigState};
use super::tasks::SynthesisTask;
use crate::bench::mix_seed;
use crate::mesh::TriMesh;
use crate::oracle::{boundary_ray_gens, force_closure_margin, generators, D_ORACLE};
use crate::task::{TaskEnergyKind, TaskWrenchSpace};
use crate::wrench::{normalize_contacts, Contact, EstimatorConfig, FrictionModel};
use crate::{GwsError, Result, Vec3, Vec6};

/// A designated sphere touches the object when its surface is this close.
pub const CONTACT_GAP: f64 = 0.005;
/// Largest accepted penetration depth of any rig sphere.
pub const MAX_PENETRATION: f64 = 0.010;
/// Probe directions drawn inside a task sector.
pub const SECTOR_PROBES: usize = 500;
/// Finite-difference steps of the fallback gradients tried after a failed
/// line search.
pub const FALLBACK_STEPS: [f64; 2] = [1e-3, 1e-2];
/// Consecutive iterations without an accepted step before stopping.
pub const STALL_LIMIT: usize = 10;

/// Estimator settings used inside the synthesis loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthEstimator {
    #[serde(rename = "K")]
    pub k: usize,
    pub delta_deg: f64,
    pub cpn: bool,
}

impl Default for SynthEstimator {
    fn default() -> Self {
        SynthEstimator {
            k: 100,
            delta_deg: 15.0,
            cpn: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    pub iterations: usize,
    pub initial_step: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    pub weights: Weights,
    pub estimator: SynthEstimator,
    /// Finite-difference step in scaled tangent coordinates; translations
    /// are scaled by the mesh bounding radius.
    pub fd_step: f64,
    pub seed: u64,
    /// Initial root perturbation: translation σ = `perturbation`·R,
    /// rotation σ = `perturbation` rad per axis.
    pub perturbation: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            iterations: 500,
            initial_step: 1e-2,
            shrink: 0.5,
            max_backtracks: 8,
            weights: Weights::default(),
            estimator: SynthEstimator::default(),
            fd_step: 1e-4,
            seed: 0,
            perturbation: 0.1,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(GwsError::invalid("iterations must be at least 1"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(GwsError::invalid("initial_step must be positive"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(GwsError::invalid("shrink must lie in (0, 1)"));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(GwsError::invalid("fd_step must be positive"));
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return Err(GwsError::invalid("perturbation must be >= 0"));
        }
        self.weights.validate()?;
        self.estimator_config().validate()
    }

    /// Estimator configuration with a direction seed derived from `seed`.
    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            k: self.estimator.k,
            delta: self.estimator.delta_deg.to_radians(),
            cpn: self.estimator.cpn,
            seed: mix_seed(self.seed, 1),
        }
    }
}

/// Final contact of one designated sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactReport {
    pub x: Vec3,
    pub p: Vec3,
    pub n: Vec3,
    /// Signed gap between the sphere surface and the mesh.
    pub gap: f64,
    pub in_contact: bool,
}

/// Oracle validation of a final configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub contacts_used: usize,
    /// Smallest oracle ray scale over the sector probes: how far the
    /// discretized grasp wrench space extends along the worst task direction.
    pub min_ray: f64,
    /// Every sector probe ray leaves the origin inside the grasp wrench
    /// space (force closure for γ = π).
    pub covered: bool,
    pub eps_t: f64,
    pub max_penetration: f64,
    pub penetration_ok: bool,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub q: RigState,
    pub energy: EnergyBreakdown,
    /// Total energy after every iteration, starting with the initial state.
    pub trace: Vec<f64>,
    pub contacts: Vec<ContactReport>,
    pub eps_t: f64,
    pub verdict: Verdict,
    pub self_penetration: f64,
    pub unsigned_distance: bool,
    pub joints_clamped: bool,
    pub early_stop: bool,
    pub iterations: usize,
    pub seed: u64,
}

/// Nominal root pose with a seeded Gaussian perturbation and zero joints.
pub fn initial_state(
    rig: &Rig,
    translation: Vec3,
    rotation: UnitQuaternion<f64>,
    perturbation: f64,
    radius: f64,
    seed: u64,
) -> RigState {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0));
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let dt = Vec3::new(gauss(), gauss(), gauss()) * perturbation * radius;
    let w = Vec3::new(gauss(), gauss(), gauss()) * perturbation;
    RigState::new(
        translation + dt,
        UnitQuaternion::from_scaled_axis(w) * rotation,
        rig.rest_joints(),
    )
}

/// Unit directions uniform in the spherical cap of angle `gamma` around
/// `axis`, plus the axis itself.
pub fn sector_probes(tws: &TaskWrenchSpace, n: usize, seed: u64) -> Vec<Vec6> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = tws.w_t;
    let peak = tws.gamma.min(PI / 2.0).sin().powi(4);
    let mut out = vec![axis];
    while out.len() <= n {
        // polar angle density on S⁵ is proportional to sin⁴
        let a = rng.gen::<f64>() * tws.gamma;
        if rng.gen::<f64>() * peak > a.sin().powi(4) {
            continue;
        }
        let g = Vec6::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let t = g - axis * axis.dot(&g);
        let tn = t.norm();
        if tn < 1e-12 {
            continue;
        }
        out.push(axis * a.cos() + t / tn * a.sin());
    }
    out
}

/// Checks the designated contacts that touch the object against the task:
/// the discretized grasp wrench space must extend a positive distance along
/// every sector probe (for γ = π the force-closure margin must be positive
/// as well) and no sphere may penetrate deeper than [`MAX_PENETRATION`].
pub fn validate(
    contacts: &[Contact],
    tws: &TaskWrenchSpace,
    max_penetration: f64,
    seed: u64,
) -> Result<Verdict> {
    let penetration_ok = max_penetration <= MAX_PENETRATION;
    let mut v = Verdict {
        contacts_used: contacts.len(),
        min_ray: 0.0,
        covered: false,
        eps_t: 0.0,
        max_penetration,
        penetration_ok,
        success: false,
    };
    if contacts.is_empty() {
        return Ok(v);
    }
    let cpn = normalize_contacts(contacts)?;
    let gens = generators(&cpn.contacts, D_ORACLE)?;
    let probes = if tws.is_full_sphere() {
        crate::wrench::sample_unit_directions(SECTOR_PROBES, seed)
    } else {
        sector_probes(tws, SECTOR_PROBES, seed)
    };
    if tws.is_full_sphere() && force_closure_margin(&gens)? <= 0.0 {
        v.success = false;
        return Ok(v);
    }
    let mut min_ray = f64::INFINITY;
    for u in &probes {
        min_ray = min_ray.min(boundary_ray_gens(u, &gens)?.q);
        if min_ray <= 0.0 {
            break;
        }
    }
    v.min_ray = min_ray.max(0.0);
    v.covered = v.min_ray > 0.0;
    v.eps_t = v.min_ray;
    v.success = v.covered && penetration_ok;
    Ok(v)
}

fn report(model: &EnergyModel, eval: &Evaluation, q: RigState, trace: Vec<f64>, early_stop: bool, iterations: usize, seed: u64) -> Result<SynthesisResult> {
    let rig = model.rig;
    let contacts: Vec<ContactReport> = eval
        .contacts
        .iter()
        .zip(&rig.spec.contacts)
        .map(|(c, &s)| {
            let gap = model.mesh.signed_distance(&c.x) - rig.radius(s);
            ContactReport {
                x: c.x,
                p: c.surface.position,
                n: c.contact.n,
                gap,
                in_contact: gap <= CONTACT_GAP,
            }
        })
        .collect();
    let touching: Vec<Contact> = eval
        .contacts
        .iter()
        .zip(&contacts)
        .filter(|(_, r)| r.in_contact)
        .map(|(c, _)| c.contact)
        .collect();
    let verdict = validate(&touching, &model.tws, eval.penetration.max_depth, mix_seed(seed, 2))?;
    Ok(SynthesisResult {
        q,
        energy: eval.breakdown,
        trace,
        contacts,
        eps_t: verdict.eps_t,
        verdict,
        self_penetration: eval.penetration.self_contact,
        unsigned_distance: eval.penetration.unsigned,
        joints_clamped: eval.pose.clamped,
        early_stop,
        iterations,
        seed,
    })
}

/// Runs the descent from `init`.
///
/// Each iteration tries `q − s·∇E` in scaled tangent coordinates, halving
/// `s` until the energy decreases or the backtrack budget runs out. The
/// step carried to the next iteration doubles after a first-try success.
pub fn optimize_from(model: &EnergyModel, init: RigState, config: &SynthesisConfig) -> Result<SynthesisResult> {
    config.validate()?;
    let mut q = init;
    let mut e = model.total(&q)?;
    if !e.is_finite() {
        return Err(GwsError::numerical("initial energy is not finite"));
    }
    let mut trace = vec![e];
    let mut step = config.initial_step;
    let mut stalled = 0;
    let mut early_stop = false;
    let mut iterations = 0;
    let search = |q: &RigState, e: f64, g: &[f64], s0: f64| -> Result<(Option<(RigState, f64)>, usize, f64)> {
        let mut s = s0;
        for b in 0..=config.max_backtracks {
            let y: Vec<f64> = g.iter().map(|x| -s * x).collect();
            let cand = model.step(q, &y);
            let ec = model.total(&cand)?;
            if ec < e {
                return Ok((Some((cand, ec)), b, s));
            }
            if b < config.max_backtracks {
                s *= config.shrink;
            }
        }
        Ok((None, config.max_backtracks, s))
    };
    let finite = |g: &[f64]| {
        if g.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(GwsError::numerical("non-finite energy gradient"))
        }
    };
    for _ in 0..config.iterations {
        iterations += 1;
        let g = model.gradient(&q)?;
        finite(&g)?;
        let mut attempt = search(&q, e, &g, step)?;
        for h in FALLBACK_STEPS {
            if attempt.0.is_some() {
                break;
            }
            // at a kink of the relaxed support bands or of the projection
            // the local slope does not descend; wider central differences
            // average over the kink
            let g = model.gradient_fd_with(&q, h)?;
            finite(&g)?;
            attempt = search(&q, e, &g, step.max(config.initial_step))?;
        }
        match attempt {
            (Some((cand, ec)), b, s) => {
                q = cand;
                e = ec;
                step = if b == 0 { s * 2.0 } else { s };
                stalled = 0;
            }
            (None, _, s) => {
                step = s;
                stalled += 1;
            }
        }
        trace.push(e);
        if stalled >= STALL_LIMIT {
            early_stop = true;
            break;
        }
    }
    let eval = model.evaluate(&q)?;
    report(model, &eval, q, trace, early_stop, iterations, config.seed)
}

/// Energy model for `task` under `config`.
pub fn model_for<'a>(rig: &'a Rig, mesh: &'a TriMesh, tws: TaskWrenchSpace, friction: FrictionModel, config: &SynthesisConfig) -> Result<EnergyModel<'a>> {
    let mut model = EnergyModel::new(rig, mesh, tws, friction, config.estimator_config(), config.weights)?;
    model.fd_step = config.fd_step;
    model.kind = TaskEnergyKind::Cosine;
    Ok(model)
}

/// Perturbed initialization followed by descent.
pub fn optimize(
    rig: &Rig,
    mesh: &TriMesh,
    tws: TaskWrenchSpace,
    friction: FrictionModel,
    root: (Vec3, UnitQuaternion<f64>),
    config: &SynthesisConfig,
) -> Result<SynthesisResult> {
    config.validate()?;
    let model = model_for(rig, mesh, tws, friction, config)?;
    let init = initial_state(rig, root.0, root.1, config.perturbation, model.radius(), config.seed);
    optimize_from(&model, init, config)
}

/// Runs a bundled task.
pub fn run_task(task: &SynthesisTask, config: &SynthesisConfig) -> Result<SynthesisResult> {
    let rig = Rig::new(task.rig.clone())?;
    optimize(&rig, &task.mesh, task.tws, task.friction, (task.root_translation, task.root_rotation), config)
}

/// Independent runs for seeds `seed, seed+1, …`, in parallel; results are
/// in seed order.
pub fn run_batch(task: &SynthesisTask, config: &SynthesisConfig, runs: usize) -> Vec<Result<SynthesisResult>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let c = SynthesisConfig {
                seed: config.seed.wrapping_add(i),
                ..*config
            };
            run_task(task, &c)
        })
        .collect()
}

/// ASCII PLY with the rig contact points and their projections; each
/// vertex carries the inward contact normal.
pub fn contacts_ply(result: &SynthesisResult) -> String {
    let mut s = String::new();
    let n = result.contacts.len() * 2;
    let _ = write!(
        s,
        "ply\nformat ascii 1.0\ncomment rig contact points followed by their surface projections\nelement vertex {n}\nproperty double x\nproperty double y\nproperty double z\nproperty double nx\nproperty double ny\nproperty double nz\nend_header\n"
    );
    for pts in [|c: &ContactReport| c.x, |c: &ContactReport| c.p] {
        for c in &result.contacts {
            let p = pts(c);
            let _ = writeln!(s, "{} {} {} {} {} {}", p.x, p.y, p.z, c.n.x, c.n.y, c.n.z);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::tasks::lift_sphere;

    fn quick() -> SynthesisConfig {
        SynthesisConfig {
            iterations: 40,
            ..SynthesisConfig::default()
        }
    }

    #[test]
    fn trace_is_monotone_and_deterministic() {
        let task = lift_sphere().unwrap();
        let a = run_task(&task, &quick()).unwrap();
        assert!(a.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(a.trace.last().unwrap() < &a.trace[0]);
        assert!((a.q.rotation.norm() - 1.0).abs() < 1e-9);
        let b = run_task(&task, &quick()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn rigid_motion_consistency() {
        let task = lift_sphere().unwrap();
        let rig = Rig::new(task.rig.clone()).unwrap();
        let cfg = SynthesisConfig { iterations: 15, ..quick() };
        let t = Vec3::new(0.3, -0.2, 0.1);
        let moved = task.mesh.translated(&t).unwrap();
        let a = optimize(&rig, &task.mesh, task.tws, task.friction, (task.root_translation, task.root_rotation), &cfg).unwrap();
        let b = optimize(&rig, &moved, task.tws, task.friction, (task.root_translation + t, task.root_rotation), &cfg).unwrap();
        assert_eq!(a.trace.len(), b.trace.len());
        for (x, y) in a.trace.iter().zip(&b.trace) {
            assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn sector_probes_stay_in_cap() {
        let tws = TaskWrenchSpace::new(Vec6::new(0.0, 0.0, 1.0, 0.0, 0.0, 1.0), 0.3).unwrap();
        let p = sector_probes(&tws, 500, 3);
        assert_eq!(p.len(), 501);
        assert!(p.iter().all(|u| (u.norm() - 1.0).abs() < 1e-12 && tws.angle_to_axis(u) <= 0.3 + 1e-12));
        // most of the cap's measure lies near its rim
        let outer = p.iter().filter(|u| tws.angle_to_axis(u) > 0.15).count();
        assert!(outer > 400, "{outer}");
    }

    #[test]
    fn validate_examples() {
        let f = FrictionModel::pcf(0.5).unwrap();
        let up = TaskWrenchSpace::new(Vec6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0), 15f64.to_radians()).unwrap();
        // three contacts under the equator can push up, three on top cannot
        let ring = |z: f64| -> Vec<Contact> {
            (0..3)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / 3.0;
                    let p = Vec3::new(a.cos(), a.sin(), z).normalize();
                    Contact::new(p, -p, f).unwrap()
                })
                .collect()
        };
        let below = validate(&ring(-0.5), &up, 0.0, 1).unwrap();
        assert!(below.success && below.eps_t > 0.0);
        let above = validate(&ring(1.5), &up, 0.0, 1).unwrap();
        assert!(!above.covered && above.eps_t == 0.0);
        let deep = validate(&ring(-0.5), &up, 0.02, 1).unwrap();
        assert!(deep.covered && !deep.success);
        assert!(!validate(&[], &up, 0.0, 1).unwrap().success);
        let fc = TaskWrenchSpace::force_closure();
        assert!(validate(&ring(0.0), &fc, 0.0, 1).unwrap().success);
        assert!(!validate(&ring(1.5), &fc, 0.0, 1).unwrap().covered);
    }

    #[test]
    fn ply_lists_both_point_sets() {
        let task = lift_sphere().unwrap();
        let r = run_task(&task, &SynthesisConfig { iterations: 2, ..quick() }).unwrap();
        let ply = contacts_ply(&r);
        assert!(ply.contains("element vertex 6"));
        assert_eq!(ply.lines().count(), 11 + 6);
    }
}

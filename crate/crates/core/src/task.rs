//! Task wrench space as a hyper-spherical sector and the cosine alignment
//! energy between it and the estimated grasp wrench boundary.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::wrench::{
    contact_support_jacobian, normalize_contacts, sample_unit_directions, BoundarySampleSet,
    Contact, EstimatorConfig,
};
use crate::{GwsError, Result, Vec3, Vec6};

/// GWS samples shorter than this are skipped by the energy.
pub const ZERO_SAMPLE: f64 = 1e-9;

/// Unit wrenches within angle `gamma` of the unit axis `w_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskWrenchSpace {
    pub w_t: Vec6,
    /// Half-angle in radians, in `(0, π]`; `π` is the whole sphere.
    pub gamma: f64,
}

impl TaskWrenchSpace {
    /// Normalizes `w_t`; rejects a zero axis or an angle outside `(0, π]`.
    pub fn new(w_t: Vec6, gamma: f64) -> Result<Self> {
        let norm = w_t.norm();
        if !(norm.is_finite() && norm > 1e-12) {
            return Err(GwsError::invalid(
                "task wrench axis must be a non-zero finite vector",
            ));
        }
        if !(gamma > 0.0 && gamma <= PI + 1e-12) {
            return Err(GwsError::invalid(format!(
                "task sector angle {gamma} must lie in (0, pi]"
            )));
        }
        Ok(TaskWrenchSpace {
            w_t: w_t / norm,
            gamma: gamma.min(PI),
        })
    }

    pub fn force_closure() -> Self {
        TaskWrenchSpace {
            w_t: Vec6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            gamma: PI,
        }
    }

    pub fn is_full_sphere(&self) -> bool {
        self.gamma >= PI
    }

    /// Angle between `v` and the sector axis.
    pub fn angle_to_axis(&self, v: &Vec6) -> f64 {
        let n = v.norm();
        if n == 0.0 {
            return PI;
        }
        (self.w_t.dot(v) / n).clamp(-1.0, 1.0).acos()
    }

    pub fn contains_direction(&self, v: &Vec6) -> bool {
        self.is_full_sphere() || self.angle_to_axis(v) <= self.gamma
    }
}

/// Unit vector perpendicular to `w`, chosen from the coordinate axis on
/// which `w` is smallest.
fn perpendicular(w: &Vec6) -> Vec6 {
    let idx = w.iamin();
    let mut axis = Vec6::zeros();
    axis[idx] = 1.0;
    (axis - w * w.dot(&axis)).normalize()
}

/// Maximiser of `uᵀt` over the sector: `u` itself inside the sector,
/// otherwise the sector edge in the plane of `w_t` and `u`.
pub fn tws_support(u: &Vec6, tws: &TaskWrenchSpace) -> Vec6 {
    let n = u.norm();
    let u = if n > 0.0 { u / n } else { tws.w_t };
    if tws.is_full_sphere() {
        return u;
    }
    let c = tws.w_t.dot(&u).clamp(-1.0, 1.0);
    if c.acos() <= tws.gamma {
        return u;
    }
    let perp = u - tws.w_t * c;
    let pn = perp.norm();
    let dir = if pn > 1e-12 {
        perp / pn
    } else {
        perpendicular(&tws.w_t)
    };
    tws.w_t * tws.gamma.cos() + dir * tws.gamma.sin()
}

/// Which task energy to evaluate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskEnergyKind {
    /// `−Σ cos ∠(s_Wt(u_k), s_Wg(u_k))`.
    #[default]
    Cosine,
    /// `Σ ‖s_Wt(u_k) − s_Wg(u_k)‖²`, kept for comparison runs.
    L2,
}

/// Breakdown of the cosine task energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskEnergyReport {
    pub value: f64,
    pub per_sample_cos: Vec<f64>,
    pub skipped: usize,
}

/// Cosine alignment energy of a boundary sample set against `tws`.
pub fn task_energy(samples: &BoundarySampleSet, tws: &TaskWrenchSpace) -> TaskEnergyReport {
    let per_sample_cos: Vec<f64> = samples
        .samples
        .iter()
        .map(|s| {
            let wn = s.w.norm();
            if wn < ZERO_SAMPLE {
                return f64::NAN;
            }
            (tws_support(&s.u, tws).dot(&s.w) / wn).clamp(-1.0, 1.0)
        })
        .collect();
    let skipped = per_sample_cos.iter().filter(|c| c.is_nan()).count();
    let per_sample_cos: Vec<f64> = per_sample_cos
        .into_iter()
        .map(|c| if c.is_nan() { 0.0 } else { c })
        .collect();
    let value = -per_sample_cos.iter().sum::<f64>();
    TaskEnergyReport {
        value,
        per_sample_cos,
        skipped,
    }
}

/// Squared-distance variant of the task energy.
pub fn task_energy_l2(samples: &BoundarySampleSet, tws: &TaskWrenchSpace) -> f64 {
    samples
        .samples
        .iter()
        .map(|s| (tws_support(&s.u, tws) - s.w).norm_squared())
        .sum()
}

/// Task energy of a sample set for the requested variant.
pub fn task_energy_value(
    samples: &BoundarySampleSet,
    tws: &TaskWrenchSpace,
    kind: TaskEnergyKind,
) -> f64 {
    match kind {
        TaskEnergyKind::Cosine => task_energy(samples, tws).value,
        TaskEnergyKind::L2 => task_energy_l2(samples, tws),
    }
}

/// Task energy and its gradient with respect to the raw contact inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskGradient {
    pub value: f64,
    pub skipped: usize,
    /// `∂E/∂p_i` w.r.t. positions before normalization.
    pub grad_p: Vec<Vec3>,
    /// `∂E/∂n_i` projected onto the tangent plane of the unit normal.
    pub grad_n: Vec<Vec3>,
}

/// Analytic gradient of the task energy, using directions drawn from
/// `config`. See [`task_energy_grad_with_directions`].
pub fn task_energy_grad(
    contacts: &[Contact],
    tws: &TaskWrenchSpace,
    config: &EstimatorConfig,
    kind: TaskEnergyKind,
) -> Result<TaskGradient> {
    let dirs = sample_unit_directions(config.k, config.seed);
    task_energy_grad_with_directions(contacts, &dirs, tws, config, kind)
}

/// Chain rule through the energy, the Minkowski-sum support, the relaxed
/// cone support and the grasp matrices, then back through contact
/// position normalization when it is enabled. Skipped samples contribute
/// nothing.
pub fn task_energy_grad_with_directions(
    contacts: &[Contact],
    dirs: &[Vec6],
    tws: &TaskWrenchSpace,
    config: &EstimatorConfig,
    kind: TaskEnergyKind,
) -> Result<TaskGradient> {
    if contacts.is_empty() {
        return Err(GwsError::invalid("task energy needs at least one contact"));
    }
    config.validate_for(contacts)?;
    let m = contacts.len();
    let cpn = if config.cpn {
        Some(normalize_contacts(contacts)?)
    } else {
        None
    };
    let used: &[Contact] = cpn.as_ref().map_or(contacts, |r| &r.contacts);
    let delta = config.delta;

    // Per-direction contributions are computed independently and reduced
    // in index order so the sum does not depend on scheduling.
    let terms: Vec<(f64, bool, Vec<Vec6>)> = dirs
        .par_iter()
        .with_min_len(16)
        .map(|u| {
            let jacs: Vec<_> = used
                .iter()
                .map(|c| contact_support_jacobian(u, c, delta))
                .collect();
            let w = jacs.iter().fold(Vec6::zeros(), |acc, j| acc + j.wrench);
            let t = tws_support(u, tws);
            let (value, skipped, d_w) = match kind {
                TaskEnergyKind::Cosine => {
                    let wn = w.norm();
                    if wn < ZERO_SAMPLE {
                        (0.0, true, Vec6::zeros())
                    } else {
                        let what = w / wn;
                        let cos = t.dot(&what).clamp(-1.0, 1.0);
                        (-cos, false, -(t - what * cos) / wn)
                    }
                }
                TaskEnergyKind::L2 => {
                    let diff = w - t;
                    (diff.norm_squared(), false, diff * 2.0)
                }
            };
            let grads = jacs.iter().map(|j| j.jacobian.transpose() * d_w).collect();
            (value, skipped, grads)
        })
        .collect();

    let mut value = 0.0;
    let mut skipped = 0;
    let mut g = vec![Vec6::zeros(); m];
    for (v, s, grads) in terms {
        value += v;
        skipped += usize::from(s);
        for (acc, gi) in g.iter_mut().zip(grads) {
            *acc += gi;
        }
    }

    let gp_norm: Vec<Vec3> = g
        .iter()
        .map(|x| x.fixed_rows::<3>(0).into_owned())
        .collect();
    let grad_p = match &cpn {
        Some(r) => cpn_pullback(contacts, r.center, r.scale, r.degenerate, &gp_norm, used),
        None => gp_norm,
    };
    let grad_n = g
        .iter()
        .zip(contacts)
        .map(|(x, c)| {
            let gn = x.fixed_rows::<3>(3).into_owned();
            gn - c.n * c.n.dot(&gn)
        })
        .collect();
    Ok(TaskGradient {
        value,
        skipped,
        grad_p,
        grad_n,
    })
}

/// Pulls gradients w.r.t. normalized positions `p' = (p − p̄)/d` back to
/// the raw positions.
fn cpn_pullback(
    contacts: &[Contact],
    center: Vec3,
    scale: f64,
    degenerate: bool,
    g_norm: &[Vec3],
    normalized: &[Contact],
) -> Vec<Vec3> {
    let m = contacts.len() as f64;
    let g_mean = g_norm.iter().fold(Vec3::zeros(), |a, g| a + g) / m;
    if degenerate {
        return g_norm.iter().map(|g| (g - g_mean) / scale).collect();
    }
    let units: Vec<Vec3> = contacts
        .iter()
        .map(|c| {
            let v = c.p - center;
            let n = v.norm();
            if n > 0.0 {
                v / n
            } else {
                Vec3::zeros()
            }
        })
        .collect();
    let u_mean = units.iter().fold(Vec3::zeros(), |a, u| a + u) / m;
    let radial: f64 = normalized.iter().zip(g_norm).map(|(c, g)| c.p.dot(g)).sum();
    g_norm
        .iter()
        .zip(&units)
        .map(|(g, u)| (g - g_mean) / scale - (u - u_mean) * (radial / (m * scale)))
        .collect()
}

/// Task energy of raw contacts through the grasp-matrix estimator route.
pub fn task_energy_of_contacts(
    contacts: &[Contact],
    dirs: &[Vec6],
    tws: &TaskWrenchSpace,
    config: &EstimatorConfig,
    kind: TaskEnergyKind,
) -> Result<f64> {
    let set = crate::wrench::estimate_with_directions(contacts, dirs, config)?;
    Ok(task_energy_value(&set, tws, kind))
}

/// Smallest distance of any contact/direction cone angle to the
/// non-smooth set `{0, δ, α−δ, α}`; samples in the origin branch are
/// ignored. Useful to pick generic configurations for derivative checks.
pub fn kink_margin(contacts: &[Contact], dirs: &[Vec6], config: &EstimatorConfig) -> f64 {
    let used = if config.cpn {
        match normalize_contacts(contacts) {
            Ok(r) => r.contacts,
            Err(_) => return 0.0,
        }
    } else {
        contacts.to_vec()
    };
    let d = config.delta;
    let mut margin = f64::INFINITY;
    for u in dirs {
        for c in &used {
            if let Some((theta, alpha)) = crate::wrench::support_angles(u, c) {
                if theta > alpha + 1e-3 {
                    continue;
                }
                for k in [0.0, d, alpha - d, alpha] {
                    margin = margin.min((theta - k).abs());
                }
            }
        }
    }
    margin
}

/// Rotates the force and torque halves of a wrench by the same rotation.
pub fn rotate_wrench(r: &nalgebra::Rotation3<f64>, w: &Vec6) -> Vec6 {
    let f = r * w.fixed_rows::<3>(0).into_owned();
    let t = r * w.fixed_rows::<3>(3).into_owned();
    Vec6::new(f.x, f.y, f.z, t.x, t.y, t.z)
}

/// Settings of the randomized derivative check of the task energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradCheckConfig {
    /// Generic configurations to compare.
    pub trials: usize,
    pub contacts: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub delta_deg: f64,
    pub cpn: bool,
    pub mu: f64,
    pub kind: TaskEnergyKind,
    /// Central-difference step on positions and normals.
    pub h: f64,
    /// Relative error a configuration must stay within.
    pub tolerance: f64,
    /// Configurations closer than this (radians) to a band edge are redrawn.
    pub kink_margin: f64,
    /// Fraction of configurations that must pass.
    pub required: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            trials: 1000,
            contacts: 4,
            k: 24,
            delta_deg: 15.0,
            cpn: true,
            mu: 0.5,
            kind: TaskEnergyKind::Cosine,
            h: 1e-5,
            tolerance: 1e-4,
            kink_margin: 1e-3,
            required: 0.95,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub trials: usize,
    /// Draws rejected for lying within `kink_margin` of a band edge.
    pub redrawn: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub max_rel_error: f64,
    pub median_rel_error: f64,
    pub pass: bool,
}

/// Central differences of the task energy with respect to every contact
/// position and normal coordinate.
pub fn fd_task_gradient(
    contacts: &[Contact],
    dirs: &[Vec6],
    tws: &TaskWrenchSpace,
    config: &EstimatorConfig,
    kind: TaskEnergyKind,
    h: f64,
) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let energy = |cs: &[Contact]| task_energy_of_contacts(cs, dirs, tws, config, kind);
    let mut gp = vec![Vec3::zeros(); contacts.len()];
    let mut gn = vec![Vec3::zeros(); contacts.len()];
    for i in 0..contacts.len() {
        let c = contacts[i];
        for a in 0..3 {
            let dv = Vec3::ith(a, h);
            let mut plus = contacts.to_vec();
            let mut minus = contacts.to_vec();
            plus[i] = c.at(c.p + dv);
            minus[i] = c.at(c.p - dv);
            gp[i][a] = (energy(&plus)? - energy(&minus)?) / (2.0 * h);
            plus[i] = Contact::new(c.p, c.n + dv, c.friction)?;
            minus[i] = Contact::new(c.p, c.n - dv, c.friction)?;
            gn[i][a] = (energy(&plus)? - energy(&minus)?) / (2.0 * h);
        }
    }
    Ok((gp, gn))
}

/// Compares the analytic task-energy gradient against central differences
/// on random contact sets and sectors away from the non-smooth bands.
pub fn gradient_check(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    use rand::{Rng, SeedableRng};
    if cfg.trials == 0 || cfg.contacts == 0 {
        return Err(GwsError::invalid("gradcheck needs at least one trial and one contact"));
    }
    let friction = crate::wrench::FrictionModel::pcf(cfg.mu)?;
    let est = EstimatorConfig {
        k: cfg.k,
        delta: cfg.delta_deg.to_radians(),
        cpn: cfg.cpn,
        seed: cfg.seed,
    };
    est.validate()?;
    let dirs = sample_unit_directions(est.k, est.seed);
    let draws: Vec<Result<(f64, usize)>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(crate::bench::mix_seed(cfg.seed, t));
            let mut redrawn = 0;
            loop {
                let mut v3 = || Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
                let cs = (0..cfg.contacts)
                    .map(|_| Contact::new(v3(), v3(), friction))
                    .collect::<Result<Vec<_>>>()?;
                let axis = Vec6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
                let tws = TaskWrenchSpace::new(axis, rng.gen_range(0.1..PI))?;
                if kink_margin(&cs, &dirs, &est) < cfg.kink_margin {
                    redrawn += 1;
                    continue;
                }
                let an = task_energy_grad_with_directions(&cs, &dirs, &tws, &est, cfg.kind)?;
                let (fp, fnn) = fd_task_gradient(&cs, &dirs, &tws, &est, cfg.kind, cfg.h)?;
                let num = an
                    .grad_p
                    .iter()
                    .zip(&fp)
                    .chain(an.grad_n.iter().zip(&fnn))
                    .map(|(a, b)| (a - b).norm_squared())
                    .sum::<f64>()
                    .sqrt();
                let den = fp.iter().chain(&fnn).map(|v| v.norm_squared()).sum::<f64>().sqrt();
                return Ok((num / den.max(1e-8), redrawn));
            }
        })
        .collect();
    let mut errors = Vec::with_capacity(cfg.trials);
    let mut redrawn = 0;
    for d in draws {
        let (e, r) = d?;
        errors.push(e);
        redrawn += r;
    }
    let passed = errors.iter().filter(|e| **e <= cfg.tolerance).count();
    let max_rel_error = errors.iter().copied().fold(0.0, f64::max);
    let mut sorted = errors.clone();
    sorted.sort_by(f64::total_cmp);
    let pass_rate = passed as f64 / cfg.trials as f64;
    Ok(GradCheckReport {
        trials: cfg.trials,
        redrawn,
        passed,
        pass_rate,
        max_rel_error,
        median_rel_error: sorted[sorted.len() / 2],
        pass: pass_rate >= cfg.required,
    })
}

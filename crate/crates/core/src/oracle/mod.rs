//! Discretized friction cones and the linear programs used as ground truth
//! for the boundary estimator.
//!
//! Each friction cone is replaced by the convex hull of `d` surface edges
//! (normal component 1) and the origin. The resulting polytope is inscribed
//! in the exact grasp wrench space, so scales reported here are lower bounds
//! within a factor `cos(π/d)` for point contacts.

mod simplex;

pub use simplex::{maximize, Lp, LpSolution, LpStatus, PIVOT_TOL};

use nalgebra::Matrix6;
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::wrench::{grasp_matrix, sample_unit_directions, Contact, FrictionModel, WrenchSample};
use crate::{GwsError, Result, Vec6};

/// Default discretization of the ground-truth cones.
pub const D_ORACLE: usize = 64;

/// Exchange steps per random start in the simplex check.
const MAX_EXCHANGES: usize = 64;

/// Scales below this count as "direction not covered".
pub const RAY_TOL: f64 = 1e-9;

/// Polyhedral inner approximation of one friction cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedCone {
    pub friction: FrictionModel,
    /// Generators in contact-frame force coordinates (length 3 or 4).
    pub edges: Vec<Vec<f64>>,
}

/// Surface edges of the friction cone with unit normal component.
///
/// Point contacts use `d` equally spaced rim points. Soft contacts place
/// `d` points on the boundary ellipsoid with a Fibonacci lattice.
pub fn cone_edges(friction: &FrictionModel, d: usize) -> Result<DiscretizedCone> {
    friction.validate()?;
    if d < 3 {
        return Err(GwsError::invalid(
            "cone discretization needs at least 3 edges",
        ));
    }
    let tau = std::f64::consts::TAU;
    let edges = match *friction {
        FrictionModel::Pcf { mu } => (0..d)
            .map(|j| {
                let a = tau * j as f64 / d as f64;
                vec![1.0, mu * a.cos(), mu * a.sin()]
            })
            .collect(),
        FrictionModel::Sfc { mu1, mu2 } => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..d)
                .map(|j| {
                    let z = 1.0 - (2 * j + 1) as f64 / d as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * j as f64;
                    vec![1.0, mu1 * r * phi.cos(), mu1 * r * phi.sin(), mu2 * z]
                })
                .collect()
        }
    };
    Ok(DiscretizedCone {
        friction: *friction,
        edges,
    })
}

/// Wrench-space generators `G_i e_ij`, grouped by contact.
pub fn generators(contacts: &[Contact], d: usize) -> Result<Vec<Vec<Vec6>>> {
    contacts
        .iter()
        .map(|c| {
            c.validate()?;
            let g = grasp_matrix(c);
            let cone = cone_edges(&c.friction, d)?;
            Ok(cone.edges.iter().map(|e| g.apply(e)).collect())
        })
        .collect()
}

/// Outcome of [`boundary_ray`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpResult {
    /// Largest `q` with `q·w` in the discretized grasp wrench space.
    pub q: f64,
    /// Edge multipliers per contact.
    pub lambda: Vec<Vec<f64>>,
    /// `Infeasible` means the ray leaves the space immediately (`q = 0`).
    pub status: LpStatus,
}

impl LpResult {
    pub fn covered(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Largest scale `q` with `q·w` inside the discretized grasp wrench space.
pub fn boundary_ray(w: &Vec6, contacts: &[Contact], d: usize) -> Result<LpResult> {
    boundary_ray_gens(w, &generators(contacts, d)?)
}

/// [`boundary_ray`] on precomputed generators.
pub fn boundary_ray_gens(w: &Vec6, gens: &[Vec<Vec6>]) -> Result<LpResult> {
    boundary_ray_full(w, gens).map(|(r, _)| r)
}

/// Also returns the equality-row duals `y`, for which `y_0..6` is a
/// separating direction and `Σ y_6..` the dual bound on `q`.
pub fn boundary_ray_full(w: &Vec6, gens: &[Vec<Vec6>]) -> Result<(LpResult, Vec<f64>)> {
    let norm = w.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(GwsError::invalid(
            "boundary ray needs a non-zero finite wrench",
        ));
    }
    let m = gens.len();
    let nl: usize = gens.iter().map(|g| g.len()).sum();
    let cols = 1 + nl + m;
    let mut lp = Lp::new(6 + m, cols);
    for r in 0..6 {
        lp.set(r, 0, w[r]);
    }
    let mut col = 1;
    for (i, g) in gens.iter().enumerate() {
        for e in g {
            for r in 0..6 {
                lp.set(r, col, -e[r]);
            }
            lp.set(6 + i, col, 1.0);
            col += 1;
        }
        lp.set(6 + i, 1 + nl + i, 1.0);
        lp.b[6 + i] = 1.0;
    }
    lp.c[0] = 1.0;
    let sol = maximize(&lp)?;
    if sol.status == LpStatus::Unbounded {
        return Err(GwsError::numerical(
            "boundary ray LP reported an unbounded scale",
        ));
    }
    let mut lambda = Vec::with_capacity(m);
    let mut col = 1;
    for g in gens {
        lambda.push(sol.x[col..col + g.len()].to_vec());
        col += g.len();
    }
    let q = sol.x[0];
    let status = if sol.status == LpStatus::Infeasible || q < RAY_TOL {
        LpStatus::Infeasible
    } else {
        LpStatus::Optimal
    };
    let q = if status == LpStatus::Optimal { q } else { 0.0 };
    Ok((LpResult { q, lambda, status }, sol.dual))
}

/// Support function `h(u) = Σ_i max(0, max_j uᵀ g_ij)` of the discretized
/// grasp wrench space.
pub fn support_value(u: &Vec6, gens: &[Vec<Vec6>]) -> f64 {
    gens.iter()
        .map(|g| g.iter().map(|e| u.dot(e)).fold(0.0, f64::max))
        .sum()
}

/// Support point of the discretized grasp wrench space: per contact the
/// best generator, or the origin when none is positive.
pub fn polytope_support(u: &Vec6, gens: &[Vec<Vec6>]) -> Vec6 {
    gens.iter().fold(Vec6::zeros(), |acc, g| {
        let mut best = (0.0, None);
        for e in g {
            let v = u.dot(e);
            if v > best.0 {
                best = (v, Some(e));
            }
        }
        match best.1 {
            Some(e) => acc + e,
            None => acc,
        }
    })
}

/// Boundary samples of the discretized polytope, the classic baseline.
pub fn polytope_samples(dirs: &[Vec6], gens: &[Vec<Vec6>]) -> Vec<WrenchSample> {
    dirs.par_iter()
        .with_min_len(256)
        .map(|u| WrenchSample {
            w: polytope_support(u, gens),
            u: *u,
        })
        .collect()
}

/// Number of candidate hull vertices `(d + 1)^m` of the discretized space,
/// saturating at `u128::MAX`.
pub fn hull_vertex_bound(m: usize, d: usize) -> u128 {
    (0..m).fold(1u128, |acc, _| acc.saturating_mul(d as u128 + 1))
}

/// Radius of the largest origin-centred ball in the discretized grasp
/// wrench space, estimated as `min_u h(u)` over `n_dirs` random unit
/// directions. Returns 0 when some direction has non-positive support.
pub fn epsilon_oracle(contacts: &[Contact], d: usize, n_dirs: usize, seed: u64) -> Result<f64> {
    if n_dirs == 0 {
        return Err(GwsError::invalid(
            "epsilon oracle needs at least one direction",
        ));
    }
    let gens = generators(contacts, d)?;
    let dirs = sample_unit_directions(n_dirs, seed);
    let eps = dirs
        .par_iter()
        .map(|u| support_value(u, &gens))
        .reduce(|| f64::INFINITY, f64::min);
    Ok(if eps <= RAY_TOL { 0.0 } else { eps })
}

/// Whether each of the 12 signed coordinate wrenches is a non-negative
/// combination of some 6-subset of `samples`.
///
/// Each of up to `trials` random 6-subsets per target is refined by
/// exchanges: the member with the most negative coefficient is swapped
/// for the sample minimising the matching row of the inverse. If no sample
/// makes that row negative, the row separates the target from every
/// sample and the answer is false.
pub fn force_closure_simplex_check(samples: &[Vec6], trials: usize, seed: u64) -> Result<bool> {
    if samples.len() < 6 {
        return Err(GwsError::invalid(
            "force-closure check needs at least 6 samples",
        ));
    }
    let dirs: Vec<Vec6> = samples
        .iter()
        .filter(|w| w.norm() > 1e-12)
        .map(|w| w.normalize())
        .collect();
    if dirs.len() < 6 {
        return Ok(false);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for target in 0..12 {
        let mut t = Vec6::zeros();
        t[target % 6] = if target < 6 { 1.0 } else { -1.0 };
        let mut covered = false;
        'trials: for _ in 0..trials {
            let mut members: Vec<usize> = sample_indices(&mut rng, dirs.len(), 6).into_vec();
            for _ in 0..MAX_EXCHANGES {
                let v = Matrix6::from_fn(|r, c| dirs[members[c]][r]);
                if v.determinant().abs() < 1e-12 {
                    continue 'trials;
                }
                let Some(inv) = v.try_inverse() else {
                    continue 'trials;
                };
                let coef = inv * t;
                let (k, ck) = coef.argmin();
                if ck >= -1e-9 {
                    covered = true;
                    break 'trials;
                }
                let y = inv.row(k).transpose();
                let (best, val) = dirs
                    .par_iter()
                    .enumerate()
                    .map(|(i, w)| (i, y.dot(w)))
                    .reduce(
                        || (usize::MAX, f64::INFINITY),
                        |a, b| {
                            if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                                b
                            } else {
                                a
                            }
                        },
                    );
                if val >= -1e-12 {
                    return Ok(false);
                }
                members[k] = best;
            }
        }
        if !covered {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Smallest ray scale over the 12 signed coordinate wrenches; positive
/// exactly when the discretized grasp is force closure.
pub fn force_closure_margin(gens: &[Vec<Vec6>]) -> Result<f64> {
    let mut margin = f64::INFINITY;
    for target in 0..12 {
        let mut w = Vec6::zeros();
        w[target % 6] = if target < 6 { 1.0 } else { -1.0 };
        margin = margin.min(boundary_ray_gens(&w, gens)?.q);
        if margin == 0.0 {
            break;
        }
    }
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wrench::{estimate_with_directions, support_pcf, EstimatorConfig};
    use crate::Vec3;
    use rand::Rng;

    fn pcf(mu: f64) -> FrictionModel {
        FrictionModel::pcf(mu).unwrap()
    }

    fn random_contacts(rng: &mut ChaCha8Rng, m: usize, mu: f64) -> Vec<Contact> {
        (0..m)
            .map(|_| {
                let p = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
                let n = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
                Contact::new(p, n, pcf(mu)).unwrap()
            })
            .collect()
    }

    fn sphere_contacts(dirs: &[Vec3], mu: f64) -> Vec<Contact> {
        dirs.iter()
            .map(|d| {
                let d = d.normalize();
                Contact::new(d, -d, pcf(mu)).unwrap()
            })
            .collect()
    }

    fn tetrahedron() -> Vec<Vec3> {
        vec![
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, -1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, -1.0, 1.0),
        ]
    }

    #[test]
    fn pcf_edges_quarter_angles() {
        let cone = cone_edges(&pcf(1.0), 4).unwrap();
        let expected = [
            [1.0, 1.0, 0.0],
            [1.0, 0.0, 1.0],
            [1.0, -1.0, 0.0],
            [1.0, 0.0, -1.0],
        ];
        for (e, x) in cone.edges.iter().zip(expected) {
            for k in 0..3 {
                assert!((e[k] - x[k]).abs() < 1e-15);
            }
        }
        assert!(cone_edges(&pcf(1.0), 2).is_err());
    }

    #[test]
    fn edges_lie_on_cone_surface() {
        for d in [3, 8, 64] {
            for e in cone_edges(&pcf(0.7), d).unwrap().edges {
                assert_eq!(e[0], 1.0);
                assert!(((e[1] * e[1] + e[2] * e[2]).sqrt() - 0.7).abs() < 1e-12);
            }
            for e in cone_edges(&FrictionModel::sfc(0.5, 0.2).unwrap(), d)
                .unwrap()
                .edges
            {
                assert_eq!(e[0], 1.0);
                let q = (e[1] * e[1] + e[2] * e[2]) / 0.25 + e[3] * e[3] / 0.04;
                assert!((q - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inscribed_support_deficit_d64() {
        let bound = 1.0 - (std::f64::consts::PI / 64.0).cos();
        let cone = cone_edges(&pcf(0.5), 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..2000 {
            let u = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0)).normalize();
            let exact = u.dot(&support_pcf(&u, 0.5, 0.0));
            let disc = cone
                .edges
                .iter()
                .map(|e| u.dot(&Vec3::new(e[0], e[1], e[2])))
                .fold(0.0, f64::max);
            assert!(disc <= exact + 1e-12);
            let tangential = 0.5 * (u[1] * u[1] + u[2] * u[2]).sqrt();
            if exact > 0.0 {
                assert!(exact - disc <= bound * tangential + 1e-12);
            }
            if u[0] >= 0.0 && exact > 1e-6 {
                assert!(
                    (exact - disc) / exact <= bound + 1e-12,
                    "deficit {}",
                    (exact - disc) / exact
                );
            }
        }
    }

    #[test]
    fn single_contact_axis_ray() {
        let c = vec![Contact::new(Vec3::zeros(), Vec3::x(), pcf(0.5)).unwrap()];
        let r = boundary_ray(&Vec6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0), &c, 32).unwrap();
        assert!(r.covered());
        assert!((r.q - 1.0).abs() < 1e-9);
    }

    #[test]
    fn opposite_ray_is_uncovered() {
        let c = vec![Contact::new(Vec3::zeros(), Vec3::x(), pcf(0.5)).unwrap()];
        let r = boundary_ray(&Vec6::new(-1.0, 0.0, 0.0, 0.0, 0.0, 0.0), &c, 32).unwrap();
        assert_eq!(r.status, LpStatus::Infeasible);
        assert_eq!(r.q, 0.0);
        assert!(boundary_ray(&Vec6::zeros(), &c, 32).is_err());
    }

    #[test]
    fn ray_scale_homogeneity_and_feasibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let contacts = sphere_contacts(&tetrahedron(), 0.5);
        let gens = generators(&contacts, 16).unwrap();
        for _ in 0..30 {
            let w = Vec6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let a = boundary_ray_gens(&w, &gens).unwrap();
            let b = boundary_ray_gens(&(w * 2.5), &gens).unwrap();
            assert!((a.q - 2.5 * b.q).abs() < 1e-7 * (1.0 + a.q));
            if a.covered() {
                let mut sum = Vec6::zeros();
                for (g, l) in gens.iter().zip(&a.lambda) {
                    assert!(l.iter().sum::<f64>() <= 1.0 + 1e-9);
                    assert!(l.iter().all(|&x| x >= 0.0));
                    for (e, x) in g.iter().zip(l) {
                        sum += e * *x;
                    }
                }
                assert!((sum - w * a.q).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn ray_duality_spot_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..40 {
            let m = rng.gen_range(2..6);
            let mu = rng.gen_range(0.2..1.0);
            let contacts = random_contacts(&mut rng, m, mu);
            let gens = generators(&contacts, 12).unwrap();
            let w = Vec6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let (r, y) = boundary_ray_full(&w, &gens).unwrap();
            if !r.covered() {
                continue;
            }
            // y_w separates: yᵀw ≥ 1 and h(y_w) ≤ Σ_i y_i
            let yw = Vec6::from_column_slice(&y[..6]);
            let bound: f64 = y[6..].iter().sum();
            assert!((bound - r.q).abs() < 1e-6);
            assert!(yw.dot(&w) >= 1.0 - 1e-7);
            let h = support_value(&yw, &gens);
            assert!(h <= bound + 1e-7);
        }
    }

    #[test]
    fn estimator_points_are_on_oracle_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut cases = 0;
        while cases < 4 {
            let contacts = random_contacts(&mut rng, 5, 0.6);
            let cfg = EstimatorConfig {
                k: 30,
                delta: 0.0,
                cpn: true,
                seed: 1,
            };
            let dirs = sample_unit_directions(30, 3);
            let set = estimate_with_directions(&contacts, &dirs, &cfg).unwrap();
            let gens = generators(&set.contacts, 64).unwrap();
            if force_closure_margin(&gens).unwrap() == 0.0 {
                continue;
            }
            cases += 1;
            for s in &set.samples {
                let r = boundary_ray_gens(&s.w, &gens).unwrap();
                assert!(r.q >= 0.995 && r.q <= 1.0 + 1e-9, "q = {}", r.q);
            }
        }
    }

    #[test]
    fn epsilon_oracle_cases() {
        let single = vec![Contact::new(Vec3::zeros(), Vec3::x(), pcf(0.5)).unwrap()];
        assert_eq!(epsilon_oracle(&single, 16, 1000, 0).unwrap(), 0.0);
        let tet = sphere_contacts(&tetrahedron(), 0.5);
        let eps = epsilon_oracle(&tet, 16, 20_000, 0).unwrap();
        assert!(eps > 0.0);
        // doubling every generator doubles every support value
        let gens = generators(&tet, 16).unwrap();
        let doubled: Vec<Vec<Vec6>> = gens
            .iter()
            .map(|g| g.iter().map(|e| e * 2.0).collect())
            .collect();
        for u in sample_unit_directions(200, 4) {
            assert!((support_value(&u, &doubled) - 2.0 * support_value(&u, &gens)).abs() < 1e-12);
        }
        assert!(epsilon_oracle(&tet, 16, 0, 0).is_err());
    }

    #[test]
    fn polytope_support_is_a_maximizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let contacts = random_contacts(&mut rng, 3, 0.4);
        let gens = generators(&contacts, 8).unwrap();
        for u in sample_unit_directions(500, 5) {
            let s = polytope_support(&u, &gens);
            assert!((u.dot(&s) - support_value(&u, &gens)).abs() < 1e-12);
        }
        assert_eq!(hull_vertex_bound(7, 8), 9u128.pow(7));
        assert_eq!(hull_vertex_bound(200, 64), u128::MAX);
    }

    #[test]
    fn simplex_check_basis_and_halfspace() {
        let mut basis = Vec::new();
        for j in 0..6 {
            let mut e = Vec6::zeros();
            e[j] = 2.0;
            basis.push(e);
            basis.push(-e);
        }
        assert!(force_closure_simplex_check(&basis, 2000, 1).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let upper: Vec<Vec6> = (0..500)
            .map(|_| {
                let mut w = Vec6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
                w[2] = w[2].abs() + 1e-3;
                w
            })
            .collect();
        assert!(!force_closure_simplex_check(&upper, 1000, 1).unwrap());
        assert!(force_closure_simplex_check(&upper[..3], 10, 1).is_err());
    }

    #[test]
    fn simplex_check_agrees_with_support_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut closed = 0;
        for _ in 0..50 {
            let dirs: Vec<Vec3> = (0..5)
                .map(|_| Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0)))
                .collect();
            let mu = rng.gen_range(0.2..1.0);
            let contacts = sphere_contacts(&dirs, mu);
            let gens = generators(&contacts, 16).unwrap();
            let margin = force_closure_margin(&gens).unwrap();
            let eps = epsilon_oracle(&contacts, 16, 20_000, 2).unwrap();
            // sampled support minimum only overestimates, so eps = 0 is decisive
            if eps == 0.0 {
                assert_eq!(margin, 0.0);
            }
            let cfg = EstimatorConfig {
                k: 4000,
                delta: 0.0,
                cpn: false,
                seed: 6,
            };
            let set = crate::wrench::estimate_boundary(&contacts, &cfg).unwrap();
            let fc = force_closure_simplex_check(&set.wrenches(), 1000, 7).unwrap();
            assert_eq!(fc, margin > 0.0, "mu {mu} margin {margin} eps {eps}");
            closed += fc as usize;
        }
        assert!(
            closed > 0 && closed < 50,
            "suite should mix both outcomes, got {closed}"
        );
    }

    #[test]
    fn sfc_generators_include_torsion() {
        let c = Contact::new(
            Vec3::zeros(),
            Vec3::z(),
            FrictionModel::sfc(0.5, 0.2).unwrap(),
        )
        .unwrap();
        let gens = generators(&[c], 64).unwrap();
        let max_tz = gens[0].iter().map(|g| g[5]).fold(f64::MIN, f64::max);
        assert!(max_tz > 0.15 && max_tz <= 0.2);
    }
}

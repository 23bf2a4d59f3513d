use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{grasp_matrix, support_pcf, support_sfc, Contact, FrictionModel, GraspMatrix};
use crate::{GwsError, Result, Vec3, Vec6};

/// Directions generated per independent random stream.
const CHUNK: usize = 4096;

/// Parameters of the boundary estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Number of sampled directions.
    #[serde(rename = "K")]
    pub k: usize,
    /// Relaxation band in radians; 0 gives the exact support mapping.
    pub delta: f64,
    /// Apply contact position normalization before building grasp matrices.
    pub cpn: bool,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            k: 100,
            delta: 15f64.to_radians(),
            cpn: true,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(GwsError::invalid("K must be at least 1"));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(GwsError::invalid("delta must be finite and >= 0"));
        }
        Ok(())
    }

    /// Checks `delta < α/2` for the narrowest cone among `contacts`.
    pub fn validate_for(&self, contacts: &[Contact]) -> Result<()> {
        self.validate()?;
        for c in contacts {
            let alpha = c.friction.min_cutoff_angle();
            if self.delta >= 0.5 * alpha {
                return Err(GwsError::invalid(format!(
                    "delta {:.4} rad must be below half the cone cut-off angle {:.4} rad",
                    self.delta, alpha
                )));
            }
        }
        Ok(())
    }
}

/// A boundary point together with the direction that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrenchSample {
    pub w: Vec6,
    pub u: Vec6,
}

/// Output of [`estimate_boundary`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySampleSet {
    pub samples: Vec<WrenchSample>,
    /// Contacts the samples were computed from (after normalization).
    pub contacts: Vec<Contact>,
    pub cpn_center: Vec3,
    pub cpn_scale: f64,
    pub cpn_degenerate: bool,
    pub config: EstimatorConfig,
}

impl BoundarySampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn wrenches(&self) -> Vec<Vec6> {
        self.samples.iter().map(|s| s.w).collect()
    }
}

/// `K` directions uniform on the unit 5-sphere.
///
/// Each block of directions draws from its own ChaCha stream, so the
/// output is identical regardless of how many threads generate it.
pub fn sample_unit_directions(k: usize, seed: u64) -> Vec<Vec6> {
    let chunks = k.div_ceil(CHUNK);
    let blocks: Vec<Vec<Vec6>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ci as u64);
            let len = CHUNK.min(k - ci * CHUNK);
            (0..len)
                .map(|_| loop {
                    let v = Vec6::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                    let norm = v.norm();
                    if norm > 1e-12 {
                        break v / norm;
                    }
                })
                .collect()
        })
        .collect();
    blocks.into_iter().flatten().collect()
}

/// Result of contact position normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct CpnResult {
    pub contacts: Vec<Contact>,
    pub center: Vec3,
    pub scale: f64,
    /// All contacts coincide; positions were centred but not rescaled.
    pub degenerate: bool,
}

/// Recentres contact positions on their mean and divides by the mean
/// distance to it. Normals and tangents are untouched.
pub fn normalize_contacts(contacts: &[Contact]) -> Result<CpnResult> {
    if contacts.is_empty() {
        return Err(GwsError::invalid(
            "contact normalization needs at least one contact",
        ));
    }
    let m = contacts.len() as f64;
    let center = contacts.iter().fold(Vec3::zeros(), |acc, c| acc + c.p) / m;
    let spread = contacts.iter().map(|c| (c.p - center).norm()).sum::<f64>() / m;
    let (scale, degenerate) = if spread < 1e-9 {
        (1.0, true)
    } else {
        (spread, false)
    };
    let contacts = contacts
        .iter()
        .map(|c| c.at((c.p - center) / scale))
        .collect();
    Ok(CpnResult {
        contacts,
        center,
        scale,
        degenerate,
    })
}

fn contact_support(u: &Vec6, g: &GraspMatrix, friction: &FrictionModel, delta: f64) -> Vec6 {
    match (g, friction) {
        (GraspMatrix::Pcf(g), FrictionModel::Pcf { mu }) => {
            g * support_pcf(&(g.transpose() * u), *mu, delta)
        }
        (GraspMatrix::Sfc(g), FrictionModel::Sfc { mu1, mu2 }) => {
            g * support_sfc(&(g.transpose() * u), *mu1, *mu2, delta)
        }
        _ => unreachable!("grasp matrix built from the same friction model"),
    }
}

/// Support mapping of the grasp wrench space: `Σ_i G_i s_Fi(G_iᵀ u)`.
pub fn support_gws(u: &Vec6, contacts: &[Contact], delta: f64) -> Vec6 {
    contacts.iter().fold(Vec6::zeros(), |acc, c| {
        acc + contact_support(u, &grasp_matrix(c), &c.friction, delta)
    })
}

/// Maps every direction in `dirs` to the grasp wrench boundary.
pub fn estimate_with_directions(
    contacts: &[Contact],
    dirs: &[Vec6],
    config: &EstimatorConfig,
) -> Result<BoundarySampleSet> {
    if contacts.is_empty() {
        return Err(GwsError::invalid("estimator needs at least one contact"));
    }
    config.validate_for(contacts)?;
    let (contacts, center, scale, degenerate) = if config.cpn {
        let r = normalize_contacts(contacts)?;
        (r.contacts, r.center, r.scale, r.degenerate)
    } else {
        (contacts.to_vec(), Vec3::zeros(), 1.0, false)
    };
    let mats: Vec<(GraspMatrix, FrictionModel)> = contacts
        .iter()
        .map(|c| (grasp_matrix(c), c.friction))
        .collect();
    let delta = config.delta;
    let samples = dirs
        .par_iter()
        .with_min_len(256)
        .map(|u| {
            let w = mats.iter().fold(Vec6::zeros(), |acc, (g, f)| {
                acc + contact_support(u, g, f, delta)
            });
            WrenchSample { w, u: *u }
        })
        .collect();
    Ok(BoundarySampleSet {
        samples,
        contacts,
        cpn_center: center,
        cpn_scale: scale,
        cpn_degenerate: degenerate,
        config: EstimatorConfig {
            k: dirs.len(),
            ..*config
        },
    })
}

/// Samples `K` boundary points of the grasp wrench space.
pub fn estimate_boundary(
    contacts: &[Contact],
    config: &EstimatorConfig,
) -> Result<BoundarySampleSet> {
    config.validate_for(contacts)?;
    let dirs = sample_unit_directions(config.k, config.seed);
    estimate_with_directions(contacts, &dirs, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wrench::contact_support_world;
    use nalgebra::{Rotation3, SMatrix};

    fn pcf(mu: f64) -> FrictionModel {
        FrictionModel::pcf(mu).unwrap()
    }

    fn random_contacts(rng: &mut ChaCha8Rng, m: usize, friction: FrictionModel) -> Vec<Contact> {
        (0..m)
            .map(|_| {
                let p = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
                let n = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
                Contact::new(p, n, friction).unwrap()
            })
            .collect()
    }

    #[test]
    fn single_direction_is_unit() {
        let d = sample_unit_directions(1, 42);
        assert_eq!(d.len(), 1);
        assert!((d[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn directions_are_deterministic_and_centred() {
        let a = sample_unit_directions(100_000, 7);
        let b = sample_unit_directions(100_000, 7);
        assert_eq!(a, b);
        let mean = a.iter().fold(Vec6::zeros(), |acc, u| acc + u) / a.len() as f64;
        for i in 0..6 {
            assert!(mean[i].abs() < 0.02, "coordinate {i} mean {}", mean[i]);
        }
        assert_ne!(sample_unit_directions(10, 8), sample_unit_directions(10, 7));
    }

    #[test]
    fn directions_independent_of_thread_count() {
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| sample_unit_directions(20_000, 3));
        let b = four.install(|| sample_unit_directions(20_000, 3));
        assert_eq!(a, b);
    }

    #[test]
    fn cpn_examples() {
        let f = pcf(0.5);
        let two = vec![
            Contact::new(Vec3::new(1.0, 0.0, 0.0), Vec3::x(), f).unwrap(),
            Contact::new(Vec3::new(-1.0, 0.0, 0.0), -Vec3::x(), f).unwrap(),
        ];
        let r = normalize_contacts(&two).unwrap();
        assert_eq!(r.center, Vec3::zeros());
        assert_eq!(r.scale, 1.0);
        assert_eq!(r.contacts, two);

        let shifted = vec![
            two[0].at(Vec3::new(2.0, 0.0, 0.0)),
            two[1].at(Vec3::new(4.0, 0.0, 0.0)),
        ];
        let r = normalize_contacts(&shifted).unwrap();
        assert_eq!(r.center, Vec3::new(3.0, 0.0, 0.0));
        assert_eq!(r.scale, 1.0);
        assert_eq!(r.contacts[0].p, Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(r.contacts[1].p, Vec3::new(1.0, 0.0, 0.0));

        let single = vec![two[0].at(Vec3::new(5.0, 5.0, 5.0))];
        let r = normalize_contacts(&single).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.contacts[0].p, Vec3::zeros());

        assert!(normalize_contacts(&[]).is_err());
    }

    #[test]
    fn cpn_mean_zero_unit_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in 2..9 {
            let cs = random_contacts(&mut rng, m, pcf(0.4));
            let cs: Vec<_> = cs
                .iter()
                .map(|c| c.at(c.p * 0.03 + Vec3::new(0.5, -0.2, 1.0)))
                .collect();
            let r = normalize_contacts(&cs).unwrap();
            let mean = r.contacts.iter().fold(Vec3::zeros(), |a, c| a + c.p) / m as f64;
            let spread = r.contacts.iter().map(|c| c.p.norm()).sum::<f64>() / m as f64;
            assert!(mean.norm() < 1e-9);
            assert!((spread - 1.0).abs() < 1e-9);
            for (a, b) in r.contacts.iter().zip(&cs) {
                assert_eq!(a.n, b.n);
            }
        }
    }

    #[test]
    fn cpn_frame_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let cs = random_contacts(&mut rng, 5, pcf(0.5));
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let shift = Vec3::new(4.0, -2.0, 0.5);
        let moved: Vec<_> = cs
            .iter()
            .map(|c| Contact::new(rot * c.p * 2.5 + shift, rot * c.n, c.friction).unwrap())
            .collect();
        let a = normalize_contacts(&cs).unwrap();
        let b = normalize_contacts(&moved).unwrap();
        for (x, y) in a.contacts.iter().zip(&b.contacts) {
            assert!((rot * x.p - y.p).norm() < 1e-9);
        }
    }

    #[test]
    fn support_gws_edge_cases() {
        let u = sample_unit_directions(1, 1)[0];
        assert_eq!(support_gws(&u, &[], 0.0), Vec6::zeros());
        let c = Contact::new(Vec3::zeros(), Vec3::new(0.2, 0.3, -1.0), pcf(0.5)).unwrap();
        for u in sample_unit_directions(500, 2) {
            let w = support_gws(&u, &[c], 0.2);
            assert!(w.fixed_rows::<3>(3).norm() == 0.0);
        }
    }

    #[test]
    fn minkowski_additivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let mu = rng.gen_range(0.2..1.0);
            let cs = random_contacts(&mut rng, 2, pcf(mu));
            let u = sample_unit_directions(1, rng.gen())[0];
            for delta in [0.0, 0.2] {
                let sum = support_gws(&u, &cs, delta);
                let parts = support_gws(&u, &cs[..1], delta) + support_gws(&u, &cs[1..], delta);
                assert!((sum - parts).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn support_dominates_interior_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cs = random_contacts(&mut rng, 4, pcf(0.6));
        let gs: Vec<_> = cs.iter().map(grasp_matrix).collect();
        for u in sample_unit_directions(50, 4) {
            let s = support_gws(&u, &cs, 0.0);
            let best = u.dot(&s);
            assert!(best >= -1e-15);
            for _ in 0..1000 {
                let mut w = Vec6::zeros();
                for g in &gs {
                    let f1: f64 = rng.gen_range(0.0..1.0);
                    let rr = 0.6 * f1 * rng.gen_range(0.0f64..1.0).sqrt();
                    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    w += g.apply(&[f1, rr * phi.cos(), rr * phi.sin()]);
                }
                assert!(u.dot(&w) <= best + 1e-12);
            }
        }
    }

    /// Linear image property on raw cone sets: s_{C(A)}(u) = C s_A(Cᵀu).
    #[test]
    fn linear_image_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..1000 {
            let c = SMatrix::<f64, 6, 3>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let mu = rng.gen_range(0.2..1.0);
            let u = Vec6::from_fn(|_, _| rng.gen_range(-1.0..1.0)).normalize();
            let s = c * support_pcf(&(c.transpose() * u), mu, 0.0);
            // Direct maximisation over C(A): the maximiser of uᵀCa over the
            // cone is found on the rim / tip / origin; compare support values
            // against a dense rim scan of the image.
            let mut best: f64 = 0.0;
            for i in 0..720 {
                let phi = std::f64::consts::TAU * i as f64 / 720.0;
                let a = nalgebra::Vector3::new(1.0, mu * phi.cos(), mu * phi.sin());
                best = best.max(u.dot(&(c * a)));
            }
            best = best.max(u.dot(&c.column(0).into_owned()));
            let val = u.dot(&s);
            assert!(val >= best - 1e-9);
            assert!(val - best < 1e-4 * (1.0 + best.abs()));
        }
    }

    #[test]
    fn relaxation_only_shrinks_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let cs = random_contacts(&mut rng, 5, pcf(0.3));
        for u in sample_unit_directions(5000, 6) {
            let vals: Vec<f64> = [0.0, 0.1, 0.2, 0.4]
                .iter()
                .map(|&d| u.dot(&support_gws(&u, &cs, d)))
                .collect();
            for w in vals.windows(2) {
                assert!(w[0] >= w[1] - 1e-12);
            }
        }
    }

    #[test]
    fn origin_branch_is_never_relaxed() {
        let c = Contact::new(Vec3::zeros(), Vec3::z(), pcf(0.5)).unwrap();
        let mut hits = 0;
        for u in sample_unit_directions(2000, 16) {
            let uf = u.fixed_rows::<3>(0);
            let theta = uf.xy().norm().atan2(uf.z);
            if theta >= std::f64::consts::FRAC_PI_2 + 0.5f64.atan() {
                for delta in [0.0, 0.1, 0.3, 0.5] {
                    assert_eq!(support_gws(&u, &[c], delta), Vec6::zeros());
                }
                hits += 1;
            }
        }
        assert!(hits > 100);
    }

    #[test]
    fn estimator_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let cs = random_contacts(&mut rng, 4, pcf(0.5));
        let cfg = EstimatorConfig {
            k: 1000,
            seed: 5,
            ..Default::default()
        };
        let a = estimate_boundary(&cs, &cfg).unwrap();
        let b = estimate_boundary(&cs, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1000);
        for s in &a.samples {
            assert!((s.u.norm() - 1.0).abs() < 1e-9);
            assert!(s.u.dot(&s.w) >= -1e-12);
        }
    }

    #[test]
    fn estimator_rejects_bad_config() {
        let cs = vec![Contact::new(Vec3::zeros(), Vec3::z(), pcf(0.2)).unwrap()];
        assert!(estimate_boundary(
            &cs,
            &EstimatorConfig {
                k: 0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(estimate_boundary(
            &cs,
            &EstimatorConfig {
                delta: 1.2,
                ..Default::default()
            }
        )
        .is_err());
        assert!(estimate_boundary(&[], &EstimatorConfig::default()).is_err());
    }

    #[test]
    fn world_route_agrees_for_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let cs = random_contacts(&mut rng, 3, FrictionModel::sfc(0.5, 0.2).unwrap());
        for u in sample_unit_directions(300, 2) {
            let a = support_gws(&u, &cs, 0.1);
            let b = cs.iter().fold(Vec6::zeros(), |acc, c| {
                acc + contact_support_world(&u, c, 0.1)
            });
            assert!((a - b).norm() < 1e-10);
        }
    }
}

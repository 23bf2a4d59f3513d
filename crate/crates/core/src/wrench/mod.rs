//! Contact models and the support-mapping estimator of the grasp wrench
//! boundary.
//!
//! Every contact contributes a truncated friction cone (unit normal force
//! bound) mapped into wrench space by its grasp matrix. The grasp wrench
//! space is the Minkowski sum of those sets, so its support mapping is the
//! sum of the per-contact support mappings. Sampling unit directions and
//! pushing them through that sum yields points on the boundary without
//! building a convex hull.

mod estimator;
mod support;

pub use estimator::{
    estimate_boundary, estimate_with_directions, normalize_contacts, sample_unit_directions,
    support_gws, BoundarySampleSet, CpnResult, EstimatorConfig, WrenchSample,
};
pub use support::{
    contact_support_jacobian, contact_support_world, support_angles, support_pcf, support_sfc,
    ContactJacobian, SupportRegion,
};

use nalgebra::{Matrix3, Matrix6x3, Matrix6x4};
use serde::{Deserialize, Serialize};

use crate::{GwsError, Result, Vec3, Vec6};

/// Unit-length tolerance for normals and tangents.
pub const FRAME_TOL: f64 = 1e-9;

/// Friction cone model of a single contact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FrictionModel {
    /// Point contact with Coulomb friction.
    Pcf { mu: f64 },
    /// Soft finger: tangential friction `mu1`, torsional friction `mu2`.
    Sfc { mu1: f64, mu2: f64 },
}

impl FrictionModel {
    pub fn pcf(mu: f64) -> Result<Self> {
        let m = FrictionModel::Pcf { mu };
        m.validate()?;
        Ok(m)
    }

    pub fn sfc(mu1: f64, mu2: f64) -> Result<Self> {
        let m = FrictionModel::Sfc { mu1, mu2 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        match *self {
            FrictionModel::Pcf { mu } if ok(mu) => Ok(()),
            FrictionModel::Sfc { mu1, mu2 } if ok(mu1) && ok(mu2) => Ok(()),
            _ => Err(GwsError::invalid(format!(
                "friction coefficients must be finite and > 0, got {self:?}"
            ))),
        }
    }

    /// Dimension of the contact force coordinates (3 for PCF, 4 for SFC).
    pub fn force_dim(&self) -> usize {
        match self {
            FrictionModel::Pcf { .. } => 3,
            FrictionModel::Sfc { .. } => 4,
        }
    }

    /// Smallest cone half-angle plus a right angle, i.e. the smallest
    /// angle from the cone axis beyond which the support is the origin.
    pub fn min_cutoff_angle(&self) -> f64 {
        let mu = match *self {
            FrictionModel::Pcf { mu } => mu,
            FrictionModel::Sfc { mu1, mu2 } => mu1.min(mu2),
        };
        std::f64::consts::FRAC_PI_2 + mu.atan()
    }
}

/// A contact on the object surface, expressed in the object frame.
///
/// `n` points into the object; `(n, d, e)` is a right-handed orthonormal
/// frame with `n = d × e`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub p: Vec3,
    pub n: Vec3,
    pub d: Vec3,
    pub e: Vec3,
    pub friction: FrictionModel,
}

impl Contact {
    /// Builds a contact from a position and a (not necessarily unit) inward
    /// normal; the tangents come from [`tangent_frame`].
    pub fn new(p: Vec3, n: Vec3, friction: FrictionModel) -> Result<Self> {
        friction.validate()?;
        if !p.iter().all(|x| x.is_finite()) {
            return Err(GwsError::invalid("contact position must be finite"));
        }
        let norm = n.norm();
        if !(norm.is_finite() && norm > 1e-12) {
            return Err(GwsError::invalid("contact normal must be non-zero"));
        }
        let n = n / norm;
        let (d, e) = tangent_frame(&n)?;
        Ok(Contact {
            p,
            n,
            d,
            e,
            friction,
        })
    }

    /// Builds a contact with an explicit tangent frame, checking the frame
    /// invariants.
    pub fn with_frame(p: Vec3, n: Vec3, d: Vec3, e: Vec3, friction: FrictionModel) -> Result<Self> {
        let c = Contact {
            p,
            n,
            d,
            e,
            friction,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.friction.validate()?;
        let unit = |v: &Vec3| (v.norm() - 1.0).abs() <= FRAME_TOL;
        if !self.p.iter().all(|x| x.is_finite()) {
            return Err(GwsError::invalid("contact position must be finite"));
        }
        if !(unit(&self.n) && unit(&self.d) && unit(&self.e)) {
            return Err(GwsError::invalid(
                "contact frame vectors must be unit length",
            ));
        }
        if (self.d.cross(&self.e) - self.n).norm() > FRAME_TOL {
            return Err(GwsError::invalid("contact frame must satisfy n = d x e"));
        }
        Ok(())
    }

    /// Same contact moved to a new position.
    pub fn at(&self, p: Vec3) -> Self {
        Contact { p, ..*self }
    }
}

/// Deterministic right-handed tangent frame `(d, e)` with `n = d × e`.
///
/// The seed axis is the coordinate axis on which `n` has the smallest
/// absolute component, so the construction is continuous away from the
/// set where two components tie.
pub fn tangent_frame(n: &Vec3) -> Result<(Vec3, Vec3)> {
    let norm = n.norm();
    if !(norm.is_finite() && norm > 1e-12) {
        return Err(GwsError::invalid("tangent frame of a zero-length normal"));
    }
    let n = n / norm;
    let abs = n.abs();
    let axis = if abs.x <= abs.y && abs.x <= abs.z {
        Vec3::x()
    } else if abs.y <= abs.z {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let d = (axis - n * n.dot(&axis)).normalize();
    let e = n.cross(&d);
    Ok((d, e))
}

/// Grasp matrix of one contact: maps contact-frame forces to wrenches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GraspMatrix {
    Pcf(Matrix6x3<f64>),
    Sfc(Matrix6x4<f64>),
}

impl GraspMatrix {
    /// Wrench produced by contact-frame force coordinates `f`
    /// (length 3 for PCF, 4 for SFC).
    pub fn apply(&self, f: &[f64]) -> Vec6 {
        match self {
            GraspMatrix::Pcf(g) => g * nalgebra::Vector3::from_column_slice(&f[..3]),
            GraspMatrix::Sfc(g) => g * nalgebra::Vector4::from_column_slice(&f[..4]),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            GraspMatrix::Pcf(_) => 3,
            GraspMatrix::Sfc(_) => 4,
        }
    }
}

/// Grasp matrix `[n d e (0); p×n p×d p×e (n)]` of a contact.
pub fn grasp_matrix(c: &Contact) -> GraspMatrix {
    let top = Matrix3::from_columns(&[c.n, c.d, c.e]);
    let bottom = Matrix3::from_columns(&[c.p.cross(&c.n), c.p.cross(&c.d), c.p.cross(&c.e)]);
    match c.friction {
        FrictionModel::Pcf { .. } => {
            let mut g = Matrix6x3::zeros();
            g.fixed_view_mut::<3, 3>(0, 0).copy_from(&top);
            g.fixed_view_mut::<3, 3>(3, 0).copy_from(&bottom);
            GraspMatrix::Pcf(g)
        }
        FrictionModel::Sfc { .. } => {
            let mut g = Matrix6x4::zeros();
            g.fixed_view_mut::<3, 3>(0, 0).copy_from(&top);
            g.fixed_view_mut::<3, 3>(3, 0).copy_from(&bottom);
            g.fixed_view_mut::<3, 1>(3, 3).copy_from(&c.n);
            GraspMatrix::Sfc(g)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pcf() -> FrictionModel {
        FrictionModel::pcf(0.5).unwrap()
    }

    #[test]
    fn friction_rejects_non_positive() {
        assert!(FrictionModel::pcf(0.0).is_err());
        assert!(FrictionModel::pcf(f64::NAN).is_err());
        assert!(FrictionModel::sfc(0.3, -1.0).is_err());
        assert!(FrictionModel::sfc(0.3, 0.1).is_ok());
    }

    #[test]
    fn tangent_frame_on_axes() {
        for n in [Vec3::x(), Vec3::y(), Vec3::z(), -Vec3::z()] {
            let (d, e) = tangent_frame(&n).unwrap();
            assert_eq!(d.dot(&e), 0.0);
            assert!((d.cross(&e) - n).norm() < 1e-15);
            assert!((d.norm() - 1.0).abs() < 1e-15);
        }
        assert!(tangent_frame(&Vec3::zeros()).is_err());
    }

    #[test]
    fn tangent_frame_random_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let n = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if n.norm() < 1e-3 {
                continue;
            }
            let n = n.normalize();
            let (d, e) = tangent_frame(&n).unwrap();
            assert!(d.dot(&n).abs() + e.dot(&n).abs() < 1e-9);
            assert!((d.cross(&e) - n).norm() < 1e-9);
        }
    }

    #[test]
    fn contact_validation() {
        let c = Contact::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 3.0), pcf()).unwrap();
        assert!(c.validate().is_ok());
        let bad = Contact::with_frame(Vec3::zeros(), Vec3::x(), Vec3::z(), Vec3::y(), pcf());
        assert!(bad.is_err(), "left-handed frame must be rejected");
        assert!(Contact::new(Vec3::new(f64::INFINITY, 0.0, 0.0), Vec3::x(), pcf()).is_err());
    }

    #[test]
    fn grasp_matrix_at_origin_has_no_torque() {
        let c = Contact::new(Vec3::zeros(), Vec3::x(), pcf()).unwrap();
        let GraspMatrix::Pcf(g) = grasp_matrix(&c) else {
            panic!()
        };
        assert!(g.fixed_view::<3, 3>(3, 0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn grasp_matrix_normal_force_torque() {
        let c = Contact::new(Vec3::new(0.0, 1.0, 0.0), Vec3::x(), pcf()).unwrap();
        let w = grasp_matrix(&c).apply(&[1.0, 0.0, 0.0]);
        let expected = Vec6::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0);
        assert!((w - expected).norm() < 1e-15);
    }

    #[test]
    fn grasp_matrix_sfc_torsion_column() {
        let n = Vec3::new(1.0, 2.0, -2.0).normalize();
        let c = Contact::new(
            Vec3::new(0.3, -0.2, 0.9),
            n,
            FrictionModel::sfc(0.5, 0.2).unwrap(),
        )
        .unwrap();
        let w = grasp_matrix(&c).apply(&[0.0, 0.0, 0.0, 1.0]);
        let expected = Vec6::new(0.0, 0.0, 0.0, n.x, n.y, n.z);
        assert!((w - expected).norm() < 1e-15);
    }
}

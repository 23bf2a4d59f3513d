//! Support mappings of the truncated PCF and SFC friction cones, plus a
//! frame-free evaluation with analytic derivatives used by the gradient
//! of the task energy.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Matrix6, SMatrix};

use super::{Contact, FrictionModel};
use crate::{Vec3, Vec4, Vec6};

/// Below this norm a projected direction is treated as zero.
const ZERO_DIR: f64 = 1e-12;

/// Which branch of the (relaxed) cone support mapping is active.
///
/// `Blend(t)` interpolates from the cone tip towards the rim point with
/// weight `t = θ/δ`; `Shrink(t)` scales the rim point by `t = (α−θ)/δ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SupportRegion {
    Tip,
    Blend(f64),
    Rim,
    Shrink(f64),
    Origin,
}

impl SupportRegion {
    pub fn classify(theta: f64, alpha: f64, delta: f64) -> Self {
        if theta == 0.0 {
            SupportRegion::Tip
        } else if theta < delta {
            SupportRegion::Blend(theta / delta)
        } else if theta <= alpha - delta {
            SupportRegion::Rim
        } else if theta < alpha {
            SupportRegion::Shrink((alpha - theta) / delta)
        } else {
            SupportRegion::Origin
        }
    }
}

/// Support mapping of the unit-height PCF cone in its contact frame.
///
/// `u3` is `Gᵀu` expressed in `(n, d, e)` coordinates and need not be unit.
/// With `delta = 0` this is the exact maximiser (tip for θ = 0, rim point
/// for θ = α); with `delta > 0` the tip and the origin-side edge are
/// blended over a band of width `delta`. The origin branch is never relaxed.
pub fn support_pcf(u3: &Vec3, mu: f64, delta: f64) -> Vec3 {
    let norm = u3.norm();
    if norm < ZERO_DIR {
        return Vec3::zeros();
    }
    let u = u3 / norm;
    let r = u.y.hypot(u.z);
    let theta = r.atan2(u.x);
    let alpha = FRAC_PI_2 + mu.atan();
    let tip = Vec3::x();
    let rim = |_: ()| Vec3::new(1.0, mu * u.y / r, mu * u.z / r);
    match SupportRegion::classify(theta, alpha, delta) {
        SupportRegion::Tip => tip,
        SupportRegion::Blend(t) => tip + (rim(()) - tip) * t,
        SupportRegion::Rim => rim(()),
        SupportRegion::Shrink(t) => rim(()) * t,
        SupportRegion::Origin => Vec3::zeros(),
    }
}

/// Support mapping of the unit-height soft-finger cone
/// `{f : f1 ≥ 0, (f2² + f3²)/μ1² + f4²/μ2² ≤ f1²}, f1 ≤ 1`.
///
/// The rim point follows from Cauchy–Schwarz:
/// `v = (1, μ1²u2/s, μ1²u3/s, μ2²u4/s)` with
/// `s = √(μ1²(u2² + u3²) + μ2²u4²)`, and the cut-off angle generalises to
/// `α = π/2 + atan(s/ρ)` where `ρ = ‖(u2, u3, u4)‖`, i.e. the angle at
/// which the support value `u1 + s` crosses zero.
pub fn support_sfc(u4: &Vec4, mu1: f64, mu2: f64, delta: f64) -> Vec4 {
    let norm = u4.norm();
    if norm < ZERO_DIR {
        return Vec4::zeros();
    }
    let u = u4 / norm;
    let rho = (u.y * u.y + u.z * u.z + u.w * u.w).sqrt();
    let theta = rho.atan2(u.x);
    let tip = Vec4::x();
    if rho == 0.0 {
        return if u.x > 0.0 { tip } else { Vec4::zeros() };
    }
    let s = (mu1 * mu1 * (u.y * u.y + u.z * u.z) + mu2 * mu2 * u.w * u.w).sqrt();
    let alpha = FRAC_PI_2 + (s / rho).atan();
    let rim = Vec4::new(
        1.0,
        mu1 * mu1 * u.y / s,
        mu1 * mu1 * u.z / s,
        mu2 * mu2 * u.w / s,
    );
    match SupportRegion::classify(theta, alpha, delta) {
        SupportRegion::Tip => tip,
        SupportRegion::Blend(t) => tip + (rim - tip) * t,
        SupportRegion::Rim => rim,
        SupportRegion::Shrink(t) => rim * t,
        SupportRegion::Origin => Vec4::zeros(),
    }
}

/// Scalars of the frame-free evaluation. `ubar = u_f + u_τ × p` is the
/// force-space direction seen by the contact, so `Gᵀu = (n·ū, d·ū, e·ū[, n·u_τ])`.
struct Pieces {
    ubar: Vec3,
    a: f64,
    t: Vec3,
    r: f64,
    b: f64,
    s: f64,
    rho: f64,
    theta: f64,
    alpha: f64,
    mu1: f64,
    mu2: f64,
}

fn pieces(u: &Vec6, c: &Contact) -> Option<Pieces> {
    let uf = u.fixed_rows::<3>(0).into_owned();
    let ut = u.fixed_rows::<3>(3).into_owned();
    let ubar = uf + ut.cross(&c.p);
    let a = c.n.dot(&ubar);
    let t = ubar - c.n * a;
    let r = t.norm();
    let (mu1, mu2, b) = match c.friction {
        FrictionModel::Pcf { mu } => (mu, 0.0, 0.0),
        FrictionModel::Sfc { mu1, mu2 } => (mu1, mu2, c.n.dot(&ut)),
    };
    if (a * a + r * r + b * b).sqrt() < ZERO_DIR {
        return None;
    }
    let rho = (r * r + b * b).sqrt();
    let s = (mu1 * mu1 * r * r + mu2 * mu2 * b * b).sqrt();
    let theta = rho.atan2(a);
    let alpha = if rho > 0.0 {
        FRAC_PI_2 + (s / rho).atan()
    } else {
        FRAC_PI_2 + mu1.atan()
    };
    Some(Pieces {
        ubar,
        a,
        t,
        r,
        b,
        s,
        rho,
        theta,
        alpha,
        mu1,
        mu2,
    })
}

/// Angle `θ` between the cone axis and `Gᵀu`, and the cut-off angle `α`
/// for that direction. `None` when `Gᵀu` vanishes.
pub fn support_angles(u: &Vec6, c: &Contact) -> Option<(f64, f64)> {
    pieces(u, c).map(|pc| (pc.theta, pc.alpha))
}

fn region_of(pc: &Pieces, delta: f64) -> SupportRegion {
    if pc.rho == 0.0 {
        if pc.a > 0.0 {
            SupportRegion::Tip
        } else {
            SupportRegion::Origin
        }
    } else {
        SupportRegion::classify(pc.theta, pc.alpha, delta)
    }
}

/// Contact-force support `(f, τ)` in world coordinates: `f` is the force
/// vector and `τ` the torsional moment about `n`.
fn force_support(pc: &Pieces, c: &Contact, region: SupportRegion) -> (Vec3, f64) {
    let rim = || {
        let f = c.n + pc.t * (pc.mu1 * pc.mu1 / pc.s);
        let tau = if pc.s > 0.0 {
            pc.mu2 * pc.mu2 * pc.b / pc.s
        } else {
            0.0
        };
        (f, tau)
    };
    match region {
        SupportRegion::Tip => (c.n, 0.0),
        SupportRegion::Blend(t) => {
            let (f, tau) = rim();
            (c.n + (f - c.n) * t, tau * t)
        }
        SupportRegion::Rim => rim(),
        SupportRegion::Shrink(t) => {
            let (f, tau) = rim();
            (f * t, tau * t)
        }
        SupportRegion::Origin => (Vec3::zeros(), 0.0),
    }
}

/// Support of one contact's wrench set evaluated without a tangent frame.
///
/// Equal to `G·s_F(Gᵀu)` for any right-handed frame, because the cone is
/// rotationally symmetric about `n`.
pub fn contact_support_world(u: &Vec6, c: &Contact, delta: f64) -> Vec6 {
    let Some(pc) = pieces(u, c) else {
        return Vec6::zeros();
    };
    let (f, tau) = force_support(&pc, c, region_of(&pc, delta));
    let torque = c.p.cross(&f) + c.n * tau;
    Vec6::new(f.x, f.y, f.z, torque.x, torque.y, torque.z)
}

/// Contact wrench support together with its derivatives.
#[derive(Clone, Copy, Debug)]
pub struct ContactJacobian {
    pub wrench: Vec6,
    pub region: SupportRegion,
    /// Columns 0..3: derivative w.r.t. `p`; columns 3..6: derivative
    /// w.r.t. `n` treated as a free vector (project onto the tangent plane
    /// of the unit sphere for the constrained derivative).
    pub jacobian: Matrix6<f64>,
}

type Row7 = SMatrix<f64, 1, 7>;
type Mat37 = SMatrix<f64, 3, 7>;

fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Analytic derivative of [`contact_support_world`] with respect to the
/// contact position and normal.
///
/// Intermediate quantities are differentiated w.r.t. `z = (ū, b, n)` and
/// then chained to `(p, n)`. The result is exact wherever the active
/// branch does not change, i.e. away from θ ∈ {0, δ, α−δ, α}.
pub fn contact_support_jacobian(u: &Vec6, c: &Contact, delta: f64) -> ContactJacobian {
    let zero = ContactJacobian {
        wrench: Vec6::zeros(),
        region: SupportRegion::Origin,
        jacobian: Matrix6::zeros(),
    };
    let Some(pc) = pieces(u, c) else {
        return zero;
    };
    let region = region_of(&pc, delta);
    if region == SupportRegion::Origin {
        return zero;
    }
    let n = c.n;
    let sfc = matches!(c.friction, FrictionModel::Sfc { .. });

    let mut dn = Mat37::zeros();
    dn.fixed_view_mut::<3, 3>(0, 4)
        .copy_from(&Matrix3::identity());
    let mut dubar = Mat37::zeros();
    dubar
        .fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&Matrix3::identity());
    let mut da = Row7::zeros();
    da.fixed_view_mut::<1, 3>(0, 0).copy_from(&n.transpose());
    da.fixed_view_mut::<1, 3>(0, 4)
        .copy_from(&pc.ubar.transpose());
    let mut db = Row7::zeros();
    if sfc {
        db[3] = 1.0;
    }

    let (f, tau, df, dtau): (Vec3, f64, Mat37, Row7) = if region == SupportRegion::Tip {
        (n, 0.0, dn, Row7::zeros())
    } else {
        let dt = dubar - n * da - dn * pc.a;
        let that = if pc.r > 0.0 {
            pc.t / pc.r
        } else {
            Vec3::zeros()
        };
        let dr = that.transpose() * dt;
        let (mu1s, mu2s) = (pc.mu1 * pc.mu1, pc.mu2 * pc.mu2);
        let ds = (dr * (mu1s * pc.r) + db * (mu2s * pc.b)) / pc.s;
        let drho = (dr * pc.r + db * pc.b) / pc.rho;
        let dtheta = (drho * pc.a - da * pc.rho) / (pc.a * pc.a + pc.rho * pc.rho);
        let kappa = pc.s / pc.rho;
        let dkappa = (ds * pc.rho - drho * pc.s) / (pc.rho * pc.rho);
        let dalpha = dkappa / (1.0 + kappa * kappa);

        let vf = n + pc.t * (mu1s / pc.s);
        let dvf = dn + (dt / pc.s - pc.t * ds / (pc.s * pc.s)) * mu1s;
        let vt = mu2s * pc.b / pc.s;
        let dvt = (db / pc.s - ds * (pc.b / (pc.s * pc.s))) * mu2s;

        match region {
            SupportRegion::Blend(lam) => {
                let dlam = dtheta / delta;
                let f = n + (vf - n) * lam;
                let df = dn + (vf - n) * dlam + (dvf - dn) * lam;
                (f, vt * lam, df, dlam * vt + dvt * lam)
            }
            SupportRegion::Rim => (vf, vt, dvf, dvt),
            SupportRegion::Shrink(lam) => {
                let dlam = (dalpha - dtheta) / delta;
                (
                    vf * lam,
                    vt * lam,
                    vf * dlam + dvf * lam,
                    dlam * vt + dvt * lam,
                )
            }
            SupportRegion::Tip | SupportRegion::Origin => unreachable!(),
        }
    };

    // z = (ū, b, n) as a function of (p, n).
    let ut = u.fixed_rows::<3>(3).into_owned();
    let mut jz = SMatrix::<f64, 7, 6>::zeros();
    jz.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&ut));
    jz.fixed_view_mut::<1, 3>(3, 3).copy_from(&ut.transpose());
    jz.fixed_view_mut::<3, 3>(4, 3)
        .copy_from(&Matrix3::identity());

    let df_pn = df * jz;
    let dtau_pn = dtau * jz;
    let mut d_torque = skew(&c.p) * df_pn + n * dtau_pn;
    {
        let mut dp = d_torque.fixed_view_mut::<3, 3>(0, 0);
        dp -= skew(&f);
    }
    {
        let mut dnn = d_torque.fixed_view_mut::<3, 3>(0, 3);
        dnn += Matrix3::identity() * tau;
    }
    let mut jacobian = Matrix6::zeros();
    jacobian.fixed_view_mut::<3, 6>(0, 0).copy_from(&df_pn);
    jacobian.fixed_view_mut::<3, 6>(3, 0).copy_from(&d_torque);

    let torque = c.p.cross(&f) + n * tau;
    ContactJacobian {
        wrench: Vec6::new(f.x, f.y, f.z, torque.x, torque.y, torque.z),
        region,
        jacobian,
    }
}

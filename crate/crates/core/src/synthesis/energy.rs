//! Energies of a posed rig against an object mesh and their gradients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rig::{Pose, Rig, RigState};
use crate::mesh::{SurfacePoint, TriMesh};
use crate::task::{task_energy_grad_with_directions, task_energy_of_contacts, TaskEnergyKind, TaskWrenchSpace};
use crate::wrench::{sample_unit_directions, Contact, EstimatorConfig, FrictionModel};
use crate::{GwsError, Result, Vec3, Vec6};

/// Energy weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub task: f64,
    pub distance: f64,
    pub penetration: f64,
    pub self_penetration: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            task: 1.0,
            distance: 100.0,
            penetration: 100.0,
            self_penetration: 100.0,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.task, self.distance, self.penetration, self.self_penetration];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(GwsError::invalid("energy weights must be finite and >= 0"))
        }
    }
}

/// A posed contact point projected onto the mesh.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectedContact {
    /// Rig contact point `x_i`.
    pub x: Vec3,
    pub surface: SurfacePoint,
    /// Contact at the nearest point with the interpolated inward normal.
    pub contact: Contact,
}

impl ProjectedContact {
    pub fn distance(&self) -> f64 {
        (self.x - self.surface.position).norm()
    }
}

/// Nearest surface point of every `x_i`, with a contact frame built from
/// the vertex-interpolated inward normal.
pub fn contact_projection(mesh: &TriMesh, xs: &[Vec3], friction: FrictionModel) -> Result<Vec<ProjectedContact>> {
    xs.iter()
        .map(|x| {
            let surface = mesh.nearest_point(x);
            let n = mesh.interpolated_inward_normal(&surface);
            let contact = Contact::new(surface.position, n, friction)?;
            Ok(ProjectedContact { x: *x, surface, contact })
        })
        .collect()
}

/// `Σ‖x_i − p_i‖²`.
pub fn distance_energy(xs: &[Vec3], ps: &[Vec3]) -> f64 {
    xs.iter().zip(ps).map(|(x, p)| (x - p).norm_squared()).sum()
}

/// Object and self penetration of the rig spheres.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Penetration {
    /// `Σ max(0, r − sd(c))²` over rig spheres.
    pub object: f64,
    /// `Σ max(0, r_i + r_j − ‖c_i − c_j‖)²` over non-adjacent pairs.
    pub self_contact: f64,
    /// Deepest sphere penetration into the object.
    pub max_depth: f64,
    /// The mesh is not closed, so distances are unsigned and only spheres
    /// whose surface crosses the mesh register.
    pub unsigned: bool,
}

pub fn penetration_energy(rig: &Rig, pose: &Pose, mesh: &TriMesh) -> Penetration {
    let mut out = Penetration {
        unsigned: !mesh.is_watertight(),
        ..Default::default()
    };
    for (k, c) in pose.spheres.iter().enumerate() {
        let depth = (rig.radius(k) - mesh.signed_distance(c)).max(0.0);
        out.object += depth * depth;
        out.max_depth = out.max_depth.max(depth);
    }
    for &(i, j) in rig.self_pairs() {
        let overlap = (rig.radius(i) + rig.radius(j) - (pose.spheres[i] - pose.spheres[j]).norm()).max(0.0);
        out.self_contact += overlap * overlap;
    }
    out
}

/// One value per energy term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Terms {
    pub task: f64,
    pub distance: f64,
    pub penetration: f64,
    pub self_penetration: f64,
}

impl Terms {
    pub fn sum(&self) -> f64 {
        self.task + self.distance + self.penetration + self.self_penetration
    }
}

/// Raw terms, their weighted contributions and the total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub raw: Terms,
    pub weighted: Terms,
    pub total: f64,
}

/// Full evaluation of a rig state.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub pose: Pose,
    pub contacts: Vec<ProjectedContact>,
    pub penetration: Penetration,
    pub breakdown: EnergyBreakdown,
}

/// Everything needed to evaluate the synthesis energy of a rig state.
///
/// Geometric terms are divided by the squared bounding radius of the mesh
/// so the weights do not depend on object size. Gradients are taken in
/// scaled tangent coordinates `y = (Δt/R, ω, Δθ)`.
#[derive(Clone, Debug)]
pub struct EnergyModel<'a> {
    pub rig: &'a Rig,
    pub mesh: &'a TriMesh,
    pub tws: TaskWrenchSpace,
    pub friction: FrictionModel,
    pub estimator: EstimatorConfig,
    pub kind: TaskEnergyKind,
    pub weights: Weights,
    /// Finite-difference step in scaled tangent coordinates.
    pub fd_step: f64,
    dirs: Vec<Vec6>,
    radius: f64,
}

impl<'a> EnergyModel<'a> {
    pub fn new(
        rig: &'a Rig,
        mesh: &'a TriMesh,
        tws: TaskWrenchSpace,
        friction: FrictionModel,
        estimator: EstimatorConfig,
        weights: Weights,
    ) -> Result<Self> {
        friction.validate()?;
        estimator.validate()?;
        weights.validate()?;
        let probe = Contact::new(Vec3::zeros(), Vec3::z(), friction)?;
        estimator.validate_for(&[probe])?;
        let radius = mesh.bounding_radius();
        if !(radius > 0.0) {
            return Err(GwsError::invalid("mesh has zero extent"));
        }
        Ok(EnergyModel {
            rig,
            mesh,
            tws,
            friction,
            estimator,
            kind: TaskEnergyKind::Cosine,
            weights,
            fd_step: 1e-4,
            dirs: sample_unit_directions(estimator.k, estimator.seed),
            radius,
        })
    }

    /// Mesh bounding radius `R`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn directions(&self) -> &[Vec6] {
        &self.dirs
    }

    /// Moves `q` by scaled tangent vector `y`.
    pub fn step(&self, q: &RigState, y: &[f64]) -> RigState {
        let mut v = y.to_vec();
        for t in &mut v[..3] {
            *t *= self.radius;
        }
        q.retract(&v, self.rig.joint_limits())
    }

    fn check(&self, q: &RigState) -> Result<()> {
        if q.joints.len() != self.rig.joint_count() {
            return Err(GwsError::invalid(format!(
                "state has {} joint values, rig has {} joints",
                q.joints.len(),
                self.rig.joint_count()
            )));
        }
        Ok(())
    }

    fn task_value(&self, contacts: &[ProjectedContact]) -> Result<f64> {
        let cs: Vec<Contact> = contacts.iter().map(|c| c.contact).collect();
        task_energy_of_contacts(&cs, &self.dirs, &self.tws, &self.estimator, self.kind)
    }

    fn geometric(&self, pose: &Pose, contacts: &[ProjectedContact]) -> (Terms, Penetration) {
        let ps: Vec<Vec3> = contacts.iter().map(|c| c.surface.position).collect();
        let pen = penetration_energy(self.rig, pose, self.mesh);
        let raw = Terms {
            task: 0.0,
            distance: distance_energy(&pose.contacts, &ps),
            penetration: pen.object,
            self_penetration: pen.self_contact,
        };
        (raw, pen)
    }

    fn weigh(&self, raw: Terms) -> EnergyBreakdown {
        let r2 = self.radius * self.radius;
        let w = &self.weights;
        let weighted = Terms {
            task: w.task * raw.task,
            distance: w.distance * raw.distance / r2,
            penetration: w.penetration * raw.penetration / r2,
            self_penetration: w.self_penetration * raw.self_penetration / r2,
        };
        EnergyBreakdown {
            raw,
            weighted,
            total: weighted.sum(),
        }
    }

    pub fn evaluate(&self, q: &RigState) -> Result<Evaluation> {
        self.check(q)?;
        let pose = self.rig.forward_kinematics(q);
        let contacts = contact_projection(self.mesh, &pose.contacts, self.friction)?;
        let (mut raw, penetration) = self.geometric(&pose, &contacts);
        raw.task = self.task_value(&contacts)?;
        let breakdown = self.weigh(raw);
        Ok(Evaluation {
            pose,
            contacts,
            penetration,
            breakdown,
        })
    }

    pub fn total(&self, q: &RigState) -> Result<f64> {
        Ok(self.evaluate(q)?.breakdown.total)
    }

    /// Weighted distance and penetration terms only.
    fn geometric_total(&self, q: &RigState) -> Result<f64> {
        let pose = self.rig.forward_kinematics(q);
        let contacts = contact_projection(self.mesh, &pose.contacts, self.friction)?;
        let (raw, _) = self.geometric(&pose, &contacts);
        Ok(self.weigh(raw).total)
    }

    fn central<F>(&self, q: &RigState, f: F) -> Result<Vec<Vec<f64>>>
    where
        F: Fn(&RigState) -> Result<Vec<f64>> + Sync,
    {
        self.central_with(q, self.fd_step, f)
    }

    fn central_with<F>(&self, q: &RigState, h: f64, f: F) -> Result<Vec<Vec<f64>>>
    where
        F: Fn(&RigState) -> Result<Vec<f64>> + Sync,
    {
        (0..q.tangent_dim())
            .into_par_iter()
            .map(|j| {
                let mut y = vec![0.0; q.tangent_dim()];
                y[j] = h;
                let plus = f(&self.step(q, &y))?;
                y[j] = -h;
                let minus = f(&self.step(q, &y))?;
                Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect())
            })
            .collect()
    }

    /// Central finite differences of the total energy in every scaled
    /// tangent coordinate.
    pub fn gradient_fd(&self, q: &RigState) -> Result<Vec<f64>> {
        self.gradient_fd_with(q, self.fd_step)
    }

    /// [`gradient_fd`](Self::gradient_fd) with an explicit step.
    pub fn gradient_fd_with(&self, q: &RigState, h: f64) -> Result<Vec<f64>> {
        self.check(q)?;
        let cols = self.central_with(q, h, |s| Ok(vec![self.total(s)?]))?;
        Ok(cols.into_iter().map(|c| c[0]).collect())
    }

    /// Analytic task-energy gradient with respect to contact positions and
    /// normals, chained through finite-difference derivatives of the
    /// nearest-point map and of forward kinematics; the geometric terms
    /// are differenced directly.
    pub fn gradient(&self, q: &RigState) -> Result<Vec<f64>> {
        self.check(q)?;
        let mut grad: Vec<f64> = self
            .central(q, |s| Ok(vec![self.geometric_total(s)?]))?
            .into_iter()
            .map(|c| c[0])
            .collect();
        if self.weights.task == 0.0 {
            return Ok(grad);
        }
        let pose = self.rig.forward_kinematics(q);
        let contacts = contact_projection(self.mesh, &pose.contacts, self.friction)?;
        let cs: Vec<Contact> = contacts.iter().map(|c| c.contact).collect();
        let tg = task_energy_grad_with_directions(&cs, &self.dirs, &self.tws, &self.estimator, self.kind)?;

        // dE_t/dx_i through the projection
        let hx = self.fd_step * self.radius;
        let de_dx: Vec<Vec3> = contacts
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let mut g = Vec3::zeros();
                for k in 0..3 {
                    let mut dx = Vec3::zeros();
                    dx[k] = hx;
                    let a = self.mesh.nearest_point(&(c.x + dx));
                    let b = self.mesh.nearest_point(&(c.x - dx));
                    let dp = (a.position - b.position) / (2.0 * hx);
                    let na = self.mesh.interpolated_inward_normal(&a);
                    let nb = self.mesh.interpolated_inward_normal(&b);
                    let dn = (na - nb) / (2.0 * hx);
                    g[k] = tg.grad_p[i].dot(&dp) + tg.grad_n[i].dot(&dn);
                }
                g
            })
            .collect();

        let dx_dy = self.central(q, |s| {
            Ok(self.rig.forward_kinematics(s).contacts.iter().flat_map(|x| x.iter().copied()).collect())
        })?;
        for (j, col) in dx_dy.iter().enumerate() {
            let dot: f64 = de_dx
                .iter()
                .enumerate()
                .map(|(i, g)| g.dot(&Vec3::new(col[3 * i], col[3 * i + 1], col[3 * i + 2])))
                .sum();
            grad[j] += self.weights.task * dot;
        }
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives::icosphere;
    use crate::synthesis::rig::{tripod3, Rig};
    use nalgebra::UnitQuaternion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere(r: f64) -> TriMesh {
        let (v, t) = icosphere(r, 3);
        TriMesh::new(v, t).unwrap()
    }

    fn one_sphere_rig(radius: f64) -> Rig {
        let mut spec = tripod3();
        spec.spheres.truncate(1);
        spec.spheres[0].radius = radius;
        spec.contacts = vec![0];
        Rig::new(spec).unwrap()
    }

    fn model<'a>(rig: &'a Rig, mesh: &'a TriMesh, weights: Weights) -> EnergyModel<'a> {
        EnergyModel::new(
            rig,
            mesh,
            TaskWrenchSpace::new(Vec6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0), 15f64.to_radians()).unwrap(),
            FrictionModel::pcf(0.5).unwrap(),
            EstimatorConfig::default(),
            weights,
        )
        .unwrap()
    }

    fn state(t: Vec3, joints: f64) -> RigState {
        RigState::new(t, UnitQuaternion::identity(), vec![joints; 6])
    }

    #[test]
    fn projection_examples() {
        let mesh = sphere(1.0);
        let f = FrictionModel::pcf(0.5).unwrap();
        let on = mesh.vertices()[7];
        let out = contact_projection(&mesh, &[on, Vec3::new(0.0, 0.0, 3.0)], f).unwrap();
        assert!((out[0].surface.position - on).norm() < 1e-12);
        assert!(out[0].contact.n.dot(&(-on)) > 0.99);
        assert!((out[1].surface.position - Vec3::z()).norm() < 1e-9);
        let ps: Vec<Vec3> = out.iter().map(|c| c.surface.position).collect();
        let d = distance_energy(&[on, Vec3::new(0.0, 0.0, 3.0)], &ps);
        assert!((d - out[1].distance().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn distance_energy_arithmetic_and_gradient() {
        let x = Vec3::new(0.3, 0.0, 0.0);
        let p = Vec3::new(0.2, 0.0, 0.0);
        assert!((distance_energy(&[x], &[p]) - 0.01).abs() < 1e-15);
        assert_eq!(distance_energy(&[p], &[p]), 0.0);
        let h = 1e-6;
        let x = Vec3::new(0.3, -0.1, 0.25);
        for k in 0..3 {
            let mut dx = Vec3::zeros();
            dx[k] = h;
            let fd = (distance_energy(&[x + dx], &[p]) - distance_energy(&[x - dx], &[p])) / (2.0 * h);
            assert!((fd - 2.0 * (x - p)[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn penetration_examples() {
        let (v, t) = icosphere(1.0, 5);
        let mesh = TriMesh::new(v, t).unwrap();
        let rig = one_sphere_rig(0.01);
        let at = |c: Vec3| Pose {
            links: vec![],
            spheres: vec![c],
            contacts: vec![c],
            clamped: false,
        };
        let centre = penetration_energy(&rig, &at(Vec3::zeros()), &mesh);
        // the icosphere's inradius is slightly below 1
        assert!((centre.object - 1.0201).abs() < 1e-3, "{}", centre.object);
        assert_eq!(penetration_energy(&rig, &at(Vec3::new(0.0, 0.0, 5.0)), &mesh).object, 0.0);
        let mut last = f64::INFINITY;
        for k in 0..=40 {
            let c = Vec3::new(0.0, 0.0, 0.5 + 0.5 * k as f64 / 40.0);
            let e = penetration_energy(&rig, &at(c), &mesh).object;
            assert!(e < last);
            last = e;
        }
    }

    #[test]
    fn rig_far_away_has_no_penetration() {
        let mesh = sphere(0.04);
        let rig = Rig::new(tripod3()).unwrap();
        let pose = rig.forward_kinematics(&state(Vec3::new(0.0, 0.0, 1.0), 0.0));
        let p = penetration_energy(&rig, &pose, &mesh);
        assert_eq!((p.object, p.self_contact, p.max_depth), (0.0, 0.0, 0.0));
    }

    #[test]
    fn weights_select_terms() {
        let mesh = sphere(0.04);
        let rig = Rig::new(tripod3()).unwrap();
        let q = state(Vec3::new(0.003, -0.002, 0.07), 0.4);
        let only_task = model(&rig, &mesh, Weights { task: 1.0, distance: 0.0, penetration: 0.0, self_penetration: 0.0 });
        let e = only_task.evaluate(&q).unwrap();
        let cs: Vec<Contact> = e.contacts.iter().map(|c| c.contact).collect();
        let direct = task_energy_of_contacts(&cs, only_task.directions(), &only_task.tws, &only_task.estimator, TaskEnergyKind::Cosine).unwrap();
        assert_eq!(e.breakdown.total, direct);

        let full = model(&rig, &mesh, Weights::default()).evaluate(&q).unwrap();
        assert!((full.breakdown.weighted.sum() - full.breakdown.total).abs() < 1e-12);
        assert!(full.breakdown.raw.distance > 0.0);

        // contacts placed on the surface by moving the rig onto its projections
        let on_surface = Pose {
            contacts: full.contacts.iter().map(|c| c.surface.position).collect(),
            ..full.pose.clone()
        };
        let proj = contact_projection(&mesh, &on_surface.contacts, only_task.friction).unwrap();
        let ps: Vec<Vec3> = proj.iter().map(|c| c.surface.position).collect();
        assert!(distance_energy(&on_surface.contacts, &ps) < 1e-20);
    }

    #[test]
    fn hybrid_gradient_matches_full_fd() {
        let mesh = sphere(0.04);
        let rig = Rig::new(tripod3()).unwrap();
        let m = model(&rig, &mesh, Weights::default());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        for _ in 0..10 {
            let t = Vec3::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01), rng.gen_range(0.06..0.08));
            let rot = UnitQuaternion::from_scaled_axis(Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.5..0.5)));
            let joints = (0..6).map(|_| rng.gen_range(0.1..1.0)).collect();
            let q = RigState::new(t, rot, joints);
            let a = m.gradient(&q).unwrap();
            let b = m.gradient_fd(&q).unwrap();
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(dot / (na * nb) >= 0.99, "cosine {} at {q:?}", dot / (na * nb));
            assert_eq!(a, m.gradient(&q).unwrap());
            checked += 1;
        }
        assert_eq!(checked, 10);
    }
}

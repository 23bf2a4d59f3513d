//! Bundled desk-scale synthesis tasks.

use std::f64::consts::PI;

use nalgebra::UnitQuaternion;

use super::energy::Weights;
use super::optimize::SynthesisConfig;
use super::rig::{bundled, RigSpec};
use crate::mesh::primitives::{cuboid_grid, cylinder_rings, icosphere};
use crate::mesh::TriMesh;
use crate::task::TaskWrenchSpace;
use crate::wrench::FrictionModel;
use crate::{GwsError, Result, Vec3, Vec6};

pub const BUNDLED_TASKS: [&str; 4] = ["lift-sphere", "screw-knob-proxy", "push-box", "force-closure-sphere"];

/// Friction coefficient of the bundled tasks.
pub const TASK_MU: f64 = 0.5;

/// Object, rig, task wrench space and nominal root pose of a synthesis task.
#[derive(Clone, Debug)]
pub struct SynthesisTask {
    pub name: String,
    pub mesh: TriMesh,
    pub rig: RigSpec,
    pub tws: TaskWrenchSpace,
    pub friction: FrictionModel,
    pub root_translation: Vec3,
    pub root_rotation: UnitQuaternion<f64>,
    /// Weights the bundled tasks are run with.
    pub weights: Weights,
    /// Initial root perturbation scale.
    pub perturbation: f64,
}

impl SynthesisTask {
    /// Default optimizer settings with this task's weights and perturbation.
    pub fn config(&self, seed: u64) -> SynthesisConfig {
        SynthesisConfig {
            weights: self.weights,
            perturbation: self.perturbation,
            seed,
            ..SynthesisConfig::default()
        }
    }
}

/// Weights of the bundled tasks: the task term doubled and penetration
/// tripled relative to [`Weights::default`].
pub fn task_weights() -> Weights {
    Weights {
        task: 2.0,
        penetration: 300.0,
        ..Weights::default()
    }
}

/// Initial perturbation of the bundled tasks.
pub const TASK_PERTURBATION: f64 = 0.25;

fn axis(i: usize) -> Vec6 {
    let mut w = Vec6::zeros();
    w[i.min(5)] = 1.0;
    w
}

fn task(name: &str, mesh: TriMesh, rig: &str, tws: TaskWrenchSpace, palm_height: f64) -> Result<SynthesisTask> {
    Ok(SynthesisTask {
        name: name.into(),
        mesh,
        rig: bundled(rig)?,
        tws,
        friction: FrictionModel::pcf(TASK_MU)?,
        root_translation: Vec3::new(0.0, 0.0, palm_height),
        root_rotation: UnitQuaternion::identity(),
        weights: task_weights(),
        perturbation: TASK_PERTURBATION,
    })
}

fn sector(w: Vec6) -> Result<TaskWrenchSpace> {
    TaskWrenchSpace::new(w, 15f64.to_radians())
}

/// Sphere of radius 4 cm, lifted against gravity with a tripod.
pub fn lift_sphere() -> Result<SynthesisTask> {
    let (v, t) = icosphere(0.04, 3);
    task("lift-sphere", TriMesh::new(v, t)?, "tripod3", sector(axis(2))?, 0.075)
}

/// Knob-sized cylinder turned about its axis with a tripod.
pub fn screw_knob_proxy() -> Result<SynthesisTask> {
    let (v, t) = cylinder_rings(0.03, 0.02, 48, 4, 4);
    let mut w = Vec6::zeros();
    w[5] = 1.0;
    task("screw-knob-proxy", TriMesh::new(v, t)?, "tripod3", sector(w)?, 0.08)
}

/// Box pushed along −x with a tripod.
pub fn push_box() -> Result<SynthesisTask> {
    let (v, t) = cuboid_grid(Vec3::new(0.04, 0.03, 0.02), 4);
    task("push-box", TriMesh::new(v, t)?, "tripod3", sector(-axis(0))?, 0.08)
}

/// Sphere held in force closure by five fingertips.
pub fn force_closure_sphere() -> Result<SynthesisTask> {
    let (v, t) = icosphere(0.04, 3);
    let tws = TaskWrenchSpace::new(axis(2), PI)?;
    task("force-closure-sphere", TriMesh::new(v, t)?, "fan5", tws, 0.075)
}

pub fn bundled_task(name: &str) -> Result<SynthesisTask> {
    match name {
        "lift-sphere" => lift_sphere(),
        "screw-knob-proxy" => screw_knob_proxy(),
        "push-box" => push_box(),
        "force-closure-sphere" => force_closure_sphere(),
        other => Err(GwsError::invalid(format!(
            "unknown bundled task {other:?} ({})",
            BUNDLED_TASKS.join(", ")
        ))),
    }
}

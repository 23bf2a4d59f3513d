//! Task-oriented contact synthesis on a triangle mesh with an articulated rig.

pub mod energy;
pub mod optimize;
pub mod rig;
pub mod tasks;

pub use energy::{contact_projection, distance_energy, penetration_energy, EnergyBreakdown, EnergyModel, Penetration, Weights};
pub use optimize::{optimize, optimize_from, run_batch, run_task, validate, SynthesisConfig, SynthesisResult, Verdict};
pub use rig::{forward_kinematics, Rig, RigSpec, RigState};
pub use tasks::{bundled_task, task_weights, SynthesisTask, BUNDLED_TASKS};

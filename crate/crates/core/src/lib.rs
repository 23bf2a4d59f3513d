//! Grasp wrench space estimation and task-oriented contact synthesis.
//!
//! The crate is organised around a support-mapping estimator of the grasp
//! wrench boundary ([`wrench`]), a hyper-spherical-sector task wrench space
//! with a cosine alignment energy ([`task`]), an independent linear-programming
//! oracle over discretized friction cones ([`oracle`]), evaluation metrics
//! ([`metrics`]), triangle-mesh queries ([`mesh`]) and a gradient-based
//! synthesis loop for a small articulated contact rig ([`synthesis`]).
//!
//! ```
//! use graspwrench::wrench::{Contact, EstimatorConfig, FrictionModel, estimate_boundary};
//! use nalgebra::Vector3;
//!
//! let friction = FrictionModel::pcf(0.5).unwrap();
//! let contacts = vec![
//!     Contact::new(Vector3::new(1.0, 0.0, 0.0), Vector3::new(-1.0, 0.0, 0.0), friction).unwrap(),
//!     Contact::new(Vector3::new(-1.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), friction).unwrap(),
//! ];
//! let config = EstimatorConfig { k: 64, ..EstimatorConfig::default() };
//! let set = estimate_boundary(&contacts, &config).unwrap();
//! assert_eq!(set.samples.len(), 64);
//! ```

pub mod bench;
pub mod cli;
pub mod error;
pub mod mesh;
pub mod metrics;
pub mod oracle;
pub mod synthesis;
pub mod task;
pub mod wrench;

pub use error::{GwsError, Result};

/// Shorthand for the 3-vectors used throughout (positions, normals, forces).
pub type Vec3 = nalgebra::Vector3<f64>;
/// Soft-finger force coordinates (normal, two tangential, torsional).
pub type Vec4 = nalgebra::Vector4<f64>;
/// Wrench ordered as (force_x, force_y, force_z, torque_x, torque_y, torque_z).
pub type Vec6 = nalgebra::Vector6<f64>;

//! Articulated contact rigs: a 6-DoF root carrying a tree of fixed,
//! revolute and prismatic links with collision spheres.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Isometry3, Rotation3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::{GwsError, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointType {
    Fixed,
    Revolute,
    Prismatic,
}

/// Placement of a link's joint frame in its parent's frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Origin {
    pub xyz: [f64; 3],
    /// Roll, pitch, yaw in radians.
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl Origin {
    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::new(self.xyz[0], self.xyz[1], self.xyz[2]),
            UnitQuaternion::from_euler_angles(self.rpy[0], self.rpy[1], self.rpy[2]),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    /// `None` for the root link, which follows the rig's 6-DoF pose.
    #[serde(default)]
    pub parent: Option<String>,
    pub joint: JointType,
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    #[serde(default)]
    pub origin: Origin,
    #[serde(default)]
    pub limits: [f64; 2],
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    pub link: String,
    /// Centre in the link frame.
    pub center: [f64; 3],
    pub radius: f64,
}

/// Rig description as stored in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigSpec {
    pub name: String,
    /// Links in an order where every parent precedes its children.
    pub links: Vec<LinkSpec>,
    pub spheres: Vec<SphereSpec>,
    /// Indices into `spheres` of the designated contact spheres; their
    /// centres are the rest contact points `x_rest`.
    pub contacts: Vec<usize>,
}

/// Validated rig with resolved indices.
#[derive(Clone, Debug)]
pub struct Rig {
    pub spec: RigSpec,
    parents: Vec<Option<usize>>,
    origins: Vec<Isometry3<f64>>,
    axes: Vec<Unit<Vector3<f64>>>,
    /// Joint index of each link, `None` for fixed joints and the root.
    joint_of: Vec<Option<usize>>,
    limits: Vec<[f64; 2]>,
    sphere_link: Vec<usize>,
    /// Sphere pairs checked for self-penetration.
    pairs: Vec<(usize, usize)>,
}

impl Rig {
    pub fn new(spec: RigSpec) -> Result<Self> {
        if spec.links.is_empty() {
            return Err(GwsError::invalid("rig needs at least one link"));
        }
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut parents = Vec::new();
        let mut origins = Vec::new();
        let mut axes = Vec::new();
        let mut joint_of = Vec::new();
        let mut limits = Vec::new();
        for (k, l) in spec.links.iter().enumerate() {
            if index.insert(&l.name, k).is_some() {
                return Err(GwsError::invalid(format!("duplicate link name {:?}", l.name)));
            }
            let parent = match (&l.parent, k) {
                (None, 0) => None,
                (None, _) => return Err(GwsError::invalid(format!("link {:?} has no parent; only the first link may be the root", l.name))),
                (Some(_), 0) => return Err(GwsError::invalid("the first link must be the root")),
                (Some(p), _) => Some(*index.get(p.as_str()).filter(|&&pi| pi < k).ok_or_else(|| {
                    GwsError::invalid(format!("link {:?}: parent {p:?} is not defined before it", l.name))
                })?),
            };
            parents.push(parent);
            origins.push(l.origin.isometry());
            let axis = Vec3::from(l.axis);
            let moving = parent.is_some() && l.joint != JointType::Fixed;
            if moving && axis.norm() < 1e-12 {
                return Err(GwsError::invalid(format!("link {:?}: zero joint axis", l.name)));
            }
            axes.push(Unit::new_normalize(if axis.norm() < 1e-12 { Vec3::z() } else { axis }));
            if moving {
                if !(l.limits[0] <= l.limits[1]) {
                    return Err(GwsError::invalid(format!("link {:?}: joint limits lo > hi", l.name)));
                }
                joint_of.push(Some(limits.len()));
                limits.push(l.limits);
            } else {
                joint_of.push(None);
            }
        }
        let mut sphere_link = Vec::new();
        for (i, s) in spec.spheres.iter().enumerate() {
            let li = *index
                .get(s.link.as_str())
                .ok_or_else(|| GwsError::invalid(format!("sphere {i}: unknown link {:?}", s.link)))?;
            if !(s.radius > 0.0) {
                return Err(GwsError::invalid(format!("sphere {i}: radius must be positive")));
            }
            sphere_link.push(li);
        }
        if spec.contacts.is_empty() {
            return Err(GwsError::invalid("rig needs at least one designated contact sphere"));
        }
        if let Some(c) = spec.contacts.iter().find(|&&c| c >= spec.spheres.len()) {
            return Err(GwsError::invalid(format!("contact sphere index {c} out of range")));
        }
        let adjacent = |a: usize, b: usize| a == b || parents[a] == Some(b) || parents[b] == Some(a);
        let mut pairs = Vec::new();
        for i in 0..sphere_link.len() {
            for j in i + 1..sphere_link.len() {
                if !adjacent(sphere_link[i], sphere_link[j]) {
                    pairs.push((i, j));
                }
            }
        }
        Ok(Rig {
            spec,
            parents,
            origins,
            axes,
            joint_of,
            limits,
            sphere_link,
            pairs,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: RigSpec = serde_path_to_error::deserialize(de)
            .map_err(|e| GwsError::invalid(format!("rig spec at {}: {}", e.path(), e.inner())))?;
        Self::new(spec)
    }

    pub fn joint_count(&self) -> usize {
        self.limits.len()
    }

    pub fn joint_limits(&self) -> &[[f64; 2]] {
        &self.limits
    }

    pub fn sphere_count(&self) -> usize {
        self.sphere_link.len()
    }

    pub fn radius(&self, sphere: usize) -> f64 {
        self.spec.spheres[sphere].radius
    }

    pub fn self_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Link transforms, world sphere centres and posed contact points.
    pub fn forward_kinematics(&self, q: &RigState) -> Pose {
        let root = Isometry3::from_parts(Translation3::from(q.translation), q.rotation);
        let mut clamped = false;
        let mut links: Vec<Isometry3<f64>> = Vec::with_capacity(self.parents.len());
        for k in 0..self.parents.len() {
            let base = match self.parents[k] {
                None => root * self.origins[k],
                Some(p) => links[p] * self.origins[k],
            };
            let motion = match self.joint_of[k] {
                None => Isometry3::identity(),
                Some(j) => {
                    let [lo, hi] = self.limits[j];
                    let raw = q.joints.get(j).copied().unwrap_or(0.0);
                    let v = raw.clamp(lo, hi);
                    clamped |= v != raw;
                    match self.spec.links[k].joint {
                        JointType::Revolute => Isometry3::from_parts(
                            Translation3::identity(),
                            UnitQuaternion::from_axis_angle(&self.axes[k], v),
                        ),
                        JointType::Prismatic => Isometry3::from_parts(
                            Translation3::from(self.axes[k].into_inner() * v),
                            UnitQuaternion::identity(),
                        ),
                        JointType::Fixed => Isometry3::identity(),
                    }
                }
            };
            links.push(base * motion);
        }
        let spheres: Vec<Vec3> = self
            .spec
            .spheres
            .iter()
            .zip(&self.sphere_link)
            .map(|(s, &l)| links[l].transform_point(&Vec3::from(s.center).into()).coords)
            .collect();
        let contacts = self.spec.contacts.iter().map(|&c| spheres[c]).collect();
        Pose {
            links,
            spheres,
            contacts,
            clamped,
        }
    }

    /// Zero joints clamped into their limits.
    pub fn rest_joints(&self) -> Vec<f64> {
        self.limits.iter().map(|[lo, hi]| 0f64.clamp(*lo, *hi)).collect()
    }
}

/// Link transforms and posed contact points of `q` on `rig`.
pub fn forward_kinematics(rig: &Rig, q: &RigState) -> Pose {
    rig.forward_kinematics(q)
}

/// Output of forward kinematics.
#[derive(Clone, Debug)]
pub struct Pose {
    pub links: Vec<Isometry3<f64>>,
    pub spheres: Vec<Vec3>,
    /// Posed contact points `x_i`.
    pub contacts: Vec<Vec3>,
    /// Some joint value was outside its limits and was clamped.
    pub clamped: bool,
}

/// Rig configuration: root translation, root rotation and joint values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigState {
    pub translation: Vec3,
    pub rotation: UnitQuaternion<f64>,
    pub joints: Vec<f64>,
}

impl RigState {
    pub fn new(translation: Vec3, rotation: UnitQuaternion<f64>, joints: Vec<f64>) -> Self {
        RigState {
            translation,
            rotation,
            joints,
        }
    }

    /// Stored coordinates: translation, quaternion and joints, `7 + J`.
    pub fn dim(&self) -> usize {
        7 + self.joints.len()
    }

    /// Tangent-space dimension `6 + J` used by the optimizer.
    pub fn tangent_dim(&self) -> usize {
        6 + self.joints.len()
    }

    /// Moves along tangent vector `v = (Δt, ω, Δθ)`: translation added,
    /// rotation left-multiplied by `exp(ω)` and renormalized, joints added
    /// and clamped to `limits`.
    pub fn retract(&self, v: &[f64], limits: &[[f64; 2]]) -> RigState {
        let dt = Vec3::new(v[0], v[1], v[2]);
        let w = Vec3::new(v[3], v[4], v[5]);
        let rot = UnitQuaternion::from_scaled_axis(w) * self.rotation;
        let joints = self
            .joints
            .iter()
            .enumerate()
            .map(|(j, x)| {
                let y = x + v[6 + j];
                let [lo, hi] = limits[j];
                y.clamp(lo, hi)
            })
            .collect();
        RigState {
            translation: self.translation + dt,
            rotation: UnitQuaternion::new_normalize(rot.into_inner()),
            joints,
        }
    }
}

/// Finger geometry shared by the bundled rigs.
#[derive(Clone, Copy, Debug)]
pub struct FingerLayout {
    /// Radius of the ring of finger bases on the palm.
    pub ring: f64,
    pub proximal: f64,
    pub distal: f64,
    pub tip_radius: f64,
    pub link_radius: f64,
}

impl Default for FingerLayout {
    fn default() -> Self {
        FingerLayout {
            ring: 0.045,
            proximal: 0.045,
            distal: 0.035,
            tip_radius: 0.008,
            link_radius: 0.008,
        }
    }
}

/// Palm at the root with fingers hanging along −z from a ring of bases at
/// the given azimuths. Each finger has two revolute joints whose positive
/// direction curls the tip toward the palm axis.
pub fn ring_rig(name: &str, azimuths: &[f64], f: FingerLayout) -> RigSpec {
    let mut links = vec![LinkSpec {
        name: "palm".into(),
        parent: None,
        joint: JointType::Fixed,
        axis: default_axis(),
        origin: Origin::default(),
        limits: [0.0, 0.0],
    }];
    let mut spheres = vec![SphereSpec {
        link: "palm".into(),
        center: [0.0, 0.0, 0.0],
        radius: 0.6 * f.ring,
    }];
    let mut contacts = Vec::new();
    for (i, &phi) in azimuths.iter().enumerate() {
        let prox = format!("f{i}_proximal");
        let dist = format!("f{i}_distal");
        links.push(LinkSpec {
            name: prox.clone(),
            parent: Some("palm".into()),
            joint: JointType::Revolute,
            axis: [0.0, 1.0, 0.0],
            origin: Origin {
                xyz: [f.ring * phi.cos(), f.ring * phi.sin(), 0.0],
                rpy: [0.0, 0.0, phi],
            },
            limits: [-0.6, 1.6],
        });
        links.push(LinkSpec {
            name: dist.clone(),
            parent: Some(prox.clone()),
            joint: JointType::Revolute,
            axis: [0.0, 1.0, 0.0],
            origin: Origin {
                xyz: [0.0, 0.0, -f.proximal],
                rpy: [0.0, 0.0, 0.0],
            },
            limits: [0.0, 1.6],
        });
        spheres.push(SphereSpec {
            link: prox,
            center: [0.0, 0.0, -0.5 * f.proximal],
            radius: f.link_radius,
        });
        spheres.push(SphereSpec {
            link: dist,
            center: [0.0, 0.0, -f.distal],
            radius: f.tip_radius,
        });
        contacts.push(spheres.len() - 1);
    }
    RigSpec {
        name: name.into(),
        links,
        spheres,
        contacts,
    }
}

fn evenly(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
}

/// Two opposed fingers.
pub fn pinch2() -> RigSpec {
    ring_rig("pinch2", &evenly(2), FingerLayout::default())
}

/// Three fingers at 120°.
pub fn tripod3() -> RigSpec {
    ring_rig("tripod3", &evenly(3), FingerLayout::default())
}

/// Five fingers spread around the palm.
pub fn fan5() -> RigSpec {
    ring_rig("fan5", &evenly(5), FingerLayout::default())
}

/// Bundled rig by name.
pub fn bundled(name: &str) -> Result<RigSpec> {
    match name {
        "pinch2" => Ok(pinch2()),
        "tripod3" => Ok(tripod3()),
        "fan5" => Ok(fan5()),
        other => Err(GwsError::invalid(format!("unknown bundled rig {other:?} (pinch2, tripod3, fan5)"))),
    }
}

/// Rotation taking the rig's −z finger direction to `down`.
pub fn facing(down: &Vec3) -> UnitQuaternion<f64> {
    let r = Rotation3::rotation_between(&-Vec3::z(), down).unwrap_or_else(|| Rotation3::from_axis_angle(&Vec3::x_axis(), PI));
    UnitQuaternion::from_rotation_matrix(&r)
}

//! JSON task configuration shared by the subcommands.

use std::path::{Path, PathBuf};

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::MeshSource;
use crate::mesh::TriMesh;
use crate::synthesis::optimize::{SynthEstimator, SynthesisConfig};
use crate::synthesis::tasks::{bundled_task, SynthesisTask};
use crate::synthesis::{rig, Rig, Weights};
use crate::task::TaskWrenchSpace;
use crate::wrench::{Contact, EstimatorConfig, FrictionModel};
use crate::{GwsError, Result, Vec3, Vec6};

/// Version tag written into every emitted artifact.
pub const SCHEMA: &str = "graspwrench/1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactModel {
    #[default]
    Pcf,
    Sfc,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorBlock {
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpn: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwsBlock {
    pub w_t: [f64; 6],
    pub gamma_deg: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSpec {
    pub p: [f64; 3],
    /// Inward normal; need not be unit length.
    pub n: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitPose {
    pub translation: [f64; 3],
    #[serde(default)]
    pub rpy_deg: [f64; 3],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shrink: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_backtracks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// File for single-artifact commands, directory for `synth`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

/// Configuration file accepted by every subcommand.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    #[serde(default)]
    pub seed: u64,
    /// Bundled synthesis task supplying mesh, rig, sector, friction, pose
    /// and weights; explicit fields override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact_model: Option<ContactModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu2: Option<f64>,
    #[serde(default)]
    pub estimator: EstimatorBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tws: Option<TwsBlock>,
    /// OBJ path relative to the config file, or `builtin:<name>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contacts: Option<Vec<ContactSpec>>,
    /// Bundled rig name or rig JSON path relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rig: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitPose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<f64>,
    #[serde(default)]
    pub optimizer: OptimizerBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub k: Option<usize>,
    pub delta_deg: Option<f64>,
    pub seed: Option<u64>,
    /// Output location; never part of the hash.
    pub out: Option<PathBuf>,
}

/// A parsed configuration with overrides applied.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: TaskConfig,
    /// Directory relative paths are resolved against.
    pub base: PathBuf,
    /// First 16 hex digits of the SHA-256 of the effective configuration.
    pub hash: String,
    /// `--out`, else the configured output path.
    pub out: Option<PathBuf>,
}

pub fn parse_config(text: &str) -> Result<TaskConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        GwsError::invalid(format!("config field `{path}`: {}", e.inner()))
    })
}

impl Loaded {
    pub fn from_file(path: &Path, ov: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GwsError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_config(parse_config(&text)?, base, ov)
    }

    pub fn from_config(mut config: TaskConfig, base: PathBuf, ov: &Overrides) -> Result<Self> {
        if let Some(k) = ov.k {
            config.estimator.k = Some(k);
        }
        if let Some(d) = ov.delta_deg {
            config.estimator.delta_deg = Some(d);
        }
        if let Some(s) = ov.seed {
            config.seed = s;
        }
        validate(&config)?;
        let hash = config_hash(&config);
        let out = ov
            .out
            .clone()
            .or_else(|| config.output.path.as_ref().map(|p| resolve_in(&base, p)));
        Ok(Loaded {
            config,
            base,
            hash,
            out,
        })
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    fn bundled(&self) -> Result<Option<SynthesisTask>> {
        self.config.task.as_deref().map(bundled_task).transpose()
    }

    pub fn friction(&self) -> Result<FrictionModel> {
        let c = &self.config;
        match c.contact_model.unwrap_or_default() {
            ContactModel::Pcf => match c.mu {
                Some(mu) => FrictionModel::pcf(mu),
                None => match self.bundled()? {
                    Some(t) => Ok(t.friction),
                    None => Err(GwsError::invalid("config field `mu`: required for the pcf contact model")),
                },
            },
            ContactModel::Sfc => match (c.mu1, c.mu2) {
                (Some(a), Some(b)) => FrictionModel::sfc(a, b),
                _ => Err(GwsError::invalid("config fields `mu1` and `mu2`: required for the sfc contact model")),
            },
        }
    }

    /// Estimator settings with `default_k` when the file gives none.
    pub fn estimator(&self, default_k: usize) -> EstimatorConfig {
        let e = &self.config.estimator;
        EstimatorConfig {
            k: e.k.unwrap_or(default_k),
            delta: e.delta_deg.unwrap_or(15.0).to_radians(),
            cpn: e.cpn.unwrap_or(true),
            seed: self.config.seed,
        }
    }

    pub fn tws(&self) -> Result<Option<TaskWrenchSpace>> {
        match &self.config.tws {
            Some(t) => Ok(Some(TaskWrenchSpace::new(Vec6::from(t.w_t), t.gamma_deg.to_radians())?)),
            None => Ok(self.bundled()?.map(|t| t.tws)),
        }
    }

    pub fn contacts(&self) -> Result<Vec<Contact>> {
        let specs = self
            .config
            .contacts
            .as_ref()
            .ok_or_else(|| GwsError::invalid("config field `contacts`: required by this command"))?;
        let f = self.friction()?;
        specs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Contact::new(Vec3::from(c.p), Vec3::from(c.n), f)
                    .map_err(|e| GwsError::invalid(format!("config field `contacts[{i}]`: {e}")))
            })
            .collect()
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        resolve_in(&self.base, Path::new(p))
    }

    pub fn mesh(&self) -> Result<Option<(String, TriMesh)>> {
        match &self.config.mesh {
            Some(m) => Ok(Some((m.clone(), load_mesh(m, self)?))),
            None => Ok(self.bundled()?.map(|t| (format!("builtin:{}", t.name), t.mesh))),
        }
    }

    /// Everything `synth` needs.
    pub fn synthesis(&self) -> Result<SynthSetup> {
        let task = self.bundled()?;
        let c = &self.config;
        let rig_spec = match (&c.rig, &task) {
            (Some(r), _) => load_rig(r, self)?,
            (None, Some(t)) => t.rig.clone(),
            (None, None) => return Err(GwsError::invalid("config field `rig`: required by synth")),
        };
        let rig = Rig::new(rig_spec)?;
        let (mesh_name, mesh) = self
            .mesh()?
            .ok_or_else(|| GwsError::invalid("config field `mesh`: required by synth"))?;
        let tws = self
            .tws()?
            .ok_or_else(|| GwsError::invalid("config field `tws`: required by synth"))?;
        let friction = self.friction()?;
        let root = match (&c.init, &task) {
            (Some(i), _) => (
                Vec3::from(i.translation),
                UnitQuaternion::from_euler_angles(
                    i.rpy_deg[0].to_radians(),
                    i.rpy_deg[1].to_radians(),
                    i.rpy_deg[2].to_radians(),
                ),
            ),
            (None, Some(t)) => (t.root_translation, t.root_rotation),
            (None, None) => return Err(GwsError::invalid("config field `init`: required by synth")),
        };
        let mut cfg = match &task {
            Some(t) => t.config(c.seed),
            None => SynthesisConfig {
                seed: c.seed,
                ..SynthesisConfig::default()
            },
        };
        let o = &c.optimizer;
        cfg.iterations = o.iterations.unwrap_or(cfg.iterations);
        cfg.initial_step = o.initial_step.unwrap_or(cfg.initial_step);
        cfg.shrink = o.shrink.unwrap_or(cfg.shrink);
        cfg.max_backtracks = o.max_backtracks.unwrap_or(cfg.max_backtracks);
        cfg.weights = o.weights.unwrap_or(cfg.weights);
        cfg.fd_step = o.fd_step.unwrap_or(cfg.fd_step);
        cfg.perturbation = c.perturbation.unwrap_or(cfg.perturbation);
        let e = self.estimator(SynthEstimator::default().k);
        cfg.estimator = SynthEstimator {
            k: e.k,
            delta_deg: e.delta.to_degrees(),
            cpn: e.cpn,
        };
        cfg.validate()?;
        Ok(SynthSetup {
            name: c.task.clone().unwrap_or_else(|| rig.spec.name.clone()),
            rig,
            mesh_name,
            mesh,
            tws,
            friction,
            root,
            config: cfg,
        })
    }
}

/// Resolved inputs of a synthesis run.
#[derive(Clone, Debug)]
pub struct SynthSetup {
    pub name: String,
    pub rig: Rig,
    pub mesh_name: String,
    pub mesh: TriMesh,
    pub tws: TaskWrenchSpace,
    pub friction: FrictionModel,
    pub root: (Vec3, UnitQuaternion<f64>),
    pub config: SynthesisConfig,
}

/// `builtin:<name>` for the procedural benchmark shapes and task objects,
/// otherwise an OBJ path.
pub fn load_mesh(spec: &str, loaded: &Loaded) -> Result<TriMesh> {
    match spec.strip_prefix("builtin:") {
        Some(name) => builtin_mesh(name),
        None => TriMesh::load_obj(loaded.resolve(spec)),
    }
}

pub fn builtin_mesh(name: &str) -> Result<TriMesh> {
    match name {
        "sphere" => MeshSource::Sphere.load(),
        "box" => MeshSource::Box.load(),
        "cylinder" => MeshSource::Cylinder.load(),
        "torus" => MeshSource::Torus.load(),
        other => bundled_task(other)
            .map(|t| t.mesh)
            .map_err(|_| GwsError::invalid(format!("unknown builtin mesh {other:?}"))),
    }
}

fn load_rig(spec: &str, loaded: &Loaded) -> Result<rig::RigSpec> {
    if let Ok(r) = rig::bundled(spec) {
        return Ok(r);
    }
    let path = loaded.resolve(spec);
    let text = std::fs::read_to_string(&path).map_err(|e| GwsError::io(&path, e))?;
    Ok(Rig::from_json(&text)?.spec)
}

fn validate(c: &TaskConfig) -> Result<()> {
    if let Some(t) = &c.tws {
        let n: f64 = t.w_t.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n.is_finite() && n > 1e-12) {
            return Err(GwsError::invalid("config field `tws.w_t`: must be a non-zero vector"));
        }
        if !(t.gamma_deg > 0.0 && t.gamma_deg <= 180.0) {
            return Err(GwsError::invalid("config field `tws.gamma_deg`: must lie in (0, 180]"));
        }
    }
    if c.contacts.is_some() && (c.rig.is_some() || c.task.is_some()) {
        return Err(GwsError::invalid("config: give either `contacts` or a rig (`rig`/`task`), not both"));
    }
    if let Some(t) = &c.task {
        bundled_task(t).map_err(|e| GwsError::invalid(format!("config field `task`: {e}")))?;
    }
    if let Some(k) = c.estimator.k {
        if k == 0 {
            return Err(GwsError::invalid("config field `estimator.K`: must be at least 1"));
        }
    }
    if let Some(d) = c.estimator.delta_deg {
        if !(d.is_finite() && d >= 0.0) {
            return Err(GwsError::invalid("config field `estimator.delta_deg`: must be >= 0"));
        }
    }
    Ok(())
}

fn resolve_in(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Hash of the canonical JSON of `value`.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("config serializes");
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

/// Hash of a task configuration, output paths excluded so the same run
/// written to different places carries the same provenance.
pub fn config_hash(config: &TaskConfig) -> String {
    hash_json(&TaskConfig {
        output: OutputBlock::default(),
        ..config.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_errors_carry_field_path() {
        let e = parse_config(r#"{"tws": {"w_t": [0,0,1,0,0], "gamma_deg": 15}}"#).unwrap_err();
        assert!(e.to_string().contains("tws.w_t"), "{e}");
        let e = parse_config(r#"{"estimator": {"k": 10}}"#).unwrap_err();
        assert!(e.to_string().contains("estimator"), "{e}");
        let e = parse_config(r#"{"seed": -1}"#).unwrap_err();
        assert!(e.to_string().contains("seed"), "{e}");
    }

    #[test]
    fn invariants_rejected() {
        let ov = Overrides::default();
        let zero = parse_config(r#"{"mu": 0.5, "tws": {"w_t": [0,0,0,0,0,0], "gamma_deg": 15}}"#).unwrap();
        assert!(Loaded::from_config(zero, PathBuf::new(), &ov).is_err());
        let wide = parse_config(r#"{"mu": 0.5, "tws": {"w_t": [1,0,0,0,0,0], "gamma_deg": 181}}"#).unwrap();
        assert!(Loaded::from_config(wide, PathBuf::new(), &ov).is_err());
        let both = parse_config(r#"{"mu": 0.5, "rig": "pinch2", "contacts": []}"#).unwrap();
        assert!(Loaded::from_config(both, PathBuf::new(), &ov).is_err());
    }

    #[test]
    fn overrides_change_hash() {
        let c = parse_config(r#"{"mu": 0.5, "contacts": [{"p": [1,0,0], "n": [-1,0,0]}]}"#).unwrap();
        let a = Loaded::from_config(c.clone(), PathBuf::new(), &Overrides::default()).unwrap();
        let b = Loaded::from_config(c.clone(), PathBuf::new(), &Overrides { k: Some(10), ..Default::default() }).unwrap();
        assert_ne!(a.hash, b.hash);
        assert_eq!(a.hash, Loaded::from_config(c, PathBuf::new(), &Overrides::default()).unwrap().hash);
        assert_eq!(a.hash.len(), 16);
        assert_eq!(b.estimator(5).k, 10);
        assert_eq!(a.estimator(5).k, 5);
    }

    #[test]
    fn bundled_task_defaults() {
        let c = parse_config(r#"{"task": "lift-sphere", "seed": 3, "optimizer": {"iterations": 7}}"#).unwrap();
        let l = Loaded::from_config(c, PathBuf::new(), &Overrides::default()).unwrap();
        let s = l.synthesis().unwrap();
        assert_eq!(s.config.iterations, 7);
        assert_eq!(s.config.seed, 3);
        assert_eq!(s.config.estimator.k, 100);
        assert_eq!(s.rig.spec.name, "tripod3");
        assert_eq!(s.mesh_name, "builtin:lift-sphere");
    }
}

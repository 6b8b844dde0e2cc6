//! Run configuration, scene files and CSV reports.
//!
//! Configs and scenes are TOML; unknown keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::losses::{Components, LossConfig, LossWeights};
use crate::refine::{AdamParams, ProximalWeights, RefineConfig, TraceEntry, VariableMask};
use crate::synth::SceneSpec;

/// Flat `key = value` settings for a refinement run.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub similarity_r: f64,
    pub w_apc: f64,
    pub w_mvs: f64,
    pub w_e: f64,
    pub w_smooth_depth: f64,
    pub w_smooth_flow: f64,
    pub w_fb: f64,
    pub prox_depth: f64,
    pub prox_rotation: f64,
    pub prox_translation: f64,
    pub prox_intrinsics: f64,
    pub prox_flow: f64,
    pub refine_depth: bool,
    pub refine_pose: bool,
    pub refine_intrinsics: bool,
    pub refine_flow: bool,
    /// Fixed depth of the previous / next frame for the structure term.
    pub prev_depth: Option<PathBuf>,
    pub next_depth: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let r = RefineConfig::default();
        let w = r.loss.weights;
        let p = ProximalWeights::default();
        RunConfig {
            iterations: r.iterations,
            learning_rate: r.adam.learning_rate,
            adam_beta1: r.adam.beta1,
            adam_beta2: r.adam.beta2,
            adam_eps: r.adam.eps,
            similarity_r: r.loss.similarity_r,
            w_apc: w.w_apc,
            w_mvs: w.w_mvs,
            w_e: w.w_e,
            w_smooth_depth: w.w_smooth_depth,
            w_smooth_flow: w.w_smooth_flow,
            w_fb: w.w_fb,
            prox_depth: p.depth,
            prox_rotation: p.rotation,
            prox_translation: p.translation,
            prox_intrinsics: p.intrinsics,
            prox_flow: p.flow,
            refine_depth: true,
            refine_pose: true,
            refine_intrinsics: true,
            refine_flow: true,
            prev_depth: None,
            next_depth: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn refine_config(&self) -> RefineConfig {
        RefineConfig {
            iterations: self.iterations,
            adam: AdamParams {
                learning_rate: self.learning_rate,
                beta1: self.adam_beta1,
                beta2: self.adam_beta2,
                eps: self.adam_eps,
            },
            loss: LossConfig {
                weights: LossWeights {
                    w_apc: self.w_apc,
                    w_mvs: self.w_mvs,
                    w_e: self.w_e,
                    w_smooth_depth: self.w_smooth_depth,
                    w_smooth_flow: self.w_smooth_flow,
                    w_fb: self.w_fb,
                },
                similarity_r: self.similarity_r,
            },
            variables: VariableMask {
                depth: self.refine_depth,
                pose: self.refine_pose,
                intrinsics: self.refine_intrinsics,
                flow: self.refine_flow,
            },
        }
    }

    pub fn proximal_weights(&self) -> ProximalWeights {
        ProximalWeights {
            depth: self.prox_depth,
            rotation: self.prox_rotation,
            translation: self.prox_translation,
            intrinsics: self.prox_intrinsics,
            flow: self.prox_flow,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.refine_config().validate()?;
        self.proximal_weights().validate()
    }
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    RunConfig::parse(&std::fs::read_to_string(path)?)
}

pub fn load_scene(path: &Path) -> Result<SceneSpec> {
    let spec: SceneSpec =
        toml::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Config(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

/// One row per trace entry: iteration, total, objective, then the components.
pub fn trace_csv(trace: &[TraceEntry]) -> String {
    let mut s = String::from("iteration,total,objective");
    for name in Components::NAMES {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for e in trace {
        let _ = write!(s, "{},{},{}", e.iteration, e.total, e.objective);
        for v in e.components.as_array() {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn write_trace_csv(path: &Path, trace: &[TraceEntry]) -> Result<()> {
    write_atomic(path, trace_csv(trace).as_bytes())
}

/// A header line and a single row of values.
pub fn metrics_csv(columns: &[&str], values: &[f64]) -> Result<String> {
    if columns.len() != values.len() {
        return Err(Error::InvalidInput("metric columns and values differ in length".into()));
    }
    let row: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    Ok(format!("{}\n{}\n", columns.join(","), row.join(",")))
}

pub fn write_metrics_csv(path: &Path, columns: &[&str], values: &[f64]) -> Result<()> {
    write_atomic(path, metrics_csv(columns, values)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.refine_config(), RefineConfig::default());
        let c = RunConfig::parse("iterations = 7\nlearning_rate = 0.01\nrefine_intrinsics = false\n").unwrap();
        let r = c.refine_config();
        assert_eq!((r.iterations, r.adam.learning_rate, r.variables.intrinsics), (7, 0.01, false));
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(RunConfig::parse("iteratons = 3\n"), Err(Error::Config(_))));
        assert!(RunConfig::parse("learning_rate = 0.0\n").is_err());
        assert!(RunConfig::parse("prox_depth = -1.0\n").is_err());
        assert!(RunConfig::parse("w_apc = \"one\"\n").is_err());
    }

    #[test]
    fn scene_toml() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scene.toml");
        std::fs::write(
            &p,
            r#"
width = 16
height = 8
fx = 20.0
fy = 20.0
ego_motion = { euler = [0.0, 0.0, 0.0], translation = [0.1, 0.0, 0.0] }

[[planes]]
point = [0.0, 0.0, 4.0]
normal = [0.0, 0.0, -1.0]
texture = { base = 0.5, terms = [{ amplitude = 0.2, frequency = [1.0, 0.5], phase = 0.0 }] }
"#,
        )
        .unwrap();
        let s = load_scene(&p).unwrap();
        assert_eq!(s.planes.len(), 1);
        std::fs::write(&p, "width = 16\nheight = 8\nfx = 1.0\nfy = 1.0\nego_motion = { euler = [0.0, 0.0, 0.0], translation = [0.0, 0.0, 0.0] }\ncolour = 1\n").unwrap();
        assert!(load_scene(&p).is_err());
    }
}

//! JSON experiment and sweep files.

use std::fs;
use std::path::{Path, PathBuf};

use restartlab::mode_dynamics::{InnerConfig, Method, OuterHyperparams};
use restartlab::sweep_harness::{SweepConfig, SweepModel, SweepSchedule};
use restartlab::trajectory_sim::{Block, DenseMatrix, QuadraticProblem, RestartSchedule, Spectrum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub optimizer: OptimizerSection,
    pub schedule: ScheduleSection,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Exactly one model per file, selected by its key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSection {
    Spectrum(SpectrumSection),
    Blocks(Vec<BlockSection>),
    Quadratic(QuadraticSection),
}

/// Either `sigmas` directly, or kernel `lambdas` with `eta` and `steps`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u32>,
    /// Defaults to unit weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Defaults to all ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSection {
    pub label: String,
    pub spectrum: SpectrumSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_out: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSection {
    /// CSV of `n` rows by `n` columns, relative to the config file.
    pub matrix_file: PathBuf,
    pub eta: f64,
    pub steps: u32,
    #[serde(default = "one_worker")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

fn one_worker() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    #[serde(alias = "heavy_ball")]
    Hb,
    #[serde(alias = "nesterov")]
    Nag,
}

impl From<KindName> for Method {
    fn from(k: KindName) -> Self {
        match k {
            KindName::Hb => Method::HeavyBall,
            KindName::Nag => Method::Nesterov,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub kind: KindName,
    pub nu: f64,
    pub beta_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSection {
    NoRestart,
    Global { period: u32 },
    PerMode { periods: Vec<u32> },
    /// Without `periods`, each block's own `period` is used.
    Blockwise {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        periods: Option<Vec<u32>>,
    },
    Soft { period: u32, retain: f64, inject: f64 },
}

/// A validated experiment, ready to simulate.
#[derive(Debug, Clone)]
pub enum Model {
    Spectrum(Spectrum<f64>),
    Blocks(Vec<Block<f64>>),
    Quadratic {
        problem: QuadraticProblem<f64>,
        inner: InnerConfig<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: Model,
    pub kind: Method,
    pub hyper: OuterHyperparams<f64>,
    pub schedule: RestartSchedule<f64>,
    pub horizon: usize,
}

fn field(path: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {err}"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl SpectrumSection {
    pub fn build(&self, path: &str) -> Result<Spectrum<f64>, CliError> {
        let spec = match (&self.sigmas, &self.lambdas) {
            (Some(sigmas), None) => {
                if self.eta.is_some() || self.steps.is_some() {
                    return Err(field(path, "eta and steps only apply to lambdas"));
                }
                let weights = self.weights.clone().unwrap_or_else(|| vec![1.0; sigmas.len()]);
                Spectrum::direct(sigmas.clone(), weights).map_err(|e| field(path, e))?
            }
            (None, Some(lambdas)) => {
                let (Some(eta), Some(steps)) = (self.eta, self.steps) else {
                    return Err(field(path, "lambdas need both eta and steps"));
                };
                let inner = InnerConfig::new(eta, steps).map_err(|e| field(path, e))?;
                let weights = self.weights.clone().unwrap_or_else(|| vec![1.0; lambdas.len()]);
                Spectrum::derived(&inner, lambdas, weights).map_err(|e| field(path, e))?
            }
            _ => return Err(field(path, "give exactly one of sigmas or lambdas")),
        };
        match &self.x0 {
            Some(x0) => spec.with_initial(x0.clone()).map_err(|e| field(&format!("{path}.x0"), e)),
            None => Ok(spec),
        }
    }
}

fn build_blocks(sections: &[BlockSection]) -> Result<Vec<Block<f64>>, CliError> {
    if sections.is_empty() {
        return Err(field("model.blocks", "at least one block is required"));
    }
    sections
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let path = format!("model.blocks[{i}]");
            let mut block = Block::new(b.label.clone(), b.spectrum.build(&format!("{path}.spectrum"))?);
            match (b.nu, b.beta_out) {
                (Some(nu), Some(beta)) => {
                    let h = OuterHyperparams::new(nu, beta).map_err(|e| field(&path, e))?;
                    block = block.with_hyper(h);
                }
                (None, None) => {}
                _ => return Err(field(&path, "nu and beta_out must be given together")),
            }
            if let Some(p) = b.period {
                if p == 0 {
                    return Err(field(&format!("{path}.period"), "must be at least 1"));
                }
                block = block.with_period(p);
            }
            Ok(block)
        })
        .collect()
}

/// Reads an `n x n` matrix CSV without a header.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("{} row {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    DenseMatrix::from_rows(rows).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl ScheduleSection {
    fn build(&self, model: &Model) -> Result<RestartSchedule<f64>, CliError> {
        let sched = match self {
            ScheduleSection::NoRestart => RestartSchedule::NoRestart,
            ScheduleSection::Global { period } => RestartSchedule::Global { period: *period },
            ScheduleSection::PerMode { periods } => RestartSchedule::PerMode {
                periods: periods.clone(),
            },
            ScheduleSection::Blockwise { periods } => match (periods, model) {
                (Some(p), _) => RestartSchedule::Blockwise { periods: p.clone() },
                (None, Model::Blocks(blocks)) => {
                    RestartSchedule::blockwise_from_blocks(blocks).map_err(|e| field("schedule", e))?
                }
                (None, _) => return Err(field("schedule.periods", "required unless the model has blocks")),
            },
            ScheduleSection::Soft {
                period,
                retain,
                inject,
            } => RestartSchedule::Soft {
                period: *period,
                retain: *retain,
                inject: *inject,
            },
        };
        sched.validate().map_err(|e| field("schedule", e))?;
        Ok(sched)
    }
}

impl ExperimentConfig {
    /// Validates every section. `base` resolves relative matrix paths.
    pub fn build(&self, base: &Path) -> Result<Experiment, CliError> {
        let model = match &self.model {
            ModelSection::Spectrum(s) => Model::Spectrum(s.build("model.spectrum")?),
            ModelSection::Blocks(b) => Model::Blocks(build_blocks(b)?),
            ModelSection::Quadratic(q) => {
                let h = read_matrix(&base.join(&q.matrix_file))?;
                let x0 = q.x0.clone().unwrap_or_else(|| vec![1.0; h.dim()]);
                let problem = QuadraticProblem::new(h, x0, q.workers).map_err(|e| field("model.quadratic", e))?;
                let inner = InnerConfig::new(q.eta, q.steps).map_err(|e| field("model.quadratic", e))?;
                Model::Quadratic { problem, inner }
            }
        };
        let hyper = OuterHyperparams::new(self.optimizer.nu, self.optimizer.beta_out)
            .map_err(|e| field("optimizer", e))?;
        let schedule = self.schedule.build(&model)?;
        Ok(Experiment {
            model,
            kind: self.optimizer.kind.into(),
            hyper,
            schedule,
            horizon: self.horizon,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepScheduleName {
    None,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepModelSection {
    Spectrum(SpectrumSection),
    Blocks(Vec<BlockSection>),
}

/// Sweep file; every field falls back to the default robustness grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<SweepModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinds: Option<Vec<KindName>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedules: Option<Vec<SweepScheduleName>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_clip: Option<(f64, f64)>,
    /// `log10` loss threshold for the robustness summary; defaults to the
    /// midpoint of the clip range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl SweepFile {
    pub fn build(&self) -> Result<(SweepConfig<f64>, f64), CliError> {
        let mut cfg = SweepConfig::<f64>::robustness_default();
        match &self.model {
            Some(SweepModelSection::Spectrum(s)) => cfg.model = SweepModel::Spectrum(s.build("model.spectrum")?),
            Some(SweepModelSection::Blocks(b)) => cfg.model = SweepModel::Blocks(build_blocks(b)?),
            None => {}
        }
        if let Some(v) = &self.beta_grid {
            cfg.beta_grid = v.clone();
        }
        if let Some(v) = &self.nu_grid {
            cfg.nu_grid = v.clone();
        }
        if let Some(v) = &self.k_grid {
            cfg.k_grid = v.clone();
        }
        if let Some(v) = &self.kinds {
            cfg.kinds = v.iter().map(|&k| k.into()).collect();
        }
        if let Some(v) = &self.schedules {
            cfg.schedules = v
                .iter()
                .map(|s| match s {
                    SweepScheduleName::None => SweepSchedule::NoRestart,
                    SweepScheduleName::Global => SweepSchedule::Global,
                })
                .collect();
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.loss_clip {
            cfg.loss_clip = v;
        }
        cfg.validate().map_err(|e| field("sweep", e))?;
        let threshold = self
            .threshold
            .unwrap_or((cfg.loss_clip.0 + cfg.loss_clip.1) / 2.0);
        Ok((cfg, threshold))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PANEL_A: &str = r#"{
        "model": {"spectrum": {"sigmas": [0.95]}},
        "optimizer": {"kind": "hb", "nu": 1.0, "beta_out": 0.9},
        "schedule": {"variant": "no_restart"},
        "horizon": 80
    }"#;

    #[test]
    fn round_trip_is_identity() {
        let cfg: ExperimentConfig = serde_json::from_str(PANEL_A).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let again: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(serde_json::to_string(&again).unwrap(), text);

        let blocks = r#"{
            "model": {"blocks": [
                {"label": "a", "spectrum": {"lambdas": [1.0, 2.0], "eta": 0.1, "steps": 4}, "period": 7},
                {"label": "b", "spectrum": {"sigmas": [0.3], "x0": [2.0]}, "nu": 0.5, "beta_out": 0.8}
            ]},
            "optimizer": {"kind": "nag", "nu": 1.0, "beta_out": 0.9},
            "schedule": {"variant": "soft", "period": 5, "retain": 0.5, "inject": 0.25},
            "horizon": 10,
            "output": "out.csv"
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(blocks).unwrap();
        let again: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
        cfg.build(Path::new(".")).unwrap();
    }

    #[test]
    fn rejects_malformed_sections() {
        let bad_variant = PANEL_A.replace("no_restart", "sometimes");
        assert!(serde_json::from_str::<ExperimentConfig>(&bad_variant).is_err());
        let extra = PANEL_A.replace("\"horizon\": 80", "\"horizon\": 80, \"seed\": 3");
        assert!(serde_json::from_str::<ExperimentConfig>(&extra).is_err());
        let two_models = PANEL_A.replace(
            "{\"spectrum\": {\"sigmas\": [0.95]}}",
            "{\"spectrum\": {\"sigmas\": [0.95]}, \"blocks\": []}",
        );
        assert!(serde_json::from_str::<ExperimentConfig>(&two_models).is_err());

        let cfg: ExperimentConfig =
            serde_json::from_str(&PANEL_A.replace("[0.95]", "[1.5]")).unwrap();
        let err = cfg.build(Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("model.spectrum"));
        let cfg: ExperimentConfig = serde_json::from_str(
            &PANEL_A.replace("{\"variant\": \"no_restart\"}", "{\"variant\": \"global\", \"period\": 0}"),
        )
        .unwrap();
        assert!(cfg.build(Path::new(".")).is_err());
    }

    #[test]
    fn empty_sweep_file_is_the_default_grid() {
        let file: SweepFile = serde_json::from_str("{}").unwrap();
        let (cfg, threshold) = file.build().unwrap();
        assert_eq!(cfg, SweepConfig::robustness_default());
        assert_eq!(threshold, -5.0);
        assert!(serde_json::from_str::<SweepFile>(r#"{"schedules": ["soft"]}"#).is_err());
    }
}

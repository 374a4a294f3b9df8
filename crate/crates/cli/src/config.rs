//! Scenario files: one JSON object naming a command, a problem and its knobs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use translab::dimension::ScaleSpec;
use translab::transversality::{Smoothness, ThresholdQuery, WitnessSearch};

use crate::registry::{lookup, ProblemEntry, ProblemSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Defect,
    Classify,
    SigmaSample,
    SigmaDim,
    Threshold,
    Morse,
    Immersion,
    Umbrella,
    NormalCrossings,
    Injectivity,
    DfEstimate,
    Boxdim,
    ParetoAtlas,
    Simpliciality,
    PerturbStudy,
    MeasureZeroProbe,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Defect => "defect",
            Command::Classify => "classify",
            Command::SigmaSample => "sigma-sample",
            Command::SigmaDim => "sigma-dim",
            Command::Threshold => "threshold",
            Command::Morse => "morse",
            Command::Immersion => "immersion",
            Command::Umbrella => "umbrella",
            Command::NormalCrossings => "normal-crossings",
            Command::Injectivity => "injectivity",
            Command::DfEstimate => "df-estimate",
            Command::Boxdim => "boxdim",
            Command::ParetoAtlas => "pareto-atlas",
            Command::Simpliciality => "simpliciality",
            Command::PerturbStudy => "perturb-study",
            Command::MeasureZeroProbe => "measure-zero-probe",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            Command::SigmaSample
                | Command::SigmaDim
                | Command::DfEstimate
                | Command::PerturbStudy
                | Command::MeasureZeroProbe
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// A registry name or an inline problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemRef {
    Named(String),
    Inline(ProblemSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Main sample or grid budget of the command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Relative rank tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub membership_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_box: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_box: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
    /// Row-major entries of a linear perturbation added to the problem's map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdQuery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<Smoothness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<WitnessSearch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capture_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<ScaleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_budget: Option<usize>,
    /// Frobenius radius of sampled perturbations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl ScenarioConfig {
    pub fn new(command: Command) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            problem: None,
            seed: None,
            budget: None,
            trials: None,
            tol: None,
            membership_tol: None,
            x: None,
            a: None,
            x_box: None,
            a_box: None,
            domain: None,
            perturbation: None,
            threshold: None,
            smoothness: None,
            search: None,
            capture_radius: None,
            scales: None,
            d_max: None,
            resolution: None,
            probe_budget: None,
            scale: None,
            out_dir: None,
            format: None,
        }
    }

    pub fn with_problem(mut self, name: &str) -> Self {
        self.problem = Some(ProblemRef::Named(name.to_string()));
        self
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("invalid scenario config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            );
        }
        if self.command.is_stochastic() && self.seed.is_none() {
            bail!("command `{}` needs a seed", self.command.name());
        }
        if let Some(ProblemRef::Named(name)) = &self.problem {
            if lookup(name).is_none() {
                bail!("unknown problem `{name}`; run `translab list-problems`");
            }
        }
        if self.problem.is_none() && !(self.command == Command::Threshold && self.threshold.is_some()) {
            bail!("command `{}` needs a problem", self.command.name());
        }
        Ok(())
    }

    /// The problem spec and, for registry problems, the registry entry.
    pub fn resolve(&self) -> anyhow::Result<(ProblemSpec, Option<ProblemEntry>)> {
        match &self.problem {
            Some(ProblemRef::Named(name)) => {
                let entry = lookup(name).with_context(|| format!("unknown problem `{name}`"))?;
                Ok((entry.spec.clone(), Some(entry)))
            }
            Some(ProblemRef::Inline(spec)) => Ok((spec.clone(), None)),
            None => bail!("no problem given"),
        }
    }

    pub fn problem_label(&self) -> Option<String> {
        match &self.problem {
            Some(ProblemRef::Named(n)) => Some(n.clone()),
            Some(ProblemRef::Inline(_)) => Some("inline".to_string()),
            None => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_named_and_inline() {
        let cfg = ScenarioConfig::from_json(
            r#"{"schema_version": 1, "command": "classify", "problem": "ex-2-2", "x": [0], "a": [0, 0]}"#,
        )
        .unwrap();
        assert_eq!(cfg.command, Command::Classify);
        let inline = ScenarioConfig::from_json(
            r#"{"schema_version": 1, "command": "morse",
                "problem": {"kind": "map", "map": "[x1^2]", "arity_x": 1, "domain": [[-1, 1]]}}"#,
        )
        .unwrap();
        assert!(matches!(inline.problem, Some(ProblemRef::Inline(ProblemSpec::Map { .. }))));
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"schema_version": 2, "command": "classify", "problem": "ex-2-2"}"#,
            r#"{"schema_version": 1, "command": "sigma-sample", "problem": "ex-2-3"}"#,
            r#"{"schema_version": 1, "command": "classify", "problem": "nope"}"#,
            r#"{"schema_version": 1, "command": "classify", "problem": "ex-2-2", "colour": 1}"#,
            r#"{"schema_version": 1, "command": "morse"}"#,
        ] {
            assert!(ScenarioConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn threshold_without_problem() {
        let cfg = ScenarioConfig::from_json(
            r#"{"schema_version": 1, "command": "threshold",
                "threshold": {"kind": "morse", "m": 1, "r": {"finite": 2}}}"#,
        )
        .unwrap();
        assert!(cfg.problem.is_none());
    }
}

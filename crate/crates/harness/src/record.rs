//! Run records and the files a command emits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;

/// The command that produced a record, with the arguments that are not part
/// of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum CommandSpec {
    Sample,
    Pv,
    Localtime,
    Qcov,
    Hilbert {
        input: std::path::PathBuf,
        fft: bool,
        inverse: bool,
    },
    Verify {
        suite: Suite,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Bounds,
    Identities,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckClass {
    /// Failing makes the run fail.
    Assertion,
    /// Reported only.
    Diagnostic,
}

/// Outcome of one check: a measured value against a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub class: CheckClass,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    pub fn assertion(name: &str, pass: bool, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            class: CheckClass::Assertion,
            pass,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    pub fn diagnostic(name: &str, pass: bool, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            class: CheckClass::Diagnostic,
            ..Self::assertion(name, pass, value, threshold, detail)
        }
    }

    pub fn failed_assertion(&self) -> bool {
        self.class == CheckClass::Assertion && !self.pass
    }

    /// `PASS name: value (threshold) detail`.
    pub fn line(&self) -> String {
        let tag = match (self.pass, self.class) {
            (true, _) => "PASS",
            (false, CheckClass::Assertion) => "FAIL",
            (false, CheckClass::Diagnostic) => "NOTE",
        };
        format!(
            "{tag} {}: {:.6e} (threshold {:.6e}) {}",
            self.name, self.value, self.threshold, self.detail
        )
    }
}

/// Ensemble mean and standard error of one reported quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStat {
    pub label: String,
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl EnsembleStat {
    pub fn new(label: impl Into<String>, m: fbm_pv::stats::MeanSe) -> Self {
        Self {
            label: label.into(),
            mean: m.mean,
            se: m.se,
            n: m.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub spec: CommandSpec,
    pub config: Option<ExperimentConfig>,
    pub per_path: Vec<serde_json::Value>,
    pub ensemble: Vec<EnsembleStat>,
    pub checks: Vec<Check>,
    pub wall_clock_secs: f64,
}

impl RunRecord {
    pub fn new(spec: CommandSpec, config: Option<ExperimentConfig>) -> Self {
        Self {
            spec,
            config,
            per_path: Vec::new(),
            ensemble: Vec::new(),
            checks: Vec::new(),
            wall_clock_secs: 0.0,
        }
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.failed_assertion()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    /// Command and configuration of a saved record; enough to re-run it.
    pub fn load_invocation(path: &Path) -> Result<(CommandSpec, Option<ExperimentConfig>)> {
        #[derive(Deserialize)]
        struct Head {
            spec: CommandSpec,
            config: Option<ExperimentConfig>,
        }
        let text = std::fs::read_to_string(path)?;
        let head: Head = serde_json::from_str(&text)
            .map_err(|e| crate::error::HarnessError::Validation(format!("{}: {e}", path.display())))?;
        Ok((head.spec, head.config))
    }
}

/// A file produced by a command, kept in memory until written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Self {
            name: name.into(),
            bytes,
        }
    }

    pub fn text(name: impl Into<String>, text: String) -> Self {
        Self::new(name, text.into_bytes())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub record: RunRecord,
    pub artifacts: Vec<Artifact>,
}

pub const RECORD_FILE: &str = "record.json";

impl Output {
    /// Writes every artifact and `record.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for a in &self.artifacts {
            let p = dir.join(&a.name);
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(p, &a.bytes)?;
        }
        std::fs::write(dir.join(RECORD_FILE), self.record.to_json())?;
        Ok(())
    }

    /// Everything the run emitted except the wall clock, for bitwise comparison.
    pub fn fingerprint(&self) -> (String, Vec<Artifact>) {
        let mut r = self.record.clone();
        r.wall_clock_secs = 0.0;
        (r.to_json(), self.artifacts.clone())
    }
}

//! Experiment configuration: one JSON document, with command-line flags
//! overriding individual fields. Reports embed the effective configuration
//! so runs are reproducible from their own output.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use treeirs::{Arity, Flavor, IrsSampler, TruncatedWreathGroup};

fn default_d() -> usize {
    2
}
fn default_depth() -> usize {
    2
}
fn default_trials() -> u64 {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckSpec {
    pub name: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default)]
    pub flavor: Flavor,
    /// Required for anything that samples: there is no implicit entropy.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub sampler: Option<IrsSampler>,
    /// Depth used for fingerprinting; the working depth when omitted.
    #[serde(default)]
    pub fingerprint_depth: Option<usize>,
    #[serde(default)]
    pub checks: Option<Vec<CheckSpec>>,
    #[serde(default)]
    pub strict: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_value(serde_json::json!({})).expect("defaults are complete")
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), String> {
        Arity::new(self.d).map_err(|e| e.to_string())?;
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        if let Some(fd) = self.fingerprint_depth {
            if fd > self.depth {
                return Err(format!(
                    "fingerprint_depth {fd} exceeds the working depth {}",
                    self.depth
                ));
            }
        }
        if let Some(sampler) = &self.sampler {
            if sampler.ambient().depth() > self.depth {
                return Err(format!(
                    "sampler depth {} exceeds the working depth {}",
                    sampler.ambient().depth(),
                    self.depth
                ));
            }
        }
        Ok(())
    }

    pub fn group(&self) -> Result<TruncatedWreathGroup, String> {
        let d = Arity::new(self.d).map_err(|e| e.to_string())?;
        TruncatedWreathGroup::new(d, self.depth, self.flavor).map_err(|e| e.to_string())
    }

    pub fn require_seed(&self) -> Result<u64, String> {
        self.seed
            .ok_or_else(|| "a seed is required (config field or --seed)".into())
    }
}

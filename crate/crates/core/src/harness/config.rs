use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One experiment: a dataset, a perturbation protocol, an attack with a
/// parameter sweep, and a repetition count. The seed determines every draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub epsilon: f64,
    pub data: DataSpec,
    pub attack: AttackSpec,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
}

fn default_repetitions() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// Rows are records. `columns` selects and orders attributes (0-based);
    /// all columns are used when absent.
    Csv {
        path: PathBuf,
        #[serde(default)]
        has_header: bool,
        #[serde(default)]
        dedup: bool,
        #[serde(default)]
        columns: Option<Vec<usize>>,
    },
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        records: usize,
    },
    Mixture {
        components: Vec<MixtureComponent>,
        records: usize,
    },
    /// Mean entries drawn from N(0, 1); covariance is the empirical
    /// covariance of `dim` draws from N(0, I).
    RandomGaussian { dim: usize, records: usize },
    /// Integer-valued 16-attribute data with letter-like class structure.
    LetterLike { records: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    KnownInput {
        /// Sweep over the number of known inputs.
        known_inputs: Vec<usize>,
        #[serde(default)]
        link_tol: Option<f64>,
        #[serde(default)]
        rank_tol: Option<f64>,
        /// Per-repetition linking budget in seconds.
        #[serde(default)]
        budget_secs: Option<f64>,
    },
    KnownSample {
        /// Sweep over sample size as a fraction of the record count.
        sample_ratios: Vec<f64>,
        #[serde(default)]
        permutations: Option<usize>,
        #[serde(default)]
        pooled_cap: Option<usize>,
    },
}

impl AttackSpec {
    pub fn sweep(&self) -> Vec<f64> {
        match self {
            AttackSpec::KnownInput { known_inputs, .. } => {
                known_inputs.iter().map(|&a| a as f64).collect()
            }
            AttackSpec::KnownSample { sample_ratios, .. } => sample_ratios.clone(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackSpec::KnownInput { .. } => "known_input",
            AttackSpec::KnownSample { .. } => "known_sample",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub with_translation: bool,
    /// Per-entry standard deviation of the translation; defaults to ten
    /// times the mean record norm.
    #[serde(default)]
    pub translation_scale: Option<f64>,
    #[serde(default)]
    pub identity_permutation: bool,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.repetitions < 1 {
            return bad("repetitions must be at least 1".into());
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!(
                "epsilon must be finite and nonnegative, got {}",
                self.epsilon
            ));
        }
        if let Some(s) = self.perturbation.translation_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!(
                    "translation_scale must be finite and nonnegative, got {s}"
                ));
            }
        }
        self.validate_data()?;
        match &self.attack {
            AttackSpec::KnownInput {
                known_inputs,
                link_tol,
                rank_tol,
                budget_secs,
            } => {
                if known_inputs.contains(&0) {
                    return bad("known_inputs entries must be at least 1".into());
                }
                for (name, v) in [
                    ("link_tol", link_tol),
                    ("rank_tol", rank_tol),
                    ("budget_secs", budget_secs),
                ] {
                    if let Some(v) = v {
                        if !(*v >= 0.0 && v.is_finite()) {
                            return bad(format!("{name} must be finite and nonnegative"));
                        }
                    }
                }
            }
            AttackSpec::KnownSample {
                sample_ratios,
                permutations,
                pooled_cap,
            } => {
                if let Some(r) = sample_ratios.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
                    return bad(format!("sample ratios must be positive, got {r}"));
                }
                if *permutations == Some(0) {
                    return bad("permutations must be at least 1".into());
                }
                if pooled_cap.is_some_and(|c| c < 4) {
                    return bad("pooled_cap must be at least 4".into());
                }
            }
        }
        Ok(())
    }

    fn validate_data(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let square = |name: &str, mean: &[f64], cov: &[Vec<f64>]| -> Result<()> {
            let n = mean.len();
            if n == 0 {
                return bad(format!("{name}: mean must be non-empty"));
            }
            if cov.len() != n || cov.iter().any(|row| row.len() != n) {
                return bad(format!("{name}: covariance must be {n} x {n}"));
            }
            Ok(())
        };
        match &self.data {
            DataSpec::Csv { .. } => Ok(()),
            DataSpec::Gaussian {
                mean,
                covariance,
                records,
            } => {
                square("gaussian", mean, covariance)?;
                if *records < 2 {
                    return bad("records must be at least 2".into());
                }
                Ok(())
            }
            DataSpec::Mixture {
                components,
                records,
            } => {
                if components.is_empty() {
                    return bad("mixture needs at least one component".into());
                }
                let n = components[0].mean.len();
                for (k, c) in components.iter().enumerate() {
                    square(&format!("mixture component {k}"), &c.mean, &c.covariance)?;
                    if c.mean.len() != n {
                        return bad("mixture components must share a dimension".into());
                    }
                    if !(c.weight > 0.0 && c.weight.is_finite()) {
                        return bad(format!("mixture component {k}: weight must be positive"));
                    }
                }
                if *records < 2 {
                    return bad("records must be at least 2".into());
                }
                Ok(())
            }
            DataSpec::RandomGaussian { dim, records } => {
                if *dim < 1 || *records < 2 {
                    return bad("random_gaussian needs dim >= 1 and records >= 2".into());
                }
                Ok(())
            }
            DataSpec::LetterLike { records } => {
                if *records < 2 {
                    return bad("records must be at least 2".into());
                }
                Ok(())
            }
        }
    }
}

use std::path::{Path, PathBuf};

use qwishart::estimation::{ClickRecord, Pom};
use qwishart::sampler::{BoundOptions, ProposalKnobs, Strategy, DEFAULT_ALPHA, DEFAULT_GRID_RESOLUTION, DEFAULT_SAFETY};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Posterior-sampling experiment.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub pom: String,
    pub clicks: Vec<u64>,
    pub strategy: Strategy,
    #[serde(rename = "N", default)]
    pub columns: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub weights: Option<(f64, f64)>,
    #[serde(default)]
    pub interior_mu: Option<f64>,
    #[serde(default)]
    pub boundary_mu: Option<f64>,
    #[serde(default)]
    pub boundary_columns: Option<usize>,
    pub n_accept: usize,
    pub seed: u64,
    #[serde(default = "default_resolution")]
    pub grid_resolution: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default)]
    pub samples_out: Option<PathBuf>,
    #[serde(default)]
    pub report_out: Option<PathBuf>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_resolution() -> f64 {
    DEFAULT_GRID_RESOLUTION
}

fn default_safety() -> f64 {
    DEFAULT_SAFETY
}

impl SampleConfig {
    pub fn knobs(&self) -> ProposalKnobs {
        ProposalKnobs {
            columns: self.columns,
            alpha: self.alpha,
            interior_mu: self.interior_mu,
            boundary_mu: self.boundary_mu,
            boundary_columns: self.boundary_columns,
            weights: self.weights,
        }
    }

    pub fn bound_options(&self) -> BoundOptions {
        BoundOptions {
            resolution: self.grid_resolution,
            safety: self.safety,
        }
    }
}

pub fn pom_and_clicks(pom: &str, clicks: &[u64]) -> Result<(Pom, ClickRecord), CliError> {
    let pom = Pom::builtin(pom)?;
    let clicks = ClickRecord::new(clicks.to_vec())?;
    clicks.check_against(&pom)?;
    Ok((pom, clicks))
}

/// Knob grid for `bench-acceptance`. Each list entry multiplies the grid;
/// an empty list keeps the strategy default.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub pom: String,
    pub clicks: Vec<u64>,
    pub strategy: Strategy,
    #[serde(rename = "N", default)]
    pub columns: Vec<usize>,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub interior_mus: Vec<f64>,
    #[serde(default)]
    pub boundary_mus: Vec<f64>,
    #[serde(default)]
    pub boundary_columns: Option<usize>,
    #[serde(default)]
    pub weights: Option<(f64, f64)>,
    #[serde(default = "default_proposals")]
    pub n_proposals: usize,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_proposals() -> usize {
    100_000
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlrConfig {
    pub pom: String,
    pub clicks: Vec<u64>,
    pub uniform: PathBuf,
    pub posterior: PathBuf,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Stationary-point request for `fit-peak --config`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryConfig {
    pub field: qwishart::state::FieldKind,
    #[serde(rename = "N")]
    pub columns: usize,
    /// Bloch vector of the peak state.
    pub rho: [f64; 3],
    /// Mean direction M₂ as real and imaginary row lists (2 × N).
    pub mean_re: Vec<Vec<f64>>,
    #[serde(default)]
    pub mean_im: Option<Vec<Vec<f64>>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let r: Result<SampleConfig, _> = serde_json::from_str(
            r#"{"pom":"trine","clicks":[1,2,3],"strategy":"interior-peak","n_accept":5,"seed":1,"colour":3}"#,
        );
        assert!(r.is_err());
        let ok: SampleConfig = serde_json::from_str(
            r#"{"pom":"trine","clicks":[1,2,3],"strategy":"interior-peak","N":10,"n_accept":5,"seed":1}"#,
        )
        .unwrap();
        assert_eq!(ok.columns, Some(10));
        assert_eq!(ok.alpha, DEFAULT_ALPHA);
    }
}

//! JSON run configuration. Unknown keys are rejected everywhere so a typo
//! fails fast instead of silently running defaults.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use qdc_core::deep_svm::DeepSVMConfig;
use qdc_core::feature_extractor::NetSpec;
use qdc_core::pipeline::HeadSpec;
use qdc_core::qkmeans::QKMeansParams;
use qdc_core::statevector::{ExecMode, InversionMode};
use qdc_core::{Error, KernelSpec, Result};

/// Top-level config file: one section per subcommand plus shared knobs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub seed: u64,
    #[serde(default)]
    pub mode: Option<ExecMode>,
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub svm: Option<SvmSection>,
    #[serde(default)]
    pub cluster: Option<ClusterSection>,
    #[serde(default)]
    pub pipeline: Option<PipelineSection>,
    #[serde(default)]
    pub cost: Option<CostSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmSection {
    pub dataset: PathBuf,
    pub kernel: KernelSpec,
    pub eta: f64,
    #[serde(default)]
    pub eps_k: Option<f64>,
    pub train_mode: InversionMode,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    pub dataset: PathBuf,
    pub k: usize,
    pub kmeans: QKMeansParams,
    /// Explicit seed points; drawn from the master seed's shuffle when
    /// absent.
    #[serde(default)]
    pub seed_indices: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub dataset: PathBuf,
    pub epochs: usize,
    pub clusters: usize,
    pub deep_svm: DeepSVMConfig,
    pub net: NetSpec,
    pub head: HeadSpec,
    pub kmeans: QKMeansParams,
    pub net_lr: f64,
    pub net_sweeps: usize,
    pub train_mode: InversionMode,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    /// Parameter-sweep CSV, one cost-model row per line.
    pub sweep: PathBuf,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        if config.schema != 1 {
            return Err(Error::Config(format!("unsupported config schema {}", config.schema)));
        }
        Ok(config)
    }
}

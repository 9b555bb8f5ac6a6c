//! JSON experiment configs. Every schema rejects unknown keys, and every
//! artifact written by a command embeds the config hash and the seed, so a
//! run is reproducible from its outputs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use droclust::datamodel::{BlockModelConfig, CommonLoadingLaw, NoiseLaw};
use droclust::delta::DeltaConfig;
use droclust::dro::SolverOptions;
use droclust::portfolio::{BacktestConfig, LoadFilters};

/// SHA-256 over the canonical JSON of a config, hex-encoded.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// `# config_hash=<hex> seed=<n>` provenance line for CSV artifacts.
pub fn provenance(hash: &str, seed: u64) -> String {
    format!("config_hash={hash} seed={seed}")
}

/// Which quantity a simulation study sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    /// Idiosyncratic noise variance (fixed across variables).
    NoiseVar,
    /// Squared common-factor loading (fixed across variables).
    CommonLoadingSq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// Clustering methods a study can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyMethod {
    Dro,
    Lasso,
    Acc,
    KMedoids,
}

impl StudyMethod {
    pub fn label(&self) -> &'static str {
        match self {
            StudyMethod::Dro => "dro",
            StudyMethod::Lasso => "lasso",
            StudyMethod::Acc => "acc",
            StudyMethod::KMedoids => "k-medoids",
        }
    }
}

fn default_methods() -> Vec<StudyMethod> {
    vec![
        StudyMethod::Dro,
        StudyMethod::Lasso,
        StudyMethod::Acc,
        StudyMethod::KMedoids,
    ]
}

fn default_trials() -> usize {
    10
}

fn default_cv_folds() -> usize {
    5
}

/// Simulation-study config: a generator, an optional parameter sweep, and
/// the methods to score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub generator: BlockModelConfig,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<StudyMethod>,
    #[serde(default = "default_cv_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub delta: DeltaConfig,
}

impl StudyConfig {
    /// Grid points: the swept values, or the generator's own setting.
    pub fn grid(&self) -> Vec<(f64, BlockModelConfig)> {
        match &self.sweep {
            None => {
                let value = match self.generator.noise {
                    NoiseLaw::Fixed(v) => v,
                    NoiseLaw::Uniform { max } => max,
                };
                vec![(value, self.generator.clone())]
            }
            Some(sweep) => sweep
                .values
                .iter()
                .map(|&v| {
                    let mut generator = self.generator.clone();
                    match sweep.parameter {
                        SweepParameter::NoiseVar => generator.noise = NoiseLaw::Fixed(v),
                        SweepParameter::CommonLoadingSq => {
                            generator.common_loading = CommonLoadingLaw::FixedSquared(v)
                        }
                    }
                    (v, generator)
                })
                .collect(),
        }
    }
}

/// Backtest command config: ingestion filters plus backtest controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestCliConfig {
    #[serde(default)]
    pub filters: LoadFilters,
    #[serde(default)]
    pub backtest: BacktestConfig,
}

//! TOML experiment configuration.
//!
//! ```toml
//! seed = 1
//! n_runs = 200
//! mode = "time_varying"        # or "time_invariant"
//! band_size = 120
//!
//! [dataset.synthetic]          # or: [dataset] path = "stations.csv"
//! steps = 95
//!
//! [mask_spec]
//! count = 130                  # or: nodes = [0, 3, 7]
//! seed = 1
//!
//! [noise]
//! alpha = 1.1
//! gamma = 0.1
//! gamma_convention = "dispersion"
//!
//! [[algorithms]]
//! kind = "GNS"                 # step_size omitted: tuned on a pilot grid
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{generate_synthetic_dataset, load_dataset_csv, DatasetBundle, SyntheticBand, SyntheticSpec};
use crate::error::{Error, Result};
use crate::filters::{FilterConfig, FilterKind};
use crate::harness::{
    geometric_grid, ExperimentConfig, ExperimentSetup, GraphConfig, Initialization, MaskSpec, Mode, SamplingConfig,
    SteadyCriterion,
};
use crate::noise::{AlphaStableParams, GammaConvention};
use crate::par::Execution;
use crate::sampling::BandCriterion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    TimeVarying,
    TimeInvariant,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSource {
    /// CSV file; relative paths resolve against the config file.
    pub path: Option<PathBuf>,
    /// Used when `path` is absent. Graph, mask and band fields are taken
    /// from the experiment so the truth lies in the experiment's band.
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    pub nodes: Option<Vec<usize>>,
    pub count: usize,
    pub seed: u64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            nodes: None,
            count: 130,
            seed: 1,
        }
    }
}

impl MaskConfig {
    pub fn spec(&self) -> MaskSpec {
        match &self.nodes {
            Some(nodes) => MaskSpec::Nodes(nodes.clone()),
            None => MaskSpec::Random {
                count: self.count,
                seed: self.seed,
            },
        }
    }

    pub fn observed_count(&self) -> usize {
        self.nodes.as_ref().map_or(self.count, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub gamma_convention: GammaConvention,
    /// `false` observes the truth exactly.
    pub enabled: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            alpha: 1.1,
            gamma: 0.1,
            gamma_convention: GammaConvention::Dispersion,
            enabled: true,
        }
    }
}

impl NoiseConfig {
    pub fn params(&self) -> Result<Option<AlphaStableParams>> {
        if !self.enabled {
            return Ok(None);
        }
        AlphaStableParams::with_convention(self.alpha, self.gamma, self.gamma_convention).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub pilot_runs: usize,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            grid_min: 1e-3,
            grid_max: 1.0,
            grid_points: 25,
            pilot_runs: 50,
        }
    }
}

impl TuningConfig {
    pub fn grid(&self) -> Vec<f64> {
        geometric_grid(self.grid_min, self.grid_max, self.grid_points)
    }
}

/// Options of the `convergence` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// When set, every other algorithm without a fixed step size gets the
    /// step that matches this algorithm's steady-state spectral MAE.
    pub reference: Option<FilterKind>,
    pub match_iterations: usize,
    /// Extra steady-state criteria reported next to `steady`.
    pub alternative: Vec<SteadyCriterion>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            reference: None,
            match_iterations: 12,
            alternative: vec![SteadyCriterion {
                window: 40,
                rel_tol: 0.02,
            }],
        }
    }
}

fn default_algorithms() -> Vec<FilterConfig> {
    [FilterKind::Glms, FilterKind::GSign, FilterKind::Gns]
        .map(FilterConfig::untuned)
        .to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub n_runs: usize,
    pub mode: ModeName,
    /// Time-invariant mode only.
    pub iterations: usize,
    /// Time-invariant mode only: dataset column held fixed.
    pub snapshot: usize,
    pub execution: Execution,
    pub init: Initialization,
    pub tail_fraction: f64,
    pub band_size: usize,
    pub band_criterion: BandCriterion,
    pub dataset: DatasetSource,
    pub graph: GraphConfig,
    pub mask_spec: MaskConfig,
    pub noise: NoiseConfig,
    pub algorithms: Vec<FilterConfig>,
    pub steady: SteadyCriterion,
    pub tuning: TuningConfig,
    pub convergence: ConvergenceConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            n_runs: 200,
            mode: ModeName::TimeVarying,
            iterations: 1000,
            snapshot: 0,
            execution: Execution::Parallel,
            init: Initialization::Zero,
            tail_fraction: 0.5,
            band_size: 120,
            band_criterion: BandCriterion::MinSingularValue,
            dataset: DatasetSource::default(),
            graph: GraphConfig::default(),
            mask_spec: MaskConfig::default(),
            noise: NoiseConfig::default(),
            algorithms: default_algorithms(),
            steady: SteadyCriterion::default(),
            tuning: TuningConfig::default(),
            convergence: ConvergenceConfig::default(),
        }
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub band_size: Option<usize>,
    pub observed: Option<usize>,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file, resolving a relative dataset path against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut config = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        if let Some(p) = &config.dataset.path {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                config.dataset.path = Some(base.join(p));
            }
        }
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(a) = o.alpha {
            self.noise.alpha = a;
        }
        if let Some(g) = o.gamma {
            self.noise.gamma = g;
        }
        if let Some(r) = o.runs {
            self.n_runs = r;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(b) = o.band_size {
            self.band_size = b;
        }
        if let Some(m) = o.observed {
            if self.mask_spec.nodes.is_some() {
                return Err(Error::Config("--observed conflicts with an explicit node list".into()));
            }
            self.mask_spec.count = m;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if self.band_size == 0 {
            return Err(Error::Config("band_size must be at least 1".into()));
        }
        let observed = self.mask_spec.observed_count();
        if self.band_size > observed {
            return Err(Error::Identifiability {
                band_size: self.band_size,
                observed,
            });
        }
        if self.mode == ModeName::TimeInvariant && self.iterations == 0 {
            return Err(Error::Config("time_invariant mode needs iterations > 0".into()));
        }
        let t = &self.tuning;
        if !(t.grid_min > 0.0 && t.grid_max >= t.grid_min && t.grid_points >= 1 && t.pilot_runs >= 1) {
            return Err(Error::Config("tuning grid needs 0 < grid_min <= grid_max and at least one point".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms configured".into()));
        }
        for alg in &self.algorithms {
            alg.validate()?;
        }
        self.noise.params()?;
        Ok(())
    }

    /// Synthetic spec with graph, mask and band fields taken from the
    /// experiment.
    pub fn synthetic_spec(&self) -> SyntheticSpec {
        let mut spec = self.dataset.synthetic.clone().unwrap_or_default();
        spec.knn_k = self.graph.k;
        spec.metric = self.graph.metric;
        spec.band_size = self.band_size;
        spec.criterion = self.band_criterion;
        match &self.mask_spec.nodes {
            None => {
                spec.observed = self.mask_spec.count;
                spec.mask_seed = self.mask_spec.seed;
            }
            // the generator only draws random masks; shape the truth with the
            // lowest frequencies instead
            Some(_) => spec.band = SyntheticBand::Lowest,
        }
        spec
    }

    pub fn load_dataset(&self) -> Result<DatasetBundle> {
        match &self.dataset.path {
            Some(path) => load_dataset_csv(path),
            None => generate_synthetic_dataset(&self.synthetic_spec()),
        }
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            mask: self.mask_spec.spec(),
            band_size: self.band_size,
            criterion: self.band_criterion,
        }
    }

    pub fn setup(&self) -> Result<ExperimentSetup> {
        let data = Arc::new(self.load_dataset()?);
        ExperimentSetup::build(data, &self.graph, &self.sampling())
    }

    pub fn harness_mode(&self) -> Mode {
        match self.mode {
            ModeName::TimeVarying => Mode::TimeVarying,
            ModeName::TimeInvariant => Mode::TimeInvariant {
                iterations: self.iterations,
                snapshot: self.snapshot,
            },
        }
    }

    /// Harness config with the configured algorithms, tuned or not.
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            noise: self.noise.params()?,
            algorithms: self.algorithms.clone(),
            n_runs: self.n_runs,
            mode: self.harness_mode(),
            seed: self.seed,
            init: self.init,
            tail_fraction: self.tail_fraction,
            execution: self.execution,
        })
    }
}

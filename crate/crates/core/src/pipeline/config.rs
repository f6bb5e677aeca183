//! Declarative audit configuration, read from one JSON document.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{GenresFormat, RatingsFormat};
use crate::error::{Error, Result};
use crate::popularity::{ExtractionOrder, TierCuts};
use crate::recommenders::{Algorithm, Grid, Hyperparameters, ModelSpec, TargetMetric};

pub const DEFAULT_ALPHAS: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub ratings: PathBuf,
    pub ratings_format: RatingsFormat,
    pub genres: PathBuf,
    pub genres_format: GenresFormat,
}

impl DatasetConfig {
    /// The standard file layout of an extracted MovieLens 1M archive.
    pub fn ml1m(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            ratings: dir.join("ratings.dat"),
            ratings_format: RatingsFormat::Ml1m,
            genres: dir.join("movies.dat"),
            genres_format: GenresFormat::Ml1mMovies,
        }
    }

    /// The standard file layout of an extracted MovieLens 100K archive.
    pub fn ml100k(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            ratings: dir.join("u.data"),
            ratings_format: RatingsFormat::Ml100k,
            genres: dir.join("u.item"),
            genres_format: GenresFormat::Ml100kItems,
        }
    }
}

/// One audited algorithm: fixed hyperparameters, optionally refined by a
/// grid search on a validation split of train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub params: Hyperparameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    /// Search the algorithm's default grid when `grid` is absent.
    #[serde(default)]
    pub default_grid: bool,
}

impl AlgorithmConfig {
    /// Fixed hyperparameters used by the reference audit.
    pub fn fixed(algorithm: Algorithm) -> Self {
        let base = Hyperparameters::default();
        let params = match algorithm {
            Algorithm::UserKNN => Hyperparameters { k: 50, ..base },
            Algorithm::ItemKNN => Hyperparameters { k: 100, ..base },
            Algorithm::BiasedMF => Hyperparameters {
                factors: 10,
                learn_rate: 0.005,
                reg: 0.001,
                epochs: 30,
                ..base
            },
            Algorithm::BPR => Hyperparameters {
                factors: 50,
                learn_rate: 0.05,
                reg: 0.01,
                epochs: 30,
                ..base
            },
            Algorithm::Popular | Algorithm::Random => base,
        };
        Self {
            algorithm,
            params,
            grid: None,
            default_grid: false,
        }
    }

    pub fn search_grid(&self) -> Option<Grid> {
        match (&self.grid, self.default_grid) {
            (Some(g), _) => Some(g.clone()),
            (None, true) => Some(Grid::default_for(self.algorithm)),
            (None, false) => None,
        }
    }
}

fn default_split_ratio() -> f64 {
    0.8
}

fn default_seed() -> u64 {
    42
}

fn default_quantile() -> f64 {
    0.2
}

fn default_list_size() -> usize {
    10
}

fn default_algorithms() -> Vec<AlgorithmConfig> {
    Algorithm::ALL.into_iter().map(AlgorithmConfig::fixed).collect()
}

fn default_alphas() -> Vec<f64> {
    DEFAULT_ALPHAS.to_vec()
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub dataset: DatasetConfig,
    #[serde(default = "default_split_ratio")]
    pub split_ratio: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub item_cuts: TierCuts,
    #[serde(default)]
    pub genre_cuts: TierCuts,
    #[serde(default = "default_quantile")]
    pub group_quantile: f64,
    #[serde(default)]
    pub extraction_order: ExtractionOrder,
    #[serde(default = "default_list_size")]
    pub list_size: usize,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<AlgorithmConfig>,
    #[serde(default)]
    pub target_metric: TargetMetric,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl AuditConfig {
    /// Defaults for everything but the data files.
    pub fn new(dataset: DatasetConfig) -> Self {
        Self {
            dataset,
            split_ratio: default_split_ratio(),
            seed: default_seed(),
            item_cuts: TierCuts::default(),
            genre_cuts: TierCuts::default(),
            group_quantile: default_quantile(),
            extraction_order: ExtractionOrder::default(),
            list_size: default_list_size(),
            algorithms: default_algorithms(),
            target_metric: TargetMetric::default(),
            alphas: default_alphas(),
            out_dir: default_out_dir(),
        }
    }

    /// Parse a config document. Relative paths are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: AuditConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for p in [&mut cfg.dataset.ratings, &mut cfg.dataset.genres, &mut cfg.out_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    /// Keep only the named algorithms, in the given order. Names missing from
    /// the config get their fixed reference hyperparameters.
    pub fn select_algorithms(&mut self, names: &[String]) -> Result<()> {
        let mut picked = Vec::with_capacity(names.len());
        for name in names {
            let a: Algorithm = name.trim().parse()?;
            let cfg = self
                .algorithms
                .iter()
                .find(|c| c.algorithm == a)
                .cloned()
                .unwrap_or_else(|| AlgorithmConfig::fixed(a));
            picked.push(cfg);
        }
        self.algorithms = picked;
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!("split_ratio {} must lie in (0, 1)", self.split_ratio)));
        }
        self.item_cuts.validate()?;
        self.genre_cuts.validate()?;
        if !(self.group_quantile > 0.0 && self.group_quantile < 0.5) {
            return Err(Error::Config(format!(
                "group_quantile {} must lie in (0, 0.5)",
                self.group_quantile
            )));
        }
        if self.list_size == 0 {
            return Err(Error::Config("list_size must be >= 1".into()));
        }
        if self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Config("alphas must lie in [0, 1]".into()));
        }
        if self.alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("alphas must be strictly ascending".into()));
        }
        let mut seen = HashSet::new();
        for a in &self.algorithms {
            if !seen.insert(a.algorithm) {
                return Err(Error::Config(format!("algorithm {} listed twice", a.algorithm)));
            }
            ModelSpec::new(a.algorithm).with_params(a.params).validate()?;
            if let Some(g) = a.search_grid() {
                if g.points(&ModelSpec::new(a.algorithm).with_params(a.params)).is_empty() {
                    return Err(Error::Config(format!("empty grid for {}", a.algorithm)));
                }
            }
        }
        Ok(())
    }
}

//! Hyperparameter search on a validation split carved from train.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, recommend_all, summarize_accuracy, AccuracySummary, Algorithm, ModelSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Share of each user's train items kept for fitting during the search.
pub const INNER_SPLIT: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMetric {
    #[default]
    Ndcg,
    Precision,
    Recall,
}

impl TargetMetric {
    pub fn of(self, summary: &AccuracySummary) -> f64 {
        match self {
            TargetMetric::Ndcg => summary.ndcg,
            TargetMetric::Precision => summary.precision,
            TargetMetric::Recall => summary.recall,
        }
    }
}

/// Values to try per hyperparameter. `None` keeps the base spec's value;
/// an empty list yields an empty grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub k: Option<Vec<usize>>,
    pub factors: Option<Vec<usize>>,
    pub learn_rate: Option<Vec<f64>>,
    pub reg: Option<Vec<f64>>,
    pub epochs: Option<Vec<usize>>,
}

impl Grid {
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::UserKNN | Algorithm::ItemKNN => Grid {
                k: Some(vec![10, 30, 50, 100]),
                ..Grid::default()
            },
            Algorithm::BiasedMF | Algorithm::BPR => Grid {
                factors: Some(vec![10, 50, 100]),
                learn_rate: Some(vec![0.005, 0.01, 0.05]),
                reg: Some(vec![0.001, 0.01, 0.1]),
                epochs: Some(vec![30, 100]),
                ..Grid::default()
            },
            Algorithm::Popular | Algorithm::Random => Grid::default(),
        }
    }

    /// Every combination, varying the last axis fastest.
    pub fn points(&self, base: &ModelSpec) -> Vec<ModelSpec> {
        let p = base.params;
        let axis = |v: &Option<Vec<usize>>, d: usize| v.clone().unwrap_or_else(|| vec![d]);
        let axis_f = |v: &Option<Vec<f64>>, d: f64| v.clone().unwrap_or_else(|| vec![d]);
        let mut out = Vec::new();
        for &k in &axis(&self.k, p.k) {
            for &factors in &axis(&self.factors, p.factors) {
                for &learn_rate in &axis_f(&self.learn_rate, p.learn_rate) {
                    for &reg in &axis_f(&self.reg, p.reg) {
                        for &epochs in &axis(&self.epochs, p.epochs) {
                            let mut s = *base;
                            s.params.k = k;
                            s.params.factors = factors;
                            s.params.learn_rate = learn_rate;
                            s.params.reg = reg;
                            s.params.epochs = epochs;
                            out.push(s);
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPointResult {
    pub spec: ModelSpec,
    pub accuracy: Option<AccuracySummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub target: TargetMetric,
    pub best: ModelSpec,
    pub best_score: f64,
    pub points: Vec<GridPointResult>,
}

/// Search `grid` around `base`. See [`search_specs`].
pub fn grid_search(
    base: &ModelSpec,
    grid: &Grid,
    train: &Dataset,
    target: TargetMetric,
    n: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    search_specs(&grid.points(base), train, target, n, seed)
}

/// Fit every spec on an inner split of `train`, score its top-`n` lists on
/// the held-back part and return the best. Ties keep the earlier spec.
pub fn search_specs(
    specs: &[ModelSpec],
    train: &Dataset,
    target: TargetMetric,
    n: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    if specs.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let inner = train.split(INNER_SPLIT, seed::sub_seed(seed, "grid-split"))?;
    let users = inner.evaluation_users();
    let points: Vec<GridPointResult> = specs
        .par_iter()
        .map(|spec| {
            let run = || -> Result<AccuracySummary> {
                let model = fit(spec, &inner.train)?;
                let lists = recommend_all(&model, &inner.train, &users, n)?;
                Ok(summarize_accuracy(&lists, &inner.test, n))
            };
            match run() {
                Ok(acc) => GridPointResult {
                    spec: *spec,
                    accuracy: Some(acc),
                    error: None,
                },
                Err(e) => GridPointResult {
                    spec: *spec,
                    accuracy: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut best: Option<(f64, ModelSpec)> = None;
    for p in &points {
        if let Some(acc) = &p.accuracy {
            let score = target.of(acc);
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, p.spec));
            }
        }
    }
    let (best_score, best) = best.ok_or_else(|| {
        Error::InvalidArgument(format!(
            "every grid point failed; first error: {}",
            points[0].error.as_deref().unwrap_or("unknown")
        ))
    })?;
    Ok(GridSearchResult {
        target,
        best,
        best_score,
        points,
    })
}

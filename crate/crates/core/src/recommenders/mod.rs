//! The six audited recommenders, top-N list generation and grid search.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, ItemId, UserId};
use crate::error::{Error, Result};
use crate::metrics;

mod baseline;
mod bpr;
pub mod grid;
mod knn;
mod mf;

pub use baseline::{PopularModel, RandomModel};
pub use bpr::{BprModel, BprTriple};
pub use grid::{grid_search, search_specs, Grid, GridPointResult, GridSearchResult, TargetMetric};
pub use knn::{ItemKnnModel, UserKnnModel};
pub use mf::{BiasedMfModel, MfGradient, MfSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    UserKNN,
    ItemKNN,
    BiasedMF,
    BPR,
    Popular,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::BPR,
        Algorithm::BiasedMF,
        Algorithm::ItemKNN,
        Algorithm::UserKNN,
        Algorithm::Popular,
        Algorithm::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::UserKNN => "UserKNN",
            Algorithm::ItemKNN => "ItemKNN",
            Algorithm::BiasedMF => "BiasedMF",
            Algorithm::BPR => "BPR",
            Algorithm::Popular => "Popular",
            Algorithm::Random => "Random",
        }
    }

    pub fn is_personalized(self) -> bool {
        !matches!(self, Algorithm::Popular | Algorithm::Random)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.as_str().to_string()
    }
}

/// Similarity between rating vectors in the neighbourhood models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    #[default]
    Cosine,
    /// Cosine over mean-centred ratings (user means for UserKNN, item means
    /// for ItemKNN).
    Pearson,
}

/// How neighbour evidence is turned into a ranking score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnScoring {
    /// `Σ sim · r / Σ |sim|`: a predicted rating.
    WeightedMean,
    /// `Σ sim` over the neighbours that rated the item.
    #[default]
    SimilaritySum,
}

/// Hyperparameters of every algorithm; each model reads the fields it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub k: usize,
    pub similarity: Similarity,
    pub scoring: KnnScoring,
    pub factors: usize,
    pub learn_rate: f64,
    pub reg: f64,
    pub epochs: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            k: 50,
            similarity: Similarity::Cosine,
            scoring: KnnScoring::SimilaritySum,
            factors: 50,
            learn_rate: 0.01,
            reg: 0.01,
            epochs: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub params: Hyperparameters,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            params: Hyperparameters::default(),
            seed: 0,
        }
    }

    pub fn with_params(mut self, params: Hyperparameters) -> Self {
        self.params = params;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        match self.algorithm {
            Algorithm::UserKNN | Algorithm::ItemKNN if p.k == 0 => Err(Error::Config("k must be >= 1".into())),
            Algorithm::BiasedMF | Algorithm::BPR => {
                if p.factors == 0 || p.epochs == 0 {
                    return Err(Error::Config("factors and epochs must be >= 1".into()));
                }
                if !(p.learn_rate > 0.0 && p.learn_rate.is_finite()) || !(p.reg >= 0.0 && p.reg.is_finite()) {
                    return Err(Error::Config("learn_rate must be > 0 and reg >= 0".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// A trained model of one of the six algorithms.
#[derive(Debug, Clone)]
pub enum ModelKind {
    UserKnn(UserKnnModel),
    ItemKnn(ItemKnnModel),
    BiasedMf(BiasedMfModel),
    Bpr(BprModel),
    Popular(PopularModel),
    Random(RandomModel),
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub kind: ModelKind,
    candidates: Vec<ItemId>,
    n_items: usize,
}

impl FittedModel {
    /// Fill `scores` (one slot per catalog item) for `user`.
    pub fn score_user(&self, user: UserId, scores: &mut [f64]) {
        match &self.kind {
            ModelKind::UserKnn(m) => m.score_user(user, scores),
            ModelKind::ItemKnn(m) => m.score_user(user, scores),
            ModelKind::BiasedMf(m) => m.score_user(user, scores),
            ModelKind::Bpr(m) => m.score_user(user, scores),
            ModelKind::Popular(m) => m.score_user(scores),
            ModelKind::Random(m) => m.score_user(user, scores),
        }
    }

    pub fn score(&self, user: UserId, item: ItemId) -> f64 {
        let mut scores = vec![0.0; self.n_items];
        self.score_user(user, &mut scores);
        scores[item as usize]
    }

    /// Train items: the universe lists are drawn from.
    pub fn candidates(&self) -> &[ItemId] {
        &self.candidates
    }
}

/// Train the model described by `spec`.
pub fn fit(spec: &ModelSpec, train: &Dataset) -> Result<FittedModel> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let p = &spec.params;
    let kind = match spec.algorithm {
        Algorithm::UserKNN => ModelKind::UserKnn(UserKnnModel::fit(train, p.k, p.similarity, p.scoring)),
        Algorithm::ItemKNN => ModelKind::ItemKnn(ItemKnnModel::fit(train, p.k, p.similarity, p.scoring)),
        Algorithm::BiasedMF => ModelKind::BiasedMf(BiasedMfModel::fit(train, p, spec.seed)?),
        Algorithm::BPR => ModelKind::Bpr(BprModel::fit(train, p, spec.seed)?),
        Algorithm::Popular => ModelKind::Popular(PopularModel::fit(train)),
        Algorithm::Random => ModelKind::Random(RandomModel::new(spec.seed)),
    };
    Ok(FittedModel {
        spec: *spec,
        kind,
        candidates: train.active_items(),
        n_items: train.n_items(),
    })
}

/// Ordered top-N items for one user with aligned scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub user: UserId,
    pub items: Vec<ItemId>,
    pub scores: Vec<f64>,
}

fn rank_order(a: &(f64, ItemId), b: &(f64, ItemId)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Top `n` items for `user` by score, excluding the user's train items.
/// Score ties go to the lower item index.
pub fn recommend_top_n(model: &FittedModel, train: &Dataset, user: UserId, n: usize) -> Result<RecommendationList> {
    let mut scores = vec![0.0; model.n_items];
    recommend_with_buffer(model, train, user, n, &mut scores)
}

fn recommend_with_buffer(
    model: &FittedModel,
    train: &Dataset,
    user: UserId,
    n: usize,
    scores: &mut [f64],
) -> Result<RecommendationList> {
    if n == 0 {
        return Err(Error::InvalidArgument("list size must be >= 1".into()));
    }
    model.score_user(user, scores);
    let seen: HashSet<ItemId> = train.profile(user).items().collect();
    let mut pool: Vec<(f64, ItemId)> = model
        .candidates
        .iter()
        .filter(|i| !seen.contains(i))
        .map(|&i| (scores[i as usize], i))
        .collect();
    if pool.len() < n {
        return Err(Error::TooFew {
            what: "candidate items",
            needed: n,
            found: pool.len(),
        });
    }
    if pool.len() > n {
        pool.select_nth_unstable_by(n - 1, rank_order);
        pool.truncate(n);
    }
    pool.sort_by(rank_order);
    Ok(RecommendationList {
        user,
        items: pool.iter().map(|p| p.1).collect(),
        scores: pool.iter().map(|p| p.0).collect(),
    })
}

/// Lists for many users, computed in parallel; output order follows `users`.
pub fn recommend_all(
    model: &FittedModel,
    train: &Dataset,
    users: &[UserId],
    n: usize,
) -> Result<Vec<RecommendationList>> {
    users
        .par_iter()
        .map_init(
            || vec![0.0; model.n_items],
            |buf, &u| recommend_with_buffer(model, train, u, n, buf),
        )
        .collect()
}

/// Mean accuracy over users with a non-empty held-out set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub precision: f64,
    pub recall: f64,
    pub ndcg: f64,
    pub evaluated_users: usize,
    pub excluded_users: usize,
}

/// Per-user `(precision, recall, nDCG)`, or `None` when the user has no
/// held-out items.
pub fn user_accuracy(list: &RecommendationList, heldout: &Dataset, k: usize) -> Option<(f64, f64, f64)> {
    let relevant: HashSet<ItemId> = heldout.profile(list.user).items().collect();
    if relevant.is_empty() {
        return None;
    }
    Some((
        metrics::precision_at_k(&list.items, &relevant, k),
        metrics::recall_at_k(&list.items, &relevant, k),
        metrics::ndcg_at_k(&list.items, &relevant, k),
    ))
}

pub fn summarize_accuracy(lists: &[RecommendationList], heldout: &Dataset, k: usize) -> AccuracySummary {
    let per_user: Vec<(f64, f64, f64)> = lists.iter().filter_map(|l| user_accuracy(l, heldout, k)).collect();
    let n = per_user.len();
    let avg = |f: fn(&(f64, f64, f64)) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_user.iter().map(f).sum::<f64>() / n as f64
        }
    };
    AccuracySummary {
        precision: avg(|t| t.0),
        recall: avg(|t| t.1),
        ndcg: avg(|t| t.2),
        evaluated_users: n,
        excluded_users: lists.len() - n,
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

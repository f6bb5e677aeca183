//! The end-to-end audit: load, split, popularity, grouping, models, metrics.
//!
//! [`run_audit`] produces an [`AuditReport`]; [`emit_reports`] writes it out
//! as CSV tables, `audit.json` and a text summary.

use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset, DatasetStats, SplitDataset, UserId};
use crate::error::{Error, Result};
use crate::metrics::{self, CorrelationResult, GroupReport, UserPopularityReport};
use crate::popularity::{
    group_overlap, group_users, Basis, GroupRatios, OverlapMatrix, PopularityModel, Tier, UserGroup,
    UserGroupAssignment, UserProfileStats,
};
use crate::recommenders::{
    self, grid_search, Algorithm, AccuracySummary, GridSearchResult, ModelSpec, RecommendationList,
};
use crate::seed;

pub mod config;
mod report;

pub use config::{AlgorithmConfig, AuditConfig, DatasetConfig, DEFAULT_ALPHAS};
pub use report::{emit_plot_data, emit_reports, read_audit_json, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRow {
    pub item: String,
    pub rank: usize,
    pub count: u32,
    pub pop: f64,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreRow {
    pub genre: String,
    pub rank: usize,
    pub mass: f64,
    pub share: f64,
    pub tier: Tier,
}

/// Train-profile statistics and group labels of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRow {
    pub user: String,
    pub item_group: UserGroup,
    pub genre_group: UserGroup,
    pub item_ratios: GroupRatios,
    pub genre_ratios: GroupRatios,
    pub inconsistency: f64,
    pub diversity: f64,
    pub app: f64,
    pub genre_app: f64,
    pub profile_size: usize,
}

/// Mean profile size and popularity of one user group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileGroupSummary {
    pub basis: Basis,
    pub group: UserGroup,
    pub members: usize,
    pub mean_profile_size: f64,
    pub mean_app: f64,
}

/// Per-user popularity and accuracy figures under one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMetricsRow {
    pub user: String,
    pub item_group: UserGroup,
    pub genre_group: UserGroup,
    pub app: f64,
    pub arp: f64,
    pub pl: f64,
    pub upd: f64,
    pub recs_ratios: GroupRatios,
    pub inconsistency: f64,
    pub diversity: f64,
    pub profile_size: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub ndcg: Option<f64>,
}

/// Niche (item basis) users with `PI ≤ alpha`, and their mean PL and UPD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweepRow {
    pub alpha: f64,
    pub users: usize,
    pub mean_pl: Option<f64>,
    pub mean_upd: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
}

impl CorrelationMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrelationMethod::Pearson => "pearson",
            CorrelationMethod::Spearman => "spearman",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub method: CorrelationMethod,
    pub result: CorrelationResult,
}

/// One top-N list with catalog keys.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyedList {
    pub user: String,
    pub items: Vec<String>,
    pub scores: Vec<f64>,
}

/// Everything measured for one successfully audited model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAudit {
    pub accuracy: AccuracySummary,
    pub item_groups: Vec<GroupReport>,
    pub genre_groups: Vec<GroupReport>,
    pub alpha_sweep: Vec<AlphaSweepRow>,
    pub correlations: Vec<Correlation>,
    pub users: Vec<UserMetricsRow>,
    /// Kept out of `audit.json`; written to `recs_<algorithm>.csv`.
    #[serde(skip)]
    pub lists: Vec<KeyedList>,
}

impl ModelAudit {
    pub fn groups(&self, basis: Basis) -> &[GroupReport] {
        match basis {
            Basis::Item => &self.item_groups,
            Basis::Genre => &self.genre_groups,
        }
    }

    pub fn group(&self, basis: Basis, group: UserGroup) -> &GroupReport {
        &self.groups(basis)[group.index()]
    }

    pub fn correlation(&self, method: CorrelationMethod, y: &str) -> Option<&CorrelationResult> {
        self.correlations
            .iter()
            .find(|c| c.method == method && c.result.y == y)
            .map(|c| &c.result)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    Completed(Box<ModelAudit>),
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmOutcome {
    pub algorithm: Algorithm,
    /// The spec that produced the lists, after any grid search.
    pub spec: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSearchResult>,
    pub outcome: Outcome,
}

impl AlgorithmOutcome {
    pub fn audit(&self) -> Option<&ModelAudit> {
        match &self.outcome {
            Outcome::Completed(a) => Some(a),
            Outcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: AuditConfig,
    pub split_seed: u64,
    pub dropped_items: usize,
    pub dropped_users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub dataset: DatasetStats,
    pub train: DatasetStats,
    pub test: DatasetStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub manifest: Manifest,
    pub stats: SplitStats,
    pub items: Vec<ItemRow>,
    pub genres: Vec<GenreRow>,
    pub users: Vec<UserRow>,
    pub profile_groups: Vec<ProfileGroupSummary>,
    pub profile_correlations: Vec<Correlation>,
    pub overlap: OverlapMatrix,
    pub algorithms: Vec<AlgorithmOutcome>,
    /// Wall-clock seconds per stage; written to `timings.json` only.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl AuditReport {
    pub fn algorithm(&self, a: Algorithm) -> Option<&AlgorithmOutcome> {
        self.algorithms.iter().find(|o| o.algorithm == a)
    }

    /// Share of train interactions on the `k` most popular items.
    pub fn head_mass(&self, k: usize) -> f64 {
        let total: u64 = self.items.iter().map(|r| u64::from(r.count)).sum();
        let top: u64 = self.items.iter().take(k).map(|r| u64::from(r.count)).sum();
        if total == 0 {
            0.0
        } else {
            top as f64 / total as f64
        }
    }

    pub fn genre_share(&self, genre: &str) -> Option<f64> {
        self.genres.iter().find(|g| g.genre == genre).map(|g| g.share)
    }

    pub fn profile_group(&self, basis: Basis, group: UserGroup) -> Option<&ProfileGroupSummary> {
        self.profile_groups.iter().find(|p| p.basis == basis && p.group == group)
    }
}

/// Load the configured rating and genre files; items without genres are
/// dropped. Returns the dataset and the number of dropped items.
pub fn load_dataset(cfg: &DatasetConfig) -> Result<(Dataset, usize)> {
    let ratings = dataset::load_ratings(&cfg.ratings, cfg.ratings_format)?;
    let genres = dataset::load_genres(&cfg.genres, cfg.genres_format)?;
    let (data, dropped) = ratings.with_genres(&genres)?;
    if dropped > 0 {
        warn!("dropped {dropped} rated items without genre information");
    }
    Ok((data, dropped))
}

/// Users in `Niche` on the item basis with `PI ≤ alpha`, for each alpha.
pub fn alpha_sweep(users: &[UserMetricsRow], alphas: &[f64]) -> Vec<AlphaSweepRow> {
    alphas
        .iter()
        .map(|&alpha| {
            let kept: Vec<&UserMetricsRow> = users
                .iter()
                .filter(|u| u.item_group == UserGroup::Niche && u.inconsistency <= alpha)
                .collect();
            AlphaSweepRow {
                alpha,
                users: kept.len(),
                mean_pl: metrics::mean(kept.iter().map(|u| u.pl)),
                mean_upd: metrics::mean(kept.iter().map(|u| u.upd)),
            }
        })
        .collect()
}

fn correlate(xn: &str, xs: &[f64], yn: &str, ys: &[f64]) -> [Correlation; 2] {
    [
        Correlation {
            method: CorrelationMethod::Pearson,
            result: metrics::pearson(xn, xs, yn, ys),
        },
        Correlation {
            method: CorrelationMethod::Spearman,
            result: metrics::spearman(xn, xs, yn, ys),
        },
    ]
}

/// Diversity against PL and against UPD over all users of one model.
pub fn correlation_analysis(users: &[UserMetricsRow]) -> Vec<Correlation> {
    let div: Vec<f64> = users.iter().map(|u| u.diversity).collect();
    let pl: Vec<f64> = users.iter().map(|u| u.pl).collect();
    let upd: Vec<f64> = users.iter().map(|u| u.upd).collect();
    let mut out = Vec::with_capacity(4);
    out.extend(correlate("diversity", &div, "pl", &pl));
    out.extend(correlate("diversity", &div, "upd", &upd));
    out
}

/// Read-only state shared by every model audit of one run.
struct Context<'a> {
    config: &'a AuditConfig,
    split: &'a SplitDataset,
    popularity: &'a PopularityModel,
    users: &'a [UserId],
    stats: &'a [UserProfileStats],
    item_groups: &'a UserGroupAssignment,
    genre_groups: &'a UserGroupAssignment,
}

impl Context<'_> {
    fn audit_model(&self, spec: &ModelSpec) -> Result<ModelAudit> {
        let train = &self.split.train;
        let test = &self.split.test;
        let n = self.config.list_size;
        let model = recommenders::fit(spec, train).map_err(|e| e.in_stage("fit"))?;
        let lists = recommenders::recommend_all(&model, train, self.users, n).map_err(|e| e.in_stage("recommend"))?;
        let rows: Vec<(UserMetricsRow, UserPopularityReport)> = lists
            .par_iter()
            .zip(self.stats.par_iter())
            .map(|(list, stats)| self.user_metrics(list, stats))
            .collect::<Result<_>>()
            .map_err(|e| e.in_stage("metrics"))?;
        let (users, reports): (Vec<UserMetricsRow>, Vec<UserPopularityReport>) = rows.into_iter().unzip();
        let item_groups = metrics::group_reports(&reports).map_err(|e| e.in_stage("group metrics"))?;
        let by_genre: Vec<UserPopularityReport> = reports
            .iter()
            .zip(&users)
            .map(|(r, u)| UserPopularityReport { group: u.genre_group, ..*r })
            .collect();
        let genre_groups = metrics::group_reports(&by_genre).map_err(|e| e.in_stage("group metrics"))?;
        let catalog = train.catalog();
        let keyed = lists
            .iter()
            .map(|l| KeyedList {
                user: catalog.user_key(l.user).to_string(),
                items: l.items.iter().map(|&i| catalog.item_key(i).to_string()).collect(),
                scores: l.scores.clone(),
            })
            .collect();
        Ok(ModelAudit {
            accuracy: recommenders::summarize_accuracy(&lists, test, n),
            item_groups,
            genre_groups,
            alpha_sweep: alpha_sweep(&users, &self.config.alphas),
            correlations: correlation_analysis(&users),
            users,
            lists: keyed,
        })
    }

    fn user_metrics(
        &self,
        list: &RecommendationList,
        stats: &UserProfileStats,
    ) -> Result<(UserMetricsRow, UserPopularityReport)> {
        let pm = self.popularity;
        let arp = metrics::recommendation_popularity(&list.items, &pm.items)?;
        let recs = metrics::recommendation_ratios(&list.items, &pm.item_partition)?;
        let item_group = label(self.item_groups, stats.user)?;
        let genre_group = label(self.genre_groups, stats.user)?;
        let report = UserPopularityReport::new(stats.app, arp, stats.item_ratios, recs, item_group)?;
        let acc = recommenders::user_accuracy(list, &self.split.test, self.config.list_size);
        let row = UserMetricsRow {
            user: self.split.train.catalog().user_key(stats.user).to_string(),
            item_group,
            genre_group,
            app: stats.app,
            arp,
            pl: report.pl,
            upd: report.upd,
            recs_ratios: recs,
            inconsistency: stats.inconsistency,
            diversity: stats.diversity,
            profile_size: stats.profile_size,
            precision: acc.map(|a| a.0),
            recall: acc.map(|a| a.1),
            ndcg: acc.map(|a| a.2),
        };
        Ok((row, report))
    }
}

fn label(assignment: &UserGroupAssignment, user: UserId) -> Result<UserGroup> {
    assignment
        .label(user)
        .ok_or_else(|| Error::InvalidArgument(format!("user index {user} has no {} group", assignment.basis)))
}

fn profile_summaries(users: &[UserRow]) -> Vec<ProfileGroupSummary> {
    let mut out = Vec::new();
    for basis in [Basis::Item, Basis::Genre] {
        for group in UserGroup::ALL {
            let members: Vec<&UserRow> = users
                .iter()
                .filter(|u| match basis {
                    Basis::Item => u.item_group == group,
                    Basis::Genre => u.genre_group == group,
                })
                .collect();
            out.push(ProfileGroupSummary {
                basis,
                group,
                members: members.len(),
                mean_profile_size: metrics::mean(members.iter().map(|u| u.profile_size as f64)).unwrap_or(0.0),
                mean_app: metrics::mean(members.iter().map(|u| u.app)).unwrap_or(0.0),
            });
        }
    }
    out
}

struct Stopwatch {
    start: Instant,
    laps: Vec<(String, f64)>,
}

impl Stopwatch {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            laps: Vec::new(),
        }
    }

    fn lap(&mut self, stage: impl Into<String>) {
        let now = Instant::now();
        let stage = stage.into();
        let secs = (now - self.start).as_secs_f64();
        info!("{stage}: {secs:.2}s");
        self.laps.push((stage, secs));
        self.start = now;
    }
}

/// Load and audit the configured dataset.
pub fn run_audit(config: &AuditConfig) -> Result<AuditReport> {
    config.validate()?;
    let mut clock = Stopwatch::new();
    let (data, dropped_items) = load_dataset(&config.dataset).map_err(|e| e.in_stage("load"))?;
    clock.lap("load");
    let mut report = audit_dataset(config, &data)?;
    report.manifest.dropped_items = dropped_items;
    clock.laps.append(&mut report.timings);
    report.timings = clock.laps;
    Ok(report)
}

/// Audit an already loaded dataset whose items all carry genres.
pub fn audit_dataset(config: &AuditConfig, data: &Dataset) -> Result<AuditReport> {
    config.validate()?;
    let mut clock = Stopwatch::new();
    let split_seed = seed::sub_seed(config.seed, "split");
    let split = data
        .split(config.split_ratio, split_seed)
        .map_err(|e| e.in_stage("split"))?;
    let train = &split.train;
    clock.lap("split");

    let popularity =
        PopularityModel::new(train, config.item_cuts, config.genre_cuts).map_err(|e| e.in_stage("popularity"))?;
    let users = train.active_users();
    let stats: Vec<UserProfileStats> = users
        .par_iter()
        .map(|&u| popularity.user_stats(train, u))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("profiles"))?;
    clock.lap("popularity");

    let group = |basis, pick: fn(&UserProfileStats) -> GroupRatios| {
        let ratios: Vec<(UserId, GroupRatios)> = stats.iter().map(|s| (s.user, pick(s))).collect();
        group_users(basis, &ratios, config.group_quantile, config.extraction_order).map_err(|e| e.in_stage("grouping"))
    };
    let item_groups = group(Basis::Item, |s| s.item_ratios)?;
    let genre_groups = group(Basis::Genre, |s| s.genre_ratios)?;
    let overlap = group_overlap(&item_groups, &genre_groups).map_err(|e| e.in_stage("overlap"))?;
    clock.lap("grouping");

    let catalog = train.catalog();
    let user_rows: Vec<UserRow> = stats
        .iter()
        .map(|s| {
            Ok(UserRow {
                user: catalog.user_key(s.user).to_string(),
                item_group: label(&item_groups, s.user)?,
                genre_group: label(&genre_groups, s.user)?,
                item_ratios: s.item_ratios,
                genre_ratios: s.genre_ratios,
                inconsistency: s.inconsistency,
                diversity: s.diversity,
                app: s.app,
                genre_app: s.genre_app,
                profile_size: s.profile_size,
            })
        })
        .collect::<Result<_>>()?;
    let sizes: Vec<f64> = user_rows.iter().map(|u| u.profile_size as f64).collect();
    let apps: Vec<f64> = user_rows.iter().map(|u| u.app).collect();
    let profile_correlations = correlate("profile_size", &sizes, "app", &apps).to_vec();

    let items = popularity
        .items
        .ranking()
        .iter()
        .enumerate()
        .map(|(rank, &i)| ItemRow {
            item: catalog.item_key(i).to_string(),
            rank: rank + 1,
            count: popularity.items.count(i),
            pop: popularity.items.pop(i),
            tier: popularity.item_partition.tier(i).expect("ranked items are partitioned"),
        })
        .collect();
    let genres = popularity
        .genres
        .ranking()
        .iter()
        .enumerate()
        .map(|(rank, &g)| GenreRow {
            genre: catalog.genre_name(g).to_string(),
            rank: rank + 1,
            mass: popularity.genres.mass(g),
            share: popularity.genres.share(g),
            tier: popularity
                .genre_partition
                .tier(u32::from(g))
                .expect("ranked genres are partitioned"),
        })
        .collect();

    let ctx = Context {
        config,
        split: &split,
        popularity: &popularity,
        users: &users,
        stats: &stats,
        item_groups: &item_groups,
        genre_groups: &genre_groups,
    };
    let mut algorithms = Vec::with_capacity(config.algorithms.len());
    for ac in &config.algorithms {
        let a = ac.algorithm;
        let mut spec = ModelSpec::new(a)
            .with_params(ac.params)
            .with_seed(seed::sub_seed(config.seed, a.as_str()));
        let mut grid = None;
        let mut failure = None;
        if let Some(g) = ac.search_grid() {
            let grid_seed = seed::sub_seed(config.seed, "grid");
            match grid_search(&spec, &g, train, config.target_metric, config.list_size, grid_seed) {
                Ok(r) => {
                    spec = r.best;
                    grid = Some(r);
                }
                Err(e) => failure = Some(e.in_stage("grid search")),
            }
            clock.lap(format!("{a} grid search"));
        }
        let outcome = match failure.map_or_else(|| ctx.audit_model(&spec), Err) {
            Ok(audit) => Outcome::Completed(Box::new(audit)),
            Err(e) => {
                warn!("{a} failed: {e}");
                Outcome::Failed { error: e.to_string() }
            }
        };
        clock.lap(a.as_str());
        algorithms.push(AlgorithmOutcome {
            algorithm: a,
            spec,
            grid,
            outcome,
        });
    }

    Ok(AuditReport {
        manifest: Manifest {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            split_seed,
            dropped_items: 0,
            dropped_users: split.dropped_users.len(),
        },
        stats: SplitStats {
            dataset: data.stats(),
            train: train.stats(),
            test: split.test.stats(),
        },
        items,
        genres,
        profile_groups: profile_summaries(&user_rows),
        users: user_rows,
        profile_correlations,
        overlap,
        algorithms,
        timings: clock.laps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(group: UserGroup, pi: f64, pl: f64, upd: f64) -> UserMetricsRow {
        UserMetricsRow {
            user: "u".into(),
            item_group: group,
            genre_group: UserGroup::Diverse,
            app: 0.1,
            arp: 0.1 * (1.0 + pl),
            pl,
            upd,
            recs_ratios: GroupRatios([1.0, 0.0, 0.0]),
            inconsistency: pi,
            diversity: 0.0,
            profile_size: 3,
            precision: None,
            recall: None,
            ndcg: None,
        }
    }

    #[test]
    fn alpha_one_keeps_every_niche_user() {
        let users = [
            row(UserGroup::Niche, 0.2, 1.0, 0.1),
            row(UserGroup::Niche, 0.9, 3.0, 0.3),
            row(UserGroup::Blockbuster, 0.0, 9.0, 0.9),
        ];
        let sweep = alpha_sweep(&users, &[0.1, 0.5, 1.0]);
        assert_eq!(sweep[0].users, 0);
        assert_eq!(sweep[0].mean_pl, None);
        assert_eq!(sweep[1].users, 1);
        assert_eq!(sweep[1].mean_upd, Some(0.1));
        assert_eq!(sweep[2].users, 2);
        assert_eq!(sweep[2].mean_pl, Some(2.0));
    }

    #[test]
    fn constant_pl_gives_null_correlation() {
        let mut users: Vec<_> = (0..5).map(|i| row(UserGroup::Diverse, 0.0, 0.5, i as f64 / 10.0)).collect();
        for (i, u) in users.iter_mut().enumerate() {
            u.diversity = i as f64;
        }
        let c = correlation_analysis(&users);
        assert_eq!(c[0].result.rho, None);
        assert_eq!(c[0].result.null_reason.as_deref(), Some("zero variance"));
        assert!((c[2].result.rho.unwrap() - 1.0).abs() < 1e-12);
    }
}

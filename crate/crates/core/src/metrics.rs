//! Accuracy and popularity-fairness metrics.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dataset::ItemId;
use crate::error::{Error, Result};
use crate::popularity::{GroupRatios, ItemPartition, ItemPopularityTable, UserGroup};

fn hits(list: &[ItemId], relevant: &HashSet<ItemId>, k: usize) -> usize {
    list.iter().take(k).filter(|i| relevant.contains(i)).count()
}

/// Fraction of the top `k` recommendations found in `relevant`.
pub fn precision_at_k(list: &[ItemId], relevant: &HashSet<ItemId>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    hits(list, relevant, k) as f64 / k as f64
}

/// Fraction of `relevant` found in the top `k` recommendations.
pub fn recall_at_k(list: &[ItemId], relevant: &HashSet<ItemId>, k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    hits(list, relevant, k) as f64 / relevant.len() as f64
}

/// Binary-relevance nDCG with `log2(rank + 1)` discounts.
pub fn ndcg_at_k(list: &[ItemId], relevant: &HashSet<ItemId>, k: usize) -> f64 {
    let dcg: f64 = list
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| relevant.contains(i))
        .fold(0.0, |acc, (r, _)| acc + 1.0 / ((r + 2) as f64).log2());
    let ideal: f64 = (0..relevant.len().min(k)).map(|r| 1.0 / ((r + 2) as f64).log2()).sum();
    if ideal == 0.0 {
        0.0
    } else {
        dcg / ideal
    }
}

/// Average popularity of a recommendation list (ARP).
pub fn recommendation_popularity(list: &[ItemId], table: &ItemPopularityTable) -> Result<f64> {
    if list.is_empty() {
        return Err(Error::InvalidArgument("empty recommendation list".into()));
    }
    let mut sum = 0.0;
    for &i in list {
        if i as usize >= table.counts().len() {
            return Err(Error::InvalidArgument(format!("item index {i} missing from popularity table")));
        }
        sum += table.pop(i);
    }
    Ok(sum / list.len() as f64)
}

/// `(arp - app) / app`.
pub fn popularity_lift(app: f64, arp: f64) -> Result<f64> {
    if app <= 0.0 {
        return Err(Error::InvalidArgument(format!("profile popularity {app} must be positive")));
    }
    Ok((arp - app) / app)
}

/// Head/Mid/Tail shares of a recommendation list.
pub fn recommendation_ratios(list: &[ItemId], partition: &ItemPartition) -> Result<GroupRatios> {
    let mut counts = [0.0; 3];
    for &i in list {
        let tier = partition
            .tier(i)
            .ok_or_else(|| Error::InvalidArgument(format!("item index {i} is not in the item partition")))?;
        counts[tier.index()] += 1.0;
    }
    GroupRatios::from_weights(counts).ok_or_else(|| Error::InvalidArgument("empty recommendation list".into()))
}

fn kl_to_mixture(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &mi)| pi * (pi / mi).log2())
        .sum()
}

/// Jensen–Shannon divergence in bits; bounded by 1.
pub fn jsd(p: &GroupRatios, q: &GroupRatios) -> Result<f64> {
    for v in [p, q] {
        if (v.sum() - 1.0).abs() > 1e-6 || v.0.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidArgument(format!("{:?} is not a probability vector", v.0)));
        }
    }
    let m: Vec<f64> = p.0.iter().zip(&q.0).map(|(a, b)| 0.5 * (a + b)).collect();
    let d = 0.5 * kl_to_mixture(&p.0, &m) + 0.5 * kl_to_mixture(&q.0, &m);
    Ok(d.clamp(0.0, 1.0))
}

/// Popularity miscalibration of one user: JSD between profile and list ratios.
pub fn upd(profile: &GroupRatios, recs: &GroupRatios) -> Result<f64> {
    jsd(profile, recs)
}

/// Popularity figures for one user under one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserPopularityReport {
    pub app: f64,
    pub arp: f64,
    pub pl: f64,
    pub upd: f64,
    pub recs_ratios: GroupRatios,
    pub group: UserGroup,
}

impl UserPopularityReport {
    pub fn new(app: f64, arp: f64, profile: GroupRatios, recs: GroupRatios, group: UserGroup) -> Result<Self> {
        Ok(Self {
            app,
            arp,
            pl: popularity_lift(app, arp)?,
            upd: upd(&profile, &recs)?,
            recs_ratios: recs,
            group,
        })
    }
}

/// Aggregates for one user group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: UserGroup,
    pub members: usize,
    pub app: f64,
    pub arp: f64,
    /// `(ARP_G - APP_G) / APP_G` over group means.
    pub pl: f64,
    /// Mean of members' individual PL.
    pub mean_user_pl: f64,
    pub upd: f64,
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// One report per group, in Blockbuster, Diverse, Niche order.
pub fn group_reports(reports: &[UserPopularityReport]) -> Result<Vec<GroupReport>> {
    UserGroup::ALL
        .iter()
        .map(|&group| {
            let members: Vec<&UserPopularityReport> = reports.iter().filter(|r| r.group == group).collect();
            if members.is_empty() {
                return Err(Error::EmptyGroup(group.to_string()));
            }
            let n = members.len() as f64;
            let app = members.iter().map(|r| r.app).sum::<f64>() / n;
            let arp = members.iter().map(|r| r.arp).sum::<f64>() / n;
            Ok(GroupReport {
                group,
                members: members.len(),
                app,
                arp,
                pl: popularity_lift(app, arp)?,
                mean_user_pl: members.iter().map(|r| r.pl).sum::<f64>() / n,
                upd: members.iter().map(|r| r.upd).sum::<f64>() / n,
            })
        })
        .collect()
}

/// A correlation coefficient, or the reason it is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub x: String,
    pub y: String,
    pub n: usize,
    pub rho: Option<f64>,
    pub null_reason: Option<String>,
}

impl CorrelationResult {
    fn null(x: &str, y: &str, n: usize, reason: &str) -> Self {
        Self {
            x: x.to_string(),
            y: y.to_string(),
            n,
            rho: None,
            null_reason: Some(reason.to_string()),
        }
    }
}

fn pearson_raw(xs: &[f64], ys: &[f64]) -> std::result::Result<f64, &'static str> {
    if xs.len() != ys.len() {
        return Err("length mismatch");
    }
    if xs.len() < 3 {
        return Err("fewer than 3 samples");
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let scale_x = xs.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    let scale_y = ys.iter().map(|y| y * y).sum::<f64>().max(f64::MIN_POSITIVE);
    if sxx <= 1e-24 * scale_x || syy <= 1e-24 * scale_y {
        return Err("zero variance");
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation of `x` and `y`.
pub fn pearson(x_name: &str, xs: &[f64], y_name: &str, ys: &[f64]) -> CorrelationResult {
    match pearson_raw(xs, ys) {
        Ok(rho) => CorrelationResult {
            x: x_name.to_string(),
            y: y_name.to_string(),
            n: xs.len(),
            rho: Some(rho),
            null_reason: None,
        },
        Err(reason) => CorrelationResult::null(x_name, y_name, xs.len(), reason),
    }
}

/// Fractional ranks (ties share their average rank), 1-based.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation (Pearson over average ranks).
pub fn spearman(x_name: &str, xs: &[f64], y_name: &str, ys: &[f64]) -> CorrelationResult {
    pearson(x_name, &average_ranks(xs), y_name, &average_ranks(ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::popularity::{Partition, TierCuts};

    fn set(xs: &[ItemId]) -> HashSet<ItemId> {
        xs.iter().copied().collect()
    }

    #[test]
    fn precision_and_recall() {
        let list: Vec<ItemId> = (0..10).collect();
        assert!((precision_at_k(&list, &set(&[1, 4, 7, 42]), 10) - 0.3).abs() < 1e-12);
        assert_eq!(recall_at_k(&list, &set(&[2, 3]), 10), 1.0);
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&[5, 6, 7], &set(&[5]), 10), 1.0);
        assert!((ndcg_at_k(&[6, 5, 7], &set(&[5]), 10) - 0.630_93).abs() < 1e-5);
        assert_eq!(ndcg_at_k(&[6, 7], &set(&[5]), 10), 0.0);
    }

    #[test]
    fn popularity_lift_examples() {
        assert_eq!(popularity_lift(0.05, 0.05).unwrap(), 0.0);
        assert!((popularity_lift(0.05, 0.10).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(popularity_lift(0.05, 0.0).unwrap(), -1.0);
        assert!(popularity_lift(0.0, 0.1).is_err());
    }

    #[test]
    fn jsd_examples() {
        let p = GroupRatios([0.7, 0.2, 0.1]);
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
        assert!((jsd(&GroupRatios([1.0, 0.0, 0.0]), &GroupRatios([0.0, 1.0, 0.0])).unwrap() - 1.0).abs() < 1e-12);
        let v = jsd(&GroupRatios([0.5, 0.5, 0.0]), &GroupRatios([0.25, 0.75, 0.0])).unwrap();
        assert!((v - 0.048_80).abs() < 1e-5, "{v}");
        assert!(jsd(&GroupRatios([0.5, 0.2, 0.0]), &p).is_err());
    }

    #[test]
    fn ratios_of_list() {
        let p = Partition::from_ranking(&(0..10).collect::<Vec<_>>(), 10, TierCuts::default()).unwrap();
        assert_eq!(recommendation_ratios(&[0, 1, 0], &p).unwrap().0, [1.0, 0.0, 0.0]);
        let r = recommendation_ratios(&[0, 1, 2, 3, 8, 9, 4, 5, 6, 7], &p).unwrap();
        assert!((r.sum() - 1.0).abs() < 1e-12);
        assert!((r.get(crate::Tier::Tail) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn group_means() {
        let mk = |upd, group| UserPopularityReport {
            app: 0.1,
            arp: 0.2,
            pl: 1.0,
            upd,
            recs_ratios: GroupRatios([1.0, 0.0, 0.0]),
            group,
        };
        let reports = [
            mk(0.2, UserGroup::Niche),
            mk(0.4, UserGroup::Niche),
            mk(0.0, UserGroup::Diverse),
            mk(0.0, UserGroup::Blockbuster),
        ];
        let g = group_reports(&reports).unwrap();
        assert!((g[2].upd - 0.3).abs() < 1e-12);
        assert!(group_reports(&reports[..2]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson("x", &x, "y", &y).rho.unwrap() - 1.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson("x", &x, "y", &y).rho.unwrap() + 1.0).abs() < 1e-12);
        let c = pearson("x", &[2.0; 4], "y", &x);
        assert_eq!(c.rho, None);
        assert_eq!(c.null_reason.as_deref(), Some("zero variance"));
    }

    #[test]
    fn spearman_handles_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0]), vec![1.5, 3.0, 1.5]);
        let r = spearman("a", &[1.0, 2.0, 3.0, 4.0], "b", &[1.0, 4.0, 9.0, 16.0]);
        assert!((r.rho.unwrap() - 1.0).abs() < 1e-12);
    }
}

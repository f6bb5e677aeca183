//! Item and genre popularity, Head/Mid/Tail partitions, user groups and
//! per-user profile statistics.
//!
//! Everything here is computed from the train split only.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Catalog, Dataset, GenreId, ItemId, UserId, UserProfile};
use crate::error::{Error, Result};

/// Popularity tier of an item or genre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    Head,
    Mid,
    Tail,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Head, Tier::Mid, Tier::Tail];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Head => "H",
            Tier::Mid => "M",
            Tier::Tail => "T",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// User group by propensity toward popular items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UserGroup {
    Blockbuster,
    Diverse,
    Niche,
}

impl UserGroup {
    pub const ALL: [UserGroup; 3] = [UserGroup::Blockbuster, UserGroup::Diverse, UserGroup::Niche];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UserGroup::Blockbuster => "Blockbuster",
            UserGroup::Diverse => "Diverse",
            UserGroup::Niche => "Niche",
        }
    }
}

impl fmt::Display for UserGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UserGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "blockbuster" => Ok(Self::Blockbuster),
            "diverse" => Ok(Self::Diverse),
            "niche" => Ok(Self::Niche),
            _ => Err(Error::InvalidArgument(format!("unknown user group `{s}`"))),
        }
    }
}

/// Whether groups were formed from item tiers or genre tiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Item,
    Genre,
}

impl Basis {
    pub fn as_str(self) -> &'static str {
        match self {
            Basis::Item => "item",
            Basis::Genre => "genre",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "item" => Ok(Self::Item),
            "genre" => Ok(Self::Genre),
            _ => Err(Error::InvalidArgument(format!("unknown basis `{s}`"))),
        }
    }
}

/// Fraction of train interactions per item, plus the item ranking
/// (descending popularity, ties by ascending item index).
#[derive(Debug, Clone)]
pub struct ItemPopularityTable {
    counts: Vec<u32>,
    pop: Vec<f64>,
    ranking: Vec<ItemId>,
    total: usize,
}

impl ItemPopularityTable {
    pub fn new(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let counts = train.item_counts();
        let total = train.len();
        let pop = counts.iter().map(|&c| f64::from(c) / total as f64).collect();
        let mut ranking: Vec<ItemId> = (0..counts.len() as ItemId).filter(|&i| counts[i as usize] > 0).collect();
        ranking.sort_by(|&a, &b| counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b)));
        Ok(Self {
            counts,
            pop,
            ranking,
            total,
        })
    }

    pub fn pop(&self, item: ItemId) -> f64 {
        self.pop[item as usize]
    }

    pub fn count(&self, item: ItemId) -> u32 {
        self.counts[item as usize]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Train items, most popular first.
    pub fn ranking(&self) -> &[ItemId] {
        &self.ranking
    }

    pub fn total_interactions(&self) -> usize {
        self.total
    }

    /// Share of interactions carried by the `k` most popular items.
    pub fn head_mass(&self, k: usize) -> f64 {
        self.ranking.iter().take(k).map(|&i| self.pop(i)).sum()
    }
}

/// Head/Tail fractions of a ranked population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierCuts {
    pub head_frac: f64,
    pub tail_frac: f64,
}

impl Default for TierCuts {
    fn default() -> Self {
        Self {
            head_frac: 0.2,
            tail_frac: 0.2,
        }
    }
}

impl TierCuts {
    pub fn validate(&self) -> Result<()> {
        let ok = |f: f64| f > 0.0 && f < 1.0;
        if !ok(self.head_frac) || !ok(self.tail_frac) || self.head_frac + self.tail_frac >= 1.0 {
            return Err(Error::Config(format!(
                "tier fractions {}/{} must lie in (0,1) and sum below 1",
                self.head_frac, self.tail_frac
            )));
        }
        Ok(())
    }

    /// `(head, tail)` sizes for `n` members: `ceil(frac · n)` each.
    pub fn sizes(&self, n: usize) -> (usize, usize) {
        (ceil_count(self.head_frac, n), ceil_count(self.tail_frac, n))
    }
}

/// `ceil(frac · n)`, guarded against `0.2 · 10 = 2.0000000000000004`.
pub(crate) fn ceil_count(frac: f64, n: usize) -> usize {
    let x = frac * n as f64;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Head/Mid/Tail assignment over a ranked population (items or genres).
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    tiers: Vec<Option<Tier>>,
    members: [Vec<u32>; 3],
}

pub type ItemPartition = Partition;
pub type GenrePartition = Partition;

impl Partition {
    /// Cut `ranking` (most popular first) into Head/Mid/Tail. `universe` is the
    /// size of the id space; ids outside the ranking get no tier.
    pub fn from_ranking(ranking: &[u32], universe: usize, cuts: TierCuts) -> Result<Self> {
        cuts.validate()?;
        let n = ranking.len();
        if n < 5 {
            return Err(Error::TooFew {
                what: "ranked members to partition",
                needed: 5,
                found: n,
            });
        }
        let (n_head, n_tail) = cuts.sizes(n);
        let mut tiers = vec![None; universe];
        let mut members: [Vec<u32>; 3] = Default::default();
        for (rank, &id) in ranking.iter().enumerate() {
            let tier = if rank < n_head {
                Tier::Head
            } else if rank >= n - n_tail {
                Tier::Tail
            } else {
                Tier::Mid
            };
            tiers[id as usize] = Some(tier);
            members[tier.index()].push(id);
        }
        Ok(Self { tiers, members })
    }

    pub fn tier(&self, id: u32) -> Option<Tier> {
        self.tiers.get(id as usize).copied().flatten()
    }

    pub fn members(&self, tier: Tier) -> &[u32] {
        &self.members[tier.index()]
    }

    pub fn len(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn partition_items(table: &ItemPopularityTable, cuts: TierCuts) -> Result<ItemPartition> {
    Partition::from_ranking(table.ranking(), table.counts.len(), cuts)
}

/// Fractional interaction mass per genre: every interaction spreads weight 1
/// evenly over its item's genres.
#[derive(Debug, Clone)]
pub struct GenrePopularityTable {
    mass: Vec<f64>,
    ranking: Vec<GenreId>,
    total: f64,
}

impl GenrePopularityTable {
    pub fn new(train: &Dataset) -> Result<Self> {
        let catalog = train.catalog();
        let mut mass = vec![0.0; catalog.n_genres()];
        for x in train.interactions() {
            let genres = catalog.item_genres(x.item);
            if genres.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "item {} has no genres",
                    catalog.item_key(x.item)
                )));
            }
            let share = 1.0 / genres.len() as f64;
            for &g in genres {
                mass[g as usize] += share;
            }
        }
        let mut ranking: Vec<GenreId> = (0..mass.len() as GenreId).collect();
        ranking.sort_by(|&a, &b| {
            mass[b as usize]
                .partial_cmp(&mass[a as usize])
                .unwrap_or(Ordering::Equal)
                .then_with(|| catalog.genre_name(a).cmp(catalog.genre_name(b)))
        });
        Ok(Self {
            mass,
            ranking,
            total: train.len() as f64,
        })
    }

    pub fn mass(&self, genre: GenreId) -> f64 {
        self.mass[genre as usize]
    }

    /// Mass as a fraction of train interactions.
    pub fn share(&self, genre: GenreId) -> f64 {
        self.mass[genre as usize] / self.total
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn ranking(&self) -> &[GenreId] {
        &self.ranking
    }
}

pub fn partition_genres(table: &GenrePopularityTable, cuts: TierCuts) -> Result<GenrePartition> {
    let ranking: Vec<u32> = table.ranking.iter().map(|&g| u32::from(g)).collect();
    Partition::from_ranking(&ranking, table.mass.len(), cuts)
}

/// Share of a profile (or list) falling in each of Head, Mid, Tail.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupRatios(pub [f64; 3]);

impl GroupRatios {
    pub fn get(&self, tier: Tier) -> f64 {
        self.0[tier.index()]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Normalise raw tier weights. `None` when every weight is zero.
    pub fn from_weights(weights: [f64; 3]) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        (total > 0.0).then(|| Self(weights.map(|w| w / total)))
    }
}

fn require_profile(profile: &UserProfile<'_>) -> Result<()> {
    if profile.is_empty() {
        return Err(Error::EmptyProfile(profile.user.to_string()));
    }
    Ok(())
}

fn item_tier(partition: &ItemPartition, item: ItemId) -> Result<Tier> {
    partition
        .tier(item)
        .ok_or_else(|| Error::InvalidArgument(format!("item index {item} is not in the item partition")))
}

fn genre_tier(partition: &GenrePartition, genre: GenreId) -> Result<Tier> {
    partition
        .tier(u32::from(genre))
        .ok_or_else(|| Error::InvalidArgument(format!("genre index {genre} is not in the genre partition")))
}

/// Head/Mid/Tail shares of a profile's items (indicator counts, normalised).
pub fn profile_ratios(profile: &UserProfile<'_>, partition: &ItemPartition) -> Result<GroupRatios> {
    require_profile(profile)?;
    let mut counts = [0.0; 3];
    for item in profile.items() {
        counts[item_tier(partition, item)?.index()] += 1.0;
    }
    Ok(GroupRatios::from_weights(counts).unwrap_or_default())
}

/// Genre-tier shares of a profile: each item spreads weight 1 over its genres.
pub fn profile_genre_ratios(
    profile: &UserProfile<'_>,
    catalog: &Catalog,
    partition: &GenrePartition,
) -> Result<GroupRatios> {
    require_profile(profile)?;
    let mut weights = [0.0; 3];
    for item in profile.items() {
        let genres = catalog.item_genres(item);
        if genres.is_empty() {
            return Err(Error::InvalidArgument(format!("item {} has no genres", catalog.item_key(item))));
        }
        let share = 1.0 / genres.len() as f64;
        for &g in genres {
            weights[genre_tier(partition, g)?.index()] += share;
        }
    }
    Ok(GroupRatios::from_weights(weights).unwrap_or_default())
}

/// Which group is extracted first from the ranked users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionOrder {
    #[default]
    NicheFirst,
    BlockbusterFirst,
}

/// Blockbuster/Diverse/Niche label per user, sorted by user index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserGroupAssignment {
    pub basis: Basis,
    pub entries: Vec<GroupedUser>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupedUser {
    pub user: UserId,
    pub group: UserGroup,
    pub ratios: GroupRatios,
}

impl UserGroupAssignment {
    pub fn label(&self, user: UserId) -> Option<UserGroup> {
        self.entries
            .binary_search_by_key(&user, |e| e.user)
            .ok()
            .map(|i| self.entries[i].group)
    }

    pub fn members(&self, group: UserGroup) -> Vec<UserId> {
        self.entries.iter().filter(|e| e.group == group).map(|e| e.user).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Top `ceil(quantile · n)` users by `key`, ties by ascending user index.
fn extract_top(pool: &mut Vec<(UserId, GroupRatios)>, count: usize, key: Tier) -> Vec<(UserId, GroupRatios)> {
    pool.sort_by(|a, b| {
        b.1.get(key)
            .partial_cmp(&a.1.get(key))
            .unwrap_or(Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let rest = pool.split_off(count.min(pool.len()));
    std::mem::replace(pool, rest)
}

/// Sequential extraction: the top `quantile` of users by Tail share form
/// Niche, then the top `quantile` of all users (count taken over the full
/// population) by Head share among the rest form Blockbuster; the remainder
/// is Diverse. `order` swaps the two extraction steps.
pub fn group_users(
    basis: Basis,
    ratios: &[(UserId, GroupRatios)],
    quantile: f64,
    order: ExtractionOrder,
) -> Result<UserGroupAssignment> {
    let n = ratios.len();
    if n < 5 {
        return Err(Error::TooFew {
            what: "users to group",
            needed: 5,
            found: n,
        });
    }
    if !(quantile > 0.0 && quantile < 0.5) {
        return Err(Error::Config(format!("group quantile {quantile} must lie in (0, 0.5)")));
    }
    let count = ceil_count(quantile, n);
    let mut pool = ratios.to_vec();
    let (first, second) = match order {
        ExtractionOrder::NicheFirst => ((Tier::Tail, UserGroup::Niche), (Tier::Head, UserGroup::Blockbuster)),
        ExtractionOrder::BlockbusterFirst => ((Tier::Head, UserGroup::Blockbuster), (Tier::Tail, UserGroup::Niche)),
    };
    let mut entries = Vec::with_capacity(n);
    for (tier, group) in [first, second] {
        for (user, r) in extract_top(&mut pool, count, tier) {
            entries.push(GroupedUser { user, group, ratios: r });
        }
    }
    entries.extend(pool.into_iter().map(|(user, ratios)| GroupedUser {
        user,
        group: UserGroup::Diverse,
        ratios,
    }));
    entries.sort_by_key(|e| e.user);
    if entries.windows(2).any(|w| w[0].user == w[1].user) {
        return Err(Error::InvalidArgument("duplicate user in ratio list".into()));
    }
    Ok(UserGroupAssignment { basis, entries })
}

/// 1 when some genre of `item` is outside the genre tier matching the item's
/// own tier, 0 otherwise.
pub fn inconsistent(item: ItemId, catalog: &Catalog, items: &ItemPartition, genres: &GenrePartition) -> Result<bool> {
    let tier = item_tier(items, item)?;
    let gs = catalog.item_genres(item);
    if gs.is_empty() {
        return Err(Error::InvalidArgument(format!("item {} has no genres", catalog.item_key(item))));
    }
    for &g in gs {
        if genre_tier(genres, g)? != tier {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Fraction of a profile's items that are inconsistent.
pub fn profile_inconsistency(
    profile: &UserProfile<'_>,
    catalog: &Catalog,
    items: &ItemPartition,
    genres: &GenrePartition,
) -> Result<f64> {
    require_profile(profile)?;
    let mut n = 0usize;
    for item in profile.items() {
        if inconsistent(item, catalog, items, genres)? {
            n += 1;
        }
    }
    Ok(n as f64 / profile.len() as f64)
}

/// Shannon entropy in bits of a discrete distribution given as counts.
pub fn entropy_bits(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Entropy (bits) of the Head/Mid/Tail labels over a profile.
pub fn popularity_diversity(profile: &UserProfile<'_>, partition: &ItemPartition) -> Result<f64> {
    require_profile(profile)?;
    let mut counts = [0.0; 3];
    for item in profile.items() {
        counts[item_tier(partition, item)?.index()] += 1.0;
    }
    Ok(entropy_bits(&counts))
}

/// Average popularity of the items in a profile.
pub fn profile_popularity(profile: &UserProfile<'_>, table: &ItemPopularityTable) -> Result<f64> {
    require_profile(profile)?;
    Ok(profile.items().map(|i| table.pop(i)).sum::<f64>() / profile.len() as f64)
}

/// Average genre popularity of a profile: each item scores the mean share of
/// its genres, averaged over the profile.
pub fn profile_genre_popularity(
    profile: &UserProfile<'_>,
    catalog: &Catalog,
    table: &GenrePopularityTable,
) -> Result<f64> {
    require_profile(profile)?;
    let mut sum = 0.0;
    for item in profile.items() {
        let gs = catalog.item_genres(item);
        if gs.is_empty() {
            return Err(Error::InvalidArgument(format!("item {} has no genres", catalog.item_key(item))));
        }
        sum += gs.iter().map(|&g| table.share(g)).sum::<f64>() / gs.len() as f64;
    }
    Ok(sum / profile.len() as f64)
}

/// Overlap percentages between two groupings of the same users.
///
/// `cells[a][b] = |A ∩ B| / |A| × 100` with rows and columns in
/// Blockbuster, Diverse, Niche order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub cells: [[f64; 3]; 3],
}

impl OverlapMatrix {
    pub fn get(&self, a: UserGroup, b: UserGroup) -> f64 {
        self.cells[a.index()][b.index()]
    }
}

pub fn group_overlap(a: &UserGroupAssignment, b: &UserGroupAssignment) -> Result<OverlapMatrix> {
    if a.entries.len() != b.entries.len() || a.entries.iter().zip(&b.entries).any(|(x, y)| x.user != y.user) {
        return Err(Error::InvalidArgument("group assignments cover different users".into()));
    }
    let mut joint = [[0usize; 3]; 3];
    let mut sizes = [0usize; 3];
    for (x, y) in a.entries.iter().zip(&b.entries) {
        joint[x.group.index()][y.group.index()] += 1;
        sizes[x.group.index()] += 1;
    }
    let mut cells = [[0.0; 3]; 3];
    for g in UserGroup::ALL {
        let size = sizes[g.index()];
        if size == 0 {
            return Err(Error::EmptyGroup(format!("{} ({})", g, a.basis)));
        }
        for h in UserGroup::ALL {
            cells[g.index()][h.index()] = joint[g.index()][h.index()] as f64 / size as f64 * 100.0;
        }
    }
    Ok(OverlapMatrix { cells })
}

/// Per-user profile statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserProfileStats {
    pub user: UserId,
    pub app: f64,
    pub genre_app: f64,
    pub item_ratios: GroupRatios,
    pub genre_ratios: GroupRatios,
    pub inconsistency: f64,
    pub diversity: f64,
    pub profile_size: usize,
}

/// Popularity tables and partitions derived from one train split.
#[derive(Debug, Clone)]
pub struct PopularityModel {
    pub items: ItemPopularityTable,
    pub item_partition: ItemPartition,
    pub genres: GenrePopularityTable,
    pub genre_partition: GenrePartition,
}

impl PopularityModel {
    pub fn new(train: &Dataset, item_cuts: TierCuts, genre_cuts: TierCuts) -> Result<Self> {
        let items = ItemPopularityTable::new(train)?;
        let item_partition = partition_items(&items, item_cuts)?;
        let genres = GenrePopularityTable::new(train)?;
        let genre_partition = partition_genres(&genres, genre_cuts)?;
        Ok(Self {
            items,
            item_partition,
            genres,
            genre_partition,
        })
    }

    pub fn user_stats(&self, train: &Dataset, user: UserId) -> Result<UserProfileStats> {
        let profile = train.profile(user);
        let catalog = train.catalog();
        Ok(UserProfileStats {
            user,
            app: profile_popularity(&profile, &self.items)?,
            genre_app: profile_genre_popularity(&profile, catalog, &self.genres)?,
            item_ratios: profile_ratios(&profile, &self.item_partition)?,
            genre_ratios: profile_genre_ratios(&profile, catalog, &self.genre_partition)?,
            inconsistency: profile_inconsistency(&profile, catalog, &self.item_partition, &self.genre_partition)?,
            diversity: popularity_diversity(&profile, &self.item_partition)?,
            profile_size: profile.len(),
        })
    }
}

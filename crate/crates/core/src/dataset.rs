//! Rating data: loading, validation and deterministic per-user splits.
//!
//! Original user and item ids are remapped to dense indices when a file is
//! loaded. The mapping lives in a shared [`Catalog`] so train and test views
//! of the same data agree on every index, and reports can translate indices
//! back to the ids found in the input files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub type UserId = u32;
pub type ItemId = u32;
pub type GenreId = u16;

/// Item id → genre names, as read from a genre file.
pub type GenreMap = BTreeMap<String, Vec<String>>;

/// Genre names of the ML-100K `u.item` flag columns, in file order.
pub const ML100K_GENRES: [&str; 19] = [
    "unknown",
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatingsFormat {
    /// `UserID::MovieID::Rating::Timestamp`
    Ml1m,
    /// tab-separated `user item rating timestamp`
    Ml100k,
    /// header `user,item,rating,timestamp`
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenresFormat {
    /// `MovieID::Title::Genre1|Genre2|...`
    Ml1mMovies,
    /// pipe-separated `u.item` with 19 binary genre flags
    Ml100kItems,
    /// `item|Genre1|Genre2|...`, one item per line
    Csv,
}

impl FromStr for RatingsFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml1m" => Ok(Self::Ml1m),
            "ml100k" => Ok(Self::Ml100k),
            "csv" => Ok(Self::Csv),
            other => Err(Error::InvalidArgument(format!("unknown ratings format `{other}`"))),
        }
    }
}

impl FromStr for GenresFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml1m_movies" => Ok(Self::Ml1mMovies),
            "ml100k_items" => Ok(Self::Ml100kItems),
            "csv" => Ok(Self::Csv),
            other => Err(Error::InvalidArgument(format!("unknown genres format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub user: UserId,
    pub item: ItemId,
    pub rating: f32,
    pub timestamp: i64,
}

/// Index spaces shared by every view of one loaded dataset.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    user_keys: Vec<String>,
    item_keys: Vec<String>,
    genre_names: Vec<String>,
    item_genres: Vec<Vec<GenreId>>,
}

impl Catalog {
    pub fn user_key(&self, user: UserId) -> &str {
        &self.user_keys[user as usize]
    }

    pub fn item_key(&self, item: ItemId) -> &str {
        &self.item_keys[item as usize]
    }

    pub fn genre_name(&self, genre: GenreId) -> &str {
        &self.genre_names[genre as usize]
    }

    pub fn genre_names(&self) -> &[String] {
        &self.genre_names
    }

    pub fn item_genres(&self, item: ItemId) -> &[GenreId] {
        &self.item_genres[item as usize]
    }

    pub fn n_users(&self) -> usize {
        self.user_keys.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_keys.len()
    }

    pub fn n_genres(&self) -> usize {
        self.genre_names.len()
    }

    pub fn find_user(&self, key: &str) -> Option<UserId> {
        self.user_keys.iter().position(|k| k == key).map(|i| i as UserId)
    }

    pub fn find_item(&self, key: &str) -> Option<ItemId> {
        self.item_keys.iter().position(|k| k == key).map(|i| i as ItemId)
    }
}

/// A set of interactions over a shared [`Catalog`], grouped by user.
///
/// Interactions are sorted by `(user, item)` and at most one exists per pair.
#[derive(Debug, Clone)]
pub struct Dataset {
    catalog: Arc<Catalog>,
    interactions: Vec<Interaction>,
    user_offsets: Vec<usize>,
}

/// A user's interactions within one dataset view.
#[derive(Debug, Clone, Copy)]
pub struct UserProfile<'a> {
    pub user: UserId,
    pub entries: &'a [Interaction],
}

impl<'a> UserProfile<'a> {
    pub fn items(&self) -> impl Iterator<Item = ItemId> + 'a {
        self.entries.iter().map(|e| e.item)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub density: f64,
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "users={} items={} interactions={} density={:.6}",
            self.users, self.items, self.interactions, self.density
        )
    }
}

impl Dataset {
    fn from_sorted(catalog: Arc<Catalog>, mut interactions: Vec<Interaction>) -> Self {
        interactions.sort_by_key(|x| (x.user, x.item));
        let mut user_offsets = vec![0usize; catalog.n_users() + 1];
        for x in &interactions {
            user_offsets[x.user as usize + 1] += 1;
        }
        for u in 0..catalog.n_users() {
            user_offsets[u + 1] += user_offsets[u];
        }
        Dataset {
            catalog,
            interactions,
            user_offsets,
        }
    }

    /// Build a dataset from in-memory records `(user, item, rating, timestamp)`.
    ///
    /// Applies the same validation and deduplication as the file loaders.
    pub fn from_records<U, I>(records: impl IntoIterator<Item = (U, I, f64, i64)>) -> Result<Self>
    where
        U: Into<String>,
        I: Into<String>,
    {
        let raw: Vec<RawRating> = records
            .into_iter()
            .enumerate()
            .map(|(n, (u, i, r, t))| RawRating {
                line: n + 1,
                user: u.into(),
                item: i.into(),
                rating: r,
                timestamp: t,
            })
            .collect();
        build_from_raw(Path::new("<memory>"), raw)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn shared_catalog(&self) -> Arc<Catalog> {
        Arc::clone(&self.catalog)
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn n_users(&self) -> usize {
        self.catalog.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.catalog.n_items()
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn profile(&self, user: UserId) -> UserProfile<'_> {
        let u = user as usize;
        UserProfile {
            user,
            entries: &self.interactions[self.user_offsets[u]..self.user_offsets[u + 1]],
        }
    }

    /// Users with at least one interaction in this view.
    pub fn active_users(&self) -> Vec<UserId> {
        (0..self.n_users() as UserId)
            .filter(|&u| !self.profile(u).is_empty())
            .collect()
    }

    /// Interaction count per item over the whole catalog.
    pub fn item_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_items()];
        for x in &self.interactions {
            counts[x.item as usize] += 1;
        }
        counts
    }

    /// Items with at least one interaction in this view.
    pub fn active_items(&self) -> Vec<ItemId> {
        self.item_counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| i as ItemId)
            .collect()
    }

    pub fn mean_rating(&self) -> f64 {
        if self.interactions.is_empty() {
            return 0.0;
        }
        self.interactions.iter().map(|x| f64::from(x.rating)).sum::<f64>() / self.len() as f64
    }

    pub fn stats(&self) -> DatasetStats {
        let users = self.active_users().len();
        let items = self.active_items().len();
        let interactions = self.len();
        let density = if users == 0 || items == 0 {
            0.0
        } else {
            interactions as f64 / (users as f64 * items as f64)
        };
        DatasetStats {
            users,
            items,
            interactions,
            density,
        }
    }

    /// Attach genres and drop items that have none, together with their
    /// interactions. Returns the number of dropped items.
    ///
    /// The genre catalog is the sorted set of genre names used by retained
    /// items. Ids are re-densified after dropping.
    pub fn with_genres(self, genres: &GenreMap) -> Result<(Dataset, usize)> {
        for (item, names) in genres {
            if names.is_empty() {
                return Err(Error::InvalidArgument(format!("item {item} has an empty genre list")));
            }
        }
        let old = &self.catalog;
        let keep: Vec<bool> = old.item_keys.iter().map(|k| genres.contains_key(k)).collect();
        let dropped = keep.iter().filter(|&&k| !k).count();
        if dropped > 0 {
            warn!("dropping {dropped} items without genres and their interactions");
        }

        let genre_names: Vec<String> = old
            .item_keys
            .iter()
            .filter_map(|k| genres.get(k))
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let genre_index: HashMap<&str, GenreId> = genre_names
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i as GenreId))
            .collect();

        let mut item_map = vec![None; old.n_items()];
        let mut item_keys = Vec::new();
        let mut item_genres = Vec::new();
        for (i, key) in old.item_keys.iter().enumerate() {
            if let Some(names) = genres.get(key) {
                item_map[i] = Some(item_keys.len() as ItemId);
                item_keys.push(key.clone());
                let mut ids: Vec<GenreId> = names.iter().map(|g| genre_index[g.as_str()]).collect();
                ids.sort_unstable();
                ids.dedup();
                item_genres.push(ids);
            }
        }

        let kept: Vec<(usize, Interaction)> = self
            .interactions
            .iter()
            .filter_map(|x| item_map[x.item as usize].map(|item| (x.user as usize, Interaction { item, ..*x })))
            .collect();
        let mut user_map = vec![None; old.n_users()];
        for (u, _) in &kept {
            user_map[*u] = Some(());
        }
        let mut user_remap = vec![0 as UserId; old.n_users()];
        let mut user_keys = Vec::new();
        for (u, key) in old.user_keys.iter().enumerate() {
            if user_map[u].is_some() {
                user_remap[u] = user_keys.len() as UserId;
                user_keys.push(key.clone());
            }
        }
        let interactions: Vec<Interaction> = kept
            .into_iter()
            .map(|(u, x)| Interaction {
                user: user_remap[u],
                ..x
            })
            .collect();
        if interactions.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let catalog = Catalog {
            user_keys,
            item_keys,
            genre_names,
            item_genres,
        };
        Ok((Dataset::from_sorted(Arc::new(catalog), interactions), dropped))
    }

    /// Per-user uniform random split.
    ///
    /// Each user's items are shuffled by a generator seeded from `seed` and the
    /// user's original id, and the first `round(ratio · n)` go to train. Users
    /// with fewer than two interactions, or with no train interaction after
    /// rounding, are dropped and listed in [`SplitDataset::dropped_users`].
    pub fn split(&self, ratio: f64, seed: u64) -> Result<SplitDataset> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidArgument(format!("split ratio {ratio} not in (0, 1)")));
        }
        let mut train = Vec::with_capacity(self.len());
        let mut test = Vec::new();
        let mut dropped_users = Vec::new();
        for user in 0..self.n_users() as UserId {
            let profile = self.profile(user);
            let n = profile.len();
            if n == 0 {
                continue;
            }
            let n_train = ((ratio * n as f64).round() as usize).min(n);
            if n < 2 || n_train == 0 {
                dropped_users.push(user);
                continue;
            }
            let key = seed::hash_bytes(self.catalog.user_key(user).as_bytes());
            let mut rng = seed::rng(seed::keyed(seed, &[key]));
            let mut entries = profile.entries.to_vec();
            entries.shuffle(&mut rng);
            test.extend_from_slice(&entries[n_train..]);
            entries.truncate(n_train);
            train.extend(entries);
        }
        if !dropped_users.is_empty() {
            warn!("split dropped {} users with too few interactions", dropped_users.len());
        }
        Ok(SplitDataset {
            train: Dataset::from_sorted(Arc::clone(&self.catalog), train),
            test: Dataset::from_sorted(Arc::clone(&self.catalog), test),
            split_ratio: ratio,
            seed,
            dropped_users,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: Dataset,
    pub test: Dataset,
    pub split_ratio: f64,
    pub seed: u64,
    pub dropped_users: Vec<UserId>,
}

impl SplitDataset {
    /// Users with at least one held-out interaction.
    pub fn evaluation_users(&self) -> Vec<UserId> {
        self.test.active_users()
    }
}

struct RawRating {
    line: usize,
    user: String,
    item: String,
    rating: f64,
    timestamp: i64,
}

/// Read a file as latin-1 text. Every byte maps to the code point of the same
/// value, so this never fails on MovieLens files.
fn read_latin1(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bytes.iter().map(|&b| b as char).collect())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_fields(path: &Path, line: usize, fields: &[&str]) -> Result<RawRating> {
    if fields.len() != 4 {
        return Err(parse_err(path, line, format!("expected 4 fields, found {}", fields.len())));
    }
    let rating: f64 = fields[2]
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad rating `{}`", fields[2])))?;
    let timestamp: i64 = fields[3]
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad timestamp `{}`", fields[3])))?;
    let user = fields[0].trim();
    let item = fields[1].trim();
    if user.is_empty() || item.is_empty() {
        return Err(parse_err(path, line, "empty id"));
    }
    Ok(RawRating {
        line,
        user: user.to_string(),
        item: item.to_string(),
        rating,
        timestamp,
    })
}

/// Load a ratings file. Duplicate `(user, item)` pairs keep the latest
/// timestamp; on equal timestamps the later line wins.
pub fn load_ratings(path: impl AsRef<Path>, format: RatingsFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let text = read_latin1(path)?;
    let mut raw = Vec::new();
    match format {
        RatingsFormat::Ml1m => {
            for (n, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split("::").collect();
                raw.push(parse_fields(path, n + 1, &fields)?);
            }
        }
        RatingsFormat::Ml100k => {
            for (n, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split('\t').collect();
                raw.push(parse_fields(path, n + 1, &fields)?);
            }
        }
        RatingsFormat::Csv => {
            let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
            if let Some((n, header)) = lines.next() {
                let cols: Vec<String> = header.split(',').map(|c| c.trim().to_ascii_lowercase()).collect();
                if cols != ["user", "item", "rating", "timestamp"] {
                    return Err(parse_err(path, n + 1, "expected header `user,item,rating,timestamp`"));
                }
            }
            for (n, line) in lines {
                let fields: Vec<&str> = line.split(',').collect();
                raw.push(parse_fields(path, n + 1, &fields)?);
            }
        }
    }
    build_from_raw(path, raw)
}

/// Sort ids numerically when they all parse as integers, lexicographically
/// otherwise.
fn sorted_keys(keys: BTreeSet<&str>) -> Vec<String> {
    let mut keys: Vec<&str> = keys.into_iter().collect();
    if keys.iter().all(|k| k.parse::<i64>().is_ok()) {
        keys.sort_by_key(|k| k.parse::<i64>().unwrap_or_default());
    }
    keys.into_iter().map(str::to_string).collect()
}

fn build_from_raw(path: &Path, raw: Vec<RawRating>) -> Result<Dataset> {
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for r in &raw {
        if !(1.0..=5.0).contains(&r.rating) {
            return Err(Error::RatingOutOfRange {
                path: path.to_path_buf(),
                line: r.line,
                rating: r.rating,
            });
        }
    }
    let user_keys = sorted_keys(raw.iter().map(|r| r.user.as_str()).collect());
    let item_keys = sorted_keys(raw.iter().map(|r| r.item.as_str()).collect());
    let user_index: HashMap<&str, UserId> = user_keys
        .iter()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i as UserId))
        .collect();
    let item_index: HashMap<&str, ItemId> = item_keys
        .iter()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i as ItemId))
        .collect();

    let mut latest: HashMap<(UserId, ItemId), Interaction> = HashMap::with_capacity(raw.len());
    let mut duplicates = 0usize;
    for r in &raw {
        let x = Interaction {
            user: user_index[r.user.as_str()],
            item: item_index[r.item.as_str()],
            rating: r.rating as f32,
            timestamp: r.timestamp,
        };
        match latest.entry((x.user, x.item)) {
            std::collections::hash_map::Entry::Occupied(mut e) => {
                duplicates += 1;
                if x.timestamp >= e.get().timestamp {
                    e.insert(x);
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(x);
            }
        }
    }
    if duplicates > 0 {
        warn!("{}: collapsed {duplicates} duplicate ratings", path.display());
    }
    let catalog = Catalog {
        item_genres: vec![Vec::new(); item_keys.len()],
        user_keys,
        item_keys,
        genre_names: Vec::new(),
    };
    Ok(Dataset::from_sorted(Arc::new(catalog), latest.into_values().collect()))
}

fn non_empty_genres(path: &Path, line: usize, item: &str, genres: Vec<String>) -> Result<Vec<String>> {
    if genres.is_empty() {
        return Err(parse_err(path, line, format!("item {item} has an empty genre field")));
    }
    Ok(genres)
}

/// Load an item → genres map.
pub fn load_genres(path: impl AsRef<Path>, format: GenresFormat) -> Result<GenreMap> {
    let path = path.as_ref();
    let text = read_latin1(path)?;
    let mut map = GenreMap::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (item, genres) = match format {
            GenresFormat::Ml1mMovies => {
                let fields: Vec<&str> = line.split("::").collect();
                if fields.len() != 3 {
                    return Err(parse_err(path, line_no, format!("expected 3 fields, found {}", fields.len())));
                }
                let genres = fields[2]
                    .split('|')
                    .map(str::trim)
                    .filter(|g| !g.is_empty())
                    .map(str::to_string)
                    .collect();
                (fields[0].trim().to_string(), genres)
            }
            GenresFormat::Ml100kItems => {
                let fields: Vec<&str> = line.split('|').collect();
                if fields.len() != 5 + ML100K_GENRES.len() {
                    return Err(parse_err(
                        path,
                        line_no,
                        format!("expected {} fields, found {}", 5 + ML100K_GENRES.len(), fields.len()),
                    ));
                }
                let mut genres = Vec::new();
                for (flag, name) in fields[5..].iter().zip(ML100K_GENRES) {
                    match flag.trim() {
                        "1" => genres.push(name.to_string()),
                        "0" => {}
                        other => return Err(parse_err(path, line_no, format!("bad genre flag `{other}`"))),
                    }
                }
                (fields[0].trim().to_string(), genres)
            }
            GenresFormat::Csv => {
                let mut fields = line.split('|');
                let item = fields.next().unwrap_or_default().trim().to_string();
                let genres = fields
                    .map(str::trim)
                    .filter(|g| !g.is_empty())
                    .map(str::to_string)
                    .collect();
                (item, genres)
            }
        };
        if item.is_empty() {
            return Err(parse_err(path, line_no, "empty item id"));
        }
        let genres = non_empty_genres(path, line_no, &item, genres)?;
        map.insert(item, genres);
    }
    Ok(map)
}

//! Popularity-bias audit for recommender systems.
//!
//! The crate loads MovieLens-style rating data, splits it per user, trains six
//! recommenders and measures how unevenly their recommendations follow the
//! popularity taste of Blockbuster, Diverse and Niche user groups. Two
//! explanatory factors are computed per user: profile inconsistency between
//! item-popularity and genre-popularity groups, and popularity diversity of the
//! profile.
//!
//! Module map:
//!
//! * [`dataset`]: loading, validation, deterministic per-user splits.
//! * [`popularity`]: item/genre popularity, Head/Mid/Tail partitions, user
//!   groups and per-user profile statistics.
//! * [`recommenders`]: UserKNN, ItemKNN, BiasedMF, BPR, Popular, Random, top-N
//!   lists and grid search.
//! * [`metrics`]: accuracy, ARP/PL, group ratios, JSD/UPD, correlations.
//! * [`pipeline`]: the end-to-end audit, alpha sweep, correlation analysis and
//!   report emission.

pub mod dataset;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod popularity;
pub mod recommenders;
pub mod seed;

pub use dataset::{Dataset, DatasetStats, GenreId, ItemId, RatingsFormat, GenresFormat, SplitDataset, UserId};
pub use error::{Error, Result};
pub use popularity::{Tier, UserGroup};

//! Non-personalised reference recommenders.

use crate::dataset::{Dataset, ItemId, UserId};
use crate::seed;

/// Scores every item by its train interaction count.
#[derive(Debug, Clone)]
pub struct PopularModel {
    counts: Vec<u32>,
}

impl PopularModel {
    pub fn fit(train: &Dataset) -> Self {
        Self {
            counts: train.item_counts(),
        }
    }

    pub fn count(&self, item: ItemId) -> u32 {
        self.counts[item as usize]
    }

    pub fn score_user(&self, scores: &mut [f64]) {
        for (s, &c) in scores.iter_mut().zip(&self.counts) {
            *s = f64::from(c);
        }
    }
}

/// Scores are uniform draws keyed by `(seed, user, item)`, so a list never
/// depends on evaluation order or thread count.
#[derive(Debug, Clone, Copy)]
pub struct RandomModel {
    seed: u64,
}

impl RandomModel {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn score_user(&self, user: UserId, scores: &mut [f64]) {
        for (i, s) in scores.iter_mut().enumerate() {
            *s = seed::unit_interval(seed::keyed(self.seed, &[u64::from(user), i as u64]));
        }
    }
}

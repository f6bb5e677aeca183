//! User- and item-based neighbourhood models.

use rayon::prelude::*;

use super::{KnnScoring, Similarity};
use crate::dataset::{Dataset, ItemId, UserId};

/// Compressed rows: `offsets[r]..offsets[r+1]` index `cols` / `vals`.
#[derive(Debug, Clone, Default)]
struct Sparse {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Sparse {
    fn row(&self, r: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let span = self.offsets[r]..self.offsets[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    fn from_triples(n_rows: usize, mut triples: Vec<(u32, u32, f64)>) -> Self {
        triples.sort_by_key(|t| (t.0, t.1));
        let mut offsets = vec![0usize; n_rows + 1];
        for t in &triples {
            offsets[t.0 as usize + 1] += 1;
        }
        for r in 0..n_rows {
            offsets[r + 1] += offsets[r];
        }
        Sparse {
            offsets,
            cols: triples.iter().map(|t| t.1).collect(),
            vals: triples.iter().map(|t| t.2).collect(),
        }
    }

    fn norms(&self) -> Vec<f64> {
        (0..self.rows())
            .map(|r| self.row(r).map(|(_, v)| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

/// Rating vectors used for similarity, as user rows and item rows. Pearson
/// centres on user means when `center_users` is set and on item means
/// otherwise.
fn similarity_vectors(train: &Dataset, similarity: Similarity, center_users: bool) -> (Sparse, Sparse) {
    let n_users = train.n_users();
    let n_items = train.n_items();
    let mut means_u = vec![0.0; n_users];
    let mut means_i = vec![0.0; n_items];
    if similarity == Similarity::Pearson {
        let mut cu = vec![0usize; n_users];
        let mut ci = vec![0usize; n_items];
        for x in train.interactions() {
            means_u[x.user as usize] += f64::from(x.rating);
            cu[x.user as usize] += 1;
            means_i[x.item as usize] += f64::from(x.rating);
            ci[x.item as usize] += 1;
        }
        for (m, c) in means_u.iter_mut().zip(&cu) {
            *m /= (*c).max(1) as f64;
        }
        for (m, c) in means_i.iter_mut().zip(&ci) {
            *m /= (*c).max(1) as f64;
        }
    }
    let value = |u: UserId, i: ItemId, r: f32| -> f64 {
        let r = f64::from(r);
        match (similarity, center_users) {
            (Similarity::Cosine, _) => r,
            (Similarity::Pearson, true) => r - means_u[u as usize],
            (Similarity::Pearson, false) => r - means_i[i as usize],
        }
    };
    let by_user: Vec<(u32, u32, f64)> = train
        .interactions()
        .iter()
        .map(|x| (x.user, x.item, value(x.user, x.item, x.rating)))
        .collect();
    let by_item: Vec<(u32, u32, f64)> = by_user.iter().map(|&(u, i, v)| (i, u, v)).collect();
    (Sparse::from_triples(n_users, by_user), Sparse::from_triples(n_items, by_item))
}

fn raw_ratings(train: &Dataset) -> Sparse {
    Sparse::from_triples(
        train.n_users(),
        train
            .interactions()
            .iter()
            .map(|x| (x.user, x.item, f64::from(x.rating)))
            .collect(),
    )
}

#[derive(Debug, Default, Clone)]
struct Accumulator {
    num: Vec<f64>,
    den: Vec<f64>,
    sum: Vec<f64>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            num: vec![0.0; n],
            den: vec![0.0; n],
            sum: vec![0.0; n],
        }
    }

    fn add(&mut self, i: usize, sim: f64, rating: f64) {
        self.num[i] += sim * rating;
        self.den[i] += sim.abs();
        self.sum[i] += sim;
    }

    fn write(&self, scoring: KnnScoring, scores: &mut [f64]) {
        for (i, s) in scores.iter_mut().enumerate() {
            *s = match scoring {
                KnnScoring::WeightedMean if self.den[i] > 0.0 => self.num[i] / self.den[i],
                KnnScoring::WeightedMean => 0.0,
                KnnScoring::SimilaritySum => self.sum[i],
            };
        }
    }
}

/// Sort neighbours by similarity, most similar first, ties by index.
fn sort_neighbours(ns: &mut [(f64, u32)]) {
    ns.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
}

/// User-based neighbourhood model. An item's score aggregates the ratings of
/// the `k` users most similar to the target among those who rated it.
#[derive(Debug, Clone)]
pub struct UserKnnModel {
    k: usize,
    scoring: KnnScoring,
    user_vecs: Sparse,
    item_vecs: Sparse,
    norms: Vec<f64>,
    ratings: Sparse,
    n_items: usize,
}

impl UserKnnModel {
    pub fn fit(train: &Dataset, k: usize, similarity: Similarity, scoring: KnnScoring) -> Self {
        let (user_vecs, item_vecs) = similarity_vectors(train, similarity, true);
        let norms = user_vecs.norms();
        Self {
            k,
            scoring,
            user_vecs,
            item_vecs,
            norms,
            ratings: raw_ratings(train),
            n_items: train.n_items(),
        }
    }

    /// Similarities of `user` to every other user with a non-zero overlap.
    fn neighbours(&self, user: UserId) -> Vec<(f64, u32)> {
        let mut dots = vec![0.0; self.norms.len()];
        for (i, a) in self.user_vecs.row(user as usize) {
            for (v, b) in self.item_vecs.row(i as usize) {
                dots[v as usize] += a * b;
            }
        }
        let nu = self.norms[user as usize];
        let mut out: Vec<(f64, u32)> = dots
            .iter()
            .enumerate()
            .filter(|&(v, &d)| v != user as usize && d != 0.0 && self.norms[v] > 0.0 && nu > 0.0)
            .map(|(v, &d)| (d / (nu * self.norms[v]), v as u32))
            .collect();
        sort_neighbours(&mut out);
        out
    }

    pub fn similarity(&self, u: UserId, v: UserId) -> f64 {
        self.neighbours(u)
            .into_iter()
            .find(|n| n.1 == v)
            .map_or(0.0, |n| n.0)
    }

    pub fn score_user(&self, user: UserId, scores: &mut [f64]) {
        let mut acc = Accumulator::new(self.n_items);
        let mut taken = vec![0u32; self.n_items];
        let k = self.k as u32;
        for (sim, v) in self.neighbours(user) {
            for (i, r) in self.ratings.row(v as usize) {
                let slot = &mut taken[i as usize];
                if *slot < k {
                    *slot += 1;
                    acc.add(i as usize, sim, r);
                }
            }
        }
        acc.write(self.scoring, scores);
    }
}

/// Item-based neighbourhood model. An item's score aggregates the user's
/// ratings on the item's `k` most similar items.
#[derive(Debug, Clone)]
pub struct ItemKnnModel {
    scoring: KnnScoring,
    neighbours: Vec<Vec<(u32, f64)>>,
    /// `reverse[j]` lists `(i, sim)` for every `i` having `j` among its neighbours.
    reverse: Vec<Vec<(u32, f64)>>,
    ratings: Sparse,
    n_items: usize,
}

impl ItemKnnModel {
    pub fn fit(train: &Dataset, k: usize, similarity: Similarity, scoring: KnnScoring) -> Self {
        let n_items = train.n_items();
        let (user_vecs, item_vecs) = similarity_vectors(train, similarity, false);
        let norms = item_vecs.norms();
        let neighbours: Vec<Vec<(u32, f64)>> = (0..n_items)
            .into_par_iter()
            .map_init(
                || vec![0.0f64; n_items],
                |dots, i| {
                    dots.iter_mut().for_each(|d| *d = 0.0);
                    for (u, a) in item_vecs.row(i) {
                        for (j, b) in user_vecs.row(u as usize) {
                            dots[j as usize] += a * b;
                        }
                    }
                    let ni = norms[i];
                    let mut cands: Vec<(f64, u32)> = dots
                        .iter()
                        .enumerate()
                        .filter(|&(j, &d)| j != i && d != 0.0 && ni > 0.0 && norms[j] > 0.0)
                        .map(|(j, &d)| (d / (ni * norms[j]), j as u32))
                        .collect();
                    sort_neighbours(&mut cands);
                    cands.truncate(k);
                    cands.into_iter().map(|(s, j)| (j, s)).collect()
                },
            )
            .collect();
        let mut reverse = vec![Vec::new(); n_items];
        for (i, ns) in neighbours.iter().enumerate() {
            for &(j, s) in ns {
                reverse[j as usize].push((i as u32, s));
            }
        }
        Self {
            scoring,
            neighbours,
            reverse,
            ratings: raw_ratings(train),
            n_items,
        }
    }

    /// Similarity of `j` as a neighbour of `i` (0 when not among the top k).
    pub fn similarity(&self, i: ItemId, j: ItemId) -> f64 {
        self.neighbours[i as usize]
            .iter()
            .find(|n| n.0 == j)
            .map_or(0.0, |n| n.1)
    }

    pub fn neighbours(&self, i: ItemId) -> &[(u32, f64)] {
        &self.neighbours[i as usize]
    }

    pub fn score_user(&self, user: UserId, scores: &mut [f64]) {
        let mut acc = Accumulator::new(self.n_items);
        for (j, r) in self.ratings.row(user as usize) {
            for &(i, sim) in &self.reverse[j as usize] {
                acc.add(i as usize, sim, r);
            }
        }
        acc.write(self.scoring, scores);
    }
}

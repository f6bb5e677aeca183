//! Bayesian personalised ranking with uniform negative sampling.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{sigmoid, Hyperparameters};
use crate::dataset::{Dataset, ItemId, UserId};
use crate::error::{Error, Result};
use crate::seed;

/// Parameters touched by one `(u, i⁺, j⁻)` triple. The same shape holds the
/// gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct BprTriple {
    pub p_u: Vec<f64>,
    pub q_i: Vec<f64>,
    pub q_j: Vec<f64>,
    pub b_i: f64,
    pub b_j: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl BprTriple {
    /// `x_ui - x_uj` with `x = p_u · q + b`.
    pub fn margin(&self) -> f64 {
        dot(&self.p_u, &self.q_i) + self.b_i - dot(&self.p_u, &self.q_j) - self.b_j
    }

    /// `ln σ(x_ui - x_uj) - reg ‖θ‖²`.
    pub fn objective(&self, reg: f64) -> f64 {
        let norm = dot(&self.p_u, &self.p_u)
            + dot(&self.q_i, &self.q_i)
            + dot(&self.q_j, &self.q_j)
            + self.b_i * self.b_i
            + self.b_j * self.b_j;
        sigmoid(self.margin()).ln() - reg * norm
    }

    pub fn gradient(&self, reg: f64) -> BprTriple {
        let g = sigmoid(-self.margin());
        let r2 = 2.0 * reg;
        BprTriple {
            p_u: self
                .q_i
                .iter()
                .zip(&self.q_j)
                .zip(&self.p_u)
                .map(|((qi, qj), p)| g * (qi - qj) - r2 * p)
                .collect(),
            q_i: self.p_u.iter().zip(&self.q_i).map(|(p, q)| g * p - r2 * q).collect(),
            q_j: self.p_u.iter().zip(&self.q_j).map(|(p, q)| -g * p - r2 * q).collect(),
            b_i: g - r2 * self.b_i,
            b_j: -g - r2 * self.b_j,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BprModel {
    factors: usize,
    p: Vec<f64>,
    q: Vec<f64>,
    b: Vec<f64>,
    epoch_objectives: Vec<f64>,
}

impl BprModel {
    pub fn fit(train: &Dataset, params: &Hyperparameters, seed: u64) -> Result<Self> {
        let f = params.factors;
        let (n_users, n_items) = (train.n_users(), train.n_items());
        let normal = Normal::new(0.0, 0.1).expect("valid normal");
        let mut init = seed::rng(seed::sub_seed(seed, "bpr-init"));
        let mut m = Self {
            factors: f,
            p: (0..n_users * f).map(|_| normal.sample(&mut init)).collect(),
            q: (0..n_items * f).map(|_| normal.sample(&mut init)).collect(),
            b: vec![0.0; n_items],
            epoch_objectives: Vec::new(),
        };
        let data = train.interactions();
        let universe = train.active_items();
        let mut rng = seed::rng(seed::sub_seed(seed, "bpr-sampling"));
        let (lr, reg) = (params.learn_rate, params.reg);
        let mut t = BprTriple {
            p_u: vec![0.0; f],
            q_i: vec![0.0; f],
            q_j: vec![0.0; f],
            b_i: 0.0,
            b_j: 0.0,
        };
        for epoch in 0..params.epochs {
            let mut total = 0.0;
            for _ in 0..data.len() {
                let x = &data[rng.gen_range(0..data.len())];
                let profile = train.profile(x.user);
                if profile.len() >= universe.len() {
                    continue;
                }
                let j = loop {
                    let j = universe[rng.gen_range(0..universe.len())];
                    if profile.entries.binary_search_by_key(&j, |e| e.item).is_err() {
                        break j;
                    }
                };
                let (u, i, j) = (x.user as usize, x.item as usize, j as usize);
                t.p_u.copy_from_slice(&m.p[u * f..(u + 1) * f]);
                t.q_i.copy_from_slice(&m.q[i * f..(i + 1) * f]);
                t.q_j.copy_from_slice(&m.q[j * f..(j + 1) * f]);
                t.b_i = m.b[i];
                t.b_j = m.b[j];
                total += t.objective(reg);
                let g = t.gradient(reg);
                for k in 0..f {
                    m.p[u * f + k] += lr * g.p_u[k];
                    m.q[i * f + k] += lr * g.q_i[k];
                    m.q[j * f + k] += lr * g.q_j[k];
                }
                m.b[i] += lr * g.b_i;
                m.b[j] += lr * g.b_j;
            }
            if !total.is_finite() {
                return Err(Error::Diverged(format!("BPR objective is {total} at epoch {}", epoch + 1)));
            }
            m.epoch_objectives.push(total);
        }
        Ok(m)
    }

    /// Summed sampled objective per epoch.
    pub fn epoch_objectives(&self) -> &[f64] {
        &self.epoch_objectives
    }

    pub fn preference(&self, user: UserId, item: ItemId) -> f64 {
        let (u, i, f) = (user as usize, item as usize, self.factors);
        dot(&self.p[u * f..(u + 1) * f], &self.q[i * f..(i + 1) * f]) + self.b[i]
    }

    pub fn score_user(&self, user: UserId, scores: &mut [f64]) {
        let (u, f) = (user as usize, self.factors);
        let pu = &self.p[u * f..(u + 1) * f];
        for (i, s) in scores.iter_mut().enumerate() {
            *s = dot(pu, &self.q[i * f..(i + 1) * f]) + self.b[i];
        }
    }
}

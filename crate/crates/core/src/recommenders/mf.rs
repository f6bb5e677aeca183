//! Biased matrix factorisation trained by SGD on squared rating error.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use super::Hyperparameters;
use crate::dataset::{Dataset, ItemId, UserId};
use crate::error::{Error, Result};
use crate::seed;

/// One observed rating together with the parameters it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct MfSample {
    pub mu: f64,
    pub b_u: f64,
    pub b_i: f64,
    pub p_u: Vec<f64>,
    pub q_i: Vec<f64>,
    pub rating: f64,
}

/// Partial derivatives of [`MfSample::loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct MfGradient {
    pub b_u: f64,
    pub b_i: f64,
    pub p_u: Vec<f64>,
    pub q_i: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq(a: &[f64]) -> f64 {
    dot(a, a)
}

impl MfSample {
    pub fn prediction(&self) -> f64 {
        self.mu + self.b_u + self.b_i + dot(&self.p_u, &self.q_i)
    }

    /// `½ e² + ½ reg (b_u² + b_i² + ‖p_u‖² + ‖q_i‖²)` with `e = r - r̂`.
    pub fn loss(&self, reg: f64) -> f64 {
        let e = self.rating - self.prediction();
        0.5 * e * e + 0.5 * reg * (self.b_u * self.b_u + self.b_i * self.b_i + sq(&self.p_u) + sq(&self.q_i))
    }

    pub fn gradient(&self, reg: f64) -> MfGradient {
        let e = self.rating - self.prediction();
        MfGradient {
            b_u: -e + reg * self.b_u,
            b_i: -e + reg * self.b_i,
            p_u: self.q_i.iter().zip(&self.p_u).map(|(q, p)| -e * q + reg * p).collect(),
            q_i: self.p_u.iter().zip(&self.q_i).map(|(p, q)| -e * p + reg * q).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BiasedMfModel {
    factors: usize,
    mu: f64,
    b_u: Vec<f64>,
    b_i: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    epoch_losses: Vec<f64>,
}

impl BiasedMfModel {
    /// A model whose biases and factors are all zero.
    pub fn zeros(mu: f64, n_users: usize, n_items: usize, factors: usize) -> Self {
        Self {
            factors,
            mu,
            b_u: vec![0.0; n_users],
            b_i: vec![0.0; n_items],
            p: vec![0.0; n_users * factors],
            q: vec![0.0; n_items * factors],
            epoch_losses: Vec::new(),
        }
    }

    pub fn fit(train: &Dataset, params: &Hyperparameters, seed: u64) -> Result<Self> {
        let f = params.factors;
        let mut m = Self::zeros(train.mean_rating(), train.n_users(), train.n_items(), f);
        let normal = Normal::new(0.0, 0.1).expect("valid normal");
        let mut init = seed::rng(seed::sub_seed(seed, "mf-init"));
        for x in m.p.iter_mut().chain(m.q.iter_mut()) {
            *x = normal.sample(&mut init);
        }
        let mut order_rng = seed::rng(seed::sub_seed(seed, "mf-order"));
        let data = train.interactions();
        let mut order: Vec<usize> = (0..data.len()).collect();
        let (lr, reg) = (params.learn_rate, params.reg);
        for epoch in 0..params.epochs {
            order.shuffle(&mut order_rng);
            let mut total = 0.0;
            for &idx in &order {
                let x = &data[idx];
                let (u, i) = (x.user as usize, x.item as usize);
                let (pu, qi) = (u * f..(u + 1) * f, i * f..(i + 1) * f);
                let e = f64::from(x.rating) - (m.mu + m.b_u[u] + m.b_i[i] + dot(&m.p[pu.clone()], &m.q[qi.clone()]));
                total += 0.5 * e * e;
                m.b_u[u] -= lr * (-e + reg * m.b_u[u]);
                m.b_i[i] -= lr * (-e + reg * m.b_i[i]);
                for k in 0..f {
                    let (a, b) = (m.p[pu.start + k], m.q[qi.start + k]);
                    m.p[pu.start + k] -= lr * (-e * b + reg * a);
                    m.q[qi.start + k] -= lr * (-e * a + reg * b);
                }
            }
            total += 0.5 * reg * (sq(&m.b_u) + sq(&m.b_i) + sq(&m.p) + sq(&m.q));
            if !total.is_finite() {
                return Err(Error::Diverged(format!("BiasedMF loss is {total} at epoch {}", epoch + 1)));
            }
            m.epoch_losses.push(total);
        }
        Ok(m)
    }

    pub fn global_mean(&self) -> f64 {
        self.mu
    }

    /// Training objective after each epoch (squared error plus penalty).
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    pub fn sample(&self, user: UserId, item: ItemId, rating: f64) -> MfSample {
        let (u, i, f) = (user as usize, item as usize, self.factors);
        MfSample {
            mu: self.mu,
            b_u: self.b_u[u],
            b_i: self.b_i[i],
            p_u: self.p[u * f..(u + 1) * f].to_vec(),
            q_i: self.q[i * f..(i + 1) * f].to_vec(),
            rating,
        }
    }

    pub fn predict(&self, user: UserId, item: ItemId) -> f64 {
        self.sample(user, item, 0.0).prediction()
    }

    pub fn score_user(&self, user: UserId, scores: &mut [f64]) {
        let (u, f) = (user as usize, self.factors);
        let pu = &self.p[u * f..(u + 1) * f];
        let base = self.mu + self.b_u[u];
        for (i, s) in scores.iter_mut().enumerate() {
            *s = base + self.b_i[i] + dot(pu, &self.q[i * f..(i + 1) * f]);
        }
    }
}

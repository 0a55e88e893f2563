//! Synthetic ratings from the noisy-observation model `r = π + ε`.
//!
//! True preferences are `π_ui = μ + β_u + β_i + p_u · q_i` with Gaussian
//! biases and factors; each pair is observed independently with probability
//! `density`, and observed ratings add `ε ~ Normal(0, σ)`.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::{IdMap, ItemId, Rating, RatingsMatrix, UserId};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub density: f64,
    pub global_mean: f64,
    pub user_bias_sd: f64,
    pub item_bias_sd: f64,
    /// 0 gives pure bias structure.
    pub latent_rank: usize,
    /// Standard deviation of each latent factor entry.
    pub latent_scale: f64,
    /// `σ`
    pub noise_sd: f64,
    pub seed: u64,
    /// Round to the nearest star and clamp to `[1, 5]`.
    pub clamp: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_users: 200,
            n_items: 100,
            density: 0.2,
            global_mean: 3.5,
            user_bias_sd: 0.5,
            item_bias_sd: 0.5,
            latent_rank: 0,
            latent_scale: 0.5,
            noise_sd: 0.3,
            seed: 0,
            clamp: false,
        }
    }
}

/// Dense matrix of true preferences `Π`.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    users: Arc<IdMap>,
    items: Arc<IdMap>,
    values: Vec<f64>,
}

impl Truth {
    pub fn get(&self, u: UserId, i: ItemId) -> f64 {
        self.values[u.index() * self.items.len() + i.index()]
    }

    pub fn users(&self) -> &Arc<IdMap> {
        &self.users
    }

    pub fn items(&self) -> &Arc<IdMap> {
        &self.items
    }

    /// `user,item,preference` for every pair.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let map = |e: csv::Error| Error::InvalidParameter(e.to_string());
        w.write_record(["user", "item", "preference"]).map_err(map)?;
        for (u, ut) in self.users.tokens().iter().enumerate() {
            for (i, it) in self.items.tokens().iter().enumerate() {
                let v = self.values[u * self.items.len() + i];
                w.write_record([ut.as_str(), it.as_str(), &v.to_string()])
                    .map_err(map)?;
            }
        }
        w.flush().map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(())
    }
}

fn normal(sd: f64, what: &str) -> Result<Normal<f64>> {
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{what} must be finite and nonnegative, got {sd}"
        )));
    }
    Normal::new(0.0, sd).map_err(|e| Error::InvalidParameter(format!("{what}: {e}")))
}

/// Draws a ratings matrix and the preferences it observes. Deterministic
/// given `spec.seed`. Users are `u1..`, items `i1..`.
pub fn generate(spec: &SyntheticSpec) -> Result<(RatingsMatrix, Truth)> {
    if !(spec.density > 0.0 && spec.density <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "density must be in (0, 1], got {}",
            spec.density
        )));
    }
    let expected = spec.density * spec.n_users as f64 * spec.n_items as f64;
    if expected < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "expected rating count density*users*items = {expected} is below 1"
        )));
    }
    if !spec.global_mean.is_finite() {
        return Err(Error::InvalidParameter("global_mean must be finite".into()));
    }
    let user_bias = normal(spec.user_bias_sd, "user_bias_sd")?;
    let item_bias = normal(spec.item_bias_sd, "item_bias_sd")?;
    let latent = normal(spec.latent_scale, "latent_scale")?;
    let noise = normal(spec.noise_sd, "noise_sd")?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (nu, ni, k) = (spec.n_users, spec.n_items, spec.latent_rank);
    let bu: Vec<f64> = (0..nu).map(|_| user_bias.sample(&mut rng)).collect();
    let bi: Vec<f64> = (0..ni).map(|_| item_bias.sample(&mut rng)).collect();
    let p: Vec<f64> = (0..nu * k).map(|_| latent.sample(&mut rng)).collect();
    let q: Vec<f64> = (0..ni * k).map(|_| latent.sample(&mut rng)).collect();

    let mut values = Vec::with_capacity(nu * ni);
    for u in 0..nu {
        for i in 0..ni {
            let mut dot = 0.0;
            for f in 0..k {
                dot += p[u * k + f] * q[i * k + f];
            }
            values.push(spec.global_mean + bu[u] + bi[i] + dot);
        }
    }

    let mut ratings = Vec::new();
    for u in 0..nu {
        for i in 0..ni {
            if !rng.random_bool(spec.density) {
                continue;
            }
            let mut r = values[u * ni + i] + noise.sample(&mut rng);
            if spec.clamp {
                r = r.round().clamp(1.0, 5.0);
            }
            ratings.push(Rating {
                user: UserId(u as u32),
                item: ItemId(i as u32),
                value: r,
            });
        }
    }

    let users = Arc::new(IdMap::from_tokens((1..=nu).map(|k| format!("u{k}")))?);
    let items = Arc::new(IdMap::from_tokens((1..=ni).map(|k| format!("i{k}")))?);
    let matrix = RatingsMatrix::from_ratings(users.clone(), items.clone(), ratings)?;
    Ok((matrix, Truth { users, items, values }))
}

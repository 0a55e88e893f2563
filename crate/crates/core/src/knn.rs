//! User-based and item-based nearest-neighbor scoring.
//!
//! Both scorers predict a base mean plus a weighted average of neighbor
//! deviations, normalized by the sum of absolute weights:
//!
//! ```text
//! s(i|u) = mean + Σ w·(r − r̄) / Σ |w|
//! ```
//!
//! Item weights are cosines between item-mean-centered rating vectors. The
//! numerator runs over co-raters only, while each norm runs over the item's
//! full rating vector, so weights from thin overlaps are pulled toward zero.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::{self, check_token};
use crate::matrix::{IdMap, ItemId, RatingsMatrix, Stats, UserId};

pub const DEFAULT_POOL: usize = 100;
pub const DEFAULT_K: usize = 20;
pub const DEFAULT_MIN_COMMON: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightKind {
    /// Cosine of mean-centered vectors, full-vector norms.
    #[default]
    Cosine,
    /// Pearson correlation over co-rated entries.
    Pearson,
}

/// `dot / (‖a‖ ‖b‖)` from squared norms; 0 when either norm is 0.
#[inline]
fn cosine(dot: f64, sq_a: f64, sq_b: f64) -> f64 {
    if sq_a == 0.0 || sq_b == 0.0 {
        0.0
    } else {
        dot / (sq_a.sqrt() * sq_b.sqrt())
    }
}

fn sum_sq(values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for v in values {
        acc += v * v;
    }
    acc
}

/// Cosine weight `w_ij` on an item-mean-centered matrix.
pub fn item_weight(centered: &RatingsMatrix, i: ItemId, j: ItemId) -> Result<f64> {
    centered.check_item(i)?;
    centered.check_item(j)?;
    let (ci, cj) = (centered.item_col(i), centered.item_col(j));
    let mut dot = 0.0;
    for (_, a, b) in ci.intersect(&cj) {
        dot += a * b;
    }
    Ok(cosine(dot, sum_sq(ci.values), sum_sq(cj.values)))
}

/// Interpolation weight `w_uv` between two users.
///
/// Zero when the users share fewer than `min_common` items or either
/// centered vector has zero norm.
pub fn user_weight(
    m: &RatingsMatrix,
    stats: &Stats,
    u: UserId,
    v: UserId,
    kind: WeightKind,
    min_common: usize,
) -> Result<f64> {
    m.check_user(u)?;
    m.check_user(v)?;
    let (ru, rv) = (m.user_row(u), m.user_row(v));
    let common: Vec<(f64, f64)> = ru.intersect(&rv).map(|(_, a, b)| (a, b)).collect();
    if common.is_empty() || common.len() < min_common {
        return Ok(0.0);
    }
    let w = match kind {
        WeightKind::Pearson => {
            let n = common.len() as f64;
            let (mut sa, mut sb) = (0.0, 0.0);
            for &(a, b) in &common {
                sa += a;
                sb += b;
            }
            let (ma, mb) = (sa / n, sb / n);
            let (mut dot, mut qa, mut qb) = (0.0, 0.0, 0.0);
            for &(a, b) in &common {
                let (da, db) = (a - ma, b - mb);
                dot += da * db;
                qa += da * da;
                qb += db * db;
            }
            cosine(dot, qa, qb)
        }
        WeightKind::Cosine => {
            let (Some(mu), Some(mv)) = (stats.user_mean(u), stats.user_mean(v)) else {
                return Ok(0.0);
            };
            let mut dot = 0.0;
            for &(a, b) in &common {
                dot += (a - mu) * (b - mv);
            }
            let mut qa = 0.0;
            for a in ru.values {
                qa += (a - mu) * (a - mu);
            }
            let mut qb = 0.0;
            for b in rv.values {
                qb += (b - mv) * (b - mv);
            }
            cosine(dot, qa, qb)
        }
    };
    Ok(w)
}

/// `mean + Σ w·dev / Σ|w|`, or `None` for an empty neighborhood.
pub fn interpolate<I>(mean: f64, neighbors: I) -> Option<f64>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let (mut num, mut den) = (0.0, 0.0);
    for (w, dev) in neighbors {
        num += w * dev;
        den += w.abs();
    }
    if den == 0.0 {
        None
    } else {
        Some(mean + num / den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserKnnConfig {
    pub k: usize,
    pub weight_kind: WeightKind,
    pub min_common: usize,
    /// Drop negatively weighted neighbors.
    pub positive_only: bool,
}

impl Default for UserKnnConfig {
    fn default() -> Self {
        UserKnnConfig {
            k: DEFAULT_K,
            weight_kind: WeightKind::Cosine,
            min_common: DEFAULT_MIN_COMMON,
            positive_only: false,
        }
    }
}

/// `N_k(u|i)`, or `N_k(u)` when `item` is `None`: up to `k` other users with
/// a nonzero weight, sorted by weight descending then user index ascending.
pub fn neighborhood_user(
    m: &RatingsMatrix,
    stats: &Stats,
    u: UserId,
    item: Option<ItemId>,
    k: usize,
    cfg: &UserKnnConfig,
) -> Vec<(UserId, f64)> {
    if k == 0 || m.check_user(u).is_err() {
        return Vec::new();
    }
    let candidates: Vec<UserId> = match item {
        Some(i) if m.check_item(i).is_err() => return Vec::new(),
        Some(i) => m.item_col(i).keys.iter().map(|&v| UserId(v)).collect(),
        None => (0..m.n_users() as u32).map(UserId).collect(),
    };
    let mut nbrs: Vec<(UserId, f64)> = candidates
        .into_iter()
        .filter(|&v| v != u)
        .filter_map(|v| {
            let w = user_weight(m, stats, u, v, cfg.weight_kind, cfg.min_common).ok()?;
            let keep = w != 0.0 && (!cfg.positive_only || w > 0.0);
            keep.then_some((v, w))
        })
        .collect();
    nbrs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    nbrs.truncate(k);
    nbrs
}

/// User-based prediction for `(u, i)`; `None` when `u` has no ratings or
/// no neighbor has rated `i`.
pub fn score_user_knn(m: &RatingsMatrix, stats: &Stats, u: UserId, i: ItemId, cfg: &UserKnnConfig) -> Option<f64> {
    let mean = stats.user_mean(u)?;
    let nbrs = neighborhood_user(m, stats, u, Some(i), cfg.k, cfg);
    interpolate(
        mean,
        nbrs.iter().map(|&(v, w)| {
            let r = m.get(v, i).expect("neighbor rated the item");
            let mv = stats.user_mean(v).expect("neighbor has ratings");
            (w, r - mv)
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemKnnConfig {
    /// Size of the stored neighbor pool `N(i)`.
    pub pool: usize,
    pub min_weight: f64,
    /// Neighborhood size used at scoring time.
    pub k: usize,
    pub positive_only: bool,
}

impl Default for ItemKnnConfig {
    fn default() -> Self {
        ItemKnnConfig {
            pool: DEFAULT_POOL,
            min_weight: 0.0,
            k: DEFAULT_K,
            positive_only: false,
        }
    }
}

/// Precomputed item-item weights with per-item truncated neighbor pools.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemKnnModel {
    /// `N(i)`: sorted by `|w|` descending, then item index ascending.
    neighbors: Vec<Vec<(ItemId, f64)>>,
    item_mean: Vec<Option<f64>>,
    pub k: usize,
    items: Arc<IdMap>,
}

impl ItemKnnModel {
    pub fn build(m: &RatingsMatrix, pool: usize, min_weight: f64) -> Result<ItemKnnModel> {
        Self::build_with(
            m,
            &ItemKnnConfig {
                pool,
                min_weight,
                ..Default::default()
            },
        )
    }

    pub fn build_with(m: &RatingsMatrix, cfg: &ItemKnnConfig) -> Result<ItemKnnModel> {
        if cfg.pool == 0 {
            return Err(Error::InvalidParameter("neighbor pool size must be at least 1".into()));
        }
        if cfg.min_weight.is_nan() || cfg.min_weight < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "min_weight must be nonnegative, got {}",
                cfg.min_weight
            )));
        }
        let stats = Stats::compute(m);
        let centered = m.mean_center_items(&stats);
        let n_items = m.n_items();
        let norms: Vec<f64> = (0..n_items)
            .map(|i| sum_sq(centered.item_col(ItemId(i as u32)).values))
            .collect();

        // each row is computed independently, so w_ij and w_ji come out bit-identical
        let neighbors = (0..n_items)
            .into_par_iter()
            .map_init(
                || (vec![0.0f64; n_items], vec![false; n_items]),
                |(dots, seen), i| {
                    let mut touched = Vec::new();
                    for (u, ri) in centered.item_col(ItemId(i as u32)).iter() {
                        for (j, rj) in centered.user_row(UserId(u)).iter() {
                            let j = j as usize;
                            if j == i {
                                continue;
                            }
                            if !seen[j] {
                                seen[j] = true;
                                touched.push(j);
                            }
                            dots[j] += ri * rj;
                        }
                    }
                    let mut row: Vec<(ItemId, f64)> = Vec::new();
                    for &j in &touched {
                        let w = cosine(dots[j], norms[i], norms[j]);
                        dots[j] = 0.0;
                        seen[j] = false;
                        if w != 0.0 && w.abs() >= cfg.min_weight && (!cfg.positive_only || w > 0.0) {
                            row.push((ItemId(j as u32), w));
                        }
                    }
                    sort_pool(&mut row);
                    row.truncate(cfg.pool);
                    row
                },
            )
            .collect();

        Ok(ItemKnnModel {
            neighbors,
            item_mean: stats.item_mean,
            k: cfg.k,
            items: m.items().clone(),
        })
    }

    pub fn items(&self) -> &Arc<IdMap> {
        &self.items
    }

    /// `N(i)`; empty for unknown items.
    pub fn neighbors(&self, i: ItemId) -> &[(ItemId, f64)] {
        self.neighbors.get(i.index()).map_or(&[], Vec::as_slice)
    }

    pub fn item_mean(&self, i: ItemId) -> Option<f64> {
        self.item_mean.get(i.index()).copied().flatten()
    }

    /// `N_k(i|u)`: the first `k` pool entries that `u` has rated.
    pub fn neighborhood(&self, m: &RatingsMatrix, u: UserId, i: ItemId, k: usize) -> Vec<(ItemId, f64)> {
        if m.check_user(u).is_err() {
            return Vec::new();
        }
        let row = m.user_row(u);
        self.neighbors(i)
            .iter()
            .filter(|(j, _)| row.get(j.0).is_some())
            .take(k)
            .copied()
            .collect()
    }

    /// Item-based prediction with neighborhood size `k`; `None` when `u`
    /// has rated none of `i`'s pooled neighbors.
    pub fn score_with_k(&self, m: &RatingsMatrix, u: UserId, i: ItemId, k: usize) -> Option<f64> {
        let mean = self.item_mean(i)?;
        let nbrs = self.neighborhood(m, u, i, k);
        interpolate(
            mean,
            nbrs.iter().map(|&(j, w)| {
                let r = m.get(u, j).expect("user rated the neighbor");
                let mj = self.item_mean(j).expect("neighbor has a mean");
                (w, r - mj)
            }),
        )
    }

    pub fn score(&self, m: &RatingsMatrix, u: UserId, i: ItemId) -> Option<f64> {
        self.score_with_k(m, u, i, self.k)
    }

    /// Re-indexes onto another item universe by token, keeping pool order.
    pub fn align(&self, items: &Arc<IdMap>) -> ItemKnnModel {
        let to_target: Vec<Option<u32>> = self.items.tokens().iter().map(|t| items.get(t)).collect();
        let mut neighbors = vec![Vec::new(); items.len()];
        let mut item_mean = vec![None; items.len()];
        for (src, tok) in self.items.tokens().iter().enumerate() {
            let Some(dst) = items.get(tok) else { continue };
            item_mean[dst as usize] = self.item_mean[src];
            neighbors[dst as usize] = self.neighbors[src]
                .iter()
                .filter_map(|&(j, w)| to_target[j.index()].map(|j| (ItemId(j), w)))
                .collect();
        }
        ItemKnnModel {
            neighbors,
            item_mean,
            k: self.k,
            items: items.clone(),
        }
    }

    /// Writes `m <item> <mean>` lines in index order, then one
    /// `w <item-i> <item-j> <weight>` line per pooled neighbor.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let tokens = self.items.tokens();
        for (tok, mean) in tokens.iter().zip(&self.item_mean) {
            if let Some(mean) = mean {
                writeln!(out, "m {} {}", check_token(tok)?, mean)?;
            }
        }
        for (i, row) in self.neighbors.iter().enumerate() {
            for &(j, w) in row {
                writeln!(
                    out,
                    "w {} {} {}",
                    check_token(&tokens[i])?,
                    check_token(&tokens[j.index()])?,
                    w
                )?;
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<ItemKnnModel> {
        let mut items = IdMap::new();
        let mut item_mean: Vec<Option<f64>> = Vec::new();
        let mut neighbors: Vec<Vec<(ItemId, f64)>> = Vec::new();
        let mut intern = |tok: &str, item_mean: &mut Vec<Option<f64>>, neighbors: &mut Vec<Vec<_>>| {
            let idx = items.intern(tok);
            if idx as usize == item_mean.len() {
                item_mean.push(None);
                neighbors.push(Vec::new());
            }
            idx
        };
        for rec in format::records(reader) {
            let rec = rec?;
            match rec.tag() {
                "m" => {
                    rec.expect_len(3)?;
                    let mean = rec.real(2)?;
                    let i = intern(&rec.fields[1], &mut item_mean, &mut neighbors);
                    if item_mean[i as usize].replace(mean).is_some() {
                        return Err(rec.error(format!("duplicate mean for {:?}", rec.fields[1])));
                    }
                }
                "w" => {
                    rec.expect_len(4)?;
                    let w = rec.real(3)?;
                    if rec.fields[1] == rec.fields[2] {
                        return Err(rec.error("self-weight"));
                    }
                    let i = intern(&rec.fields[1], &mut item_mean, &mut neighbors);
                    let j = intern(&rec.fields[2], &mut item_mean, &mut neighbors);
                    neighbors[i as usize].push((ItemId(j), w));
                }
                other => return Err(rec.error(format!("unexpected record '{other}' in item-kNN model"))),
            }
        }
        for row in &mut neighbors {
            sort_pool(row);
        }
        Ok(ItemKnnModel {
            neighbors,
            item_mean,
            k: DEFAULT_K,
            items: Arc::new(items),
        })
    }
}

fn sort_pool(row: &mut [(ItemId, f64)]) {
    row.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
}

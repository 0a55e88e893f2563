//! Naive dense reference implementations shared by the integration tests.
//!
//! Everything here works on a `Vec<Vec<Option<f64>>>` grid and loops over
//! every user or item, so it shares no code paths with the sparse library.
//! Summation runs in ascending index order, which is also the order the
//! library accumulates in, so results are expected to agree bit for bit.

#![allow(dead_code)]

use cfkit::{ItemId, RatingsMatrix, UserId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Grid = Vec<Vec<Option<f64>>>;

pub fn dense(m: &RatingsMatrix) -> Grid {
    let mut g = vec![vec![None; m.n_items()]; m.n_users()];
    for r in m.ratings() {
        g[r.user.index()][r.item.index()] = Some(r.value);
    }
    g
}

/// A random matrix with up to 20 users and items and density in [0.3, 0.8].
/// Ratings are whole or half stars, so ties and zero-variance rows are common.
pub fn random_matrix(seed: u64) -> RatingsMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu = rng.random_range(1..=20);
    let ni = rng.random_range(1..=20);
    let density = rng.random_range(0.3..=0.8);
    let mut triples = Vec::new();
    for u in 0..nu {
        for i in 0..ni {
            if rng.random_bool(density) {
                let stars = rng.random_range(2..=10) as f64 / 2.0;
                triples.push((format!("u{u}"), format!("i{i}"), stars));
            }
        }
    }
    if triples.is_empty() {
        triples.push(("u0".into(), "i0".into(), 3.0));
    }
    RatingsMatrix::from_triples(triples).unwrap()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (-0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

pub fn user_mean(g: &Grid, u: usize) -> Option<f64> {
    mean(g[u].iter().flatten().copied())
}

pub fn item_mean(g: &Grid, i: usize) -> Option<f64> {
    mean(g.iter().filter_map(|row| row[i]))
}

fn ratio(dot: f64, sq_a: f64, sq_b: f64) -> f64 {
    if sq_a == 0.0 || sq_b == 0.0 {
        0.0
    } else {
        dot / (sq_a.sqrt() * sq_b.sqrt())
    }
}

/// Item cosine on item-centered ratings: the dot product runs over co-raters,
/// each norm over the item's own raters.
pub fn item_cosine(g: &Grid, i: usize, j: usize) -> f64 {
    let (Some(mi), Some(mj)) = (item_mean(g, i), item_mean(g, j)) else {
        return 0.0;
    };
    let (mut dot, mut sq_i, mut sq_j) = (0.0, 0.0, 0.0);
    for row in g {
        if let (Some(a), Some(b)) = (row[i], row[j]) {
            dot += (a - mi) * (b - mj);
        }
        if let Some(a) = row[i] {
            sq_i += (a - mi) * (a - mi);
        }
        if let Some(b) = row[j] {
            sq_j += (b - mj) * (b - mj);
        }
    }
    ratio(dot, sq_i, sq_j)
}

pub fn user_cosine(g: &Grid, u: usize, v: usize, min_common: usize) -> f64 {
    let common: Vec<usize> = (0..g[u].len())
        .filter(|&i| g[u][i].is_some() && g[v][i].is_some())
        .collect();
    if common.is_empty() || common.len() < min_common {
        return 0.0;
    }
    let (mu, mv) = (user_mean(g, u).unwrap(), user_mean(g, v).unwrap());
    let mut dot = 0.0;
    for &i in &common {
        dot += (g[u][i].unwrap() - mu) * (g[v][i].unwrap() - mv);
    }
    let mut sq_u = 0.0;
    for a in g[u].iter().flatten() {
        sq_u += (a - mu) * (a - mu);
    }
    let mut sq_v = 0.0;
    for b in g[v].iter().flatten() {
        sq_v += (b - mv) * (b - mv);
    }
    ratio(dot, sq_u, sq_v)
}

pub fn user_pearson(g: &Grid, u: usize, v: usize, min_common: usize) -> f64 {
    let pairs: Vec<(f64, f64)> = (0..g[u].len()).filter_map(|i| Some((g[u][i]?, g[v][i]?))).collect();
    if pairs.is_empty() || pairs.len() < min_common {
        return 0.0;
    }
    let ma = mean(pairs.iter().map(|p| p.0)).unwrap();
    let mb = mean(pairs.iter().map(|p| p.1)).unwrap();
    let (mut dot, mut qa, mut qb) = (0.0, 0.0, 0.0);
    for &(a, b) in &pairs {
        dot += (a - ma) * (b - mb);
        qa += (a - ma) * (a - ma);
        qb += (b - mb) * (b - mb);
    }
    ratio(dot, qa, qb)
}

fn weighted_offset(mean: f64, terms: &[(f64, f64)]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for &(w, dev) in terms {
        num += w * dev;
        den += w.abs();
    }
    (den != 0.0).then(|| mean + num / den)
}

/// User-based prediction: the `k` highest-weighted raters of `i` (ties by
/// lower user index), nonzero weights only.
pub fn user_knn(g: &Grid, u: usize, i: usize, k: usize, pearson: bool, min_common: usize) -> Option<f64> {
    let mu = user_mean(g, u)?;
    let mut nbrs: Vec<(usize, f64)> = Vec::new();
    for v in 0..g.len() {
        if v == u || g[v][i].is_none() {
            continue;
        }
        let w = if pearson {
            user_pearson(g, u, v, min_common)
        } else {
            user_cosine(g, u, v, min_common)
        };
        if w != 0.0 {
            nbrs.push((v, w));
        }
    }
    // selection by repeated scans instead of a sort
    let mut chosen = Vec::new();
    while chosen.len() < k && !nbrs.is_empty() {
        let mut best = 0;
        for c in 1..nbrs.len() {
            if nbrs[c].1 > nbrs[best].1 {
                best = c;
            }
        }
        chosen.push(nbrs.remove(best));
    }
    let terms: Vec<(f64, f64)> = chosen
        .iter()
        .map(|&(v, w)| (w, g[v][i].unwrap() - user_mean(g, v).unwrap()))
        .collect();
    weighted_offset(mu, &terms)
}

/// Item-based prediction: the pool is the `pool` items with the largest
/// `|w|` (ties by lower item index); the first `k` pool items `u` rated are used.
pub fn item_knn(g: &Grid, u: usize, i: usize, pool: usize, k: usize) -> Option<f64> {
    let mi = item_mean(g, i)?;
    let n_items = g.first().map_or(0, Vec::len);
    let mut cands: Vec<(usize, f64)> = (0..n_items)
        .filter(|&j| j != i)
        .map(|j| (j, item_cosine(g, i, j)))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    let mut ranked = Vec::new();
    while ranked.len() < pool && !cands.is_empty() {
        let mut best = 0;
        for c in 1..cands.len() {
            if cands[c].1.abs() > cands[best].1.abs() {
                best = c;
            }
        }
        ranked.push(cands.remove(best));
    }
    let terms: Vec<(f64, f64)> = ranked
        .iter()
        .filter(|&&(j, _)| g[u][j].is_some())
        .take(k)
        .map(|&(j, w)| (w, g[u][j].unwrap() - item_mean(g, j).unwrap()))
        .collect();
    weighted_offset(mi, &terms)
}

pub fn ids(m: &RatingsMatrix) -> (Vec<UserId>, Vec<ItemId>) {
    (
        (0..m.n_users() as u32).map(UserId).collect(),
        (0..m.n_items() as u32).map(ItemId).collect(),
    )
}

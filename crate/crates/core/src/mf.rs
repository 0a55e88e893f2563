//! Latent-factor models `R ≈ P Qᵀ` with row-vector factors.
//!
//! Scores are `p_u · q_i`, plus the bias prediction when the model carries
//! a bias component. Training runs per-rating SGD over the residuals of a
//! pre-fit, frozen bias model.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::{BiasModel, BiasRecords, DEFAULT_DAMPING};
use crate::error::{Error, Result};
use crate::format::{self, check_token};
use crate::matrix::{IdMap, ItemId, RatingsMatrix, UserId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub reg: f64,
    pub init_scale: f64,
    pub seed: u64,
    /// Damping for the baseline bias model fit before SGD.
    pub alpha_item: f64,
    pub alpha_user: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 16,
            epochs: 50,
            learning_rate: 0.02,
            reg: 0.05,
            init_scale: 0.1,
            seed: 42,
            alpha_item: DEFAULT_DAMPING,
            alpha_user: DEFAULT_DAMPING,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.k == 0 {
            return bad("rank k must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.reg >= 0.0 && self.reg.is_finite()) {
            return bad(format!("reg must be nonnegative, got {}", self.reg));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init_scale must be positive, got {}", self.init_scale));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    k: usize,
    /// `|U| x k`, row-major.
    p: Vec<f64>,
    /// `|I| x k`, row-major.
    q: Vec<f64>,
    user_present: Vec<bool>,
    item_present: Vec<bool>,
    bias: Option<BiasModel>,
    users: Arc<IdMap>,
    items: Arc<IdMap>,
}

/// Factors drawn uniformly from `(-scale, scale)`, all of `P` then all of `Q`.
pub fn init_factors(n_users: usize, n_items: usize, k: usize, scale: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-scale..scale)).collect() };
    let p = draw(n_users * k);
    let q = draw(n_items * k);
    (p, q)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn baseline(bias: Option<&BiasModel>, u: UserId, i: ItemId) -> f64 {
    bias.map_or(0.0, |b| b.predict(u, i))
}

/// `Σ (r − b_ui − p_u·q_i)² + reg (‖P‖² + ‖Q‖²)`
pub fn objective(m: &RatingsMatrix, bias: Option<&BiasModel>, k: usize, p: &[f64], q: &[f64], reg: f64) -> f64 {
    let mut loss = 0.0;
    for r in m.ratings() {
        let (u, i) = (r.user.index(), r.item.index());
        let e = r.value - baseline(bias, r.user, r.item) - dot(&p[u * k..(u + 1) * k], &q[i * k..(i + 1) * k]);
        loss += e * e;
    }
    loss + reg * (dot(p, p) + dot(q, q))
}

/// Analytic gradient of [`objective`] with respect to every entry of `P` and `Q`.
pub fn objective_gradient(
    m: &RatingsMatrix,
    bias: Option<&BiasModel>,
    k: usize,
    p: &[f64],
    q: &[f64],
    reg: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut gp: Vec<f64> = p.iter().map(|x| 2.0 * reg * x).collect();
    let mut gq: Vec<f64> = q.iter().map(|x| 2.0 * reg * x).collect();
    for r in m.ratings() {
        let (u, i) = (r.user.index(), r.item.index());
        let pu = &p[u * k..(u + 1) * k];
        let qi = &q[i * k..(i + 1) * k];
        let e = r.value - baseline(bias, r.user, r.item) - dot(pu, qi);
        for f in 0..k {
            gp[u * k + f] -= 2.0 * e * qi[f];
            gq[i * k + f] -= 2.0 * e * pu[f];
        }
    }
    (gp, gq)
}

/// Trains a factor model; see [`train_sgd_with_history`].
pub fn train_sgd(m: &RatingsMatrix, cfg: &TrainConfig) -> Result<FactorModel> {
    train_sgd_with_history(m, cfg).map(|(model, _)| model)
}

/// SGD on bias residuals. Each epoch visits the ratings in `(user, item)`
/// order and applies, per rating,
///
/// ```text
/// p_u += lr (e q_i − reg p_u)
/// q_i += lr (e p_u − reg q_i)
/// ```
///
/// Returns the model and the full objective at the end of every epoch.
pub fn train_sgd_with_history(m: &RatingsMatrix, cfg: &TrainConfig) -> Result<(FactorModel, Vec<f64>)> {
    cfg.validate()?;
    let bias = BiasModel::fit(m, cfg.alpha_item, cfg.alpha_user)?;
    let k = cfg.k;
    let (mut p, mut q) = init_factors(m.n_users(), m.n_items(), k, cfg.init_scale, cfg.seed);

    // residual targets are fixed for the whole run
    let ratings: Vec<(usize, usize, f64)> = m
        .ratings()
        .map(|r| (r.user.index(), r.item.index(), r.value - bias.predict(r.user, r.item)))
        .collect();

    let (lr, reg) = (cfg.learning_rate, cfg.reg);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        for &(u, i, target) in &ratings {
            let pu = &mut p[u * k..(u + 1) * k];
            let qi = &mut q[i * k..(i + 1) * k];
            let e = target - dot(pu, qi);
            for f in 0..k {
                let (pf, qf) = (pu[f], qi[f]);
                pu[f] += lr * (e * qf - reg * pf);
                qi[f] += lr * (e * pf - reg * qf);
            }
        }
        let mut loss = 0.0;
        for &(u, i, target) in &ratings {
            let e = target - dot(&p[u * k..(u + 1) * k], &q[i * k..(i + 1) * k]);
            loss += e * e;
        }
        loss += reg * (dot(&p, &p) + dot(&q, &q));
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch: epoch + 1, loss });
        }
        history.push(loss);
    }

    let model = FactorModel {
        k,
        p,
        q,
        user_present: vec![true; m.n_users()],
        item_present: vec![true; m.n_items()],
        bias: Some(bias),
        users: m.users().clone(),
        items: m.items().clone(),
    };
    Ok((model, history))
}

impl FactorModel {
    /// Builds a model from externally computed factor rows.
    ///
    /// With `sigma`, each singular value is split symmetrically between the
    /// two sides (`p_u ← p_u √σ`, `q_i ← q_i √σ`) so that plain dot products
    /// reproduce `P Σ Qᵀ`.
    pub fn load_factors<S: AsRef<str>>(
        k: usize,
        p_rows: &[(S, Vec<f64>)],
        q_rows: &[(S, Vec<f64>)],
        sigma: Option<&[f64]>,
    ) -> Result<FactorModel> {
        if k == 0 {
            return Err(Error::InvalidParameter("rank k must be at least 1".into()));
        }
        let scale: Option<Vec<f64>> = match sigma {
            None => None,
            Some(s) => {
                if s.len() != k {
                    return Err(Error::DimensionMismatch {
                        row: "sigma".into(),
                        expected: k,
                        found: s.len(),
                    });
                }
                if let Some(bad) = s.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                    return Err(Error::InvalidParameter(format!(
                        "singular values must be finite and nonnegative, got {bad}"
                    )));
                }
                Some(s.iter().map(|v| v.sqrt()).collect())
            }
        };
        let gather = |rows: &[(S, Vec<f64>)], side: &str| -> Result<(IdMap, Vec<f64>)> {
            let mut ids = IdMap::new();
            let mut flat = Vec::with_capacity(rows.len() * k);
            for (tok, row) in rows {
                let tok = tok.as_ref();
                if row.len() != k {
                    return Err(Error::DimensionMismatch {
                        row: format!("{side} {tok}"),
                        expected: k,
                        found: row.len(),
                    });
                }
                if ids.get(tok).is_some() {
                    return Err(Error::InvalidParameter(format!("duplicate {side} row {tok:?}")));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "non-finite value in {side} row {tok:?}"
                    )));
                }
                ids.intern(tok);
                match &scale {
                    None => flat.extend_from_slice(row),
                    Some(s) => flat.extend(row.iter().zip(s).map(|(v, s)| v * s)),
                }
            }
            Ok((ids, flat))
        };
        let (users, p) = gather(p_rows, "p")?;
        let (items, q) = gather(q_rows, "q")?;
        Ok(FactorModel {
            k,
            p,
            q,
            user_present: vec![true; users.len()],
            item_present: vec![true; items.len()],
            bias: None,
            users: Arc::new(users),
            items: Arc::new(items),
        })
    }

    /// Attaches a bias component, re-indexed onto this model's ids.
    pub fn with_bias(mut self, bias: &BiasModel) -> FactorModel {
        self.bias = Some(bias.align(&self.users, &self.items));
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bias(&self) -> Option<&BiasModel> {
        self.bias.as_ref()
    }

    pub fn users(&self) -> &Arc<IdMap> {
        &self.users
    }

    pub fn items(&self) -> &Arc<IdMap> {
        &self.items
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn user_factors(&self, u: UserId) -> Option<&[f64]> {
        let k = self.k;
        let idx = u.index();
        (*self.user_present.get(idx)?).then(|| &self.p[idx * k..(idx + 1) * k])
    }

    pub fn item_factors(&self, i: ItemId) -> Option<&[f64]> {
        let k = self.k;
        let idx = i.index();
        (*self.item_present.get(idx)?).then(|| &self.q[idx * k..(idx + 1) * k])
    }

    fn bias_part(&self, u: UserId, i: ItemId) -> f64 {
        baseline(self.bias.as_ref(), u, i)
    }

    /// Score for a user and item both covered by the factors, else `None`.
    pub fn try_score(&self, u: UserId, i: ItemId) -> Option<f64> {
        let pu = self.user_factors(u)?;
        let qi = self.item_factors(i)?;
        Some(dot(pu, qi) + self.bias_part(u, i))
    }

    /// `p_u · q_i (+ b_ui)`. Unknown users or items get the bias prediction
    /// alone, or 0 when the model has no bias component.
    pub fn score(&self, u: UserId, i: ItemId) -> f64 {
        self.try_score(u, i).unwrap_or_else(|| self.bias_part(u, i))
    }

    pub fn score_tokens(&self, user: &str, item: &str) -> f64 {
        let u = self.users.get(user).map_or(UserId(u32::MAX), UserId);
        let i = self.items.get(item).map_or(ItemId(u32::MAX), ItemId);
        self.score(u, i)
    }

    /// Re-indexes onto another id universe by token. Entities the model
    /// has no factors for score as unknown.
    pub fn align(&self, users: &Arc<IdMap>, items: &Arc<IdMap>) -> FactorModel {
        let k = self.k;
        let remap = |target: &IdMap, source: &IdMap, flat: &[f64], present: &[bool]| -> (Vec<f64>, Vec<bool>) {
            let mut out = vec![0.0; target.len() * k];
            let mut mask = vec![false; target.len()];
            for (dst, tok) in target.tokens().iter().enumerate() {
                if let Some(src) = source.get(tok).map(|s| s as usize).filter(|&s| present[s]) {
                    out[dst * k..(dst + 1) * k].copy_from_slice(&flat[src * k..(src + 1) * k]);
                    mask[dst] = true;
                }
            }
            (out, mask)
        };
        let (p, user_present) = remap(users, &self.users, &self.p, &self.user_present);
        let (q, item_present) = remap(items, &self.items, &self.q, &self.item_present);
        FactorModel {
            k,
            p,
            q,
            user_present,
            item_present,
            bias: self.bias.as_ref().map(|b| b.align(users, items)),
            users: users.clone(),
            items: items.clone(),
        }
    }

    /// Writes `k <rank>`, then `p <user> <k reals>` and `q <item> <k reals>`
    /// lines, then the bias component's `g`/`i`/`u` lines if present.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k {}", self.k)?;
        let rows = |out: &mut W, tag: &str, ids: &IdMap, flat: &[f64], present: &[bool]| -> std::io::Result<()> {
            for (idx, tok) in ids.tokens().iter().enumerate() {
                if !present[idx] {
                    continue;
                }
                write!(out, "{tag} {}", check_token(tok)?)?;
                for v in &flat[idx * self.k..(idx + 1) * self.k] {
                    write!(out, " {v}")?;
                }
                writeln!(out)?;
            }
            Ok(())
        };
        rows(&mut out, "p", &self.users, &self.p, &self.user_present)?;
        rows(&mut out, "q", &self.items, &self.q, &self.item_present)?;
        if let Some(bias) = &self.bias {
            bias.write(&mut out)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<FactorModel> {
        let mut k: Option<usize> = None;
        let mut p_rows: Vec<(String, Vec<f64>)> = Vec::new();
        let mut q_rows: Vec<(String, Vec<f64>)> = Vec::new();
        let mut bias = BiasRecords::default();
        for rec in format::records(reader) {
            let rec = rec?;
            match rec.tag() {
                "k" => {
                    rec.expect_len(2)?;
                    if k.is_some() || !p_rows.is_empty() || !q_rows.is_empty() {
                        return Err(rec.error("'k' header must come first, once"));
                    }
                    k = Some(rec.count(1)?);
                }
                "p" | "q" => {
                    let Some(k) = k else {
                        return Err(rec.error("factor row before 'k' header"));
                    };
                    if rec.fields.len() != k + 2 {
                        return Err(Error::DimensionMismatch {
                            row: format!(
                                "{} {} (line {})",
                                rec.tag(),
                                rec.fields.get(1).map_or("", |s| s.as_str()),
                                rec.line
                            ),
                            expected: k,
                            found: rec.fields.len().saturating_sub(2),
                        });
                    }
                    let values = (2..k + 2).map(|idx| rec.real(idx)).collect::<Result<Vec<_>>>()?;
                    let row = (rec.fields[1].clone(), values);
                    if rec.tag() == "p" {
                        p_rows.push(row);
                    } else {
                        q_rows.push(row);
                    }
                }
                _ => {
                    if !bias.accept(&rec)? {
                        return Err(rec.error(format!("unexpected record '{}' in factor model", rec.tag())));
                    }
                }
            }
        }
        let k = k.ok_or(Error::Parse {
            line: 0,
            message: "factor model has no 'k' header".into(),
        })?;
        let model = FactorModel::load_factors(k, &p_rows, &q_rows, None)?;
        Ok(match bias.finish()? {
            Some(b) => model.with_bias(&b),
            None => model,
        })
    }
}

//! Damped user-item bias model, popularity, and lift.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::format::{self, check_token, Record};
use crate::matrix::{IdMap, ItemId, RatingsMatrix, UserId};

pub const DEFAULT_DAMPING: f64 = 5.0;

/// Personalized mean `b_ui = b + b_i + b_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasModel {
    pub global: f64,
    pub item_offsets: Vec<f64>,
    pub user_offsets: Vec<f64>,
    pub alpha_item: f64,
    pub alpha_user: f64,
    users: Arc<IdMap>,
    items: Arc<IdMap>,
}

impl BiasModel {
    /// Closed-form fit: the global mean, then item offsets against it, then
    /// user offsets against `b + b_i`, each with its damping term added to
    /// the denominator.
    pub fn fit(m: &RatingsMatrix, alpha_item: f64, alpha_user: f64) -> Result<BiasModel> {
        if !(alpha_item >= 0.0 && alpha_user >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must be nonnegative (alpha_item={alpha_item}, alpha_user={alpha_user})"
            )));
        }
        if m.n_ratings() == 0 {
            return Err(Error::EmptyMatrix);
        }
        let global = m.ratings().map(|r| r.value).sum::<f64>() / m.n_ratings() as f64;

        let item_offsets: Vec<f64> = (0..m.n_items())
            .map(|i| {
                let col = m.item_col(ItemId(i as u32));
                if col.is_empty() {
                    return 0.0;
                }
                let resid: f64 = col.values.iter().map(|r| r - global).sum();
                resid / (col.len() as f64 + alpha_item)
            })
            .collect();

        let user_offsets = (0..m.n_users())
            .map(|u| {
                let row = m.user_row(UserId(u as u32));
                if row.is_empty() {
                    return 0.0;
                }
                let resid: f64 = row.iter().map(|(i, r)| r - item_offsets[i as usize] - global).sum();
                resid / (row.len() as f64 + alpha_user)
            })
            .collect();

        Ok(BiasModel {
            global,
            item_offsets,
            user_offsets,
            alpha_item,
            alpha_user,
            users: m.users().clone(),
            items: m.items().clone(),
        })
    }

    pub fn users(&self) -> &Arc<IdMap> {
        &self.users
    }

    pub fn items(&self) -> &Arc<IdMap> {
        &self.items
    }

    /// `b_i`, or 0 for an item outside the model.
    pub fn item_offset(&self, i: ItemId) -> f64 {
        self.item_offsets.get(i.index()).copied().unwrap_or(0.0)
    }

    /// `b_u`, or 0 for a user outside the model.
    pub fn user_offset(&self, u: UserId) -> f64 {
        self.user_offsets.get(u.index()).copied().unwrap_or(0.0)
    }

    /// `b + b_i + b_u`. Unknown ids contribute a zero offset.
    pub fn predict(&self, u: UserId, i: ItemId) -> f64 {
        self.global + self.item_offset(i) + self.user_offset(u)
    }

    pub fn predict_tokens(&self, user: &str, item: &str) -> f64 {
        let i = self.items.get(item).map_or(0.0, |i| self.item_offsets[i as usize]);
        let u = self.users.get(user).map_or(0.0, |u| self.user_offsets[u as usize]);
        self.global + i + u
    }

    /// Re-indexes the model onto another id universe, matching by token.
    pub fn align(&self, users: &Arc<IdMap>, items: &Arc<IdMap>) -> BiasModel {
        let remap = |target: &IdMap, source: &IdMap, offsets: &[f64]| -> Vec<f64> {
            target
                .tokens()
                .iter()
                .map(|t| source.get(t).map_or(0.0, |k| offsets[k as usize]))
                .collect()
        };
        BiasModel {
            global: self.global,
            item_offsets: remap(items, &self.items, &self.item_offsets),
            user_offsets: remap(users, &self.users, &self.user_offsets),
            alpha_item: self.alpha_item,
            alpha_user: self.alpha_user,
            users: users.clone(),
            items: items.clone(),
        }
    }

    /// Writes `g <b>`, then `i <item> <b_i>` and `u <user> <b_u>` lines.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "g {}", self.global)?;
        for (tok, b) in self.items.tokens().iter().zip(&self.item_offsets) {
            writeln!(out, "i {} {}", check_token(tok)?, b)?;
        }
        for (tok, b) in self.users.tokens().iter().zip(&self.user_offsets) {
            writeln!(out, "u {} {}", check_token(tok)?, b)?;
        }
        Ok(())
    }

    /// Reads the format produced by [`BiasModel::write`]. Damping constants
    /// are not stored and read back as 0.
    pub fn read<R: BufRead>(reader: R) -> Result<BiasModel> {
        let mut parts = BiasRecords::default();
        for rec in format::records(reader) {
            let rec = rec?;
            if !parts.accept(&rec)? {
                return Err(rec.error(format!("unexpected record '{}' in bias model", rec.tag())));
            }
        }
        parts.finish()?.ok_or(Error::Parse {
            line: 0,
            message: "bias model has no 'g' record".into(),
        })
    }
}

/// Accumulates `g`/`i`/`u` records; shared with the factor-model reader.
#[derive(Default)]
pub(crate) struct BiasRecords {
    global: Option<f64>,
    users: IdMap,
    items: IdMap,
    user_offsets: Vec<f64>,
    item_offsets: Vec<f64>,
}

impl BiasRecords {
    pub fn accept(&mut self, rec: &Record) -> Result<bool> {
        match rec.tag() {
            "g" => {
                rec.expect_len(2)?;
                if self.global.is_some() {
                    return Err(rec.error("duplicate 'g' record"));
                }
                self.global = Some(rec.real(1)?);
            }
            "i" | "u" => {
                rec.expect_len(3)?;
                let value = rec.real(2)?;
                let (map, offsets) = if rec.tag() == "i" {
                    (&mut self.items, &mut self.item_offsets)
                } else {
                    (&mut self.users, &mut self.user_offsets)
                };
                if map.get(&rec.fields[1]).is_some() {
                    return Err(rec.error(format!("duplicate token {:?}", rec.fields[1])));
                }
                map.intern(&rec.fields[1]);
                offsets.push(value);
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn finish(self) -> Result<Option<BiasModel>> {
        match self.global {
            None if self.users.is_empty() && self.items.is_empty() => Ok(None),
            None => Err(Error::Parse {
                line: 0,
                message: "offset records without a 'g' record".into(),
            }),
            Some(global) => Ok(Some(BiasModel {
                global,
                item_offsets: self.item_offsets,
                user_offsets: self.user_offsets,
                alpha_item: 0.0,
                alpha_user: 0.0,
                users: Arc::new(self.users),
                items: Arc::new(self.items),
            })),
        }
    }
}

/// Item rater counts and pairwise co-rating counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CoOccurrence {
    item_user_count: Vec<usize>,
    // upper triangle (i < j), only nonzero intersections
    pairs: HashMap<(u32, u32), usize>,
    n_users: usize,
}

impl CoOccurrence {
    pub fn build(m: &RatingsMatrix) -> Result<CoOccurrence> {
        if m.n_users() == 0 {
            return Err(Error::NoUsers);
        }
        let item_user_count = (0..m.n_items()).map(|i| m.item_col(ItemId(i as u32)).len()).collect();
        let mut pairs = HashMap::new();
        for u in 0..m.n_users() {
            let items = m.user_row(UserId(u as u32)).keys;
            for (a, &i) in items.iter().enumerate() {
                for &j in &items[a + 1..] {
                    *pairs.entry((i, j)).or_insert(0) += 1;
                }
            }
        }
        Ok(CoOccurrence {
            item_user_count,
            pairs,
            n_users: m.n_users(),
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.item_user_count.len()
    }

    /// `|U_i|`, 0 for unknown items.
    pub fn item_user_count(&self, i: ItemId) -> usize {
        self.item_user_count.get(i.index()).copied().unwrap_or(0)
    }

    /// `|U_i ∩ U_j|`
    pub fn pair_count(&self, i: ItemId, j: ItemId) -> usize {
        if i == j {
            return self.item_user_count(i);
        }
        let key = if i < j { (i.0, j.0) } else { (j.0, i.0) };
        self.pairs.get(&key).copied().unwrap_or(0)
    }

    /// `Pr[i ∈ I_u]` over all users.
    pub fn popularity(&self, i: ItemId) -> f64 {
        self.item_user_count(i) as f64 / self.n_users as f64
    }

    /// `Pr[i | j] / Pr[i]`, or `None` when either item has no raters.
    pub fn lift(&self, i: ItemId, j: ItemId) -> Option<f64> {
        let ci = self.item_user_count(i);
        let cj = self.item_user_count(j);
        if ci == 0 || cj == 0 {
            return None;
        }
        let joint = self.pair_count(i, j) as f64;
        Some(joint * self.n_users as f64 / (ci as f64 * cj as f64))
    }
}

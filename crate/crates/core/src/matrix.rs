//! Sparse ratings data with dual (by-user and by-item) compressed indexes.
//!
//! External user and item tokens are interned into dense `u32` indices in
//! first-appearance order. Both orientations of the matrix are materialized
//! at build time so that `R_u` and `R_i` are contiguous sorted slices.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemId(pub u32);

impl UserId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ItemId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A single observed rating `r_ui`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: UserId,
    pub item: ItemId,
    pub value: f64,
}

/// Bijection between external string tokens and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a map from distinct tokens; index `k` is the `k`-th token.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut map = IdMap::new();
        for tok in tokens {
            let tok = tok.into();
            if map.index.contains_key(&tok) {
                return Err(Error::InvalidParameter(format!("duplicate token {tok:?}")));
            }
            map.intern(&tok);
        }
        Ok(map)
    }

    /// Returns the index of `token`, assigning the next free index if new.
    pub fn intern(&mut self, token: &str) -> u32 {
        if let Some(&idx) = self.index.get(token) {
            return idx;
        }
        let idx = u32::try_from(self.tokens.len()).expect("id space exhausted");
        self.tokens.push(token.to_owned());
        self.index.insert(token.to_owned(), idx);
        idx
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, idx: u32) -> Option<&str> {
        self.tokens.get(idx as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Borrowed view of one sparse row: keys strictly ascending, values aligned.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    pub keys: &'a [u32],
    pub values: &'a [f64],
}

impl<'a> Row<'a> {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn get(&self, key: u32) -> Option<f64> {
        self.keys.binary_search(&key).ok().map(|pos| self.values[pos])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + 'a {
        self.keys.iter().copied().zip(self.values.iter().copied())
    }

    /// Sum of squared values.
    pub fn sum_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Merge-join with another row: yields `(key, self_value, other_value)`
    /// for every shared key in ascending key order.
    pub fn intersect(&self, other: &Row<'a>) -> Intersect<'a> {
        Intersect {
            a: *self,
            b: *other,
            ia: 0,
            ib: 0,
        }
    }
}

pub struct Intersect<'a> {
    a: Row<'a>,
    b: Row<'a>,
    ia: usize,
    ib: usize,
}

impl Iterator for Intersect<'_> {
    type Item = (u32, f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        while self.ia < self.a.keys.len() && self.ib < self.b.keys.len() {
            let ka = self.a.keys[self.ia];
            let kb = self.b.keys[self.ib];
            match ka.cmp(&kb) {
                std::cmp::Ordering::Less => self.ia += 1,
                std::cmp::Ordering::Greater => self.ib += 1,
                std::cmp::Ordering::Equal => {
                    let out = (ka, self.a.values[self.ia], self.b.values[self.ib]);
                    self.ia += 1;
                    self.ib += 1;
                    return Some(out);
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Compressed {
    ptr: Vec<usize>,
    keys: Vec<u32>,
    values: Vec<f64>,
}

impl Compressed {
    fn row(&self, idx: usize) -> Row<'_> {
        let (lo, hi) = (self.ptr[idx], self.ptr[idx + 1]);
        Row {
            keys: &self.keys[lo..hi],
            values: &self.values[lo..hi],
        }
    }
}

/// The sparsely observed `|U| x |I|` ratings matrix `R`.
///
/// Immutable after construction. At most one rating per `(u, i)` pair, so
/// `|R_u| = |I_u|` and `|R_i| = |U_i|`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsMatrix {
    users: Arc<IdMap>,
    items: Arc<IdMap>,
    by_user: Compressed,
    by_item: Compressed,
}

impl RatingsMatrix {
    /// Builds a matrix from `(user-token, item-token, value)` triples.
    ///
    /// Dense ids follow first appearance. Duplicate `(u, i)` pairs keep the
    /// last value seen. A non-finite value is rejected with its 1-based
    /// position in the input sequence.
    pub fn from_triples<I, U, T>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (U, T, f64)>,
        U: AsRef<str>,
        T: AsRef<str>,
    {
        let mut users = IdMap::new();
        let mut items = IdMap::new();
        let mut entries = Vec::new();
        for (pos, (u, i, v)) in triples.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteRating {
                    position: pos + 1,
                    value: v,
                });
            }
            let u = users.intern(u.as_ref());
            let i = items.intern(i.as_ref());
            entries.push((u, i, v));
        }
        Ok(Self::assemble(Arc::new(users), Arc::new(items), entries))
    }

    /// Builds a matrix over a fixed id universe. Users and items in the maps
    /// need not have any ratings.
    pub fn from_ratings<I>(users: Arc<IdMap>, items: Arc<IdMap>, ratings: I) -> Result<Self>
    where
        I: IntoIterator<Item = Rating>,
    {
        let mut entries = Vec::new();
        for (pos, r) in ratings.into_iter().enumerate() {
            if !r.value.is_finite() {
                return Err(Error::NonFiniteRating {
                    position: pos + 1,
                    value: r.value,
                });
            }
            if r.user.index() >= users.len() {
                return Err(Error::UnknownUser(r.user.0));
            }
            if r.item.index() >= items.len() {
                return Err(Error::UnknownItem(r.item.0));
            }
            entries.push((r.user.0, r.item.0, r.value));
        }
        Ok(Self::assemble(users, items, entries))
    }

    fn assemble(users: Arc<IdMap>, items: Arc<IdMap>, mut entries: Vec<(u32, u32, f64)>) -> Self {
        let n_users = users.len();
        let n_items = items.len();

        // stable sort keeps input order among duplicates; keep the last one
        entries.sort_by_key(|&(u, i, _)| (u, i));
        let mut dedup: Vec<(u32, u32, f64)> = Vec::with_capacity(entries.len());
        for e in entries {
            match dedup.last_mut() {
                Some(last) if (last.0, last.1) == (e.0, e.1) => *last = e,
                _ => dedup.push(e),
            }
        }

        let mut user_ptr = vec![0usize; n_users + 1];
        let mut item_ptr = vec![0usize; n_items + 1];
        for &(u, i, _) in &dedup {
            user_ptr[u as usize + 1] += 1;
            item_ptr[i as usize + 1] += 1;
        }
        for k in 0..n_users {
            user_ptr[k + 1] += user_ptr[k];
        }
        for k in 0..n_items {
            item_ptr[k + 1] += item_ptr[k];
        }

        let user_keys = dedup.iter().map(|e| e.1).collect();
        let user_vals = dedup.iter().map(|e| e.2).collect();

        // counting sort into item order; users arrive ascending within each item
        let mut cursor = item_ptr.clone();
        let mut item_keys = vec![0u32; dedup.len()];
        let mut item_vals = vec![0f64; dedup.len()];
        for &(u, i, v) in &dedup {
            let slot = &mut cursor[i as usize];
            item_keys[*slot] = u;
            item_vals[*slot] = v;
            *slot += 1;
        }

        RatingsMatrix {
            users,
            items,
            by_user: Compressed {
                ptr: user_ptr,
                keys: user_keys,
                values: user_vals,
            },
            by_item: Compressed {
                ptr: item_ptr,
                keys: item_keys,
                values: item_vals,
            },
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// `|R|`
    pub fn n_ratings(&self) -> usize {
        self.by_user.values.len()
    }

    pub fn users(&self) -> &Arc<IdMap> {
        &self.users
    }

    pub fn items(&self) -> &Arc<IdMap> {
        &self.items
    }

    pub fn user_id(&self, token: &str) -> Option<UserId> {
        self.users.get(token).map(UserId)
    }

    pub fn item_id(&self, token: &str) -> Option<ItemId> {
        self.items.get(token).map(ItemId)
    }

    pub fn user_token(&self, u: UserId) -> Option<&str> {
        self.users.token(u.0)
    }

    pub fn item_token(&self, i: ItemId) -> Option<&str> {
        self.items.token(i.0)
    }

    pub fn check_user(&self, u: UserId) -> Result<()> {
        if u.index() < self.n_users() {
            Ok(())
        } else {
            Err(Error::UnknownUser(u.0))
        }
    }

    pub fn check_item(&self, i: ItemId) -> Result<()> {
        if i.index() < self.n_items() {
            Ok(())
        } else {
            Err(Error::UnknownItem(i.0))
        }
    }

    /// `R_u`: the user's ratings keyed by item index. Panics if out of range.
    pub fn user_row(&self, u: UserId) -> Row<'_> {
        self.by_user.row(u.index())
    }

    /// `R_i`: the item's ratings keyed by user index. Panics if out of range.
    pub fn item_col(&self, i: ItemId) -> Row<'_> {
        self.by_item.row(i.index())
    }

    /// `r_ui` if observed. Out-of-range ids yield `None`.
    pub fn get(&self, u: UserId, i: ItemId) -> Option<f64> {
        if u.index() >= self.n_users() {
            return None;
        }
        self.user_row(u).get(i.0)
    }

    /// All ratings in `(user, item)` ascending order.
    pub fn ratings(&self) -> impl Iterator<Item = Rating> + '_ {
        (0..self.n_users()).flat_map(move |u| {
            self.by_user.row(u).iter().map(move |(i, value)| Rating {
                user: UserId(u as u32),
                item: ItemId(i),
                value,
            })
        })
    }

    /// All ratings as token triples, in `(user, item)` index order.
    pub fn triples(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.ratings().map(move |r| {
            (
                self.users.tokens()[r.user.index()].as_str(),
                self.items.tokens()[r.item.index()].as_str(),
                r.value,
            )
        })
    }

    /// Same structure with every value replaced by `f(user, item, value)`.
    pub fn map_values<F>(&self, mut f: F) -> RatingsMatrix
    where
        F: FnMut(UserId, ItemId, f64) -> f64,
    {
        let mut by_user = self.by_user.clone();
        for u in 0..self.n_users() {
            for pos in by_user.ptr[u]..by_user.ptr[u + 1] {
                by_user.values[pos] = f(UserId(u as u32), ItemId(by_user.keys[pos]), by_user.values[pos]);
            }
        }
        let mut by_item = self.by_item.clone();
        for i in 0..self.n_items() {
            for pos in by_item.ptr[i]..by_item.ptr[i + 1] {
                let u = by_item.keys[pos] as usize;
                by_item.values[pos] = by_user.row(u).get(i as u32).expect("dual index out of sync");
            }
        }
        RatingsMatrix {
            users: self.users.clone(),
            items: self.items.clone(),
            by_user,
            by_item,
        }
    }

    /// Replaces every `r_ui` with `r_ui - mean(i)` (the item-centered `r~`).
    pub fn mean_center_items(&self, stats: &Stats) -> RatingsMatrix {
        self.map_values(|_, i, v| {
            let mean = stats.item_mean[i.index()].expect("rated item has a mean");
            v - mean
        })
    }

    /// Sorted `U_i ∩ U_j`.
    pub fn common_users(&self, i: ItemId, j: ItemId) -> Result<Vec<UserId>> {
        self.check_item(i)?;
        self.check_item(j)?;
        Ok(self
            .item_col(i)
            .intersect(&self.item_col(j))
            .map(|(u, _, _)| UserId(u))
            .collect())
    }

    /// Sorted `I_u ∩ I_v`.
    pub fn common_items(&self, u: UserId, v: UserId) -> Result<Vec<ItemId>> {
        self.check_user(u)?;
        self.check_user(v)?;
        Ok(self
            .user_row(u)
            .intersect(&self.user_row(v))
            .map(|(i, _, _)| ItemId(i))
            .collect())
    }
}

/// Means and counts. Entities without ratings have `None` means.
#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub global_mean: Option<f64>,
    pub user_mean: Vec<Option<f64>>,
    pub item_mean: Vec<Option<f64>>,
    pub user_count: Vec<usize>,
    pub item_count: Vec<usize>,
}

fn row_mean(row: Row<'_>) -> Option<f64> {
    if row.is_empty() {
        None
    } else {
        Some(row.values.iter().sum::<f64>() / row.len() as f64)
    }
}

impl Stats {
    pub fn compute(m: &RatingsMatrix) -> Stats {
        let global_mean = if m.n_ratings() == 0 {
            None
        } else {
            Some(m.by_user.values.iter().sum::<f64>() / m.n_ratings() as f64)
        };
        let user_rows = (0..m.n_users()).map(|u| m.by_user.row(u));
        let item_rows = (0..m.n_items()).map(|i| m.by_item.row(i));
        Stats {
            global_mean,
            user_mean: user_rows.clone().map(row_mean).collect(),
            item_mean: item_rows.clone().map(row_mean).collect(),
            user_count: user_rows.map(|r| r.len()).collect(),
            item_count: item_rows.map(|r| r.len()).collect(),
        }
    }

    pub fn user_mean(&self, u: UserId) -> Option<f64> {
        self.user_mean.get(u.index()).copied().flatten()
    }

    pub fn item_mean(&self, i: ItemId) -> Option<f64> {
        self.item_mean.get(i.index()).copied().flatten()
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::{arb_triples, m1};
    use super::*;
    use proptest::prelude::*;

    fn uid(m: &RatingsMatrix, t: &str) -> UserId {
        m.user_id(t).unwrap()
    }
    fn iid(m: &RatingsMatrix, t: &str) -> ItemId {
        m.item_id(t).unwrap()
    }

    #[test]
    fn empty_matrix() {
        let m = RatingsMatrix::from_triples(Vec::<(&str, &str, f64)>::new()).unwrap();
        assert_eq!((m.n_users(), m.n_items(), m.n_ratings()), (0, 0, 0));
        let s = Stats::compute(&m);
        assert_eq!(s.global_mean, None);
    }

    #[test]
    fn m1_structure() {
        let m = m1();
        assert_eq!((m.n_users(), m.n_items(), m.n_ratings()), (3, 3, 6));
        let u1 = m.user_row(uid(&m, "u1"));
        let items: Vec<_> = u1.keys.iter().map(|&k| m.item_token(ItemId(k)).unwrap()).collect();
        assert_eq!(items, ["i1", "i2"]);
        let i1 = m.item_col(iid(&m, "i1"));
        let users: Vec<_> = i1.keys.iter().map(|&k| m.user_token(UserId(k)).unwrap()).collect();
        assert_eq!(users, ["u1", "u2"]);
    }

    #[test]
    fn duplicate_last_write_wins() {
        let m = RatingsMatrix::from_triples([("u1", "i1", 3.0), ("u1", "i1", 5.0)]).unwrap();
        assert_eq!(m.n_ratings(), 1);
        assert_eq!(m.get(UserId(0), ItemId(0)), Some(5.0));
        assert_eq!(m.item_col(ItemId(0)).values, &[5.0]);
    }

    #[test]
    fn non_finite_rejected_with_position() {
        let err = RatingsMatrix::from_triples([("a", "x", 1.0), ("b", "y", f64::NAN)]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteRating { position: 2, .. }));
        let err = RatingsMatrix::from_triples([("a", "x", f64::INFINITY)]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteRating { position: 1, .. }));
    }

    #[test]
    fn m1_stats() {
        let m = m1();
        let s = Stats::compute(&m);
        assert!((s.global_mean.unwrap() - 19.0 / 6.0).abs() < 1e-15);
        assert_eq!(s.user_mean(uid(&m, "u1")), Some(3.0));
        assert_eq!(s.user_mean(uid(&m, "u2")), Some(4.5));
        assert_eq!(s.item_mean(iid(&m, "i2")), Some(2.5));
        assert_eq!(s.item_count[iid(&m, "i1").index()], 2);
        // no repeats, so |I_u| = |R_u|
        assert_eq!(s.user_count[0], m.user_row(UserId(0)).len());
        assert_eq!(s.user_count[0], 2);
    }

    #[test]
    fn single_rating_stats() {
        let m = RatingsMatrix::from_triples([("u", "i", 4.0)]).unwrap();
        let s = Stats::compute(&m);
        assert_eq!(s.global_mean, Some(4.0));
        assert_eq!(s.user_mean[0], Some(4.0));
        assert_eq!(s.item_mean[0], Some(4.0));
    }

    #[test]
    fn unrated_entities_have_undefined_means() {
        let users = Arc::new(IdMap::from_tokens(["a", "b"]).unwrap());
        let items = Arc::new(IdMap::from_tokens(["x", "y"]).unwrap());
        let m = RatingsMatrix::from_ratings(
            users,
            items,
            [Rating {
                user: UserId(0),
                item: ItemId(0),
                value: 2.0,
            }],
        )
        .unwrap();
        let s = Stats::compute(&m);
        assert_eq!(s.user_mean, vec![Some(2.0), None]);
        assert_eq!(s.item_mean, vec![Some(2.0), None]);
        assert_eq!(s.user_count, vec![1, 0]);
    }

    #[test]
    fn centering_m1() {
        let m = m1();
        let s = Stats::compute(&m);
        let c = m.mean_center_items(&s);
        assert_eq!(c.item_col(iid(&m, "i2")).values, &[-0.5, 0.5]);
        assert_eq!(c.item_col(iid(&m, "i1")).values, &[0.0, 0.0]);
        assert_eq!(c.n_ratings(), m.n_ratings());
        let one = RatingsMatrix::from_triples([("u", "i", 3.7), ("v", "j", 1.0)]).unwrap();
        let c1 = one.mean_center_items(&Stats::compute(&one));
        assert_eq!(c1.item_col(ItemId(0)).values, &[0.0]);
    }

    #[test]
    fn common_users_m1() {
        let m = m1();
        let names =
            |v: Vec<UserId>| -> Vec<String> { v.into_iter().map(|u| m.user_token(u).unwrap().to_owned()).collect() };
        assert_eq!(names(m.common_users(iid(&m, "i2"), iid(&m, "i3")).unwrap()), ["u3"]);
        assert_eq!(
            names(m.common_users(iid(&m, "i1"), iid(&m, "i1")).unwrap()),
            ["u1", "u2"]
        );
        assert_eq!(names(m.common_users(iid(&m, "i1"), iid(&m, "i3")).unwrap()), ["u2"]);
        assert!(matches!(
            m.common_users(ItemId(0), ItemId(7)),
            Err(Error::UnknownItem(7))
        ));
        assert!(matches!(
            m.common_items(UserId(9), UserId(0)),
            Err(Error::UnknownUser(9))
        ));
    }

    proptest! {
        #[test]
        fn transpose_consistency(triples in arb_triples()) {
            let m = RatingsMatrix::from_triples(triples).unwrap();
            let mut via_items = Vec::new();
            for i in 0..m.n_items() {
                for (u, v) in m.item_col(ItemId(i as u32)).iter() {
                    via_items.push((u, i as u32, v));
                }
            }
            via_items.sort_by_key(|&(u, i, _)| (u, i));
            let via_users: Vec<_> = m.ratings().map(|r| (r.user.0, r.item.0, r.value)).collect();
            prop_assert_eq!(via_users, via_items);
            let su: usize = (0..m.n_users()).map(|u| m.user_row(UserId(u as u32)).len()).sum();
            let si: usize = (0..m.n_items()).map(|i| m.item_col(ItemId(i as u32)).len()).sum();
            prop_assert_eq!(su, m.n_ratings());
            prop_assert_eq!(si, m.n_ratings());
            for u in 0..m.n_users() {
                prop_assert!(m.user_row(UserId(u as u32)).keys.windows(2).all(|w| w[0] < w[1]));
            }
        }

        #[test]
        fn rebuild_round_trip(triples in arb_triples()) {
            let m = RatingsMatrix::from_triples(triples.clone()).unwrap();
            // same input order gives the same index assignment
            prop_assert_eq!(&m, &RatingsMatrix::from_triples(triples).unwrap());
            // rebuilding from the by-user iteration over the same id universe is identical
            let again = RatingsMatrix::from_ratings(m.users().clone(), m.items().clone(), m.ratings()).unwrap();
            prop_assert_eq!(&m, &again);
            // and by token, the content is identical
            let from_tokens = RatingsMatrix::from_triples(m.triples()).unwrap();
            let mut a: Vec<_> = m.triples().map(|(u, i, v)| (u.to_owned(), i.to_owned(), v.to_bits())).collect();
            let mut b: Vec<_> = from_tokens.triples().map(|(u, i, v)| (u.to_owned(), i.to_owned(), v.to_bits())).collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn centered_items_sum_to_zero(triples in arb_triples()) {
            let m = RatingsMatrix::from_triples(triples).unwrap();
            let s = Stats::compute(&m);
            let c = m.mean_center_items(&s);
            for i in 0..c.n_items() {
                let col = c.item_col(ItemId(i as u32));
                let sum: f64 = col.values.iter().sum();
                prop_assert!(sum.abs() <= 1e-9 * col.len() as f64);
            }
            for u in 0..m.n_users() {
                if let Some(mean) = s.user_mean[u] {
                    let total: f64 = m.user_row(UserId(u as u32)).values.iter().sum();
                    prop_assert!((mean * s.user_count[u] as f64 - total).abs() <= 1e-9 * total.abs().max(1.0));
                }
            }
        }

        #[test]
        fn common_users_symmetric(triples in arb_triples(), a in 0u32..12, b in 0u32..12) {
            let m = RatingsMatrix::from_triples(triples).unwrap();
            prop_assume!((a as usize) < m.n_items() && (b as usize) < m.n_items());
            prop_assert_eq!(m.common_users(ItemId(a), ItemId(b)).unwrap(), m.common_users(ItemId(b), ItemId(a)).unwrap());
        }
    }
}

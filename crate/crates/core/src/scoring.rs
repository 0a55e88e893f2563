//! Unified scoring `s(i|u,h,x)` and ordering `O(i|u,h,x)`.
//!
//! A [`ScorerChain`] tries its scorers in order and returns the first defined
//! score, ending in a constant terminal (normally the global mean) so that a
//! score always exists. Rankings are sorted by score descending with ties
//! broken by ascending external item token.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::baseline::{BiasModel, CoOccurrence};
use crate::error::{Error, Result};
use crate::knn::{self, ItemKnnModel, UserKnnConfig};
use crate::matrix::{IdMap, ItemId, RatingsMatrix, Stats, UserId};
use crate::mf::FactorModel;

/// The conditioning tuple `(u, h, x)` plus an optional candidate set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreRequest {
    pub user: Option<UserId>,
    /// Item context `h`.
    pub query: Option<ItemId>,
    /// Opaque context `x`; carried but not interpreted by any scorer.
    pub context: Option<String>,
    pub candidates: Option<Vec<ItemId>>,
    /// Drop items the user has already rated from ranked output.
    pub exclude_rated: bool,
}

impl ScoreRequest {
    /// A recommendation request for `u`; already-rated items are excluded.
    pub fn for_user(u: UserId) -> Self {
        ScoreRequest {
            user: Some(u),
            exclude_rated: true,
            ..Default::default()
        }
    }

    /// A rating-prediction request for `u`; nothing is excluded.
    pub fn prediction(u: UserId) -> Self {
        ScoreRequest {
            user: Some(u),
            ..Default::default()
        }
    }

    /// A related-items request conditioned on item `h`.
    pub fn for_query(h: ItemId) -> Self {
        ScoreRequest {
            query: Some(h),
            ..Default::default()
        }
    }

    pub fn with_candidates(mut self, candidates: Vec<ItemId>) -> Self {
        self.candidates = Some(candidates);
        self
    }

    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        self.context = Some(context.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.user.is_none() && self.query.is_none() {
            return Err(Error::InvalidParameter(
                "score request needs a user or a query item".into(),
            ));
        }
        Ok(())
    }
}

/// One scoring model. `None` means the model cannot score this input.
pub trait Scorer: Send + Sync {
    fn score(&self, req: &ScoreRequest, item: ItemId) -> Option<f64>;

    fn name(&self) -> &str;
}

impl Scorer for BiasModel {
    fn score(&self, req: &ScoreRequest, item: ItemId) -> Option<f64> {
        // an absent user contributes no offset, giving b + b_i
        let u = req.user.unwrap_or(UserId(u32::MAX));
        Some(self.predict(u, item))
    }

    fn name(&self) -> &str {
        "bias"
    }
}

impl Scorer for FactorModel {
    fn score(&self, req: &ScoreRequest, item: ItemId) -> Option<f64> {
        self.try_score(req.user?, item)
    }

    fn name(&self) -> &str {
        "mf"
    }
}

/// Item-based kNN over a fixed ratings matrix.
pub struct ItemKnnScorer {
    pub model: ItemKnnModel,
    pub ratings: Arc<RatingsMatrix>,
}

impl Scorer for ItemKnnScorer {
    fn score(&self, req: &ScoreRequest, item: ItemId) -> Option<f64> {
        self.model.score(&self.ratings, req.user?, item)
    }

    fn name(&self) -> &str {
        "itemknn"
    }
}

/// User-based kNN, weights computed on demand.
pub struct UserKnnScorer {
    ratings: Arc<RatingsMatrix>,
    stats: Stats,
    pub config: UserKnnConfig,
}

impl UserKnnScorer {
    pub fn new(ratings: Arc<RatingsMatrix>, config: UserKnnConfig) -> Self {
        let stats = Stats::compute(&ratings);
        UserKnnScorer { ratings, stats, config }
    }
}

impl Scorer for UserKnnScorer {
    fn score(&self, req: &ScoreRequest, item: ItemId) -> Option<f64> {
        knn::score_user_knn(&self.ratings, &self.stats, req.user?, item, &self.config)
    }

    fn name(&self) -> &str {
        "userknn"
    }
}

/// `s(i) = Pr[i ∈ I_u]`, ignoring the request.
pub struct Popularity(pub Arc<CoOccurrence>);

impl Scorer for Popularity {
    fn score(&self, _req: &ScoreRequest, item: ItemId) -> Option<f64> {
        Some(self.0.popularity(item))
    }

    fn name(&self) -> &str {
        "popularity"
    }
}

/// `s(i|h)`: lift of `i` given the query item.
pub struct Lift(pub Arc<CoOccurrence>);

impl Scorer for Lift {
    fn score(&self, req: &ScoreRequest, item: ItemId) -> Option<f64> {
        self.0.lift(item, req.query?)
    }

    fn name(&self) -> &str {
        "lift"
    }
}

/// `s(i|h)`: item-item cosine weight to the query item.
pub struct ItemSimilarity {
    centered: RatingsMatrix,
}

impl ItemSimilarity {
    pub fn new(m: &RatingsMatrix) -> Self {
        ItemSimilarity {
            centered: m.mean_center_items(&Stats::compute(m)),
        }
    }
}

impl Scorer for ItemSimilarity {
    fn score(&self, req: &ScoreRequest, item: ItemId) -> Option<f64> {
        knn::item_weight(&self.centered, req.query?, item).ok()
    }

    fn name(&self) -> &str {
        "cosine"
    }
}

/// Ordered list of `(item, score)`, best first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedList {
    pub entries: Vec<(ItemId, f64)>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn items(&self) -> Vec<ItemId> {
        self.entries.iter().map(|e| e.0).collect()
    }
}

pub struct ScorerChain {
    scorers: Vec<Box<dyn Scorer>>,
    terminal: f64,
    items: Arc<IdMap>,
    ratings: Option<Arc<RatingsMatrix>>,
}

impl ScorerChain {
    /// An empty chain over `items` that falls back to `terminal`.
    pub fn new(items: Arc<IdMap>, terminal: f64) -> Self {
        ScorerChain {
            scorers: Vec::new(),
            terminal,
            items,
            ratings: None,
        }
    }

    /// A chain over the matrix's items, excluding rated items for user
    /// requests and ending in the global mean (0 for an empty matrix).
    pub fn for_matrix(ratings: Arc<RatingsMatrix>) -> Self {
        let global = Stats::compute(&ratings).global_mean.unwrap_or(0.0);
        ScorerChain {
            scorers: Vec::new(),
            terminal: global,
            items: ratings.items().clone(),
            ratings: Some(ratings),
        }
    }

    pub fn with_scorer(mut self, scorer: impl Scorer + 'static) -> Self {
        self.scorers.push(Box::new(scorer));
        self
    }

    pub fn push(&mut self, scorer: Box<dyn Scorer>) {
        self.scorers.push(scorer);
    }

    pub fn with_terminal(mut self, terminal: f64) -> Self {
        self.terminal = terminal;
        self
    }

    pub fn terminal(&self) -> f64 {
        self.terminal
    }

    pub fn items(&self) -> &Arc<IdMap> {
        &self.items
    }

    pub fn scorer_names(&self) -> Vec<&str> {
        self.scorers.iter().map(|s| s.name()).collect()
    }

    /// The winning score and the index of the scorer that produced it;
    /// `None` for the index means the terminal constant was used.
    pub fn score_detail(&self, req: &ScoreRequest, item: ItemId) -> (f64, Option<usize>) {
        for (idx, scorer) in self.scorers.iter().enumerate() {
            if let Some(s) = scorer.score(req, item) {
                return (s, Some(idx));
            }
        }
        (self.terminal, None)
    }

    pub fn score(&self, req: &ScoreRequest, item: ItemId) -> f64 {
        self.score_detail(req, item).0
    }

    fn candidates(&self, req: &ScoreRequest) -> Vec<ItemId> {
        let mut out: Vec<ItemId> = match &req.candidates {
            Some(c) => c.iter().copied().filter(|i| i.index() < self.items.len()).collect(),
            None => (0..self.items.len() as u32).map(ItemId).collect(),
        };
        out.sort_unstable();
        out.dedup();
        if let Some(h) = req.query {
            out.retain(|&i| i != h);
        }
        if let (true, Some(u), Some(ratings)) = (req.exclude_rated, req.user, &self.ratings) {
            out.retain(|&i| ratings.get(u, i).is_none());
        }
        out
    }

    /// `O(i|u,h,x)` truncated to `n` entries.
    pub fn rank_top_n(&self, req: &ScoreRequest, n: usize) -> Result<RankedList> {
        req.validate()?;
        if n == 0 {
            return Ok(RankedList::default());
        }
        let mut heap: BinaryHeap<Ranked<'_>> = BinaryHeap::with_capacity(n + 1);
        for item in self.candidates(req) {
            let entry = Ranked {
                score: self.score(req, item),
                token: &self.items.tokens()[item.index()],
                item,
            };
            if heap.len() < n {
                heap.push(entry);
            } else if let Some(worst) = heap.peek() {
                if entry < *worst {
                    heap.pop();
                    heap.push(entry);
                }
            }
        }
        Ok(RankedList {
            entries: heap.into_sorted_vec().into_iter().map(|r| (r.item, r.score)).collect(),
        })
    }

    pub fn token(&self, item: ItemId) -> Option<&str> {
        self.items.token(item.0)
    }
}

/// Orders better entries first: higher score, then smaller token.
struct Ranked<'a> {
    score: f64,
    token: &'a str,
    item: ItemId,
}

impl Ord for Ranked<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.token.cmp(other.token))
            .then_with(|| self.item.cmp(&other.item))
    }
}

impl PartialOrd for Ranked<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Ranked<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked<'_> {}

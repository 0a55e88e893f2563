//! Python bindings for `cfkit`.
//!
//! Users and items are addressed by their string tokens throughout; dense
//! ids never cross the boundary.

use pyo3::prelude::*;

#[pymodule]
mod pycfkit {
    use std::sync::Arc;

    use cfkit::harness::{self, ModelFile, SyntheticSpec};
    use cfkit::knn::{self, UserKnnConfig, WeightKind};
    use cfkit::scoring::{ItemKnnScorer, ItemSimilarity, Lift, Popularity, UserKnnScorer};
    use cfkit::{ItemId, Rating, ScoreRequest, ScorerChain, Stats, TrainConfig, UserId};
    use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
    use pyo3::prelude::*;

    type Triple = (String, String, f64);
    type Means = Vec<(String, f64)>;
    type TruthTable = std::collections::HashMap<(String, String), f64>;

    fn err(e: cfkit::Error) -> PyErr {
        match e {
            cfkit::Error::Io { .. } => PyIOError::new_err(e.to_string()),
            cfkit::Error::UnknownUserToken(_) | cfkit::Error::UnknownItemToken(_) => PyKeyError::new_err(e.to_string()),
            other => PyValueError::new_err(other.to_string()),
        }
    }

    fn weight_kind(name: &str) -> PyResult<WeightKind> {
        match name {
            "cosine" => Ok(WeightKind::Cosine),
            "pearson" => Ok(WeightKind::Pearson),
            other => Err(PyValueError::new_err(format!("unknown weight kind {other:?}"))),
        }
    }

    /// Sparse user-item ratings with both row orientations.
    #[pyclass(frozen)]
    struct RatingsMatrix {
        inner: Arc<cfkit::RatingsMatrix>,
    }

    impl RatingsMatrix {
        fn wrap(m: cfkit::RatingsMatrix) -> Self {
            RatingsMatrix { inner: Arc::new(m) }
        }

        fn user(&self, token: &str) -> UserId {
            self.inner.user_id(token).unwrap_or(UserId(self.inner.n_users() as u32))
        }

        fn item(&self, token: &str) -> ItemId {
            self.inner.item_id(token).unwrap_or(ItemId(self.inner.n_items() as u32))
        }
    }

    #[pymethods]
    impl RatingsMatrix {
        #[new]
        fn new(triples: Vec<Triple>) -> PyResult<Self> {
            cfkit::RatingsMatrix::from_triples(triples).map(Self::wrap).map_err(err)
        }

        #[staticmethod]
        fn read_csv(path: &str) -> PyResult<Self> {
            let triples = harness::read_ratings_csv(path).map_err(err)?;
            Self::new(triples)
        }

        fn write_csv(&self, path: &str) -> PyResult<()> {
            let file = std::fs::File::create(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
            harness::write_ratings_csv(std::io::BufWriter::new(file), self.inner.triples()).map_err(err)
        }

        #[getter]
        fn n_users(&self) -> usize {
            self.inner.n_users()
        }

        #[getter]
        fn n_items(&self) -> usize {
            self.inner.n_items()
        }

        #[getter]
        fn n_ratings(&self) -> usize {
            self.inner.n_ratings()
        }

        fn users(&self) -> Vec<String> {
            self.inner.users().tokens().to_vec()
        }

        fn items(&self) -> Vec<String> {
            self.inner.items().tokens().to_vec()
        }

        fn get(&self, user: &str, item: &str) -> Option<f64> {
            self.inner.get(self.inner.user_id(user)?, self.inner.item_id(item)?)
        }

        fn triples(&self) -> Vec<Triple> {
            self.inner
                .triples()
                .map(|(u, i, v)| (u.to_owned(), i.to_owned(), v))
                .collect()
        }

        /// `(global_mean, [(user, mean)], [(item, mean)])`; entities without ratings are omitted.
        fn means(&self) -> (Option<f64>, Means, Means) {
            let stats = Stats::compute(&self.inner);
            let pick = |tokens: &[String], means: &[Option<f64>]| {
                tokens
                    .iter()
                    .zip(means)
                    .filter_map(|(t, m)| Some((t.clone(), (*m)?)))
                    .collect()
            };
            (
                stats.global_mean,
                pick(self.inner.users().tokens(), &stats.user_mean),
                pick(self.inner.items().tokens(), &stats.item_mean),
            )
        }

        fn __len__(&self) -> usize {
            self.inner.n_ratings()
        }

        fn __repr__(&self) -> String {
            format!(
                "RatingsMatrix(users={}, items={}, ratings={})",
                self.inner.n_users(),
                self.inner.n_items(),
                self.inner.n_ratings()
            )
        }
    }

    /// Global mean plus damped item and user offsets.
    #[pyclass(frozen)]
    struct BiasModel {
        inner: cfkit::BiasModel,
    }

    #[pymethods]
    impl BiasModel {
        #[staticmethod]
        #[pyo3(signature = (ratings, alpha_item = 5.0, alpha_user = 5.0))]
        fn fit(ratings: &RatingsMatrix, alpha_item: f64, alpha_user: f64) -> PyResult<Self> {
            let inner = cfkit::BiasModel::fit(&ratings.inner, alpha_item, alpha_user).map_err(err)?;
            Ok(BiasModel { inner })
        }

        #[staticmethod]
        fn load(path: &str) -> PyResult<Self> {
            match ModelFile::load(path).map_err(err)? {
                ModelFile::Bias(inner) => Ok(BiasModel { inner }),
                other => Err(PyValueError::new_err(format!("{path} holds a {} model", other.kind()))),
            }
        }

        fn save(&self, path: &str) -> PyResult<()> {
            ModelFile::Bias(self.inner.clone()).save(path).map_err(err)
        }

        #[getter]
        fn global_mean(&self) -> f64 {
            self.inner.global
        }

        fn item_offset(&self, item: &str) -> f64 {
            let i = self.inner.items().get(item).unwrap_or(u32::MAX);
            self.inner.item_offset(ItemId(i))
        }

        fn user_offset(&self, user: &str) -> f64 {
            let u = self.inner.users().get(user).unwrap_or(u32::MAX);
            self.inner.user_offset(UserId(u))
        }

        fn predict(&self, user: &str, item: &str) -> f64 {
            self.inner.predict_tokens(user, item)
        }
    }

    /// Item popularity and pairwise lift.
    #[pyclass(frozen)]
    struct CoOccurrence {
        inner: Arc<cfkit::CoOccurrence>,
        items: Arc<cfkit::IdMap>,
    }

    impl CoOccurrence {
        fn item(&self, token: &str) -> PyResult<ItemId> {
            self.items
                .get(token)
                .map(ItemId)
                .ok_or_else(|| err(cfkit::Error::UnknownItemToken(token.to_owned())))
        }
    }

    #[pymethods]
    impl CoOccurrence {
        #[new]
        fn new(ratings: &RatingsMatrix) -> PyResult<Self> {
            let inner = cfkit::CoOccurrence::build(&ratings.inner).map_err(err)?;
            Ok(CoOccurrence {
                inner: Arc::new(inner),
                items: ratings.inner.items().clone(),
            })
        }

        fn popularity(&self, item: &str) -> PyResult<f64> {
            Ok(self.inner.popularity(self.item(item)?))
        }

        /// Lift of `item` given `given`; `None` when undefined.
        fn lift(&self, item: &str, given: &str) -> PyResult<Option<f64>> {
            Ok(self.inner.lift(self.item(item)?, self.item(given)?))
        }
    }

    /// Precomputed item-item neighbor pools.
    #[pyclass(frozen)]
    struct ItemKnnModel {
        inner: cfkit::ItemKnnModel,
    }

    #[pymethods]
    impl ItemKnnModel {
        #[staticmethod]
        #[pyo3(signature = (ratings, pool = knn::DEFAULT_POOL, min_weight = 0.0))]
        fn build(ratings: &RatingsMatrix, pool: usize, min_weight: f64) -> PyResult<Self> {
            let inner = cfkit::ItemKnnModel::build(&ratings.inner, pool, min_weight).map_err(err)?;
            Ok(ItemKnnModel { inner })
        }

        #[staticmethod]
        fn load(path: &str) -> PyResult<Self> {
            match ModelFile::load(path).map_err(err)? {
                ModelFile::ItemKnn(inner) => Ok(ItemKnnModel { inner }),
                other => Err(PyValueError::new_err(format!("{path} holds a {} model", other.kind()))),
            }
        }

        fn save(&self, path: &str) -> PyResult<()> {
            ModelFile::ItemKnn(self.inner.clone()).save(path).map_err(err)
        }

        fn neighbors(&self, item: &str) -> Vec<(String, f64)> {
            let Some(i) = self.inner.items().get(item) else {
                return Vec::new();
            };
            self.inner
                .neighbors(ItemId(i))
                .iter()
                .map(|&(j, w)| (self.inner.items().token(j.0).unwrap_or_default().to_owned(), w))
                .collect()
        }

        /// Prediction for `user` on `item` from that user's ratings in `ratings`.
        #[pyo3(signature = (ratings, user, item, k = None))]
        fn score(&self, ratings: &RatingsMatrix, user: &str, item: &str, k: Option<usize>) -> Option<f64> {
            let aligned = self.inner.align(ratings.inner.items());
            let k = k.unwrap_or(self.inner.k);
            aligned.score_with_k(&ratings.inner, ratings.user(user), ratings.item(item), k)
        }
    }

    /// User-based kNN prediction, or `None` when no neighbor rated the item.
    #[pyfunction]
    #[pyo3(signature = (ratings, user, item, k = knn::DEFAULT_K, weight = "cosine", min_common = knn::DEFAULT_MIN_COMMON))]
    fn user_knn_score(
        ratings: &RatingsMatrix,
        user: &str,
        item: &str,
        k: usize,
        weight: &str,
        min_common: usize,
    ) -> PyResult<Option<f64>> {
        let cfg = UserKnnConfig {
            k,
            weight_kind: weight_kind(weight)?,
            min_common,
            positive_only: false,
        };
        let stats = Stats::compute(&ratings.inner);
        Ok(knn::score_user_knn(
            &ratings.inner,
            &stats,
            ratings.user(user),
            ratings.item(item),
            &cfg,
        ))
    }

    /// Latent-factor model, optionally with a baked-in bias baseline.
    #[pyclass(frozen)]
    struct FactorModel {
        inner: cfkit::FactorModel,
    }

    #[pymethods]
    impl FactorModel {
        #[staticmethod]
        #[pyo3(signature = (ratings, k = None, epochs = None, learning_rate = None, reg = None, init_scale = None, seed = None))]
        fn train(
            ratings: &RatingsMatrix,
            k: Option<usize>,
            epochs: Option<usize>,
            learning_rate: Option<f64>,
            reg: Option<f64>,
            init_scale: Option<f64>,
            seed: Option<u64>,
        ) -> PyResult<Self> {
            let d = TrainConfig::default();
            let cfg = TrainConfig {
                k: k.unwrap_or(d.k),
                epochs: epochs.unwrap_or(d.epochs),
                learning_rate: learning_rate.unwrap_or(d.learning_rate),
                reg: reg.unwrap_or(d.reg),
                init_scale: init_scale.unwrap_or(d.init_scale),
                seed: seed.unwrap_or(d.seed),
                ..d
            };
            let inner = cfkit::mf::train_sgd(&ratings.inner, &cfg).map_err(err)?;
            Ok(FactorModel { inner })
        }

        /// Builds a model from `{token: row}` factor tables; `sigma` is folded into both sides.
        #[staticmethod]
        #[pyo3(signature = (p, q, sigma = None))]
        fn from_factors(
            p: Vec<(String, Vec<f64>)>,
            q: Vec<(String, Vec<f64>)>,
            sigma: Option<Vec<f64>>,
        ) -> PyResult<Self> {
            let k = p.first().or(q.first()).map_or(0, |(_, row)| row.len());
            let inner = cfkit::FactorModel::load_factors(k, &p, &q, sigma.as_deref()).map_err(err)?;
            Ok(FactorModel { inner })
        }

        #[staticmethod]
        fn load(path: &str) -> PyResult<Self> {
            match ModelFile::load(path).map_err(err)? {
                ModelFile::Factors(inner) => Ok(FactorModel { inner }),
                other => Err(PyValueError::new_err(format!("{path} holds a {} model", other.kind()))),
            }
        }

        fn save(&self, path: &str) -> PyResult<()> {
            ModelFile::Factors(self.inner.clone()).save(path).map_err(err)
        }

        #[getter]
        fn k(&self) -> usize {
            self.inner.k()
        }

        fn user_factors(&self, user: &str) -> Option<Vec<f64>> {
            let u = self.inner.users().get(user)?;
            self.inner.user_factors(UserId(u)).map(<[f64]>::to_vec)
        }

        fn item_factors(&self, item: &str) -> Option<Vec<f64>> {
            let i = self.inner.items().get(item)?;
            self.inner.item_factors(ItemId(i)).map(<[f64]>::to_vec)
        }

        fn score(&self, user: &str, item: &str) -> f64 {
            self.inner.score_tokens(user, item)
        }
    }

    /// Ordered scorers over one ratings matrix; the first defined score
    /// wins and the global mean closes the chain.
    #[pyclass]
    struct Chain {
        ratings: Arc<cfkit::RatingsMatrix>,
        inner: ScorerChain,
    }

    impl Chain {
        fn users(&self) -> &Arc<cfkit::IdMap> {
            self.ratings.users()
        }

        fn items(&self) -> &Arc<cfkit::IdMap> {
            self.ratings.items()
        }
    }

    #[pymethods]
    impl Chain {
        #[new]
        fn new(ratings: &RatingsMatrix) -> Self {
            Chain {
                ratings: ratings.inner.clone(),
                inner: ScorerChain::for_matrix(ratings.inner.clone()),
            }
        }

        fn add_bias(&mut self, model: &BiasModel) {
            let aligned = model.inner.align(self.users(), self.items());
            self.inner.push(Box::new(aligned));
        }

        fn add_factors(&mut self, model: &FactorModel) {
            let aligned = model.inner.align(self.users(), self.items());
            self.inner.push(Box::new(aligned));
        }

        fn add_item_knn(&mut self, model: &ItemKnnModel) {
            let scorer = ItemKnnScorer {
                model: model.inner.align(self.items()),
                ratings: self.ratings.clone(),
            };
            self.inner.push(Box::new(scorer));
        }

        #[pyo3(signature = (k = knn::DEFAULT_K, weight = "cosine", min_common = knn::DEFAULT_MIN_COMMON))]
        fn add_user_knn(&mut self, k: usize, weight: &str, min_common: usize) -> PyResult<()> {
            let cfg = UserKnnConfig {
                k,
                weight_kind: weight_kind(weight)?,
                min_common,
                positive_only: false,
            };
            self.inner.push(Box::new(UserKnnScorer::new(self.ratings.clone(), cfg)));
            Ok(())
        }

        fn add_popularity(&mut self) -> PyResult<()> {
            let co = cfkit::CoOccurrence::build(&self.ratings).map_err(err)?;
            self.inner.push(Box::new(Popularity(Arc::new(co))));
            Ok(())
        }

        fn add_lift(&mut self) -> PyResult<()> {
            let co = cfkit::CoOccurrence::build(&self.ratings).map_err(err)?;
            self.inner.push(Box::new(Lift(Arc::new(co))));
            Ok(())
        }

        fn add_similarity(&mut self) {
            self.inner.push(Box::new(ItemSimilarity::new(&self.ratings)));
        }

        fn scorers(&self) -> Vec<String> {
            self.inner.scorer_names().into_iter().map(str::to_owned).collect()
        }

        fn score(&self, user: &str, item: &str) -> f64 {
            let u = UserId(self.users().get(user).unwrap_or(u32::MAX));
            let i = ItemId(self.items().get(item).unwrap_or(u32::MAX));
            self.inner.score(&ScoreRequest::prediction(u), i)
        }

        /// Top-`n` `(item, score)` pairs for `user`, or for items related to `query`.
        #[pyo3(signature = (n, user = None, query = None, include_rated = false))]
        fn rank(
            &self,
            n: usize,
            user: Option<&str>,
            query: Option<&str>,
            include_rated: bool,
        ) -> PyResult<Vec<(String, f64)>> {
            let query = match query {
                Some(q) => Some(ItemId(
                    self.items()
                        .get(q)
                        .ok_or_else(|| err(cfkit::Error::UnknownItemToken(q.to_owned())))?,
                )),
                None => None,
            };
            let user = user.map(|u| UserId(self.users().get(u).unwrap_or(u32::MAX)));
            let req = ScoreRequest {
                user,
                query,
                context: None,
                candidates: None,
                exclude_rated: user.is_some() && !include_rated,
            };
            let list = self.inner.rank_top_n(&req, n).map_err(err)?;
            Ok(list
                .entries
                .iter()
                .map(|&(i, s)| (self.inner.token(i).unwrap_or_default().to_owned(), s))
                .collect())
        }

        /// `{"rmse", "mae", "coverage", "n"}` over `(user, item, rating)` test triples.
        fn evaluate(&self, test: Vec<Triple>) -> PyResult<std::collections::HashMap<String, f64>> {
            let ratings: Vec<Rating> = test
                .iter()
                .map(|(u, i, v)| Rating {
                    user: UserId(self.users().get(u).unwrap_or(u32::MAX)),
                    item: ItemId(self.items().get(i).unwrap_or(u32::MAX)),
                    value: *v,
                })
                .collect();
            let report = harness::evaluate(&self.inner, &ratings).map_err(err)?;
            Ok([
                ("rmse".to_owned(), report.rmse),
                ("mae".to_owned(), report.mae),
                ("coverage".to_owned(), report.coverage),
                ("n".to_owned(), report.n_test as f64),
            ]
            .into_iter()
            .collect())
        }
    }

    /// Draws synthetic ratings; returns the matrix and the dense true
    /// preferences as `{(user, item): value}`.
    #[pyfunction]
    #[pyo3(signature = (n_users, n_items, density, noise_sd, seed, latent_rank = 0, latent_scale = 0.5, global_mean = 3.5, user_bias_sd = 0.5, item_bias_sd = 0.5, clamp = false))]
    #[allow(clippy::too_many_arguments)]
    fn synth(
        n_users: usize,
        n_items: usize,
        density: f64,
        noise_sd: f64,
        seed: u64,
        latent_rank: usize,
        latent_scale: f64,
        global_mean: f64,
        user_bias_sd: f64,
        item_bias_sd: f64,
        clamp: bool,
    ) -> PyResult<(RatingsMatrix, TruthTable)> {
        let spec = SyntheticSpec {
            n_users,
            n_items,
            density,
            global_mean,
            user_bias_sd,
            item_bias_sd,
            latent_rank,
            latent_scale,
            noise_sd,
            seed,
            clamp,
        };
        let (m, truth) = harness::generate(&spec).map_err(err)?;
        let mut table = std::collections::HashMap::with_capacity(n_users * n_items);
        for (u, ut) in truth.users().tokens().iter().enumerate() {
            for (i, it) in truth.items().tokens().iter().enumerate() {
                table.insert((ut.clone(), it.clone()), truth.get(UserId(u as u32), ItemId(i as u32)));
            }
        }
        Ok((RatingsMatrix::wrap(m), table))
    }

    /// Random per-rating hold-out: `(train, test_triples)`.
    #[pyfunction]
    fn split(ratings: &RatingsMatrix, test_fraction: f64, seed: u64) -> PyResult<(RatingsMatrix, Vec<Triple>)> {
        let (train, test) = harness::split(&ratings.inner, test_fraction, seed).map_err(err)?;
        let test = test
            .iter()
            .map(|r| {
                (
                    ratings.inner.user_token(r.user).unwrap_or_default().to_owned(),
                    ratings.inner.item_token(r.item).unwrap_or_default().to_owned(),
                    r.value,
                )
            })
            .collect();
        Ok((RatingsMatrix::wrap(train), test))
    }
}

//! Train/test splitting and error metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{Rating, RatingsMatrix};
use crate::scoring::{ScoreRequest, ScorerChain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub rmse: f64,
    pub mae: f64,
    /// Fraction of test pairs scored by the first scorer in the chain.
    pub coverage: f64,
    pub n_test: usize,
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "rmse={} mae={} coverage={} n={}",
            self.rmse, self.mae, self.coverage, self.n_test
        )
    }
}

/// Assigns each rating to the test set with probability `test_fraction`.
///
/// The training matrix keeps the full user and item id universe, so test
/// ratings stay addressable even when an entity lost all its training data.
pub fn split(m: &RatingsMatrix, test_fraction: f64, seed: u64) -> Result<(RatingsMatrix, Vec<Rating>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for r in m.ratings() {
        if rng.random_bool(test_fraction) {
            test.push(r);
        } else {
            train.push(r);
        }
    }
    if train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if test.is_empty() {
        return Err(Error::EmptySplit("test"));
    }
    let train = RatingsMatrix::from_ratings(m.users().clone(), m.items().clone(), train)?;
    Ok((train, test))
}

/// RMSE and MAE over `(prediction, truth)` pairs.
pub fn error_metrics<I>(pairs: I) -> Result<(f64, f64)>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let (mut sq, mut abs, mut n) = (0.0, 0.0, 0usize);
    for (pred, truth) in pairs {
        let e = pred - truth;
        sq += e * e;
        abs += e.abs();
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyTestSet);
    }
    Ok(((sq / n as f64).sqrt(), abs / n as f64))
}

/// Scores every test pair in prediction mode and reports error metrics.
pub fn evaluate(chain: &ScorerChain, test: &[Rating]) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut covered = 0usize;
    let pairs: Vec<(f64, f64)> = test
        .iter()
        .map(|r| {
            let (s, src) = chain.score_detail(&ScoreRequest::prediction(r.user), r.item);
            if src == Some(0) {
                covered += 1;
            }
            (s, r.value)
        })
        .collect();
    let (rmse, mae) = error_metrics(pairs)?;
    Ok(EvalReport {
        rmse,
        mae,
        coverage: covered as f64 / test.len() as f64,
        n_test: test.len(),
    })
}

//! The `cfkit` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baseline::{BiasModel, CoOccurrence, DEFAULT_DAMPING};
use crate::error::Error;
use crate::harness::{csvio, eval, models::ModelFile, synth};
use crate::knn::{ItemKnnModel, DEFAULT_POOL};
use crate::matrix::{IdMap, ItemId, RatingsMatrix, UserId};
use crate::mf::{train_sgd, TrainConfig};
use crate::scoring::{ItemKnnScorer, ItemSimilarity, Lift, ScoreRequest, ScorerChain};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cfkit", version, about = "Collaborative-filtering toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model on a ratings CSV and write it to a model file
    Fit(FitArgs),
    /// Predict one user-item score from a saved model
    Predict(PredictArgs),
    /// Top-N recommendations for a user
    Recommend(RecommendArgs),
    /// Items related to a query item
    Related(RelatedArgs),
    /// Hold-out evaluation of an algorithm
    Eval(EvalArgs),
    /// Generate synthetic ratings
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Bias,
    Itemknn,
    Mf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RelatedMethod {
    Lift,
    Cosine,
}

#[derive(Debug, Args)]
pub struct AlgoArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    #[arg(long)]
    pub alpha_item: Option<f64>,
    #[arg(long)]
    pub alpha_user: Option<f64>,
    #[arg(long)]
    pub pool: Option<usize>,
    #[arg(long)]
    pub min_weight: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub reg: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub algo: AlgoArgs,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub fallback: Option<PathBuf>,
    /// Ratings the model is applied to; required for item-kNN models.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub user: String,
    #[arg(long)]
    pub item: String,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub user: String,
    #[arg(short = 'n')]
    pub n: usize,
    #[arg(long)]
    pub include_rated: bool,
}

#[derive(Debug, Args)]
pub struct RelatedArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub item: String,
    #[arg(short = 'n')]
    pub n: usize,
    #[arg(long, value_enum)]
    pub method: RelatedMethod,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub algo: AlgoArgs,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub test_fraction: f64,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub users: usize,
    #[arg(long)]
    pub items: usize,
    #[arg(long)]
    pub density: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub rank: usize,
    #[arg(long, default_value_t = 0.5)]
    pub latent_scale: f64,
    #[arg(long, default_value_t = 3.5)]
    pub mean: f64,
    #[arg(long, default_value_t = 0.5)]
    pub user_bias_sd: f64,
    #[arg(long, default_value_t = 0.5)]
    pub item_bias_sd: f64,
    /// Round ratings to whole stars in [1, 5].
    #[arg(long)]
    pub clamp: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(msg) => CliError::Usage(msg),
            other => CliError::Data(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// A fitted model ready to be placed in a chain.
enum Fitted {
    Bias(BiasModel),
    ItemKnn(ItemKnnModel),
    Factors(crate::mf::FactorModel),
}

impl AlgoArgs {
    fn reject(&self, flags: &[(&str, bool)]) -> CliResult<()> {
        for (name, present) in flags {
            if *present {
                return Err(CliError::Usage(
                    format!("--{name} does not apply to --algo {:?}", self.algo).to_lowercase(),
                ));
            }
        }
        Ok(())
    }

    fn fit(&self, m: &RatingsMatrix, seed: Option<u64>) -> CliResult<Fitted> {
        let bias_flags = [
            ("alpha-item", self.alpha_item.is_some()),
            ("alpha-user", self.alpha_user.is_some()),
        ];
        let knn_flags = [("pool", self.pool.is_some()), ("min-weight", self.min_weight.is_some())];
        let mf_flags = [
            ("k", self.k.is_some()),
            ("epochs", self.epochs.is_some()),
            ("lr", self.lr.is_some()),
            ("reg", self.reg.is_some()),
        ];
        match self.algo {
            Algo::Bias => {
                self.reject(&knn_flags)?;
                self.reject(&mf_flags)?;
                let model = BiasModel::fit(
                    m,
                    self.alpha_item.unwrap_or(DEFAULT_DAMPING),
                    self.alpha_user.unwrap_or(DEFAULT_DAMPING),
                )?;
                Ok(Fitted::Bias(model))
            }
            Algo::Itemknn => {
                self.reject(&bias_flags)?;
                self.reject(&mf_flags)?;
                let model = ItemKnnModel::build(m, self.pool.unwrap_or(DEFAULT_POOL), self.min_weight.unwrap_or(0.0))?;
                Ok(Fitted::ItemKnn(model))
            }
            Algo::Mf => {
                self.reject(&bias_flags)?;
                self.reject(&knn_flags)?;
                let d = TrainConfig::default();
                let cfg = TrainConfig {
                    k: self.k.unwrap_or(d.k),
                    epochs: self.epochs.unwrap_or(d.epochs),
                    learning_rate: self.lr.unwrap_or(d.learning_rate),
                    reg: self.reg.unwrap_or(d.reg),
                    seed: seed.unwrap_or(d.seed),
                    ..d
                };
                Ok(Fitted::Factors(train_sgd(m, &cfg)?))
            }
        }
    }
}

fn load_matrix(path: &PathBuf) -> CliResult<RatingsMatrix> {
    let triples = csvio::read_ratings_csv(path)?;
    Ok(RatingsMatrix::from_triples(triples)?)
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Data(e.to_string())
}

/// Dense id for `token`, or one past the end so every scorer treats it as unknown.
fn id_or_unknown(map: &IdMap, token: &str) -> u32 {
    map.get(token).unwrap_or(map.len() as u32)
}

fn run_fit(args: &FitArgs) -> CliResult<()> {
    let m = load_matrix(&args.input)?;
    if args.seed.is_some() && args.algo.algo != Algo::Mf {
        return Err(CliError::Usage("--seed only applies to --algo mf".into()));
    }
    let model = match args.algo.fit(&m, args.seed)? {
        Fitted::Bias(b) => ModelFile::Bias(b),
        Fitted::ItemKnn(k) => ModelFile::ItemKnn(k),
        Fitted::Factors(f) => ModelFile::Factors(f),
    };
    model.save(&args.output)?;
    Ok(())
}

fn run_predict(args: &PredictArgs, out: &mut dyn Write) -> CliResult<()> {
    let model = ModelFile::load(&args.model)?;
    let fallback = match &args.fallback {
        None => None,
        Some(path) => match ModelFile::load(path)? {
            ModelFile::Bias(b) => Some(b),
            other => {
                return Err(CliError::Usage(format!(
                    "--fallback must be a bias model, got a {} model",
                    other.kind()
                )))
            }
        },
    };
    let input = args.input.as_ref().map(load_matrix).transpose()?.map(Arc::new);

    // the id space every scorer is aligned to
    let (users, items): (Arc<IdMap>, Arc<IdMap>) = match (&input, &model) {
        (Some(m), _) => (m.users().clone(), m.items().clone()),
        (None, ModelFile::Bias(b)) => (b.users().clone(), b.items().clone()),
        (None, ModelFile::Factors(f)) => (f.users().clone(), f.items().clone()),
        (None, ModelFile::ItemKnn(_)) => {
            return Err(CliError::Usage(
                "an item-kNN model needs the user's ratings via --input".into(),
            ))
        }
    };

    let terminal = input
        .as_ref()
        .and_then(|m| crate::matrix::Stats::compute(m).global_mean)
        .or(match &model {
            ModelFile::Bias(b) => Some(b.global),
            ModelFile::Factors(f) => f.bias().map(|b| b.global),
            ModelFile::ItemKnn(_) => None,
        })
        .or(fallback.as_ref().map(|b| b.global))
        .unwrap_or(0.0);

    let mut chain = ScorerChain::new(items.clone(), terminal);
    match model {
        ModelFile::Bias(b) => chain.push(Box::new(b.align(&users, &items))),
        ModelFile::Factors(f) => chain.push(Box::new(f.align(&users, &items))),
        ModelFile::ItemKnn(k) => chain.push(Box::new(ItemKnnScorer {
            model: k.align(&items),
            ratings: input.clone().expect("checked above"),
        })),
    }
    if let Some(b) = fallback {
        chain.push(Box::new(b.align(&users, &items)));
    }

    let u = UserId(id_or_unknown(&users, &args.user));
    let i = ItemId(id_or_unknown(&items, &args.item));
    let score = chain.score(&ScoreRequest::prediction(u), i);
    writeln!(out, "{score}").map_err(io_err)?;
    Ok(())
}

fn write_ranking(out: &mut dyn Write, chain: &ScorerChain, list: &crate::scoring::RankedList) -> CliResult<()> {
    for &(item, score) in &list.entries {
        writeln!(out, "{}\t{}", chain.token(item).unwrap_or("?"), score).map_err(io_err)?;
    }
    Ok(())
}

fn run_recommend(args: &RecommendArgs, out: &mut dyn Write) -> CliResult<()> {
    let m = Arc::new(load_matrix(&args.input)?);
    let model = ModelFile::load(&args.model)?;
    let (users, items) = (m.users().clone(), m.items().clone());
    let mut chain = ScorerChain::for_matrix(m.clone());
    let needs_bias = !matches!(model, ModelFile::Bias(_));
    match model {
        ModelFile::Bias(b) => chain.push(Box::new(b.align(&users, &items))),
        ModelFile::Factors(f) => chain.push(Box::new(f.align(&users, &items))),
        ModelFile::ItemKnn(k) => chain.push(Box::new(ItemKnnScorer {
            model: k.align(&items),
            ratings: m.clone(),
        })),
    }
    if needs_bias && m.n_ratings() > 0 {
        chain.push(Box::new(BiasModel::fit(&m, DEFAULT_DAMPING, DEFAULT_DAMPING)?));
    }
    let u = UserId(id_or_unknown(&users, &args.user));
    let mut req = ScoreRequest::for_user(u);
    req.exclude_rated = !args.include_rated;
    let list = chain.rank_top_n(&req, args.n)?;
    write_ranking(out, &chain, &list)
}

fn run_related(args: &RelatedArgs, out: &mut dyn Write) -> CliResult<()> {
    let m = Arc::new(load_matrix(&args.input)?);
    let Some(h) = m.item_id(&args.item) else {
        return Err(CliError::Data(Error::UnknownItemToken(args.item.clone()).to_string()));
    };
    let chain = match args.method {
        RelatedMethod::Lift => ScorerChain::for_matrix(m.clone()).with_scorer(Lift(Arc::new(CoOccurrence::build(&m)?))),
        RelatedMethod::Cosine => ScorerChain::for_matrix(m.clone()).with_scorer(ItemSimilarity::new(&m)),
    };
    let list = chain.rank_top_n(&ScoreRequest::for_query(h), args.n)?;
    write_ranking(out, &chain, &list)
}

fn run_eval(args: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let m = load_matrix(&args.input)?;
    let (train, test) = eval::split(&m, args.test_fraction, args.seed)?;
    let train = Arc::new(train);
    let fitted = args.algo.fit(&train, Some(args.seed))?;
    let mut chain = ScorerChain::for_matrix(train.clone());
    let needs_bias = !matches!(fitted, Fitted::Bias(_));
    match fitted {
        Fitted::Bias(b) => chain.push(Box::new(b)),
        Fitted::Factors(f) => chain.push(Box::new(f)),
        Fitted::ItemKnn(k) => chain.push(Box::new(ItemKnnScorer {
            model: k,
            ratings: train.clone(),
        })),
    }
    if needs_bias {
        chain.push(Box::new(BiasModel::fit(&train, DEFAULT_DAMPING, DEFAULT_DAMPING)?));
    }
    let report = eval::evaluate(&chain, &test)?;
    writeln!(out, "{report}").map_err(io_err)?;
    Ok(())
}

fn run_synth(args: &SynthArgs) -> CliResult<()> {
    let spec = synth::SyntheticSpec {
        n_users: args.users,
        n_items: args.items,
        density: args.density,
        global_mean: args.mean,
        user_bias_sd: args.user_bias_sd,
        item_bias_sd: args.item_bias_sd,
        latent_rank: args.rank,
        latent_scale: args.latent_scale,
        noise_sd: args.sigma,
        seed: args.seed,
        clamp: args.clamp,
    };
    let (m, truth) = synth::generate(&spec)?;
    let create = |path: &PathBuf| {
        std::fs::File::create(path)
            .map(std::io::BufWriter::new)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    };
    csvio::write_ratings_csv(create(&args.output)?, m.triples())?;
    if let Some(path) = &args.truth {
        truth.write_csv(create(path)?)?;
    }
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Predict(a) => run_predict(a, out),
        Command::Recommend(a) => run_recommend(a, out),
        Command::Related(a) => run_related(a, out),
        Command::Eval(a) => run_eval(a, out),
        Command::Synth(a) => run_synth(a),
    }
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit code. Diagnostics go to `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = write!(err, "{}", e.render());
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    match run(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DATA
        }
    }
}

//! Command-line interface.
//!
//! Every command writes into `--out` and finishes with a `manifest.json` echoing the
//! resolved invocation, so `cocoonlab replay <manifest>` can re-run it. Exit codes:
//! 0 success, 2 bad configuration, 3 bad input data, 4 numerical failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{CohortLabel, CorpusError, CorpusTally, FollowerSets, LogFit};
use crate::econ::{self, EconError, EconRow, NameTable, Term, CONSTANT, SD_CONVENTION, SPECIFICATIONS};
use crate::extract::MentionPolicy;
use crate::logit::{LogitError, LogitFit};
use crate::metrics::{cocoon_ratio, InteractionMatrix, MetricsError, MonthlyTally, YearMonth, SOURCES, TARGETS};
use crate::pipeline::{self, Analysis, CorpusInputs, PipelineError};
use crate::report::{regression_table, Cell, Format, Outputs, Table};
use crate::synth::{self, EconTruth, SynthError, SyntheticSpec, TweetsPerUser};
use crate::sznajd::{self, derive_seed, RealizationParams, SweepConfig, SznajdError, RNG_ALGORITHM};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl ToString) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.to_string(),
        }
    }

    fn input(message: impl ToString) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }

    fn output(dir: &Path, e: std::io::Error) -> Self {
        Self::config(format!("cannot write to {}: {e}", dir.display()))
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        Self::input(e)
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::InvalidRange { .. } | MetricsError::NotASource(_) => Self::config(e),
            _ => Self::input(e),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Corpus(e) => e.into(),
            PipelineError::Metrics(e) => e.into(),
        }
    }
}

impl From<SznajdError> for CliError {
    fn from(e: SznajdError) -> Self {
        Self::config(e)
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        Self::config(e)
    }
}

fn logit_code(e: &LogitError) -> i32 {
    match e {
        LogitError::Empty | LogitError::SingleClass(_) | LogitError::Shape { .. } => EXIT_INPUT,
        LogitError::RankDeficient { .. } | LogitError::Separation { .. } | LogitError::Singular(_) => EXIT_NUMERICAL,
    }
}

fn econ_code(e: &EconError) -> i32 {
    match e {
        EconError::BadProbability(_) | EconError::ZeroTweets => EXIT_CONFIG,
        EconError::Empty | EconError::NoGender | EconError::File { .. } => EXIT_INPUT,
        EconError::Fit(e) => logit_code(e),
    }
}

impl From<EconError> for CliError {
    fn from(e: EconError) -> Self {
        Self {
            code: econ_code(&e),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyArg {
    Include,
    Exclude,
}

impl From<PolicyArg> for MentionPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Include => MentionPolicy::Include,
            PolicyArg::Exclude => MentionPolicy::Exclude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EconModel {
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(name = "cocoonlab", version, about = "Cocoon metrics for tweet corpora and Sznajd chain simulations")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Common {
    /// Master seed for every random stream.
    #[arg(long, env = "COCOONLAB_SEED", default_value_t = 0, global = true)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out", global = true)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv, global = true)]
    pub format: FormatArg,
    /// Worker threads (defaults to all cores). Never changes results.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Abort on the first malformed corpus line instead of skipping it.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Whether @handles inside a retweet's quoted text count as mentions.
    #[arg(long, value_enum, default_value_t = PolicyArg::Include, global = true)]
    pub mentions_in_retweets: PolicyArg,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Write a synthetic corpus, follower sets, name table and ground truth.
    Gen(GenArgs),
    /// Interaction matrices, cocoon ratios, monthly series and corpus statistics.
    Analyze(AnalyzeArgs),
    /// Openness dataset and the three logistic regressions.
    Regress(RegressArgs),
    /// One spin-chain realization with its climate trajectory.
    Simulate(SimulateArgs),
    /// Steady-state frequencies over a grid of initial Closed fractions.
    Sweep(SweepArgs),
    /// Tweets-per-user percentiles, daily volume fit, or dataset summary statistics.
    Stats(StatsArgs),
    /// Re-run the invocation recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Analyze(_) => "analyze",
            Command::Regress(_) => "regress",
            Command::Simulate(_) => "simulate",
            Command::Sweep(_) => "sweep",
            Command::Stats(_) => "stats",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenArgs {
    /// JSON synthetic spec; flags below override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub clinton: Option<u64>,
    #[arg(long)]
    pub trump: Option<u64>,
    #[arg(long)]
    pub other: Option<u64>,
    #[arg(long)]
    pub dual: Option<u64>,
    /// Fixed number of tweets per user.
    #[arg(long)]
    pub tweets_per_user: Option<u64>,
    #[arg(long)]
    pub retweet_rate: Option<f64>,
    #[arg(long)]
    pub within: Option<f64>,
    #[arg(long)]
    pub cross: Option<f64>,
    #[arg(long)]
    pub mention_rate: Option<f64>,
    #[arg(long)]
    pub recursive_rate: Option<f64>,
    /// Also write an econ dataset with this many rows.
    #[arg(long)]
    pub econ_rows: Option<usize>,
    #[arg(long, value_enum, default_value_t = EconModel::Linear)]
    pub econ_model: EconModel,
    /// Share of econ rows with unknown gender.
    #[arg(long, default_value_t = 0.0)]
    pub unknown_gender: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CorpusArgs {
    /// JSONL corpus file; repeat for several files.
    #[arg(long, required = true)]
    pub corpus: Vec<PathBuf>,
    #[arg(long)]
    pub trump_ids: PathBuf,
    #[arg(long)]
    pub clinton_ids: PathBuf,
    /// Supplementary `screen_name,user_id` CSV for handles that never author a tweet.
    #[arg(long)]
    pub directory: Option<PathBuf>,
}

impl CorpusArgs {
    fn inputs(&self, strict: bool) -> CorpusInputs {
        CorpusInputs {
            corpora: self.corpus.clone(),
            trump_ids: self.trump_ids.clone(),
            clinton_ids: self.clinton_ids.clone(),
            directory: self.directory.clone(),
            strict,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// First month of the series (YYYY-MM); defaults to the first month with signals.
    #[arg(long)]
    pub start: Option<YearMonth>,
    #[arg(long)]
    pub end: Option<YearMonth>,
    /// Write every extracted signal to signals.csv.
    #[arg(long)]
    pub dump_signals: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RegressArgs {
    /// Dataset CSV (`user_id,open,female,hillary,social_capital`) instead of a corpus.
    #[arg(long, conflicts_with_all = ["corpus", "trump_ids", "clinton_ids"])]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Vec<PathBuf>,
    #[arg(long, requires = "corpus")]
    pub trump_ids: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    pub clinton_ids: Option<PathBuf>,
    #[arg(long)]
    pub directory: Option<PathBuf>,
    /// `name,gender` CSV with F/M genders.
    #[arg(long)]
    pub names: Option<PathBuf>,
    /// Keep users with any number of tweets, not only those with exactly 100.
    #[arg(long)]
    pub all_users: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 0.53)]
    pub p_open: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iters: u64,
    #[arg(long, default_value_t = 1000)]
    pub record_every: u64,
    /// Absorption check interval in updates (default: n).
    #[arg(long)]
    pub check_every: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Comma-separated Closed fractions; overrides --step.
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    /// Grid step from 0 to 1; 1/step must be an integer.
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[arg(long, default_value_t = 500)]
    pub realizations: usize,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iters: u64,
    #[arg(long)]
    pub check_every: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: Vec<PathBuf>,
    /// With both follower files, percentiles are also reported per cohort.
    #[arg(long, requires = "clinton_ids")]
    pub trump_ids: Option<PathBuf>,
    #[arg(long, requires = "trump_ids")]
    pub clinton_ids: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write into this directory instead of the recorded output directory.
    #[arg(long)]
    pub into: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub rng_algorithm: String,
    pub invocation: Cli,
    pub outputs: Vec<String>,
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.common.threads {
        if threads == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        // A pool may already exist when called in-process more than once; the first wins.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    if let Command::Replay(args) = &cli.command {
        let text = std::fs::read_to_string(&args.manifest)
            .map_err(|e| CliError::input(format!("{}: {e}", args.manifest.display())))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", args.manifest.display())))?;
        let mut invocation = manifest.invocation;
        invocation.common.threads = cli.common.threads;
        if let Some(dir) = &args.into {
            invocation.common.out = dir.clone();
        }
        if matches!(invocation.command, Command::Replay(_)) {
            return Err(CliError::config("a manifest cannot replay another replay"));
        }
        return execute(invocation);
    }
    let mut out = Outputs::new(&cli.common.out).map_err(|e| CliError::output(&cli.common.out, e))?;
    let common = &cli.common;
    match &cli.command {
        Command::Gen(a) => cmd_gen(common, a, &mut out)?,
        Command::Analyze(a) => cmd_analyze(common, a, &mut out)?,
        Command::Regress(a) => cmd_regress(common, a, &mut out)?,
        Command::Simulate(a) => cmd_simulate(common, a, &mut out)?,
        Command::Sweep(a) => cmd_sweep(common, a, &mut out)?,
        Command::Stats(a) => cmd_stats(common, a, &mut out)?,
        Command::Replay(_) => unreachable!("handled above"),
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: cli.command.name().to_string(),
        seed: common.seed,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        outputs: out.files.clone(),
        invocation: cli.clone(),
    };
    out.json("manifest.json", &manifest)
        .map_err(|e| CliError::output(&out.dir, e))?;
    Ok(())
}

fn io(out: &Outputs) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::output(&out.dir, e)
}

fn resolve_spec(a: &GenArgs) -> Result<SyntheticSpec, CliError> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        }
        None => SyntheticSpec::default(),
    };
    let users = &mut spec.users;
    for (slot, value) in [
        (&mut users.clinton, a.clinton),
        (&mut users.trump, a.trump),
        (&mut users.other, a.other),
        (&mut users.dual, a.dual),
    ] {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(n) = a.tweets_per_user {
        spec.tweets_per_user = TweetsPerUser::Fixed(n);
    }
    for (slot, value) in [
        (&mut spec.retweet_rate, a.retweet_rate),
        (&mut spec.within, a.within),
        (&mut spec.cross, a.cross),
        (&mut spec.mention_rate, a.mention_rate),
        (&mut spec.recursive_rate, a.recursive_rate),
    ] {
        if let Some(v) = value {
            *slot = v;
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_gen(common: &Common, a: &GenArgs, out: &mut Outputs) -> Result<(), CliError> {
    let spec = resolve_spec(a)?;
    let (_, truth) = synth::generate_corpus(&spec, common.seed, &out.dir)?;
    for name in [
        "corpus.jsonl",
        "trump_ids.txt",
        "clinton_ids.txt",
        "names.csv",
        "directory.csv",
        "ground_truth.json",
    ] {
        out.record(name);
    }
    out.json("spec.json", &spec).map_err(io(out))?;
    if let Some(rows) = a.econ_rows {
        let mut model = match a.econ_model {
            EconModel::Linear => EconTruth::linear(),
            EconModel::Quadratic => EconTruth::quadratic(),
        };
        model.unknown_gender = a.unknown_gender;
        let data = synth::generate_econ(&model, rows, common.seed)?;
        econ::write_dataset(out.path("econ.csv"), &data)?;
        out.record("econ.csv");
        out.json("econ_truth.json", &model).map_err(io(out))?;
    }
    eprintln!(
        "wrote {} tweets from {} users to {}",
        truth.tweets,
        truth.users,
        out.dir.display()
    );
    Ok(())
}

fn ratio_cell(m: &InteractionMatrix, cohort: CohortLabel) -> Cell {
    match cocoon_ratio(m, cohort) {
        Ok(r) => Cell::Fixed(r, 2),
        Err(_) => Cell::Empty,
    }
}

pub fn matrix_table(m: &InteractionMatrix) -> Table {
    let mut t = Table::new(&["source", "clinton", "trump", "other", "cocoon_ratio"]);
    for source in SOURCES {
        let mut row = vec![Cell::Text(source.name().into())];
        row.extend(TARGETS.iter().map(|&target| Cell::Uint(m.get(source, target))));
        row.push(ratio_cell(m, source));
        t.push(row);
    }
    t
}

fn series_table(tally: &MonthlyTally, cohort: CohortLabel, range: (YearMonth, YearMonth)) -> Result<Table, CliError> {
    let series = tally.series(cohort, range.0, range.1)?;
    let mut t = Table::new(&["year", "month", "own", "opposite", "ratio"]);
    for p in series.0 {
        t.push(vec![
            Cell::Int(i64::from(p.year)),
            Cell::Uint(u64::from(p.month)),
            Cell::Uint(p.own),
            Cell::Uint(p.opposite),
            p.ratio.map_or(Cell::Empty, |r| Cell::Fixed(r, 4)),
        ]);
    }
    Ok(t)
}

/// Percentiles for everyone and, when follower sets are known, each cohort. Cohorts with
/// no authors are skipped.
fn percentile_table(tally: &CorpusTally, sets: Option<&FollowerSets>) -> Result<(Table, BTreeMap<String, BTreeMap<u32, u64>>), CliError> {
    let mut groups = vec![("all".to_string(), tally.percentiles()?)];
    if let Some(sets) = sets {
        for cohort in [
            CohortLabel::ClintonOnly,
            CohortLabel::TrumpOnly,
            CohortLabel::Other,
            CohortLabel::DualFollower,
        ] {
            match tally.percentiles_where(|u| sets.cohort(u) == cohort) {
                Ok(p) => groups.push((cohort.name().to_string(), p)),
                Err(CorpusError::Empty) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    let mut t = Table::new(&["cohort", "percentile", "count"]);
    for (name, map) in &groups {
        for (p, c) in map {
            t.push(vec![Cell::Text(name.clone()), Cell::Uint(u64::from(*p)), Cell::Uint(*c)]);
        }
    }
    Ok((t, groups.into_iter().collect()))
}

fn daily_outputs(tally: &CorpusTally, format: Format, out: &mut Outputs) -> Result<Option<LogFit>, CliError> {
    let mut t = Table::new(&["date", "count"]);
    for (day, n) in &tally.per_day {
        t.push(vec![Cell::Text(day.format("%Y-%m-%d").to_string()), Cell::Uint(*n)]);
    }
    out.table(&t, "daily_volume", format).map_err(io(out))?;
    let fit = match tally.daily_logfit() {
        Ok(fit) => Some(fit),
        Err(CorpusError::TooFewDays(n)) => {
            eprintln!("warning: daily log-linear fit skipped ({n} day(s) with tweets)");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let first_day = tally.per_day.keys().next().map(|d| d.to_string());
    out.json(
        "daily_logfit.json",
        &json!({ "first_day": first_day, "day_index": "whole UTC days since first_day", "fit": fit }),
    )
    .map_err(io(out))?;
    Ok(fit)
}

fn cmd_analyze(common: &Common, a: &AnalyzeArgs, out: &mut Outputs) -> Result<(), CliError> {
    let format = Format::from(common.format);
    let policy = MentionPolicy::from(common.mentions_in_retweets);
    let analysis = pipeline::analyze(&a.corpus.inputs(common.strict), policy, a.dump_signals)?;
    let Analysis {
        sets,
        corpus,
        signals,
        pass,
        directory,
        ..
    } = &analysis;

    let mut ratios = serde_json::Map::new();
    for (tally, stem) in [(&signals.retweets, "retweet"), (&signals.mentions, "mention")] {
        let total = tally.total();
        out.table(&matrix_table(&total), &format!("{stem}_matrix"), format)
            .map_err(io(out))?;
        let per_cohort: serde_json::Map<String, serde_json::Value> = SOURCES
            .iter()
            .map(|&c| (c.name().to_string(), json!(cocoon_ratio(&total, c).ok())))
            .collect();
        ratios.insert(stem.to_string(), serde_json::Value::Object(per_cohort));
    }

    let span = [&signals.retweets, &signals.mentions]
        .iter()
        .filter_map(|t| t.span())
        .reduce(|x, y| (x.0.min(y.0), x.1.max(y.1)));
    let range = match (a.start, a.end, span) {
        (Some(s), Some(e), _) => Some((s, e)),
        (s, e, Some((lo, hi))) => Some((s.unwrap_or(lo), e.unwrap_or(hi))),
        (_, _, None) => None,
    };
    if let Some(range) = range {
        for tally in [&signals.retweets, &signals.mentions] {
            for cohort in SOURCES {
                let t = series_table(tally, cohort, range)?;
                out.table(&t, &format!("series_{}_{}", tally.kind.name(), cohort.name()), format)
                    .map_err(io(out))?;
            }
        }
    }

    let (pt, percentiles) = percentile_table(corpus, Some(sets))?;
    out.table(&pt, "tweets_per_user", format).map_err(io(out))?;
    let fit = daily_outputs(corpus, format, out)?;

    if let Some(rows) = &signals.dump {
        let mut t = Table::new(&["kind", "source", "target", "timestamp"]);
        for r in rows {
            t.push(vec![
                Cell::Text(r.kind.name().into()),
                Cell::Text(r.source.clone()),
                Cell::Text(r.target.clone()),
                Cell::Text(r.timestamp.clone()),
            ]);
        }
        out.table(&t, "signals", format).map_err(io(out))?;
    }

    let summary = json!({
        "tweets": corpus.tweets(),
        "lines": pass.lines,
        "malformed_lines": pass.malformed,
        "authors": corpus.per_user.len(),
        "directory_handles": directory.len(),
        "mentions_in_retweets": policy,
        "retweet_matrix": signals.retweets.total().counts,
        "mention_matrix": signals.mentions.total().counts,
        "matrix_layout": "rows clinton,trump; columns clinton,trump,other",
        "cocoon_ratio": ratios,
        "series_range": range.map(|(s, e)| [s.to_string(), e.to_string()]),
        "tweets_per_user_percentiles": percentiles,
        "daily_log_fit": fit,
    });
    out.json("summary.json", &summary).map_err(io(out))?;
    eprintln!(
        "analyzed {} tweets ({} malformed lines skipped) into {}",
        corpus.tweets(),
        pass.malformed,
        out.dir.display()
    );
    Ok(())
}

fn load_rows(common: &Common, a: &RegressArgs, out: &mut Outputs) -> Result<Vec<EconRow>, CliError> {
    if let Some(path) = &a.dataset {
        return Ok(econ::read_dataset(path)?);
    }
    let (Some(trump_ids), Some(clinton_ids)) = (&a.trump_ids, &a.clinton_ids) else {
        return Err(CliError::config(
            "regress needs --dataset, or --corpus with --trump-ids and --clinton-ids",
        ));
    };
    if a.corpus.is_empty() {
        return Err(CliError::config("regress needs --dataset or at least one --corpus"));
    }
    let inputs = CorpusInputs {
        corpora: a.corpus.clone(),
        trump_ids: trump_ids.clone(),
        clinton_ids: clinton_ids.clone(),
        directory: a.directory.clone(),
        strict: common.strict,
    };
    let names = match &a.names {
        Some(p) => NameTable::load_csv(p)?,
        None => NameTable::new(),
    };
    let (builder, _) = pipeline::build_dataset(&inputs)?;
    let rows = builder.build(&names, !a.all_users);
    econ::write_dataset(out.path("dataset.csv"), &rows)?;
    out.record("dataset.csv");
    Ok(rows)
}

fn summary_table(rows: &[EconRow]) -> Result<Table, CliError> {
    let mut t = Table::new(&["variable", "n", "mean", "sd", "min", "max"]);
    for s in econ::summarize(rows)? {
        t.push(vec![
            Cell::Text(s.variable),
            Cell::Uint(s.n as u64),
            Cell::Float(s.mean),
            Cell::Float(s.sd),
            Cell::Float(s.min),
            Cell::Float(s.max),
        ]);
    }
    Ok(t)
}

fn cmd_regress(common: &Common, a: &RegressArgs, out: &mut Outputs) -> Result<(), CliError> {
    let format = Format::from(common.format);
    let rows = load_rows(common, a, out)?;
    if rows.is_empty() {
        return Err(CliError::input(
            "no rows in the dataset (with the default filter only users with exactly 100 tweets are kept)",
        ));
    }
    out.table(&summary_table(&rows)?, "summary_stats", format)
        .map_err(io(out))?;

    let results: Vec<Result<LogitFit, EconError>> = SPECIFICATIONS
        .iter()
        .map(|terms| econ::fit_logit(&rows, terms))
        .collect();
    let fits_json: Vec<serde_json::Value> = SPECIFICATIONS
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(k, (terms, r))| {
            let terms: Vec<&str> = terms.iter().map(|t| t.key()).chain([CONSTANT]).collect();
            match r {
                Ok(fit) => json!({ "specification": k + 1, "terms": terms, "fit": fit }),
                Err(e) => json!({ "specification": k + 1, "terms": terms, "error": e.to_string() }),
            }
        })
        .collect();
    out.json(
        "fits.json",
        &json!({ "observations": rows.len(), "sd_convention": SD_CONVENTION, "specifications": fits_json }),
    )
    .map_err(io(out))?;

    let labels: Vec<(&str, &str)> = [Term::SocialCapital, Term::Hillary, Term::Female, Term::SocialCapitalSq]
        .iter()
        .map(|t| (t.key(), t.label()))
        .chain([(CONSTANT, "Constant")])
        .collect();
    let shown: Vec<Result<LogitFit, String>> = results
        .iter()
        .map(|r| r.as_ref().map(Clone::clone).map_err(ToString::to_string))
        .collect();
    out.text("table.txt", &regression_table(&labels, &shown))
        .map_err(io(out))?;

    for (k, r) in results.iter().enumerate() {
        if let Err(e) = r {
            eprintln!("warning: specification {} failed: {e}", k + 1);
        }
    }
    if let Some(Err(first)) = results.iter().find(|r| r.is_err()).filter(|_| results.iter().all(Result::is_err)) {
        return Err(CliError {
            code: econ_code(first),
            message: format!("all specifications failed; specification 1: {first}"),
        });
    }
    eprintln!("fitted {} rows into {}", rows.len(), out.dir.display());
    Ok(())
}

fn cmd_simulate(common: &Common, a: &SimulateArgs, out: &mut Outputs) -> Result<(), CliError> {
    let format = Format::from(common.format);
    let params = RealizationParams {
        n: a.n,
        p_open: a.p_open,
        max_iters: a.max_iters,
        record_every: a.record_every,
        check_every: a.check_every,
    };
    let seed = derive_seed(common.seed, 0, 0);
    let result = sznajd::run_realization(&params, seed)?;
    let mut t = Table::new(&["iteration", "climate"]);
    for &(it, c) in &result.climate_trace {
        t.push(vec![Cell::Uint(it), Cell::Float(c)]);
    }
    out.table(&t, "trajectory", format).map_err(io(out))?;
    out.json(
        "result.json",
        &json!({
            "params": params,
            "realization_seed": seed,
            "rng_algorithm": RNG_ALGORITHM,
            "final_kind": result.final_kind,
            "absorbed_at": result.absorbed_at,
            "iterations": result.iterations,
            "initial_climate": result.initial_climate,
            "final_climate": result.final_climate,
        }),
    )
    .map_err(io(out))?;
    eprintln!(
        "{:?} after {} iterations (absorbed: {})",
        result.final_kind,
        result.iterations,
        result.absorbed_at.is_some()
    );
    Ok(())
}

/// `0, step, 2 step, ..., 1` computed as exact ratios `k / m`.
pub fn fraction_grid(step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(CliError::config(format!("--step {step} must be in (0, 1]")));
    }
    let m = (1.0 / step).round();
    if ((1.0 / step) - m).abs() > 1e-9 {
        return Err(CliError::config(format!("1/--step must be an integer, got {}", 1.0 / step)));
    }
    let m = m as u64;
    Ok((0..=m).map(|k| k as f64 / m as f64).collect())
}

fn cmd_sweep(common: &Common, a: &SweepArgs, out: &mut Outputs) -> Result<(), CliError> {
    let format = Format::from(common.format);
    let fractions = match &a.fractions {
        Some(f) if f.is_empty() => return Err(CliError::config("--fractions is empty")),
        Some(f) => f.clone(),
        None => fraction_grid(a.step)?,
    };
    let cfg = SweepConfig {
        closed_fractions: fractions,
        realizations: a.realizations,
        n: a.n,
        max_iters: a.max_iters,
        master_seed: common.seed,
        check_every: a.check_every,
    };
    let points = sznajd::sweep(&cfg)?;
    let mut t = Table::new(&[
        "closed_fraction",
        "p_all_closed",
        "p_all_open",
        "p_mixed",
        "p_not_absorbed",
        "realizations",
    ]);
    for p in &points {
        t.push(vec![
            Cell::Float(p.closed_fraction),
            Cell::Float(p.p_all_closed()),
            Cell::Float(p.p_all_open()),
            Cell::Float(p.p_mixed()),
            Cell::Float(p.p_not_absorbed()),
            Cell::Uint(p.realizations as u64),
        ]);
    }
    out.table(&t, "sweep", format).map_err(io(out))?;
    out.json("sweep_counts.json", &json!({ "config": cfg, "rng_algorithm": RNG_ALGORITHM, "points": points }))
        .map_err(io(out))?;
    eprintln!("swept {} fractions x {} realizations", points.len(), cfg.realizations);
    Ok(())
}

fn cmd_stats(common: &Common, a: &StatsArgs, out: &mut Outputs) -> Result<(), CliError> {
    let format = Format::from(common.format);
    if a.corpus.is_empty() && a.dataset.is_none() {
        return Err(CliError::config("stats needs --corpus or --dataset"));
    }
    if !a.corpus.is_empty() {
        let (_, tally, pass) = pipeline::scan_authors(&a.corpus, common.strict)?;
        if tally.tweets() == 0 {
            return Err(CorpusError::Empty.into());
        }
        let sets = match (&a.trump_ids, &a.clinton_ids) {
            (Some(t), Some(c)) => Some(FollowerSets::load(t, c)?),
            _ => None,
        };
        let (pt, _) = percentile_table(&tally, sets.as_ref())?;
        out.table(&pt, "tweets_per_user", format).map_err(io(out))?;
        daily_outputs(&tally, format, out)?;
        eprintln!("{} tweets, {} malformed lines skipped", tally.tweets(), pass.malformed);
    }
    if let Some(path) = &a.dataset {
        let rows = econ::read_dataset(path)?;
        out.table(&summary_table(&rows)?, "summary_stats", format)
            .map_err(io(out))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::SignalKind;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn grid_is_exact() {
        let g = fraction_grid(0.05).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[3], 0.15);
        assert_eq!(g[20], 1.0);
        assert!(fraction_grid(0.3).is_err());
        assert!(fraction_grid(0.0).is_err());
    }

    #[test]
    fn invocation_round_trips_through_json() {
        let cli = Cli::try_parse_from([
            "cocoonlab", "--seed", "9", "sweep", "--fractions", "0,0.5,1", "--realizations", "3",
        ])
        .unwrap();
        let text = serde_json::to_string(&cli).unwrap();
        let back: Cli = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        assert_eq!(back.common.seed, 9);
    }

    #[test]
    fn matrix_table_leaves_undefined_ratio_empty() {
        let mut m = InteractionMatrix::new(SignalKind::Retweet);
        m.counts = [[5, 0, 1], [2, 4, 0]];
        let csv = matrix_table(&m).to_csv();
        assert_eq!(csv, "source,clinton,trump,other,cocoon_ratio\nclinton,5,0,1,\ntrump,2,4,0,2.00\n");
    }
}

//! Synthetic corpora and regression datasets with known ground truth.
//!
//! The corpus generator writes tweets for four cohorts of users and keeps exact counters
//! of every retweet and mention it plants, so the analysis pipeline can be checked
//! against them. The econ generator draws rows from a logistic model with known
//! coefficients.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_distr::Normal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CohortLabel, TweetRecord};
use crate::econ::{EconRow, Gender, NameTable, Term, CONSTANT};
use crate::metrics::{opposite, InteractionMatrix, YearMonth};
use crate::extract::SignalKind;
use crate::sznajd::derive_seed;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortCounts {
    pub clinton: u64,
    pub trump: u64,
    pub other: u64,
    pub dual: u64,
}

impl CohortCounts {
    pub fn total(&self) -> u64 {
        self.clinton + self.trump + self.other + self.dual
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TweetsPerUser {
    Fixed(u64),
    /// (tweet count, weight) pairs.
    Categorical(Vec<(u64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub users: CohortCounts,
    pub tweets_per_user: TweetsPerUser,
    /// Probability that a tweet is a retweet.
    pub retweet_rate: f64,
    /// Target-cohort probabilities for retweets; the remainder goes to Other, dual
    /// followers and handles outside the corpus.
    pub within: f64,
    pub cross: f64,
    /// Probability of each successive mention in a tweet (at most three).
    pub mention_rate: f64,
    pub mention_within: f64,
    pub mention_cross: f64,
    /// Probability that a retweet quotes another retweet (`RT @a: RT @b: ...`).
    pub recursive_rate: f64,
    /// Share of non-candidate targets that are handles absent from the corpus.
    pub external_rate: f64,
    /// Probability of writing a target handle in upper case.
    pub uppercase_rate: f64,
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Daily exponential growth rate of tweet volume.
    pub daily_growth: f64,
    /// `ln(1 + followers)` is normal with these parameters.
    pub log_followers_mean: f64,
    pub log_followers_sd: f64,
    pub female_share: f64,
    /// Share of users whose first name is not in the name table.
    pub unknown_name_share: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            users: CohortCounts {
                clinton: 100,
                trump: 100,
                other: 50,
                dual: 20,
            },
            tweets_per_user: TweetsPerUser::Fixed(100),
            retweet_rate: 0.5,
            within: 0.6,
            cross: 0.15,
            mention_rate: 0.3,
            mention_within: 0.5,
            mention_cross: 0.2,
            recursive_rate: 0.1,
            external_rate: 0.5,
            uppercase_rate: 0.1,
            start: NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2016, 11, 30).expect("valid date"),
            daily_growth: 0.005,
            log_followers_mean: 5.33,
            log_followers_sd: 1.52,
            female_share: 0.45,
            unknown_name_share: 0.5,
        }
    }
}

fn check_probability(name: &str, p: f64) -> Result<(), SynthError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SynthError::Spec(format!("{name} = {p} is outside [0, 1]")))
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, p) in [
            ("retweet_rate", self.retweet_rate),
            ("within", self.within),
            ("cross", self.cross),
            ("mention_rate", self.mention_rate),
            ("mention_within", self.mention_within),
            ("mention_cross", self.mention_cross),
            ("recursive_rate", self.recursive_rate),
            ("external_rate", self.external_rate),
            ("uppercase_rate", self.uppercase_rate),
            ("female_share", self.female_share),
            ("unknown_name_share", self.unknown_name_share),
            ("within + cross", self.within + self.cross),
            ("mention_within + mention_cross", self.mention_within + self.mention_cross),
        ] {
            check_probability(name, p)?;
        }
        if self.end < self.start {
            return Err(SynthError::Spec(format!("end {} is before start {}", self.end, self.start)));
        }
        if !self.daily_growth.is_finite() || !self.log_followers_mean.is_finite() {
            return Err(SynthError::Spec("non-finite rate".into()));
        }
        if !(self.log_followers_sd >= 0.0 && self.log_followers_sd.is_finite()) {
            return Err(SynthError::Spec("log_followers_sd must be a finite non-negative number".into()));
        }
        if let TweetsPerUser::Categorical(levels) = &self.tweets_per_user {
            if levels.is_empty() || levels.iter().any(|(_, w)| !(*w >= 0.0 && w.is_finite())) {
                return Err(SynthError::Spec("categorical weights must be finite and non-negative".into()));
            }
            if levels.iter().all(|(_, w)| *w == 0.0) {
                return Err(SynthError::Spec("categorical weights sum to zero".into()));
            }
        }
        Ok(())
    }
}

/// Exact counts the generator planted. Matrices use the analysis layout
/// (source Clinton/Trump by target Clinton/Trump/Other).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub users: u64,
    pub tweets: u64,
    pub retweet: InteractionMatrix,
    pub mention_include: InteractionMatrix,
    pub mention_exclude: InteractionMatrix,
    pub monthly_retweet: BTreeMap<String, InteractionMatrix>,
    /// Tweets written by each user ID.
    pub tweets_per_user: BTreeMap<u64, u64>,
    /// Open indicator for every Clinton-only and Trump-only user.
    pub open: BTreeMap<u64, u8>,
}

impl GroundTruth {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            users: 0,
            tweets: 0,
            retweet: InteractionMatrix::new(SignalKind::Retweet),
            mention_include: InteractionMatrix::new(SignalKind::Mention),
            mention_exclude: InteractionMatrix::new(SignalKind::Mention),
            monthly_retweet: BTreeMap::new(),
            tweets_per_user: BTreeMap::new(),
            open: BTreeMap::new(),
        }
    }
}

/// Paths written by [`generate_corpus`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusFiles {
    pub corpus: PathBuf,
    pub trump_ids: PathBuf,
    pub clinton_ids: PathBuf,
    pub names: PathBuf,
    pub directory: PathBuf,
    pub ground_truth: PathBuf,
}

impl CorpusFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            corpus: dir.join("corpus.jsonl"),
            trump_ids: dir.join("trump_ids.txt"),
            clinton_ids: dir.join("clinton_ids.txt"),
            names: dir.join("names.csv"),
            directory: dir.join("directory.csv"),
            ground_truth: dir.join("ground_truth.json"),
        }
    }
}

const FEMALE_NAMES: [&str; 12] = [
    "emily", "sarah", "jessica", "ashley", "maria", "linda", "karen", "nancy", "laura", "rachel",
    "megan", "olivia",
];
const MALE_NAMES: [&str; 12] = [
    "mike", "david", "james", "robert", "john", "kevin", "brian", "steven", "jason", "daniel",
    "mark", "paul",
];
const UNLISTED_NAMES: [&str; 8] = [
    "patriot", "blue", "the", "mr", "real", "dr", "team", "vote",
];
const SURNAMES: [&str; 8] = [
    "smith", "johnson", "lee", "garcia", "brown", "nguyen", "miller", "davis",
];
const WORDS: [&str; 24] = [
    "vote", "today", "debate", "#election2016", "rally", "tonight", "great", "news", "read",
    "this", "https://t.co/x1y2z3", "jobs", "America", "policy", "wow", "email", "ok", "café",
    "\u{1f1fa}\u{1f1f8}", "2016", "polls", "again", "&amp;", "...",
];

/// First user ID; IDs are consecutive in cohort order Clinton, Trump, Other, dual.
pub const FIRST_USER_ID: u64 = 1_000_000;

#[derive(Debug, Clone)]
struct User {
    id: u64,
    cohort: CohortLabel,
    handle: String,
    display_name: String,
    followers: u64,
}

fn handle_for(id: u64) -> String {
    format!("u_{id}")
}

struct Population {
    users: Vec<User>,
    by_cohort: [Vec<usize>; 4],
}

fn cohort_slot(c: CohortLabel) -> usize {
    match c {
        CohortLabel::ClintonOnly => 0,
        CohortLabel::TrumpOnly => 1,
        CohortLabel::Other => 2,
        CohortLabel::DualFollower => 3,
    }
}

fn build_population(spec: &SyntheticSpec, rng: &mut Xoshiro256PlusPlus) -> Result<Population, SynthError> {
    let followers = Normal::new(spec.log_followers_mean, spec.log_followers_sd)
        .map_err(|e| SynthError::Spec(e.to_string()))?;
    let plan = [
        (CohortLabel::ClintonOnly, spec.users.clinton),
        (CohortLabel::TrumpOnly, spec.users.trump),
        (CohortLabel::Other, spec.users.other),
        (CohortLabel::DualFollower, spec.users.dual),
    ];
    let mut users = Vec::with_capacity(spec.users.total() as usize);
    let mut by_cohort: [Vec<usize>; 4] = Default::default();
    let mut id = FIRST_USER_ID;
    for (cohort, count) in plan {
        for _ in 0..count {
            let first = if rng.random_bool(spec.unknown_name_share) {
                UNLISTED_NAMES[rng.random_range(0..UNLISTED_NAMES.len())]
            } else if rng.random_bool(spec.female_share) {
                FEMALE_NAMES[rng.random_range(0..FEMALE_NAMES.len())]
            } else {
                MALE_NAMES[rng.random_range(0..MALE_NAMES.len())]
            };
            let last = SURNAMES[rng.random_range(0..SURNAMES.len())];
            let log_f: f64 = followers.sample(rng).max(0.0);
            by_cohort[cohort_slot(cohort)].push(users.len());
            users.push(User {
                id,
                cohort,
                handle: handle_for(id),
                display_name: format!("{} {}", capitalize(first), capitalize(last)),
                followers: log_f.exp_m1().round() as u64,
            });
            id += 1;
        }
    }
    Ok(Population { users, by_cohort })
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// The name table matching the generated display names.
pub fn synthetic_name_table() -> NameTable {
    let mut table = NameTable::new();
    for n in FEMALE_NAMES {
        table.insert(n, Gender::Female);
    }
    for n in MALE_NAMES {
        table.insert(n, Gender::Male);
    }
    table
}

/// A chosen target: its handle and the cohort the analysis should resolve it to.
struct Target {
    handle: String,
    cohort: CohortLabel,
}

fn pick_from(pop: &Population, slot: usize, exclude: usize, rng: &mut Xoshiro256PlusPlus) -> Option<usize> {
    let pool = &pop.by_cohort[slot];
    match pool.len() {
        0 => None,
        1 if pool[0] == exclude => None,
        _ => loop {
            let k = pool[rng.random_range(0..pool.len())];
            if k != exclude {
                return Some(k);
            }
        },
    }
}

fn pick_target(
    pop: &Population,
    author: usize,
    within: f64,
    cross: f64,
    spec: &SyntheticSpec,
    rng: &mut Xoshiro256PlusPlus,
    external_counter: &mut u64,
) -> Target {
    let own = pop.users[author].cohort;
    let u: f64 = rng.random();
    let preferred = match opposite(own) {
        Some(_) if u < within => Some(own),
        Some(other) if u < within + cross => Some(other),
        _ => None,
    };
    let chosen = match preferred {
        Some(cohort) => pick_from(pop, cohort_slot(cohort), author, rng),
        None if rng.random_bool(spec.external_rate) => None,
        None => {
            let slot = if rng.random_bool(0.8) { 2 } else { 3 };
            pick_from(pop, slot, author, rng)
        }
    };
    match chosen {
        Some(k) => {
            let user = &pop.users[k];
            let handle = if rng.random_bool(spec.uppercase_rate) {
                user.handle.to_ascii_uppercase()
            } else {
                user.handle.clone()
            };
            Target {
                handle,
                cohort: user.cohort,
            }
        }
        None => {
            *external_counter += 1;
            Target {
                handle: format!("ext_{}", *external_counter),
                cohort: CohortLabel::Other,
            }
        }
    }
}

fn filler(rng: &mut Xoshiro256PlusPlus, words: usize, out: &mut String) {
    for _ in 0..words {
        if !out.is_empty() && !out.ends_with(' ') {
            out.push(' ');
        }
        out.push_str(WORDS[rng.random_range(0..WORDS.len())]);
    }
}

/// Day offset with density proportional to `exp(growth * d)` on `[0, days)`.
fn sample_day(days: i64, growth: f64, rng: &mut Xoshiro256PlusPlus) -> i64 {
    let u: f64 = rng.random();
    let d = if growth.abs() < 1e-12 {
        u * days as f64
    } else {
        (u * (growth * days as f64).exp_m1()).ln_1p() / growth
    };
    (d.floor() as i64).clamp(0, days - 1)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, SynthError> {
    Ok(BufWriter::with_capacity(1 << 20, File::create(path).map_err(io_err(path))?))
}

/// Writes a synthetic corpus and its ground truth into `dir`.
///
/// Tweets are streamed user by user, so memory stays proportional to the number of
/// users rather than tweets.
pub fn generate_corpus(spec: &SyntheticSpec, seed: u64, dir: &Path) -> Result<(CorpusFiles, GroundTruth), SynthError> {
    spec.validate()?;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = CorpusFiles::in_dir(dir);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(seed, 0, 0));
    let pop = build_population(spec, &mut rng)?;
    let mut truth = GroundTruth::new(seed);
    truth.users = pop.users.len() as u64;

    write_lines(&files.trump_ids, pop.users.iter().filter(|u| {
        matches!(u.cohort, CohortLabel::TrumpOnly | CohortLabel::DualFollower)
    }).map(|u| u.id.to_string()))?;
    write_lines(&files.clinton_ids, pop.users.iter().filter(|u| {
        matches!(u.cohort, CohortLabel::ClintonOnly | CohortLabel::DualFollower)
    }).map(|u| u.id.to_string()))?;
    write_lines(
        &files.directory,
        std::iter::once("screen_name,user_id".to_string())
            .chain(pop.users.iter().map(|u| format!("{},{}", u.handle, u.id))),
    )?;
    synthetic_name_table()
        .write_csv(&files.names)
        .map_err(|e| SynthError::Spec(e.to_string()))?;

    let counts = match &spec.tweets_per_user {
        TweetsPerUser::Fixed(n) => Counts::Fixed(*n),
        TweetsPerUser::Categorical(levels) => Counts::Weighted(
            levels.iter().map(|l| l.0).collect(),
            WeightedIndex::new(levels.iter().map(|l| l.1)).map_err(|e| SynthError::Spec(e.to_string()))?,
        ),
    };
    let days = (spec.end - spec.start).num_days() + 1;
    let origin: DateTime<Utc> = spec.start.and_hms_opt(0, 0, 0).expect("midnight").and_utc();

    let corpus_path = files.corpus.clone();
    let mut out = create(&corpus_path)?;
    let write_err = io_err(&corpus_path);
    let mut tweet_id: u64 = 0;
    let mut external = 0u64;
    let mut text = String::with_capacity(256);
    for (idx, user) in pop.users.iter().enumerate() {
        let n = match &counts {
            Counts::Fixed(n) => *n,
            Counts::Weighted(values, dist) => values[dist.sample(&mut rng)],
        };
        let source = user.cohort;
        let mut open = false;
        for _ in 0..n {
            tweet_id += 1;
            let created_at = origin
                + Duration::days(sample_day(days, spec.daily_growth, &mut rng))
                + Duration::seconds(rng.random_range(0..86_400));
            let month = YearMonth::of(&created_at).to_string();
            text.clear();
            let is_retweet = rng.random_bool(spec.retweet_rate);
            if is_retweet {
                let t = pick_target(&pop, idx, spec.within, spec.cross, spec, &mut rng, &mut external);
                text.push_str("RT @");
                text.push_str(&t.handle);
                text.push(':');
                if rng.random_bool(spec.recursive_rate) {
                    let deeper = pick_target(&pop, idx, spec.within, spec.cross, spec, &mut rng, &mut external);
                    text.push_str(" RT @");
                    text.push_str(&deeper.handle);
                    text.push(':');
                }
                truth.retweet.record(source, t.cohort);
                let monthly = truth
                    .monthly_retweet
                    .entry(month)
                    .or_insert_with(|| InteractionMatrix::new(SignalKind::Retweet));
                monthly.record(source, t.cohort);
                open |= Some(t.cohort) == opposite(source);
            }
            let words = rng.random_range(2..8);
            filler(&mut rng, words, &mut text);
            let mut mentions = 0;
            while mentions < 3 && rng.random_bool(spec.mention_rate) {
                mentions += 1;
                let t = pick_target(&pop, idx, spec.mention_within, spec.mention_cross, spec, &mut rng, &mut external);
                text.push_str(" @");
                text.push_str(&t.handle);
                filler(&mut rng, 1, &mut text);
                truth.mention_include.record(source, t.cohort);
                if !is_retweet {
                    truth.mention_exclude.record(source, t.cohort);
                }
            }
            let record = TweetRecord {
                tweet_id: tweet_id.to_string(),
                author_handle: user.handle.clone(),
                author_user_id: user.id,
                author_display_name: user.display_name.clone(),
                author_follower_count: user.followers,
                created_at,
                text: text.clone(),
            };
            serde_json::to_writer(&mut out, &record).map_err(|e| write_err(e.into()))?;
            out.write_all(b"\n").map_err(&write_err)?;
        }
        truth.tweets += n;
        if n > 0 {
            truth.tweets_per_user.insert(user.id, n);
        }
        if opposite(source).is_some() && n > 0 {
            truth.open.insert(user.id, u8::from(open));
        }
    }
    out.flush().map_err(&write_err)?;

    let gt = create(&files.ground_truth)?;
    serde_json::to_writer_pretty(gt, &truth).map_err(|e| io_err(&files.ground_truth)(e.into()))?;
    Ok((files, truth))
}

enum Counts {
    Fixed(u64),
    Weighted(Vec<u64>, WeightedIndex<f64>),
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<(), SynthError> {
    let mut out = create(path)?;
    for line in lines {
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// True coefficients for the econ generator, by term key (`constant` included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconTruth {
    pub coefficients: BTreeMap<String, f64>,
    pub social_capital_mean: f64,
    pub social_capital_sd: f64,
    pub hillary_share: f64,
    pub female_share: f64,
    /// Share of rows whose gender is unknown.
    pub unknown_gender: f64,
}

impl EconTruth {
    fn with(coefs: &[(&str, f64)]) -> Self {
        Self {
            coefficients: coefs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            social_capital_mean: 5.33,
            social_capital_sd: 1.52,
            hillary_share: 0.54,
            female_share: 0.45,
            unknown_gender: 0.0,
        }
    }

    /// Linear model with gender.
    pub fn linear() -> Self {
        Self::with(&[
            (Term::SocialCapital.key(), 0.0482),
            (Term::Hillary.key(), -0.572),
            (Term::Female.key(), -0.106),
            (CONSTANT, 0.490),
        ])
    }

    /// Model with the quadratic social-capital term.
    pub fn quadratic() -> Self {
        Self::with(&[
            (Term::SocialCapital.key(), 0.219),
            (Term::Hillary.key(), -0.573),
            (Term::Female.key(), -0.106),
            (Term::SocialCapitalSq.key(), -0.0151),
            (CONSTANT, 0.0435),
        ])
    }

    pub fn coefficient(&self, key: &str) -> f64 {
        self.coefficients.get(key).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, p) in [
            ("hillary_share", self.hillary_share),
            ("female_share", self.female_share),
            ("unknown_gender", self.unknown_gender),
        ] {
            check_probability(name, p)?;
        }
        let known = [
            Term::SocialCapital.key(),
            Term::Hillary.key(),
            Term::Female.key(),
            Term::SocialCapitalSq.key(),
            CONSTANT,
        ];
        if let Some(bad) = self.coefficients.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(SynthError::Spec(format!("unknown coefficient `{bad}`")));
        }
        if !(self.social_capital_sd > 0.0 && self.social_capital_sd.is_finite()) {
            return Err(SynthError::Spec("social_capital_sd must be positive".into()));
        }
        Ok(())
    }
}

/// Draws `n` rows: social capital normal truncated at 0, Bernoulli hillary and female,
/// and `open` from the logistic model. User IDs are `1..=n`.
pub fn generate_econ(truth: &EconTruth, n: usize, seed: u64) -> Result<Vec<EconRow>, SynthError> {
    truth.validate()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(seed, 1, 0));
    let sc = Normal::new(truth.social_capital_mean, truth.social_capital_sd)
        .map_err(|e| SynthError::Spec(e.to_string()))?;
    let b = |t: Term| truth.coefficient(t.key());
    let (b_sc, b_h, b_f, b_sq, b0) = (
        b(Term::SocialCapital),
        b(Term::Hillary),
        b(Term::Female),
        b(Term::SocialCapitalSq),
        truth.coefficient(CONSTANT),
    );
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let social_capital = loop {
            let v: f64 = sc.sample(&mut rng);
            if v >= 0.0 {
                break v;
            }
        };
        let hillary = u8::from(rng.random_bool(truth.hillary_share));
        let female = u8::from(rng.random_bool(truth.female_share));
        let eta = b0
            + b_sc * social_capital
            + b_h * f64::from(hillary)
            + b_f * f64::from(female)
            + b_sq * social_capital * social_capital;
        let p = 1.0 / (1.0 + (-eta).exp());
        let open = u8::from(rng.random::<f64>() < p);
        let known = !rng.random_bool(truth.unknown_gender);
        rows.push(EconRow {
            user_id: k as u64 + 1,
            open,
            female: known.then_some(female),
            hillary,
            social_capital,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_corpus;
    use crate::extract::{extract_signals, MentionPolicy};

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            users: CohortCounts {
                clinton: 10,
                trump: 12,
                other: 5,
                dual: 3,
            },
            tweets_per_user: TweetsPerUser::Fixed(20),
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn same_seed_same_files() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let (fa, ta) = generate_corpus(&small_spec(), 7, a.path()).unwrap();
        let (fb, tb) = generate_corpus(&small_spec(), 7, b.path()).unwrap();
        assert_eq!(ta, tb);
        for (x, y) in [(&fa.corpus, &fb.corpus), (&fa.ground_truth, &fb.ground_truth)] {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
    }

    #[test]
    fn every_tweet_parses_and_retweets_match_counts() {
        let dir = tempfile::tempdir().unwrap();
        let (files, truth) = generate_corpus(&small_spec(), 3, dir.path()).unwrap();
        let (records, malformed) = load_corpus(&files.corpus, true).unwrap();
        assert_eq!(malformed, 0);
        assert_eq!(records.len() as u64, truth.tweets);
        assert_eq!(truth.tweets, 30 * 20);
        // Candidate users are the first 22 IDs, dual followers the last 3.
        let candidate = |id: u64| id < FIRST_USER_ID + 22;
        let dual_handle = |h: &str| {
            h.strip_prefix("u_")
                .and_then(|id| id.parse::<u64>().ok())
                .is_some_and(|id| id >= FIRST_USER_ID + 27)
        };
        let counted = records
            .iter()
            .filter(|r| candidate(r.author_user_id))
            .flat_map(|r| extract_signals(r, MentionPolicy::Exclude))
            .filter(|s| s.kind == SignalKind::Retweet && !dual_handle(&s.target_handle))
            .count() as u64;
        assert_eq!(counted, truth.retweet.total());
    }

    #[test]
    fn zero_users_gives_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec {
            users: CohortCounts {
                clinton: 0,
                trump: 0,
                other: 0,
                dual: 0,
            },
            ..SyntheticSpec::default()
        };
        let (files, truth) = generate_corpus(&spec, 1, dir.path()).unwrap();
        assert_eq!(truth.tweets, 0);
        assert_eq!(std::fs::read(&files.corpus).unwrap().len(), 0);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let spec = SyntheticSpec {
            within: 0.9,
            cross: 0.2,
            ..SyntheticSpec::default()
        };
        assert!(matches!(spec.validate(), Err(SynthError::Spec(_))));
        let spec = SyntheticSpec {
            retweet_rate: -0.1,
            ..SyntheticSpec::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn growth_sampler_stays_in_range_and_tilts() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        let mut first_half = 0;
        for _ in 0..20_000 {
            let d = sample_day(100, 0.05, &mut rng);
            assert!((0..100).contains(&d));
            first_half += i32::from(d < 50);
        }
        // Mass below day 50 is (e^2.5 - 1)/(e^5 - 1) = 0.0759.
        let share = f64::from(first_half) / 20_000.0;
        assert!((share - 0.0759).abs() < 0.01, "{share}");
    }

    #[test]
    fn econ_rows_follow_marginals() {
        let truth = EconTruth {
            unknown_gender: 0.5,
            ..EconTruth::linear()
        };
        let rows = generate_econ(&truth, 20_000, 5).unwrap();
        let n = rows.len() as f64;
        let hillary = rows.iter().map(|r| f64::from(r.hillary)).sum::<f64>() / n;
        let known = rows.iter().filter(|r| r.female.is_some()).count() as f64 / n;
        let sc_mean = rows.iter().map(|r| r.social_capital).sum::<f64>() / n;
        assert!((hillary - 0.54).abs() < 0.02);
        assert!((known - 0.5).abs() < 0.02);
        assert!((sc_mean - 5.33).abs() < 0.05);
        assert!(rows.iter().all(|r| r.social_capital >= 0.0));
        assert_eq!(rows, generate_econ(&truth, 20_000, 5).unwrap());
    }

    #[test]
    fn econ_rejects_unknown_terms() {
        let mut truth = EconTruth::linear();
        truth.coefficients.insert("age".into(), 1.0);
        assert!(generate_econ(&truth, 10, 0).is_err());
    }
}

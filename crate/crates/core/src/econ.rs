//! Individual-level openness dataset and its logistic regressions.
//!
//! A user is Open when at least one of their retweets targets a follower of the opposite
//! candidate. Social capital is `ln(1 + followers)`. Gender comes from the first token
//! of the display name, looked up in a user-supplied name table.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{assign_cohort, CohortLabel, FollowerSets, TweetRecord};
use crate::extract::{scan_with, EdgeSignal, MentionPolicy, SignalKind};
use crate::logit::{self, Design, IrlsOptions, LogitError, LogitFit};
use crate::metrics::{opposite, CohortResolver};

/// Tweets collected per user in the source data; the dataset keeps only users at the cap.
pub const COLLECTED_TWEETS: u64 = 100;

#[derive(Debug, Error)]
pub enum EconError {
    #[error("probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("tweet count must be positive")]
    ZeroTweets,
    #[error("no rows to summarize")]
    Empty,
    #[error("no rows with known gender; the female term cannot be estimated")]
    NoGender,
    #[error(transparent)]
    Fit(#[from] LogitError),
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

impl EconError {
    fn file(path: &Path, message: impl ToString) -> Self {
        EconError::File {
            path: path.display().to_string(),
            message: message.to_string(),
        }
    }
}

/// Probability of at least one cross-cohort retweet among `n` independent tweets.
pub fn open_probability(p: f64, n: u32) -> Result<f64, EconError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(EconError::BadProbability(p));
    }
    if n == 0 {
        return Err(EconError::ZeroTweets);
    }
    Ok(1.0 - (1.0 - p).powi(n as i32))
}

/// 1 iff one of the user's retweets targets the opposite candidate's cohort.
pub fn open_indicator<R: CohortResolver + ?Sized>(
    user_signals: &[EdgeSignal],
    user_cohort: CohortLabel,
    resolver: &R,
) -> u8 {
    let Some(other) = opposite(user_cohort) else {
        return 0;
    };
    u8::from(
        user_signals
            .iter()
            .any(|s| s.kind == SignalKind::Retweet && resolver.cohort_of(&s.target_handle) == other),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
    Unknown,
}

/// Lowercase first name to gender.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NameTable(HashMap<String, Gender>);

impl NameTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, gender: Gender) {
        self.0.insert(name.to_lowercase(), gender);
    }

    pub fn get(&self, name: &str) -> Option<Gender> {
        self.0.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Reads a `name,gender` CSV (header row, gender `F` or `M`).
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, EconError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| EconError::file(path, e))?;
        let mut table = Self::new();
        for (k, row) in csv::Reader::from_reader(file).deserialize::<(String, String)>().enumerate() {
            let (name, g) = row.map_err(|e| EconError::file(path, e))?;
            let gender = match g.trim() {
                "F" | "f" => Gender::Female,
                "M" | "m" => Gender::Male,
                other => {
                    return Err(EconError::file(
                        path,
                        format!("row {}: gender {other:?} is not F or M", k + 2),
                    ))
                }
            };
            table.insert(name.trim(), gender);
        }
        Ok(table)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), EconError> {
        let path = path.as_ref();
        let mut names: Vec<_> = self.0.iter().collect();
        names.sort_by(|a, b| a.0.cmp(b.0));
        let mut w = csv::Writer::from_path(path).map_err(|e| EconError::file(path, e))?;
        w.write_record(["name", "gender"]).map_err(|e| EconError::file(path, e))?;
        for (name, g) in names {
            let code = if *g == Gender::Female { "F" } else { "M" };
            w.write_record([name.as_str(), code]).map_err(|e| EconError::file(path, e))?;
        }
        w.flush().map_err(|e| EconError::file(path, e))
    }
}

pub fn infer_gender(display_name: &str, table: &NameTable) -> Gender {
    display_name
        .split_whitespace()
        .next()
        .and_then(|first| table.get(&first.to_lowercase()))
        .unwrap_or(Gender::Unknown)
}

pub fn social_capital(follower_count: u64) -> f64 {
    (follower_count as f64).ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconRow {
    pub user_id: u64,
    pub open: u8,
    pub female: Option<u8>,
    pub hillary: u8,
    pub social_capital: f64,
}

impl EconRow {
    pub fn social_capital_sq(&self) -> f64 {
        self.social_capital * self.social_capital
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    SocialCapital,
    Hillary,
    Female,
    SocialCapitalSq,
}

pub const CONSTANT: &str = "constant";

impl Term {
    pub fn key(self) -> &'static str {
        match self {
            Term::SocialCapital => "social_capital",
            Term::Hillary => "hillary",
            Term::Female => "female",
            Term::SocialCapitalSq => "social_capital_sq",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Term::SocialCapital => "Social Capital",
            Term::Hillary => "Hillary Clinton",
            Term::Female => "Female",
            Term::SocialCapitalSq => "Social Capital²",
        }
    }

    fn value(self, row: &EconRow) -> Option<f64> {
        match self {
            Term::SocialCapital => Some(row.social_capital),
            Term::Hillary => Some(f64::from(row.hillary)),
            Term::Female => row.female.map(f64::from),
            Term::SocialCapitalSq => Some(row.social_capital_sq()),
        }
    }
}

/// The three nested regressions: base, plus gender, plus the quadratic term.
pub const SPECIFICATIONS: [&[Term]; 3] = [
    &[Term::SocialCapital, Term::Hillary],
    &[Term::SocialCapital, Term::Hillary, Term::Female],
    &[Term::SocialCapital, Term::Hillary, Term::Female, Term::SocialCapitalSq],
];

/// Design matrix for `terms` plus a trailing constant. Rows of unknown gender are
/// dropped exactly when the female term is requested.
pub fn design_for(rows: &[EconRow], terms: &[Term]) -> Design {
    let mut names: Vec<String> = terms.iter().map(|t| t.key().to_string()).collect();
    names.push(CONSTANT.to_string());
    let mut design = Design::new(names);
    let mut buf = Vec::with_capacity(terms.len() + 1);
    'rows: for row in rows {
        buf.clear();
        for t in terms {
            match t.value(row) {
                Some(v) => buf.push(v),
                None => continue 'rows,
            }
        }
        buf.push(1.0);
        design.push(&buf, row.open == 1);
    }
    design
}

pub fn fit_logit(rows: &[EconRow], terms: &[Term]) -> Result<LogitFit, EconError> {
    let design = design_for(rows, terms);
    if design.rows() == 0 && terms.contains(&Term::Female) && !rows.is_empty() {
        return Err(EconError::NoGender);
    }
    Ok(logit::fit(&design, &IrlsOptions::default())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub variable: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 divisor); 0 for a single observation.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

fn describe(variable: &str, values: impl Iterator<Item = f64>) -> VariableSummary {
    let v: Vec<f64> = values.collect();
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n.max(1) as f64;
    let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    VariableSummary {
        variable: variable.to_string(),
        n,
        mean,
        sd: if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 },
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

pub const SD_CONVENTION: &str = "sample standard deviation (n-1 divisor)";

/// Per-variable (n, mean, sd, min, max) in regression-table order.
pub fn summarize(rows: &[EconRow]) -> Result<Vec<VariableSummary>, EconError> {
    if rows.is_empty() {
        return Err(EconError::Empty);
    }
    let mut out = vec![describe("open", rows.iter().map(|r| f64::from(r.open)))];
    let females: Vec<f64> = rows.iter().filter_map(|r| r.female.map(f64::from)).collect();
    if !females.is_empty() {
        out.push(describe("female", females.into_iter()));
    }
    out.push(describe("hillary", rows.iter().map(|r| f64::from(r.hillary))));
    out.push(describe("social_capital", rows.iter().map(|r| r.social_capital)));
    out.push(describe("social_capital_sq", rows.iter().map(|r| r.social_capital_sq())));
    Ok(out)
}

#[derive(Debug, Clone)]
struct UserState {
    cohort: CohortLabel,
    tweets: u64,
    open: bool,
    latest: DateTime<Utc>,
    followers: u64,
    display_name: String,
}

/// Streams tweets into per-user state. Profile fields come from the user's latest tweet.
#[derive(Debug, Default, Clone)]
pub struct DatasetBuilder {
    users: HashMap<u64, UserState>,
}

impl DatasetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<R: CohortResolver + ?Sized>(&mut self, record: &TweetRecord, sets: &FollowerSets, resolver: &R) {
        let cohort = assign_cohort(record.author_user_id, sets);
        let Some(other) = opposite(cohort) else {
            return;
        };
        let mut crosses = false;
        scan_with(&record.text, MentionPolicy::Exclude, |kind, handle| {
            if kind == SignalKind::Retweet {
                crosses = resolver.cohort_of(&handle.to_ascii_lowercase()) == other;
            }
        });
        let state = self.users.entry(record.author_user_id).or_insert_with(|| UserState {
            cohort,
            tweets: 0,
            open: false,
            latest: record.created_at,
            followers: record.author_follower_count,
            display_name: record.author_display_name.clone(),
        });
        state.tweets += 1;
        state.open |= crosses;
        let candidate = (record.created_at, record.author_follower_count, record.author_display_name.as_str());
        if candidate > (state.latest, state.followers, state.display_name.as_str()) {
            state.latest = record.created_at;
            state.followers = record.author_follower_count;
            state.display_name = record.author_display_name.clone();
        }
    }

    /// Combines builders fed disjoint parts of a corpus; the result does not depend on
    /// how the corpus was split.
    pub fn merge(&mut self, other: DatasetBuilder) {
        for (id, theirs) in other.users {
            match self.users.get_mut(&id) {
                None => {
                    self.users.insert(id, theirs);
                }
                Some(mine) => {
                    mine.tweets += theirs.tweets;
                    mine.open |= theirs.open;
                    if (theirs.latest, theirs.followers, theirs.display_name.as_str())
                        > (mine.latest, mine.followers, mine.display_name.as_str())
                    {
                        mine.latest = theirs.latest;
                        mine.followers = theirs.followers;
                        mine.display_name = theirs.display_name;
                    }
                }
            }
        }
    }

    pub fn users(&self) -> usize {
        self.users.len()
    }

    /// Rows sorted by user ID. With `require_full`, only users with exactly
    /// [`COLLECTED_TWEETS`] tweets are kept.
    pub fn build(&self, names: &NameTable, require_full: bool) -> Vec<EconRow> {
        let mut rows: Vec<EconRow> = self
            .users
            .iter()
            .filter(|(_, s)| !require_full || s.tweets == COLLECTED_TWEETS)
            .map(|(&user_id, s)| EconRow {
                user_id,
                open: u8::from(s.open),
                female: match infer_gender(&s.display_name, names) {
                    Gender::Female => Some(1),
                    Gender::Male => Some(0),
                    Gender::Unknown => None,
                },
                hillary: u8::from(s.cohort == CohortLabel::ClintonOnly),
                social_capital: social_capital(s.followers),
            })
            .collect();
        rows.sort_by_key(|r| r.user_id);
        rows
    }
}

/// Writes `user_id,open,female,hillary,social_capital`; unknown gender is an empty field.
pub fn write_dataset(path: impl AsRef<Path>, rows: &[EconRow]) -> Result<(), EconError> {
    let path = path.as_ref();
    let err = |e: std::io::Error| EconError::file(path, e);
    let mut out = std::io::BufWriter::new(File::create(path).map_err(err)?);
    writeln!(out, "user_id,open,female,hillary,social_capital").map_err(err)?;
    for r in rows {
        let female = r.female.map(|f| f.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", r.user_id, r.open, female, r.hillary, r.social_capital).map_err(err)?;
    }
    out.flush().map_err(err)
}

/// Reads a dataset CSV. The `female` column may be absent, in which case every row has
/// unknown gender.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<EconRow>, EconError> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| EconError::file(path, e))?;
    let headers = reader.headers().map_err(|e| EconError::file(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = |name: &str| col(name).ok_or_else(|| EconError::file(path, format!("missing column `{name}`")));
    let (c_user, c_open, c_hill, c_sc) = (
        required("user_id")?,
        required("open")?,
        required("hillary")?,
        required("social_capital")?,
    );
    let c_female = col("female");
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| EconError::file(path, e))?;
        let line = k + 2;
        let field = |c: usize| rec.get(c).unwrap_or("").trim();
        let bad = |what: &str, v: &str| EconError::file(path, format!("line {line}: bad {what} {v:?}"));
        let binary = |c: usize, what: &str| match field(c) {
            "0" => Ok(0u8),
            "1" => Ok(1u8),
            v => Err(bad(what, v)),
        };
        let social_capital: f64 = field(c_sc).parse().map_err(|_| bad("social_capital", field(c_sc)))?;
        if !(social_capital >= 0.0 && social_capital.is_finite()) {
            return Err(bad("social_capital", field(c_sc)));
        }
        rows.push(EconRow {
            user_id: field(c_user).parse().map_err(|_| bad("user_id", field(c_user)))?,
            open: binary(c_open, "open")?,
            female: match c_female.map(field) {
                None | Some("") => None,
                Some(_) => Some(binary(c_female.unwrap_or_default(), "female")?),
            },
            hillary: binary(c_hill, "hillary")?,
            social_capital,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CohortLabel::{ClintonOnly, Other, TrumpOnly};

    fn rt(target: &str) -> EdgeSignal {
        EdgeSignal {
            kind: SignalKind::Retweet,
            source_handle: "me".into(),
            target_handle: target.into(),
            created_at: "2017-01-01T00:00:00Z".parse().unwrap(),
        }
    }

    fn resolver(h: &str) -> CohortLabel {
        match h.as_bytes()[0] {
            b'c' => ClintonOnly,
            b't' => TrumpOnly,
            _ => Other,
        }
    }

    #[test]
    fn openness_indicator() {
        assert_eq!(open_indicator(&[rt("t1")], ClintonOnly, &resolver), 1);
        assert_eq!(open_indicator(&[rt("t1"), rt("x")], TrumpOnly, &resolver), 0);
        assert_eq!(open_indicator(&[rt("c1"), rt("x"), rt("t9")], ClintonOnly, &resolver), 1);
        let mut mention = rt("t1");
        mention.kind = SignalKind::Mention;
        assert_eq!(open_indicator(&[mention], ClintonOnly, &resolver), 0);
        assert_eq!(open_indicator(&[rt("t1")], Other, &resolver), 0);
    }

    #[test]
    fn open_probability_values() {
        assert_eq!(open_probability(0.0, 100).unwrap(), 0.0);
        assert_eq!(open_probability(1.0, 100).unwrap(), 1.0);
        let p = open_probability(0.03, 100).unwrap();
        assert!((p - 0.952_447).abs() < 1e-4 && p > 0.95, "{p}");
        assert!(open_probability(1.1, 100).is_err());
        assert!(open_probability(-0.1, 100).is_err());
        assert!(open_probability(0.5, 0).is_err());
    }

    #[test]
    fn open_probability_is_monotone() {
        let mut last = 0.0;
        for k in 0..=100 {
            let v = open_probability(k as f64 / 100.0, 100).unwrap();
            assert!(v >= last);
            last = v;
        }
        let mut last = 0.0;
        for n in 1..=200 {
            let v = open_probability(0.01, n).unwrap();
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn gender_lookup() {
        let mut t = NameTable::new();
        t.insert("emily", Gender::Female);
        t.insert("mike", Gender::Male);
        assert_eq!(infer_gender("Emily Carter", &t), Gender::Female);
        assert_eq!(infer_gender("  MIKE", &t), Gender::Male);
        assert_eq!(infer_gender("Xx_gamer_xX", &t), Gender::Unknown);
        assert_eq!(infer_gender("", &t), Gender::Unknown);
    }

    #[test]
    fn social_capital_values() {
        assert_eq!(social_capital(0), 0.0);
        assert!((social_capital(205) - 5.328).abs() < 1e-3);
        // ln(1 + 5.4e7) = 17.80: the largest observed value implies ~54M followers.
        assert!((social_capital(54_000_000) - 17.80).abs() < 0.01);
    }

    #[test]
    fn female_rows_drop_only_with_female_term() {
        let rows = [
            EconRow { user_id: 1, open: 1, female: None, hillary: 1, social_capital: 2.0 },
            EconRow { user_id: 2, open: 0, female: Some(1), hillary: 0, social_capital: 3.0 },
        ];
        assert_eq!(design_for(&rows, SPECIFICATIONS[0]).rows(), 2);
        assert_eq!(design_for(&rows, SPECIFICATIONS[1]).rows(), 1);
        let d = design_for(&rows, SPECIFICATIONS[2]);
        assert_eq!(d.row(0), &[3.0, 0.0, 1.0, 9.0, 1.0]);
        assert_eq!(d.terms.last().unwrap(), CONSTANT);
    }

    #[test]
    fn no_gender_is_an_error_for_gender_specs() {
        let rows: Vec<EconRow> = (0..20)
            .map(|k| EconRow {
                user_id: k,
                open: (k % 3 == 0) as u8,
                female: None,
                hillary: (k % 2) as u8,
                social_capital: (k % 5) as f64,
            })
            .collect();
        assert!(fit_logit(&rows, SPECIFICATIONS[0]).is_ok());
        assert!(matches!(fit_logit(&rows, SPECIFICATIONS[1]), Err(EconError::NoGender)));
    }

    #[test]
    fn summaries() {
        let rows: Vec<EconRow> = (0..10)
            .map(|k| EconRow {
                user_id: k,
                open: (k % 2) as u8,
                female: None,
                hillary: 1,
                social_capital: 4.0,
            })
            .collect();
        let s = summarize(&rows).unwrap();
        let open = &s[0];
        assert_eq!(open.mean, 0.5);
        // sample sd of five 0s and five 1s: sqrt(2.5/9)
        assert!((open.sd - (2.5f64 / 9.0).sqrt()).abs() < 1e-12);
        let sc = s.iter().find(|v| v.variable == "social_capital").unwrap();
        assert_eq!((sc.sd, sc.min, sc.max, sc.mean), (0.0, 4.0, 4.0, 4.0));
        assert!(s.iter().all(|v| v.variable != "female"));
        assert!(matches!(summarize(&[]), Err(EconError::Empty)));
    }

    #[test]
    fn dataset_csv_round_trip_and_missing_gender_column() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            EconRow { user_id: 5, open: 1, female: Some(0), hillary: 1, social_capital: 0.5 },
            EconRow { user_id: 6, open: 0, female: None, hillary: 0, social_capital: 7.25 },
        ];
        let p = dir.path().join("d.csv");
        write_dataset(&p, &rows).unwrap();
        assert_eq!(read_dataset(&p).unwrap(), rows);

        let q = dir.path().join("nogender.csv");
        std::fs::write(&q, "user_id,open,hillary,social_capital\n1,1,0,2.5\n").unwrap();
        assert_eq!(read_dataset(&q).unwrap()[0].female, None);
        std::fs::write(&q, "user_id,open,hillary\n1,1,0\n").unwrap();
        assert!(read_dataset(&q).is_err());
        std::fs::write(&q, "user_id,open,hillary,social_capital\n1,2,0,2.5\n").unwrap();
        assert!(read_dataset(&q).is_err());
    }

    #[test]
    fn name_table_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("names.csv");
        std::fs::write(&p, "name,gender\nSarah,F\ndavid,M\n").unwrap();
        let t = NameTable::load_csv(&p).unwrap();
        assert_eq!(t.get("sarah"), Some(Gender::Female));
        assert_eq!(t.get("david"), Some(Gender::Male));
        std::fs::write(&p, "name,gender\nSarah,X\n").unwrap();
        assert!(NameTable::load_csv(&p).is_err());
    }

    #[test]
    fn builder_applies_full_collection_filter() {
        let sets = FollowerSets::new([2].into(), [1].into());
        let mut dir = crate::metrics::UserDirectory::new();
        dir.insert("bob", 2);
        let res = crate::metrics::DirectoryResolver { directory: &dir, sets: &sets };
        let mut b = DatasetBuilder::new();
        let mut names = NameTable::new();
        names.insert("alice", Gender::Female);
        for k in 0..COLLECTED_TWEETS {
            let text = if k == 50 { "RT @Bob: hi" } else { "plain" };
            b.add(
                &TweetRecord {
                    tweet_id: k.to_string(),
                    author_handle: "alice".into(),
                    author_user_id: 1,
                    author_display_name: "Alice A".into(),
                    author_follower_count: k,
                    created_at: DateTime::from_timestamp(1_500_000_000 + k as i64, 0).unwrap(),
                    text: text.into(),
                },
                &sets,
                &res,
            );
        }
        let rows = b.build(&names, true);
        assert_eq!(rows.len(), 1);
        assert_eq!(
            rows[0],
            EconRow {
                user_id: 1,
                open: 1,
                female: Some(1),
                hillary: 1,
                social_capital: social_capital(99)
            }
        );
        assert!(b.build(&names, true).len() == 1);
    }
}

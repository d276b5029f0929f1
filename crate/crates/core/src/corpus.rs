//! Tweet corpora, candidate follower sets and corpus-level descriptive statistics.
//!
//! A corpus is a JSON Lines file with one tweet per line. Follower sets are plain
//! text files with one decimal user ID per line.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// Maximum screen-name length accepted by Twitter.
pub const MAX_HANDLE_LEN: usize = 15;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: invalid user id {text:?}")]
    BadUserId {
        path: PathBuf,
        line: usize,
        text: String,
    },
    #[error("corpus is empty")]
    Empty,
    #[error("log-linear fit needs at least 2 days with tweets, found {0}")]
    TooFewDays(usize),
}

/// True when `handle` is a syntactically valid screen name.
pub fn is_valid_handle(handle: &str) -> bool {
    !handle.is_empty()
        && handle.len() <= MAX_HANDLE_LEN
        && handle.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// One tweet with its author's profile snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    #[serde(rename = "id", deserialize_with = "string_or_number")]
    pub tweet_id: String,
    #[serde(rename = "user_screen_name")]
    pub author_handle: String,
    #[serde(rename = "user_id")]
    pub author_user_id: u64,
    #[serde(rename = "user_name")]
    pub author_display_name: String,
    #[serde(rename = "user_followers_count")]
    pub author_follower_count: u64,
    #[serde(with = "utc_seconds")]
    pub created_at: DateTime<Utc>,
    pub text: String,
}

impl TweetRecord {
    /// Parses and validates one JSON line.
    pub fn parse_line(line: &str) -> Result<Self, String> {
        let record: TweetRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !is_valid_handle(&self.author_handle) {
            return Err(format!("invalid screen name {:?}", self.author_handle));
        }
        if self.tweet_id.is_empty() {
            return Err("empty tweet id".into());
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("tweet records always serialize")
    }
}

fn string_or_number<'de, D: Deserializer<'de>>(de: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        Str(String),
        Num(u64),
    }
    Ok(match Id::deserialize(de)? {
        Id::Str(s) => s,
        Id::Num(n) => n.to_string(),
    })
}

/// ISO-8601 UTC timestamps truncated to whole seconds, written as `YYYY-MM-DDTHH:MM:SSZ`.
pub mod utc_seconds {
    use chrono::{DateTime, SecondsFormat, SubsecRound, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = <std::borrow::Cow<'de, str>>::deserialize(de)?;
        DateTime::parse_from_rfc3339(&raw)
            .map(|t| t.with_timezone(&Utc).trunc_subsecs(0))
            .map_err(serde::de::Error::custom)
    }
}

/// Streaming reader over a JSONL corpus.
///
/// Lenient mode skips and counts malformed lines; strict mode yields one error for the
/// first malformed line and then ends.
pub struct CorpusReader {
    path: PathBuf,
    lines: std::io::Lines<BufReader<File>>,
    strict: bool,
    line_no: usize,
    malformed: usize,
    done: bool,
}

impl CorpusReader {
    pub fn open(path: impl AsRef<Path>, strict: bool) -> Result<Self, CorpusError> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(Self {
            path,
            lines: BufReader::with_capacity(1 << 20, file).lines(),
            strict,
            line_no: 0,
            malformed: 0,
            done: false,
        })
    }

    pub fn malformed(&self) -> usize {
        self.malformed
    }

    pub fn lines_read(&self) -> usize {
        self.line_no
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Reads up to `max` raw lines, tagging each with its 1-based line number.
    /// Used by sharded consumers that parse in parallel.
    pub fn next_raw_batch(&mut self, max: usize) -> Result<Vec<(usize, String)>, CorpusError> {
        let mut batch = Vec::with_capacity(max);
        while batch.len() < max {
            match self.lines.next() {
                None => break,
                Some(Ok(line)) => {
                    self.line_no += 1;
                    batch.push((self.line_no, line));
                }
                Some(Err(source)) => {
                    return Err(CorpusError::Io {
                        path: self.path.clone(),
                        source,
                    })
                }
            }
        }
        Ok(batch)
    }

    /// Records the outcome of a line parsed outside the reader.
    pub fn note_malformed(&mut self, line: usize, reason: String) -> Result<(), CorpusError> {
        self.malformed += 1;
        if self.strict {
            self.done = true;
            return Err(CorpusError::Malformed {
                path: self.path.clone(),
                line,
                reason,
            });
        }
        Ok(())
    }
}

impl Iterator for CorpusReader {
    type Item = Result<TweetRecord, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(source) => {
                    self.done = true;
                    return Some(Err(CorpusError::Io {
                        path: self.path.clone(),
                        source,
                    }));
                }
            };
            self.line_no += 1;
            match TweetRecord::parse_line(&line) {
                Ok(record) => return Some(Ok(record)),
                Err(reason) => {
                    if let Err(e) = self.note_malformed(self.line_no, reason) {
                        return Some(Err(e));
                    }
                }
            }
        }
        None
    }
}

/// Loads a whole corpus into memory, returning the records and the malformed-line count.
pub fn load_corpus(
    path: impl AsRef<Path>,
    strict: bool,
) -> Result<(Vec<TweetRecord>, usize), CorpusError> {
    let mut reader = CorpusReader::open(path, strict)?;
    let mut records = Vec::new();
    for record in reader.by_ref() {
        records.push(record?);
    }
    Ok((records, reader.malformed()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CohortLabel {
    ClintonOnly,
    TrumpOnly,
    Other,
    DualFollower,
}

impl CohortLabel {
    pub fn name(self) -> &'static str {
        match self {
            CohortLabel::ClintonOnly => "clinton",
            CohortLabel::TrumpOnly => "trump",
            CohortLabel::Other => "other",
            CohortLabel::DualFollower => "dual",
        }
    }
}

/// Exact ID sets of the two candidates' followers.
#[derive(Debug, Clone, Default)]
pub struct FollowerSets {
    pub trump_ids: HashSet<u64>,
    pub clinton_ids: HashSet<u64>,
}

impl FollowerSets {
    pub fn new(trump_ids: HashSet<u64>, clinton_ids: HashSet<u64>) -> Self {
        Self {
            trump_ids,
            clinton_ids,
        }
    }

    pub fn load(trump: impl AsRef<Path>, clinton: impl AsRef<Path>) -> Result<Self, CorpusError> {
        Ok(Self {
            trump_ids: read_id_file(trump)?,
            clinton_ids: read_id_file(clinton)?,
        })
    }

    pub fn cohort(&self, user_id: u64) -> CohortLabel {
        assign_cohort(user_id, self)
    }
}

/// Reads a newline-delimited list of decimal user IDs. Blank lines are ignored.
pub fn read_id_file(path: impl AsRef<Path>) -> Result<HashSet<u64>, CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut ids = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let id = text.parse().map_err(|_| CorpusError::BadUserId {
            path: path.to_path_buf(),
            line: idx + 1,
            text: text.to_string(),
        })?;
        ids.insert(id);
    }
    Ok(ids)
}

pub fn assign_cohort(user_id: u64, sets: &FollowerSets) -> CohortLabel {
    match (
        sets.trump_ids.contains(&user_id),
        sets.clinton_ids.contains(&user_id),
    ) {
        (true, true) => CohortLabel::DualFollower,
        (true, false) => CohortLabel::TrumpOnly,
        (false, true) => CohortLabel::ClintonOnly,
        (false, false) => CohortLabel::Other,
    }
}

/// The percentiles reported in the tweets-per-user table.
pub const PERCENTILES: [u32; 9] = [10, 20, 30, 40, 50, 60, 70, 80, 90];

/// Nearest-rank percentile: the `ceil(p/100 * n)`-th smallest value (1-based).
/// `sorted` must be ascending and nonempty.
pub fn nearest_rank(sorted: &[u64], p: u32) -> u64 {
    let n = sorted.len();
    let rank = (p as usize * n).div_ceil(100).max(1);
    sorted[rank - 1]
}

/// Percentile map over a slice of per-user counts.
pub fn percentiles_of(counts: &[u64]) -> Result<BTreeMap<u32, u64>, CorpusError> {
    if counts.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    Ok(PERCENTILES
        .iter()
        .map(|&p| (p, nearest_rank(&sorted, p)))
        .collect())
}

pub fn tweets_per_user_percentiles<'a, I>(corpus: I) -> Result<BTreeMap<u32, u64>, CorpusError>
where
    I: IntoIterator<Item = &'a TweetRecord>,
{
    let mut tally = CorpusTally::default();
    for record in corpus {
        tally.add(record);
    }
    tally.percentiles()
}

/// Result of an ordinary least-squares fit of `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_std_error: f64,
    pub days: usize,
}

/// Fits `ln(count)` against the day index over points with a positive count.
///
/// A perfectly flat series has zero total variance; it is reported with `r_squared = 1`
/// because the fitted line reproduces it exactly.
pub fn log_linear_fit(points: &[(f64, f64)]) -> Result<LogFit, CorpusError> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, c)| *c > 0.0)
        .map(|&(d, c)| (d, c.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return Err(CorpusError::TooFewDays(n));
    }
    let nf = n as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let flat = pts.iter().all(|p| p.1 == pts[0].1);
    let mean_y = if flat {
        pts[0].1
    } else {
        pts.iter().map(|p| p.1).sum::<f64>() / nf
    };
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(CorpusError::TooFewDays(1));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if !flat {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let slope_std_error = if n > 2 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LogFit {
        slope,
        intercept,
        r_squared,
        slope_std_error,
        days: n,
    })
}

pub fn daily_volume_logfit<'a, I>(corpus: I) -> Result<LogFit, CorpusError>
where
    I: IntoIterator<Item = &'a TweetRecord>,
{
    let mut tally = CorpusTally::default();
    for record in corpus {
        tally.add(record);
    }
    tally.daily_logfit()
}

/// Mergeable partial aggregate behind the corpus statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusTally {
    pub per_user: HashMap<u64, u64>,
    pub per_day: BTreeMap<NaiveDate, u64>,
}

impl CorpusTally {
    pub fn add(&mut self, record: &TweetRecord) {
        *self.per_user.entry(record.author_user_id).or_default() += 1;
        *self.per_day.entry(record.created_at.date_naive()).or_default() += 1;
    }

    pub fn merge(&mut self, other: CorpusTally) {
        for (user, n) in other.per_user {
            *self.per_user.entry(user).or_default() += n;
        }
        for (day, n) in other.per_day {
            *self.per_day.entry(day).or_default() += n;
        }
    }

    pub fn tweets(&self) -> u64 {
        self.per_day.values().sum()
    }

    pub fn percentiles(&self) -> Result<BTreeMap<u32, u64>, CorpusError> {
        let counts: Vec<u64> = self.per_user.values().copied().collect();
        percentiles_of(&counts)
    }

    /// Percentiles restricted to users for which `keep` holds.
    pub fn percentiles_where(
        &self,
        mut keep: impl FnMut(u64) -> bool,
    ) -> Result<BTreeMap<u32, u64>, CorpusError> {
        let counts: Vec<u64> = self
            .per_user
            .iter()
            .filter(|(u, _)| keep(**u))
            .map(|(_, n)| *n)
            .collect();
        percentiles_of(&counts)
    }

    /// Day index is the number of whole calendar days (UTC) since the earliest tweet's day.
    pub fn daily_logfit(&self) -> Result<LogFit, CorpusError> {
        let Some(first) = self.per_day.keys().next().copied() else {
            return Err(CorpusError::TooFewDays(0));
        };
        let points: Vec<(f64, f64)> = self
            .per_day
            .iter()
            .map(|(day, n)| ((*day - first).num_days() as f64, *n as f64))
            .collect();
        log_linear_fit(&points)
    }
}

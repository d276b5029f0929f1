//! Cohort interaction matrices, cocoon ratios and monthly ratio series.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::ops::{Add, AddAssign};
use std::path::Path;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{assign_cohort, CohortLabel, FollowerSets};
use crate::extract::{EdgeSignal, SignalKind};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cocoon ratio undefined: no {source_name} interactions with the opposite cohort ({own} own)")]
    UndefinedRatio { source_name: &'static str, own: u64 },
    #[error("{0:?} is not a source cohort")]
    NotASource(CohortLabel),
    #[error("month range start {start} is after end {end}")]
    InvalidRange { start: YearMonth, end: YearMonth },
    #[error("directory {path}: {message}")]
    Directory { path: String, message: String },
}

/// The two cohorts whose outgoing signals are counted.
pub const SOURCES: [CohortLabel; 2] = [CohortLabel::ClintonOnly, CohortLabel::TrumpOnly];
/// Target columns, in output order.
pub const TARGETS: [CohortLabel; 3] = [
    CohortLabel::ClintonOnly,
    CohortLabel::TrumpOnly,
    CohortLabel::Other,
];

fn source_index(c: CohortLabel) -> Option<usize> {
    match c {
        CohortLabel::ClintonOnly => Some(0),
        CohortLabel::TrumpOnly => Some(1),
        _ => None,
    }
}

fn target_index(c: CohortLabel) -> Option<usize> {
    match c {
        CohortLabel::ClintonOnly => Some(0),
        CohortLabel::TrumpOnly => Some(1),
        CohortLabel::Other => Some(2),
        CohortLabel::DualFollower => None,
    }
}

/// The opposing candidate cohort, for the two source cohorts.
pub fn opposite(c: CohortLabel) -> Option<CohortLabel> {
    match c {
        CohortLabel::ClintonOnly => Some(CohortLabel::TrumpOnly),
        CohortLabel::TrumpOnly => Some(CohortLabel::ClintonOnly),
        _ => None,
    }
}

/// Maps a lowercase handle to a cohort. Must be total: unknown handles are `Other`.
pub trait CohortResolver {
    fn cohort_of(&self, handle: &str) -> CohortLabel;
}

impl<F: Fn(&str) -> CohortLabel> CohortResolver for F {
    fn cohort_of(&self, handle: &str) -> CohortLabel {
        self(handle)
    }
}

/// Lowercase handle to user ID.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserDirectory {
    ids: HashMap<String, u64>,
}

impl UserDirectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// On conflicting IDs for one handle the smallest wins, so insertion order is irrelevant.
    pub fn insert(&mut self, handle: &str, user_id: u64) {
        self.ids
            .entry(handle.to_ascii_lowercase())
            .and_modify(|existing| *existing = (*existing).min(user_id))
            .or_insert(user_id);
    }

    /// Adds only handles not yet present.
    pub fn insert_missing(&mut self, handle: &str, user_id: u64) {
        self.ids.entry(handle.to_ascii_lowercase()).or_insert(user_id);
    }

    pub fn get(&self, handle: &str) -> Option<u64> {
        self.ids.get(handle).copied()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn merge(&mut self, other: UserDirectory) {
        for (handle, id) in other.ids {
            self.insert(&handle, id);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.ids.iter().map(|(h, id)| (h.as_str(), *id))
    }

    /// Reads a supplementary `screen_name,user_id` CSV with a header row.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let path = path.as_ref();
        let err = |message: String| MetricsError::Directory {
            path: path.display().to_string(),
            message,
        };
        let file = File::open(path).map_err(|e| err(e.to_string()))?;
        let mut reader = csv::Reader::from_reader(file);
        let mut dir = Self::new();
        for row in reader.deserialize::<(String, u64)>() {
            let (handle, id) = row.map_err(|e| err(e.to_string()))?;
            dir.insert(handle.trim(), id);
        }
        Ok(dir)
    }
}

/// Resolves handles through a directory and the follower-ID sets.
pub struct DirectoryResolver<'a> {
    pub directory: &'a UserDirectory,
    pub sets: &'a FollowerSets,
}

impl CohortResolver for DirectoryResolver<'_> {
    fn cohort_of(&self, handle: &str) -> CohortLabel {
        match self.directory.get(handle) {
            Some(id) => assign_cohort(id, self.sets),
            None => CohortLabel::Other,
        }
    }
}

/// Source cohort (Clinton, Trump) by target cohort (Clinton, Trump, Other) counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionMatrix {
    pub kind: SignalKind,
    pub counts: [[u64; 3]; 2],
}

impl InteractionMatrix {
    pub fn new(kind: SignalKind) -> Self {
        Self {
            kind,
            counts: [[0; 3]; 2],
        }
    }

    /// Zero for pairs outside the matrix (Other/Dual sources, Dual targets).
    pub fn get(&self, source: CohortLabel, target: CohortLabel) -> u64 {
        match (source_index(source), target_index(target)) {
            (Some(s), Some(t)) => self.counts[s][t],
            _ => 0,
        }
    }

    /// Counts one signal; returns false when the pair is excluded.
    pub fn record(&mut self, source: CohortLabel, target: CohortLabel) -> bool {
        match (source_index(source), target_index(target)) {
            (Some(s), Some(t)) => {
                self.counts[s][t] += 1;
                true
            }
            _ => false,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// (own, opposite) counts for a source cohort.
    pub fn own_opposite(&self, source: CohortLabel) -> Result<(u64, u64), MetricsError> {
        let other = opposite(source).ok_or(MetricsError::NotASource(source))?;
        Ok((self.get(source, source), self.get(source, other)))
    }
}

impl AddAssign for InteractionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.kind, rhs.kind);
        for (row, rrow) in self.counts.iter_mut().zip(rhs.counts) {
            for (c, r) in row.iter_mut().zip(rrow) {
                *c += r;
            }
        }
    }
}

impl Add for InteractionMatrix {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

pub fn build_matrix<'a, I, R>(signals: I, resolver: &R, kind: SignalKind) -> InteractionMatrix
where
    I: IntoIterator<Item = &'a EdgeSignal>,
    R: CohortResolver + ?Sized,
{
    let mut matrix = InteractionMatrix::new(kind);
    for s in signals.into_iter().filter(|s| s.kind == kind) {
        let source = resolver.cohort_of(&s.source_handle);
        if source_index(source).is_none() {
            continue;
        }
        matrix.record(source, resolver.cohort_of(&s.target_handle));
    }
    matrix
}

/// Own-cohort count over opposite-cohort count for one source row.
pub fn cocoon_ratio(matrix: &InteractionMatrix, cohort: CohortLabel) -> Result<f64, MetricsError> {
    let (own, opp) = matrix.own_opposite(cohort)?;
    ratio(own, opp).ok_or(MetricsError::UndefinedRatio {
        source_name: cohort.name(),
        own,
    })
}

fn ratio(own: u64, opposite: u64) -> Option<f64> {
    (opposite > 0).then(|| own as f64 / opposite as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Self {
        assert!((1..=12).contains(&month), "month {month} out of range");
        Self { year, month }
    }

    pub fn of(t: &DateTime<Utc>) -> Self {
        Self::new(t.year(), t.month())
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            Self::new(self.year + 1, 1)
        } else {
            Self::new(self.year, self.month + 1)
        }
    }

    /// Every month from `start` to `end`, inclusive.
    pub fn range(start: Self, end: Self) -> impl Iterator<Item = Self> {
        std::iter::successors(Some(start), move |m| Some(m.succ()).filter(|n| *n <= end))
            .take_while(move |m| *m <= end)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl std::str::FromStr for YearMonth {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| format!("expected YYYY-MM, got {s:?}"))?;
        let year = y.parse().map_err(|_| format!("bad year in {s:?}"))?;
        let month: u32 = m.parse().map_err(|_| format!("bad month in {s:?}"))?;
        if !(1..=12).contains(&month) {
            return Err(format!("month out of range in {s:?}"));
        }
        Ok(Self::new(year, month))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocoonPoint {
    pub year: i32,
    pub month: u32,
    pub ratio: Option<f64>,
    pub own: u64,
    pub opposite: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CocoonSeries(pub Vec<CocoonPoint>);

/// Per-month matrices for one signal kind. Merges by elementwise addition.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyTally {
    pub kind: SignalKind,
    pub months: BTreeMap<YearMonth, InteractionMatrix>,
}

impl MonthlyTally {
    pub fn new(kind: SignalKind) -> Self {
        Self {
            kind,
            months: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, month: YearMonth, source: CohortLabel, target: CohortLabel) {
        if source_index(source).is_none() || target_index(target).is_none() {
            return;
        }
        let kind = self.kind;
        self.months
            .entry(month)
            .or_insert_with(|| InteractionMatrix::new(kind))
            .record(source, target);
    }

    pub fn merge(&mut self, other: MonthlyTally) {
        for (month, m) in other.months {
            *self
                .months
                .entry(month)
                .or_insert_with(|| InteractionMatrix::new(m.kind)) += m;
        }
    }

    pub fn total(&self) -> InteractionMatrix {
        self.months
            .values()
            .fold(InteractionMatrix::new(self.kind), |acc, m| acc + *m)
    }

    pub fn span(&self) -> Option<(YearMonth, YearMonth)> {
        Some((*self.months.keys().next()?, *self.months.keys().next_back()?))
    }

    pub fn series(
        &self,
        cohort: CohortLabel,
        start: YearMonth,
        end: YearMonth,
    ) -> Result<CocoonSeries, MetricsError> {
        if start > end {
            return Err(MetricsError::InvalidRange { start, end });
        }
        let other = opposite(cohort).ok_or(MetricsError::NotASource(cohort))?;
        let points = YearMonth::range(start, end)
            .map(|ym| {
                let (own, opp) = self
                    .months
                    .get(&ym)
                    .map(|m| (m.get(cohort, cohort), m.get(cohort, other)))
                    .unwrap_or((0, 0));
                CocoonPoint {
                    year: ym.year,
                    month: ym.month,
                    ratio: ratio(own, opp),
                    own,
                    opposite: opp,
                }
            })
            .collect();
        Ok(CocoonSeries(points))
    }
}

/// Monthly cocoon ratios of `cohort` for signals of `kind`, bucketed by UTC month.
pub fn monthly_cocoon_series<'a, I, R>(
    signals: I,
    resolver: &R,
    kind: SignalKind,
    cohort: CohortLabel,
    range: (YearMonth, YearMonth),
) -> Result<CocoonSeries, MetricsError>
where
    I: IntoIterator<Item = &'a EdgeSignal>,
    R: CohortResolver + ?Sized,
{
    let mut tally = MonthlyTally::new(kind);
    for s in signals.into_iter().filter(|s| s.kind == kind) {
        tally.record(
            YearMonth::of(&s.created_at),
            resolver.cohort_of(&s.source_handle),
            resolver.cohort_of(&s.target_handle),
        );
    }
    tally.series(cohort, range.0, range.1)
}

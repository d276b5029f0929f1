//! Corpus-scale analysis: streaming, batch-parallel passes over one or more JSONL files.
//!
//! Pass one reads every tweet to build the handle directory and corpus tallies. Pass two
//! extracts signals and resolves both ends through the directory. Each batch is split
//! into chunks folded in parallel; partial results are merged in chunk order, and all
//! merges are commutative sums, so the thread count never changes the output.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{CohortLabel, CorpusError, CorpusReader, CorpusTally, FollowerSets, TweetRecord};
use crate::econ::DatasetBuilder;
use crate::extract::{scan_with, MentionPolicy, SignalKind};
use crate::metrics::{CohortResolver, DirectoryResolver, MetricsError, MonthlyTally, UserDirectory, YearMonth};

const BATCH_LINES: usize = 1 << 16;
const CHUNK_LINES: usize = 2048;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Where the corpus and its side inputs live.
#[derive(Debug, Clone)]
pub struct CorpusInputs {
    pub corpora: Vec<PathBuf>,
    pub trump_ids: PathBuf,
    pub clinton_ids: PathBuf,
    /// Supplementary `screen_name,user_id` map for handles that never author a tweet.
    pub directory: Option<PathBuf>,
    pub strict: bool,
}

/// Line counts across all files of a pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PassStats {
    pub lines: usize,
    pub malformed: usize,
}

/// Folds every well-formed record of `paths` into an accumulator.
///
/// Malformed lines are reported to the reader in file order, so strict mode fails on
/// the first one regardless of chunking.
pub fn fold_corpora<T, I, F, M>(
    paths: &[PathBuf],
    strict: bool,
    init: I,
    fold: F,
    mut merge: M,
) -> Result<(T, PassStats), CorpusError>
where
    T: Send,
    I: Fn() -> T + Sync,
    F: Fn(&mut T, &TweetRecord) + Sync,
    M: FnMut(&mut T, T),
{
    let mut total = init();
    let mut stats = PassStats::default();
    for path in paths {
        let mut reader = CorpusReader::open(path, strict)?;
        loop {
            let batch = reader.next_raw_batch(BATCH_LINES)?;
            if batch.is_empty() {
                break;
            }
            let parts: Vec<(T, Vec<(usize, String)>)> = batch
                .par_chunks(CHUNK_LINES)
                .map(|chunk| {
                    let mut acc = init();
                    let mut bad = Vec::new();
                    for (line, text) in chunk {
                        match TweetRecord::parse_line(text) {
                            Ok(record) => fold(&mut acc, &record),
                            Err(reason) => bad.push((*line, reason)),
                        }
                    }
                    (acc, bad)
                })
                .collect();
            for (part, bad) in parts {
                for (line, reason) in bad {
                    reader.note_malformed(line, reason)?;
                }
                merge(&mut total, part);
            }
        }
        stats.lines += reader.lines_read();
        stats.malformed += reader.malformed();
    }
    Ok((total, stats))
}

/// Pass one: handle directory from corpus authors, plus tweets per user and per day.
pub fn scan_authors(paths: &[PathBuf], strict: bool) -> Result<(UserDirectory, CorpusTally, PassStats), CorpusError> {
    let ((directory, tally), stats) = fold_corpora(
        paths,
        strict,
        || (UserDirectory::new(), CorpusTally::default()),
        |(dir, tally), r| {
            dir.insert(&r.author_handle, r.author_user_id);
            tally.add(r);
        },
        |(dir, tally), (d, t)| {
            dir.merge(d);
            tally.merge(t);
        },
    )?;
    Ok((directory, tally, stats))
}

/// Resolves one handle, lowercasing through a scratch buffer to avoid allocation.
fn resolve<R: CohortResolver>(resolver: &R, handle: &str, buf: &mut String) -> CohortLabel {
    buf.clear();
    buf.extend(handle.chars().map(|c| c.to_ascii_lowercase()));
    resolver.cohort_of(buf)
}

/// One extracted signal as written to the debug dump.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DumpRow {
    pub kind: SignalKind,
    pub source: String,
    pub target: String,
    pub timestamp: String,
}

#[derive(Debug, Clone)]
pub struct SignalTally {
    pub retweets: MonthlyTally,
    pub mentions: MonthlyTally,
    pub dump: Option<Vec<DumpRow>>,
}

impl SignalTally {
    fn new(dump: bool) -> Self {
        Self {
            retweets: MonthlyTally::new(SignalKind::Retweet),
            mentions: MonthlyTally::new(SignalKind::Mention),
            dump: dump.then(Vec::new),
        }
    }

    fn merge(&mut self, other: SignalTally) {
        self.retweets.merge(other.retweets);
        self.mentions.merge(other.mentions);
        if let (Some(mine), Some(theirs)) = (self.dump.as_mut(), other.dump) {
            mine.extend(theirs);
        }
    }

    fn add<R: CohortResolver>(&mut self, record: &TweetRecord, resolver: &R, policy: MentionPolicy, buf: &mut String) {
        let source = resolve(resolver, &record.author_handle, buf);
        let month = YearMonth::of(&record.created_at);
        let dumping = self.dump.is_some();
        scan_with(&record.text, policy, |kind, handle| {
            let target = resolve(resolver, handle, buf);
            match kind {
                SignalKind::Retweet => self.retweets.record(month, source, target),
                SignalKind::Mention => self.mentions.record(month, source, target),
            }
            if dumping {
                if let Some(rows) = self.dump.as_mut() {
                    rows.push(DumpRow {
                        kind,
                        source: record.author_handle.to_ascii_lowercase(),
                        target: handle.to_ascii_lowercase(),
                        timestamp: record.created_at.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
                    });
                }
            }
        });
    }
}

/// Everything the analyze command reports.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub directory: UserDirectory,
    pub sets: FollowerSets,
    pub corpus: CorpusTally,
    pub signals: SignalTally,
    pub pass: PassStats,
    pub policy: MentionPolicy,
}

impl Analysis {
    pub fn cohort_of_user(&self, user_id: u64) -> CohortLabel {
        self.sets.cohort(user_id)
    }
}

fn load_directory(inputs: &CorpusInputs, from_corpus: UserDirectory) -> Result<UserDirectory, PipelineError> {
    let mut directory = from_corpus;
    if let Some(path) = &inputs.directory {
        directory.merge(UserDirectory::load_csv(path)?);
    }
    Ok(directory)
}

pub fn analyze(inputs: &CorpusInputs, policy: MentionPolicy, dump_signals: bool) -> Result<Analysis, PipelineError> {
    let sets = FollowerSets::load(&inputs.trump_ids, &inputs.clinton_ids)?;
    let (authors, corpus, pass) = scan_authors(&inputs.corpora, inputs.strict)?;
    if corpus.tweets() == 0 {
        return Err(CorpusError::Empty.into());
    }
    let directory = load_directory(inputs, authors)?;
    let resolver = DirectoryResolver {
        directory: &directory,
        sets: &sets,
    };
    let (signals, _) = fold_corpora(
        &inputs.corpora,
        inputs.strict,
        || (SignalTally::new(dump_signals), String::with_capacity(16)),
        |(tally, buf), record| tally.add(record, &resolver, policy, buf),
        |(total, _), (part, _)| total.merge(part),
    )?;
    Ok(Analysis {
        directory,
        sets,
        corpus,
        signals: signals.0,
        pass,
        policy,
    })
}

/// Per-user openness dataset straight from a corpus.
pub fn build_dataset(inputs: &CorpusInputs) -> Result<(DatasetBuilder, PassStats), PipelineError> {
    let sets = FollowerSets::load(&inputs.trump_ids, &inputs.clinton_ids)?;
    let (authors, corpus, pass) = scan_authors(&inputs.corpora, inputs.strict)?;
    if corpus.tweets() == 0 {
        return Err(CorpusError::Empty.into());
    }
    let directory = load_directory(inputs, authors)?;
    let resolver = DirectoryResolver {
        directory: &directory,
        sets: &sets,
    };
    let (builder, _) = fold_corpora(
        &inputs.corpora,
        inputs.strict,
        DatasetBuilder::new,
        |b, record| b.add(record, &sets, &resolver),
        |total, part| total.merge(part),
    )?;
    Ok((builder, pass))
}

/// Convenience for single-file callers.
pub fn single(path: impl AsRef<Path>) -> Vec<PathBuf> {
    vec![path.as_ref().to_path_buf()]
}

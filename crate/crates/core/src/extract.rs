//! Retweet and mention edges from tweet text.
//!
//! A tweet whose text (after leading whitespace) starts with `RT @handle` is a retweet
//! of `handle`, the originator. An optional colon may follow the originator. Later
//! `RT @handle` markers are recursive retweets and are dropped. Every other `@handle`
//! is a mention. Handles are maximal `[A-Za-z0-9_]` runs of 1 to 15 bytes; longer runs
//! are not handles at all.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{TweetRecord, MAX_HANDLE_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SignalKind {
    Retweet,
    Mention,
}

impl SignalKind {
    pub fn name(self) -> &'static str {
        match self {
            SignalKind::Retweet => "retweet",
            SignalKind::Mention => "mention",
        }
    }
}

/// Whether mentions inside a retweet's quoted body are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionPolicy {
    #[default]
    Include,
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSignal {
    pub kind: SignalKind,
    pub source_handle: String,
    pub target_handle: String,
    pub created_at: DateTime<Utc>,
}

fn is_handle_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn handle_run(bytes: &[u8], start: usize) -> usize {
    bytes[start..]
        .iter()
        .take_while(|&&b| is_handle_byte(b))
        .count()
}

/// Positions of the `@` markers of interest, in original casing.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Scan<'a> {
    pub originator: Option<&'a str>,
    pub mentions: Vec<&'a str>,
}

pub fn scan(text: &str) -> Scan<'_> {
    let mut out = Scan::default();
    scan_with(text, MentionPolicy::Include, |kind, handle| match kind {
        SignalKind::Retweet => out.originator = Some(handle),
        SignalKind::Mention => out.mentions.push(handle),
    });
    out
}

/// Calls `emit` for each signal target in text order, without allocating.
pub fn scan_with<'a>(text: &'a str, policy: MentionPolicy, mut emit: impl FnMut(SignalKind, &'a str)) {
    let body = text.trim_start();
    let bytes = body.as_bytes();
    let mut pos = 0;

    if bytes.starts_with(b"RT @") {
        let len = handle_run(bytes, 4);
        if (1..=MAX_HANDLE_LEN).contains(&len) {
            emit(SignalKind::Retweet, &body[4..4 + len]);
            if policy == MentionPolicy::Exclude {
                return;
            }
            pos = 4 + len;
            if bytes.get(pos) == Some(&b':') {
                pos += 1;
            }
        }
    }

    while let Some(offset) = bytes[pos..].iter().position(|&b| b == b'@') {
        let at = pos + offset;
        let len = handle_run(bytes, at + 1);
        pos = at + 1 + len;
        if len == 0 || len > MAX_HANDLE_LEN || follows_rt_marker(bytes, at) {
            continue;
        }
        emit(SignalKind::Mention, &body[at + 1..at + 1 + len]);
    }
}

/// `RT ` directly before `at`, itself not glued to a preceding word character.
fn follows_rt_marker(bytes: &[u8], at: usize) -> bool {
    at >= 3 && &bytes[at - 3..at] == b"RT " && (at == 3 || !is_handle_byte(bytes[at - 4]))
}

pub fn is_retweet(text: &str) -> bool {
    scan(text).originator.is_some()
}

pub fn extract_signals(record: &TweetRecord, policy: MentionPolicy) -> Vec<EdgeSignal> {
    let source = record.author_handle.to_ascii_lowercase();
    let mut signals = Vec::new();
    scan_with(&record.text, policy, |kind, handle| {
        signals.push(EdgeSignal {
            kind,
            source_handle: source.clone(),
            target_handle: handle.to_ascii_lowercase(),
            created_at: record.created_at,
        })
    });
    signals
}

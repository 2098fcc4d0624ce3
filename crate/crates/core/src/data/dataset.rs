//! Line-delimited JSON datasets and the language/length filter.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::record::TweetRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<TweetRecord>,
    /// Where the records came from: a file path or generator settings.
    pub provenance: String,
}

impl Dataset {
    pub fn new(records: Vec<TweetRecord>, provenance: impl Into<String>) -> Self {
        Dataset {
            records,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn parse_jsonl(text: &str, origin: &str) -> Result<Self> {
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: TweetRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: origin.to_string(),
                line: line_no,
                msg: e.to_string(),
            })?;
            if !seen.insert(record.id.clone()) {
                return Err(Error::DuplicateId {
                    id: record.id,
                    line: line_no,
                });
            }
            records.push(record);
        }
        Ok(Dataset::new(records, origin))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_jsonl(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    /// Fails unless every record carries a label.
    pub fn require_labels(&self) -> Result<()> {
        match self.records.iter().find(|r| r.label.is_none()) {
            Some(r) => Err(Error::Config(format!("record {:?} has no label", r.id))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    TooShort,
    Language,
    NonAsciiText,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::TooShort => "too_short",
            RejectReason::Language => "language",
            RejectReason::NonAsciiText => "non_ascii_text",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub id: String,
    pub reason: RejectReason,
}

/// Share of alphabetic characters that must be ASCII letters for a record
/// without language metadata to count as English.
pub const ASCII_LETTER_THRESHOLD: f64 = 0.6;

fn looks_english(text: &str) -> bool {
    let (ascii, total) = text
        .chars()
        .filter(|c| c.is_alphabetic())
        .fold((0usize, 0usize), |(a, t), c| (a + c.is_ascii_alphabetic() as usize, t + 1));
    total > 0 && ascii as f64 >= ASCII_LETTER_THRESHOLD * total as f64
}

/// Drops texts shorter than two characters and non-English records: when
/// `lang` is present only `"en"` is kept, otherwise the ASCII-letter ratio
/// decides.
pub fn filter_dataset(d: &Dataset) -> (Dataset, Vec<Rejection>) {
    let mut kept = Vec::new();
    let mut log = Vec::new();
    for r in &d.records {
        let reason = if r.text.chars().count() < 2 {
            Some(RejectReason::TooShort)
        } else {
            match r.lang.as_deref() {
                Some(lang) if !lang.eq_ignore_ascii_case("en") => Some(RejectReason::Language),
                Some(_) => None,
                None if !looks_english(&r.text) => Some(RejectReason::NonAsciiText),
                None => None,
            }
        };
        match reason {
            Some(reason) => log.push(Rejection {
                id: r.id.clone(),
                reason,
            }),
            None => kept.push(r.clone()),
        }
    }
    (Dataset::new(kept, d.provenance.clone()), log)
}

//! Sentiment and part-of-speech lexicons.
//!
//! Sentiment file: one `token<TAB>polarity` per line, polarity in `[-1, 1]`,
//! `#` comment lines and blank lines ignored.
//!
//! POS file: a `[words]` section of `token<TAB>tag` lines and a `[suffixes]`
//! section of `suffix<TAB>tag` lines tried in file order. An optional
//! `[default]` section holds a single tag. Tags are `noun`, `adjective`,
//! `pronoun`, `verb` or `other`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const BUNDLED_SENTIMENT: &str = include_str!("../../data/sentiment.tsv");
pub const BUNDLED_POS: &str = include_str!("../../data/pos.txt");

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentimentLexicon {
    entries: BTreeMap<String, f64>,
}

impl SentimentLexicon {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_SENTIMENT, "<bundled sentiment>").expect("bundled lexicon parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parse_err = |msg: &str| Error::Parse {
                path: origin.to_string(),
                line: line_no,
                msg: msg.to_string(),
            };
            let (token, value) = trimmed
                .split_once('\t')
                .ok_or_else(|| parse_err("expected token<TAB>polarity"))?;
            let token = token.trim().to_lowercase();
            if token.is_empty() {
                return Err(parse_err("empty token"));
            }
            let value: f64 = value.trim().parse().map_err(|_| parse_err("polarity is not a number"))?;
            if !(-1.0..=1.0).contains(&value) {
                return Err(Error::PolarityRange {
                    path: origin.to_string(),
                    line: line_no,
                    value,
                });
            }
            if entries.insert(token.clone(), value).is_some() {
                log::warn!("{origin}: line {line_no}: duplicate token {token:?}, keeping the later entry");
            }
        }
        Ok(SentimentLexicon { entries })
    }

    pub fn insert(&mut self, token: &str, polarity: f64) {
        self.entries.insert(token.to_lowercase(), polarity.clamp(-1.0, 1.0));
    }

    pub fn polarity(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes the lexicon in its file format, entries sorted by token.
    pub fn serialize(&self) -> String {
        self.entries.iter().map(|(t, v)| format!("{t}\t{v}\n")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PosTag {
    Noun,
    Adjective,
    Pronoun,
    Verb,
    Other,
}

impl PosTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "noun",
            PosTag::Adjective => "adjective",
            PosTag::Pronoun => "pronoun",
            PosTag::Verb => "verb",
            PosTag::Other => "other",
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "noun" => Ok(PosTag::Noun),
            "adjective" | "adj" => Ok(PosTag::Adjective),
            "pronoun" | "pron" => Ok(PosTag::Pronoun),
            "verb" => Ok(PosTag::Verb),
            "other" => Ok(PosTag::Other),
            _ => Err(format!("unknown tag {s:?}")),
        }
    }
}

/// Lexicon-plus-suffix-rules tagger.
#[derive(Debug, Clone, PartialEq)]
pub struct PosLexicon {
    words: BTreeMap<String, PosTag>,
    suffixes: Vec<(String, PosTag)>,
    default_tag: PosTag,
}

impl Default for PosLexicon {
    fn default() -> Self {
        PosLexicon {
            words: BTreeMap::new(),
            suffixes: Vec::new(),
            default_tag: PosTag::Noun,
        }
    }
}

impl PosLexicon {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_POS, "<bundled pos>").expect("bundled lexicon parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Words,
            Suffixes,
            Default,
        }
        let mut lex = PosLexicon::default();
        let mut section = Section::None;
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: origin.to_string(),
                line: line_no,
                msg,
            };
            match trimmed {
                "[words]" => section = Section::Words,
                "[suffixes]" => section = Section::Suffixes,
                "[default]" => section = Section::Default,
                _ if section == Section::Default => {
                    lex.default_tag = trimmed.parse().map_err(parse_err)?;
                }
                _ => {
                    let (key, tag) = trimmed
                        .split_once('\t')
                        .ok_or_else(|| parse_err("expected entry<TAB>tag".into()))?;
                    let key = key.trim().to_lowercase();
                    if key.is_empty() {
                        return Err(parse_err("empty entry".into()));
                    }
                    let tag: PosTag = tag.parse().map_err(parse_err)?;
                    match section {
                        Section::Words => {
                            if lex.words.insert(key.clone(), tag).is_some() {
                                log::warn!("{origin}: line {line_no}: duplicate word {key:?}, keeping the later entry");
                            }
                        }
                        Section::Suffixes => {
                            if let Some(slot) = lex.suffixes.iter_mut().find(|(s, _)| *s == key) {
                                log::warn!("{origin}: line {line_no}: duplicate suffix {key:?}, keeping the later entry");
                                slot.1 = tag;
                            } else {
                                lex.suffixes.push((key, tag));
                            }
                        }
                        _ => return Err(parse_err("entry outside [words]/[suffixes] section".into())),
                    }
                }
            }
        }
        Ok(lex)
    }

    pub fn default_tag(&self) -> PosTag {
        self.default_tag
    }

    /// Exact lexicon entry, then the first matching suffix rule (the word must
    /// be longer than the suffix), then the default tag.
    pub fn tag(&self, word: &str) -> PosTag {
        if let Some(&t) = self.words.get(word) {
            return t;
        }
        let chars = word.chars().count();
        self.suffixes
            .iter()
            .find(|(s, _)| chars > s.chars().count() && word.ends_with(s.as_str()))
            .map_or(self.default_tag, |&(_, t)| t)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::from("[words]\n");
        for (w, t) in &self.words {
            out.push_str(&format!("{w}\t{t}\n"));
        }
        out.push_str("[suffixes]\n");
        for (s, t) in &self.suffixes {
            out.push_str(&format!("{s}\t{t}\n"));
        }
        out.push_str(&format!("[default]\n{}\n", self.default_tag));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry() {
        let lex = SentimentLexicon::parse("good\t0.5\n", "t").unwrap();
        assert_eq!(lex.polarity("good"), Some(0.5));
        assert_eq!(lex.len(), 1);
    }

    #[test]
    fn empty_file_is_valid() {
        assert!(SentimentLexicon::parse("", "t").unwrap().is_empty());
        assert!(SentimentLexicon::parse("# only a comment\n\n", "t").unwrap().is_empty());
    }

    #[test]
    fn errors_carry_line_numbers() {
        match SentimentLexicon::parse("good\t0.5\nbad 0.2\n", "lex.tsv").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
        match SentimentLexicon::parse("# c\nhuge\t1.5\n", "lex.tsv").unwrap_err() {
            Error::PolarityRange { line, value, .. } => assert_eq!((line, value), (2, 1.5)),
            e => panic!("{e}"),
        }
        assert!(matches!(
            PosLexicon::parse("[words]\nrun\tverbish\n", "p"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn duplicates_keep_last() {
        let lex = SentimentLexicon::parse("good\t0.5\ngood\t0.25\n", "t").unwrap();
        assert_eq!(lex.polarity("good"), Some(0.25));
    }

    #[test]
    fn bundled_lexicons_round_trip() {
        let s = SentimentLexicon::bundled();
        assert_eq!(s.len(), 60);
        assert_eq!(SentimentLexicon::parse(&s.serialize(), "rt").unwrap(), s);
        let p = PosLexicon::bundled();
        assert_eq!(PosLexicon::parse(&p.serialize(), "rt").unwrap(), p);
    }

    #[test]
    fn tagger_precedence() {
        let p = PosLexicon::parse("[words]\nsing\tverb\n[suffixes]\ning\tverb\nly\tadjective\n", "p").unwrap();
        assert_eq!(p.tag("sing"), PosTag::Verb);
        assert_eq!(p.tag("running"), PosTag::Verb);
        assert_eq!(p.tag("ing"), PosTag::Noun);
        assert_eq!(p.tag("lovely"), PosTag::Adjective);
        assert_eq!(p.tag("table"), PosTag::Noun);
    }
}

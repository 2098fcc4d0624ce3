//! Character and hashtag vocabularies.
//!
//! Both serialize as one `index<TAB>entry` line per entry, in index order.
//! Character entries escape `\\`, tab, newline and carriage return; the two
//! reserved character slots are written as `<pad>` and `<unk>`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const MAX_CHARS: usize = 150;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    /// Characters (after lowercasing) seen at least `min_count` times, in
    /// code-point order after the reserved slots.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: BTreeMap<char, usize> = BTreeMap::new();
        for t in texts {
            for c in t.to_lowercase().chars() {
                *counts.entry(c).or_default() += 1;
            }
        }
        let chars = counts.into_iter().filter(|&(_, n)| n >= min_count).map(|(c, _)| c);
        Self::from_chars(chars)
    }

    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let mut v = CharVocab {
            chars: Vec::new(),
            index: HashMap::new(),
        };
        for c in chars {
            if !v.index.contains_key(&c) {
                v.index.insert(c, v.chars.len() + 2);
                v.chars.push(c);
            }
        }
        v
    }

    /// Vocabulary size including the two reserved slots.
    pub fn len(&self) -> usize {
        self.chars.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn get(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(UNK)
    }

    pub fn serialize(&self) -> String {
        let mut out = format!("{PAD}\t<pad>\n{UNK}\t<unk>\n");
        for (i, &c) in self.chars.iter().enumerate() {
            let entry = match c {
                '\\' => "\\\\".to_string(),
                '\t' => "\\t".to_string(),
                '\n' => "\\n".to_string(),
                '\r' => "\\r".to_string(),
                c => c.to_string(),
            };
            out.push_str(&format!("{}\t{entry}\n", i + 2));
        }
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut chars = Vec::new();
        for (n, line) in text.split('\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse {
                path: origin.to_string(),
                line: n + 1,
                msg: msg.to_string(),
            };
            let (idx, entry) = line.split_once('\t').ok_or_else(|| err("expected index<TAB>entry"))?;
            let idx: usize = idx.parse().map_err(|_| err("bad index"))?;
            let c = match (idx, entry) {
                (PAD, "<pad>") | (UNK, "<unk>") => continue,
                (_, "\\\\") => '\\',
                (_, "\\t") => '\t',
                (_, "\\n") => '\n',
                (_, "\\r") => '\r',
                (_, e) => {
                    let mut it = e.chars();
                    match (it.next(), it.next()) {
                        (Some(c), None) => c,
                        _ => return Err(err("entry must be a single character")),
                    }
                }
            };
            if idx != chars.len() + 2 {
                return Err(err("indices must be dense and ordered"));
            }
            chars.push(c);
        }
        Ok(Self::from_chars(chars))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.serialize()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// Lowercases, maps each character to its index (unknown → UNK) and keeps at
/// most [`MAX_CHARS`] characters.
pub fn char_encode(text: &str, vocab: &CharVocab) -> Vec<usize> {
    text.to_lowercase().chars().take(MAX_CHARS).map(|c| vocab.get(c)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashtagVocab {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl HashtagVocab {
    /// Hashtags (lowercased) occurring at least `min_count` times, sorted.
    pub fn build<'a>(tags: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in tags {
            *counts.entry(t.to_lowercase()).or_default() += 1;
        }
        Self::from_tags(counts.into_iter().filter(|&(_, n)| n >= min_count).map(|(t, _)| t))
    }

    pub fn from_tags(tags: impl IntoIterator<Item = String>) -> Self {
        let mut v = HashtagVocab {
            tags: Vec::new(),
            index: HashMap::new(),
        };
        for t in tags {
            if !v.index.contains_key(&t) {
                v.index.insert(t.clone(), v.tags.len());
                v.tags.push(t);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn get(&self, tag: &str) -> Option<usize> {
        self.index.get(&tag.to_lowercase()).copied()
    }

    pub fn tag(&self, i: usize) -> Option<&str> {
        self.tags.get(i).map(String::as_str)
    }

    pub fn serialize(&self) -> String {
        self.tags.iter().enumerate().map(|(i, t)| format!("{i}\t{t}\n")).collect()
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut tags = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let err = |msg: &str| Error::Parse {
                path: origin.to_string(),
                line: n + 1,
                msg: msg.to_string(),
            };
            let (idx, tag) = line.split_once('\t').ok_or_else(|| err("expected index<TAB>hashtag"))?;
            if idx.parse::<usize>().ok() != Some(tags.len()) {
                return Err(err("indices must be dense and ordered"));
            }
            tags.push(tag.to_string());
        }
        Ok(Self::from_tags(tags))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.serialize()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encode_basics() {
        let v = CharVocab::from_chars(['a', 'b']);
        assert_eq!(char_encode("", &v), Vec::<usize>::new());
        assert_eq!(char_encode("Ab", &v), vec![2, 3]);
        assert_eq!(char_encode("abz", &v), vec![2, 3, UNK]);
        assert_eq!(char_encode(&"a".repeat(200), &v).len(), 150);
    }

    #[test]
    fn rare_characters_are_dropped() {
        let v = CharVocab::build(["aab", "ac"], 2);
        assert_eq!(v.len(), 3);
        assert_eq!(v.get('a'), 2);
        assert_eq!(v.get('b'), UNK);
    }

    #[test]
    fn hashtag_cutoff() {
        let v = HashtagVocab::build(["#x", "#X", "#y", "#x"], 2);
        assert_eq!(v.len(), 1);
        assert_eq!(v.get("#x"), Some(0));
        assert_eq!(v.get("#y"), None);
    }

    #[test]
    fn malformed_vocab_lines() {
        assert!(CharVocab::parse("0\t<pad>\n1\t<unk>\n3\ta\n", "v").is_err());
        assert!(CharVocab::parse("0\t<pad>\n1\t<unk>\n2\tab\n", "v").is_err());
        assert!(HashtagVocab::parse("1\t#a\n", "v").is_err());
    }

    proptest! {
        #[test]
        fn vocab_round_trip(chars in prop::collection::vec(any::<char>(), 0..40), tags in prop::collection::vec("#[a-z]{1,8}", 0..10)) {
            let v = CharVocab::from_chars(chars);
            prop_assert_eq!(CharVocab::parse(&v.serialize(), "rt").unwrap(), v);
            let h = HashtagVocab::from_tags(tags);
            prop_assert_eq!(HashtagVocab::parse(&h.serialize(), "rt").unwrap(), h);
        }
    }
}

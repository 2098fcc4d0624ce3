//! The twelve tweet-content features.
//!
//! | index | feature |
//! |-------|---------|
//! | 0  | user mentions |
//! | 1  | hashtags |
//! | 2  | URLs |
//! | 3  | media items |
//! | 4  | reply flag (0/1) |
//! | 5  | special characters (neither alphanumeric nor whitespace) |
//! | 6  | length in Unicode scalar values |
//! | 7  | mean lexicon polarity of matched words, 0 when none match |
//! | 8  | nouns |
//! | 9  | adjectives |
//! | 10 | pronouns |
//! | 11 | verbs |
//!
//! Mention/hashtag/URL counts come from the record's entity lists when those
//! are present and from the tokenizer otherwise.

pub mod lexicon;
pub mod tokenize;

pub use lexicon::{PosLexicon, PosTag, SentimentLexicon};
pub use tokenize::{tokenize, Token, TokenKind};

use crate::record::TweetRecord;
use crate::tensor::Matrix;

pub const FEATURE_COUNT: usize = 12;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "mentions",
    "hashtags",
    "urls",
    "media",
    "is_reply",
    "special_chars",
    "length",
    "sentiment",
    "nouns",
    "adjectives",
    "pronouns",
    "verbs",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn extract_features(t: &TweetRecord, sentiment: &SentimentLexicon, pos: &PosLexicon) -> FeatureVector {
    let tokens = tokenize(&t.text);
    let count_kind = |k: TokenKind| tokens.iter().filter(|tok| tok.kind == k).count();
    let entity_count = |list: &Option<Vec<String>>, k: TokenKind| list.as_ref().map_or_else(|| count_kind(k), Vec::len) as f64;

    let words: Vec<&str> = tokens
        .iter()
        .filter(|tok| tok.kind == TokenKind::Word)
        .map(|tok| tok.text.as_str())
        .collect();

    let polarities: Vec<f64> = words.iter().filter_map(|w| sentiment.polarity(w)).collect();
    let sentiment_score = if polarities.is_empty() {
        0.0
    } else {
        (polarities.iter().sum::<f64>() / polarities.len() as f64).clamp(-1.0, 1.0)
    };

    let tags: Vec<PosTag> = match &t.pos_tags {
        Some(external) => external.iter().map(|s| s.parse().unwrap_or(PosTag::Other)).collect(),
        None => words.iter().map(|w| pos.tag(w)).collect(),
    };
    let count_tag = |tag: PosTag| tags.iter().filter(|&&t| t == tag).count() as f64;

    FeatureVector([
        entity_count(&t.mentions, TokenKind::Mention),
        entity_count(&t.hashtags, TokenKind::Hashtag),
        entity_count(&t.urls, TokenKind::Url),
        t.media_count as f64,
        if t.is_reply { 1.0 } else { 0.0 },
        t.text.chars().filter(|c| !c.is_alphanumeric() && !c.is_whitespace()).count() as f64,
        t.text.chars().count() as f64,
        sentiment_score,
        count_tag(PosTag::Noun),
        count_tag(PosTag::Adjective),
        count_tag(PosTag::Pronoun),
        count_tag(PosTag::Verb),
    ])
}

/// Features for many records as a `n×12` matrix.
pub fn feature_matrix(records: &[TweetRecord], sentiment: &SentimentLexicon, pos: &PosLexicon) -> Matrix {
    let rows: Vec<[f64; FEATURE_COUNT]> = records.iter().map(|r| extract_features(r, sentiment, pos).0).collect();
    if rows.is_empty() {
        return Matrix::zeros(0, FEATURE_COUNT);
    }
    Matrix::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lexicons() -> (SentimentLexicon, PosLexicon) {
        (SentimentLexicon::bundled(), PosLexicon::bundled())
    }

    #[test]
    fn empty_tweet_is_all_zero() {
        let (s, p) = lexicons();
        let f = extract_features(&TweetRecord::from_text("0", ""), &s, &p);
        assert_eq!(f.0, [0.0; 12]);
    }

    #[test]
    fn direct_counts() {
        let (s, p) = lexicons();
        let mut t = TweetRecord::from_text("0", "Go!! @a @b #x http://t.co/y");
        t.is_reply = true;
        t.media_count = 1;
        let f = extract_features(&t, &s, &p).0;
        assert_eq!(&f[..5], &[2.0, 1.0, 1.0, 1.0, 1.0]);
        // G o ! ! _ @ a _ @ b _ # x _ h t t p : / / t . c o / y
        assert_eq!(f[6], 27.0);
        // ! ! @ @ # : / / . /
        assert_eq!(f[5], 10.0);
        // "go" is the only word; the bundled tagger marks it a verb.
        assert_eq!(&f[8..], &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn metadata_lists_take_precedence() {
        let (s, p) = lexicons();
        let mut t = TweetRecord::from_text("0", "no entities in this text");
        t.mentions = Some(vec!["a".into(), "b".into(), "c".into()]);
        t.hashtags = Some(vec![]);
        t.urls = Some(vec!["u".into()]);
        let f = extract_features(&t, &s, &p).0;
        assert_eq!(&f[..3], &[3.0, 0.0, 1.0]);
    }

    #[test]
    fn sentiment_is_mean_of_matches() {
        let (s, p) = lexicons();
        let f = extract_features(&TweetRecord::from_text("0", "great day but terrible traffic"), &s, &p).0;
        assert!((f[7] - (0.625 - 0.875) / 2.0).abs() < 1e-15);
        let empty = SentimentLexicon::default();
        assert_eq!(extract_features(&TweetRecord::from_text("0", "great"), &empty, &p).0[7], 0.0);
    }

    #[test]
    fn external_tags_replace_tagger() {
        let (s, p) = lexicons();
        let mut t = TweetRecord::from_text("0", "whatever words here");
        t.pos_tags = Some(vec!["verb".into(), "verb".into(), "pronoun".into()]);
        assert_eq!(&extract_features(&t, &s, &p).0[8..], &[0.0, 0.0, 1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn total_on_arbitrary_text(text in "\\PC{0,80}", pol in prop::sample::select(vec![-1.0f64, 1.0])) {
            let mut s = SentimentLexicon::default();
            for w in text.split_whitespace() {
                s.insert(&w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase(), pol);
            }
            let p = PosLexicon::bundled();
            let f = extract_features(&TweetRecord::from_text("0", text.clone()), &s, &p).0;
            prop_assert!(f.iter().all(|v| v.is_finite()));
            prop_assert!((-1.0..=1.0).contains(&f[7]));
            for (i, v) in f.iter().enumerate() {
                if i != 7 {
                    prop_assert!(*v >= 0.0 && v.fract() == 0.0);
                }
            }
            prop_assert!(f[0] + f[1] + f[2] <= tokenize(&text).len() as f64);
        }
    }
}

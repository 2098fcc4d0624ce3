//! A second, regex-based implementation of the twelve content features,
//! written from the feature definitions alone. It parses the bundled lexicon
//! files itself and shares no code with the library extractor.

use std::collections::HashMap;

use regex::Regex;
use tweetmtl::record::TweetRecord;

const SENTIMENT: &str = include_str!("../../../core/data/sentiment.tsv");
const POS: &str = include_str!("../../../core/data/pos.txt");

pub struct Reference {
    mention: Regex,
    hashtag: Regex,
    url: Regex,
    edges: Regex,
    special: Regex,
    polarity: HashMap<String, f64>,
    words: HashMap<String, &'static str>,
    suffixes: Vec<(String, &'static str)>,
    default_tag: &'static str,
}

fn tag_name(s: &str) -> &'static str {
    match s.trim().to_lowercase().as_str() {
        "noun" => "noun",
        "adjective" | "adj" => "adjective",
        "pronoun" | "pron" => "pronoun",
        "verb" => "verb",
        _ => "other",
    }
}

impl Reference {
    pub fn new() -> Self {
        let polarity = SENTIMENT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let mut cols = l.split('\t');
                let tok = cols.next().unwrap().trim().to_lowercase();
                (tok, cols.next().unwrap().trim().parse().unwrap())
            })
            .collect();
        let mut words = HashMap::new();
        let mut suffixes: Vec<(String, &'static str)> = Vec::new();
        let mut default_tag = "noun";
        let mut section = "";
        for line in POS.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            if line.starts_with('[') {
                section = line;
                continue;
            }
            match section {
                "[default]" => default_tag = tag_name(line),
                "[words]" => {
                    let (w, t) = line.split_once('\t').unwrap();
                    words.insert(w.trim().to_lowercase(), tag_name(t));
                }
                "[suffixes]" => {
                    let (s, t) = line.split_once('\t').unwrap();
                    let s = s.trim().to_lowercase();
                    match suffixes.iter_mut().find(|(k, _)| *k == s) {
                        Some(slot) => slot.1 = tag_name(t),
                        None => suffixes.push((s, tag_name(t))),
                    }
                }
                other => panic!("unexpected section {other}"),
            }
        }
        let shorteners = [
            "bit.ly",
            "t.co",
            "goo.gl",
            "ow.ly",
            "tinyurl.com",
            "buff.ly",
            "dlvr.it",
            "ift.tt",
            "is.gd",
            "tiny.cc",
            "shorturl.at",
            "rebrand.ly",
            "cutt.ly",
            "lnkd.in",
        ]
        .map(regex::escape)
        .join("|");
        Reference {
            mention: Regex::new(r"^@[\p{Alphabetic}\p{N}_]").unwrap(),
            hashtag: Regex::new(r"^#[\p{Alphabetic}\p{N}_]").unwrap(),
            url: Regex::new(&format!(r"(?i)^(?:https?://|(?:www\.)?(?:{shorteners})/.)")).unwrap(),
            edges: Regex::new(r"^[^\p{Alphabetic}\p{N}]+|[^\p{Alphabetic}\p{N}]+$").unwrap(),
            special: Regex::new(r"[^\p{Alphabetic}\p{N}\s]").unwrap(),
            polarity,
            words,
            suffixes,
            default_tag,
        }
    }

    fn tag(&self, word: &str) -> &'static str {
        if let Some(t) = self.words.get(word) {
            return t;
        }
        for (s, t) in &self.suffixes {
            if word.chars().count() > s.chars().count() && word.ends_with(s.as_str()) {
                return t;
            }
        }
        self.default_tag
    }

    pub fn features(&self, r: &TweetRecord) -> [f64; 12] {
        let (mut mentions, mut hashtags, mut urls) = (0usize, 0usize, 0usize);
        let mut words = Vec::new();
        for piece in r.text.split_whitespace() {
            if self.mention.is_match(piece) {
                mentions += 1;
            } else if self.hashtag.is_match(piece) {
                hashtags += 1;
            } else if self.url.is_match(piece) {
                urls += 1;
            } else {
                let w = self.edges.replace_all(piece, "").to_lowercase();
                if !w.is_empty() {
                    words.push(w);
                }
            }
        }
        let pick = |list: &Option<Vec<String>>, own: usize| list.as_ref().map_or(own, |l| l.len()) as f64;
        let scores: Vec<f64> = words.iter().filter_map(|w| self.polarity.get(w).copied()).collect();
        let sentiment = if scores.is_empty() {
            0.0
        } else {
            (scores.iter().sum::<f64>() / scores.len() as f64).clamp(-1.0, 1.0)
        };
        let tags: Vec<&str> = match &r.pos_tags {
            Some(given) => given.iter().map(|t| tag_name(t)).collect(),
            None => words.iter().map(|w| self.tag(w)).collect(),
        };
        let count = |name: &str| tags.iter().filter(|&&t| t == name).count() as f64;
        [
            pick(&r.mentions, mentions),
            pick(&r.hashtags, hashtags),
            pick(&r.urls, urls),
            r.media_count as f64,
            if r.is_reply { 1.0 } else { 0.0 },
            self.special.find_iter(&r.text).count() as f64,
            r.text.chars().count() as f64,
            sentiment,
            count("noun"),
            count("adjective"),
            count("pronoun"),
            count("verb"),
        ]
    }
}

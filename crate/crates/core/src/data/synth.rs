//! Synthetic blackmarket/genuine tweet corpus.
//!
//! Blackmarket tweets come from promotional templates carrying at least one
//! shortened URL, one to four hashtags and call-to-action words. Genuine
//! tweets come from conversational templates. A `difficulty` fraction of each
//! class is drawn as boundary examples that borrow the other class's
//! templates. Engagement counts are negative-binomial with label-dependent
//! means; these are invented stand-ins, not measured values.

use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::record::{Category, Label, TweetRecord};
use crate::tensor::SeededRng;

pub const GENERATOR_VERSION: &str = "synth-1";

/// Category shares of the blackmarket class, in [`Category::ALL`] order.
pub const CATEGORY_WEIGHTS: [f64; 6] = [0.4375, 0.1589, 0.1357, 0.0786, 0.0482, 0.1411];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngagementConfig {
    pub blackmarket_retweets: f64,
    pub blackmarket_likes: f64,
    pub genuine_retweets: f64,
    pub genuine_likes: f64,
    /// Negative-binomial shape; variance is `mean + mean²/dispersion`.
    pub dispersion: f64,
}

impl Default for EngagementConfig {
    fn default() -> Self {
        EngagementConfig {
            blackmarket_retweets: 40.0,
            blackmarket_likes: 60.0,
            genuine_retweets: 3.0,
            genuine_likes: 8.0,
            dispersion: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub blackmarket: usize,
    pub genuine: usize,
    /// Fraction of each class drawn as boundary examples.
    pub difficulty: f64,
    pub genuine_url_prob: f64,
    pub genuine_hashtag_prob: f64,
    pub category_weights: [f64; 6],
    pub engagement: EngagementConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            blackmarket: 1796,
            genuine: 2000,
            difficulty: 0.05,
            genuine_url_prob: 0.2,
            genuine_hashtag_prob: 0.1,
            category_weights: CATEGORY_WEIGHTS,
            engagement: EngagementConfig::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.blackmarket == 0 || self.genuine == 0 {
            return bad("class sizes must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.difficulty) {
            return bad("difficulty must lie in [0, 1]");
        }
        for p in [self.genuine_url_prob, self.genuine_hashtag_prob] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        if self.category_weights.iter().any(|&w| !(w >= 0.0)) || self.category_weights.iter().sum::<f64>() <= 0.0 {
            return bad("category weights must be non-negative with a positive sum");
        }
        let e = &self.engagement;
        let means = [
            e.blackmarket_retweets,
            e.blackmarket_likes,
            e.genuine_retweets,
            e.genuine_likes,
        ];
        if means.iter().any(|&m| !(m > 0.0)) || !(e.dispersion > 0.0) {
            return bad("engagement means and dispersion must be positive");
        }
        Ok(())
    }
}

const CTA: &[&str] = &[
    "click",
    "follow",
    "retweet",
    "buy",
    "download",
    "subscribe",
    "join",
    "grab",
    "shop",
    "order",
    "register",
    "watch",
];
const SHORTENERS: &[&str] = &[
    "bit.ly",
    "t.co",
    "goo.gl",
    "ow.ly",
    "tinyurl.com",
    "buff.ly",
    "dlvr.it",
    "ift.tt",
];
const FULL_SITES: &[&str] = &[
    "www.youtube.com/watch",
    "www.nytimes.com/2019",
    "github.com/someone",
    "en.wikipedia.org/wiki",
    "www.instagram.com/p",
    "medium.com/story",
];

const PRODUCTS: &[&str] = &[
    "sneakers",
    "headphones",
    "smartwatch",
    "skincare kit",
    "phone case",
    "laptop bag",
    "protein shake",
    "sunglasses",
    "gaming chair",
    "perfume",
];
const SHOWS: &[&str] = &[
    "movie",
    "web series",
    "music video",
    "album",
    "podcast",
    "comedy special",
    "mixtape",
];
const PRIZES: &[&str] = &["iphone", "gift card", "vacation", "laptop", "cash prize", "console"];
const HEADLINES: &[&str] = &[
    "markets rally after rate cut",
    "storm hits the coast",
    "new policy announced today",
    "record heat across the region",
    "tech giant unveils new app",
];
const CANDIDATES: &[&str] = &[
    "our candidate",
    "the people's party",
    "real change",
    "the new leader",
    "a better tomorrow",
];
const CAUSES: &[&str] = &["charity", "fundraiser", "petition", "food bank", "animal shelter"];
const ADJ_PROMO: &[&str] = &[
    "amazing",
    "exclusive",
    "best",
    "hottest",
    "new",
    "limited",
    "incredible",
    "cheap",
];

const TAGS: [&[&str]; 6] = [
    &[
        "#sale",
        "#deal",
        "#offer",
        "#discount",
        "#shopnow",
        "#freeshipping",
        "#promo",
        "#bestseller",
    ],
    &[
        "#nowplaying",
        "#newmusic",
        "#trailer",
        "#bollywood",
        "#music",
        "#viral",
        "#mustwatch",
    ],
    &["#giveaway", "#win", "#free", "#followback", "#rt", "#contest", "#followers"],
    &["#breaking", "#news", "#update", "#headlines", "#latest"],
    &["#vote", "#election", "#politics", "#change", "#leader"],
    &["#support", "#share", "#help", "#community", "#donate", "#trending"],
];

const PROMO_TEMPLATES: [&[&str]; 6] = [
    &[
        "{cta} our {adj} {product} at {pct}% off",
        "{adj} {product} just dropped, {cta} now",
        "limited offer on {product}! {cta} before it ends",
        "{cta} the {adj} {product} today and save big",
    ],
    &[
        "watch the {adj} {show} everyone is talking about, {cta} now",
        "{cta} my {adj} {show} out now!!",
        "our {show} is finally here, {cta} and share",
    ],
    &[
        "win a free {prize}! {cta} and retweet to enter",
        "get {num} followers fast, {cta} now",
        "{cta} to claim your {prize} today!!!",
    ],
    &[
        "breaking: {headline}, {cta} for more",
        "{headline} - read the full story",
        "update: {headline}. {cta} for live coverage",
    ],
    &[
        "vote for {candidate} this {day}, {cta} and share",
        "{cta} if you stand with {candidate}",
        "the time is now, support {candidate}",
    ],
    &[
        "support our {cause} drive, {cta} and share",
        "please {cta} and help the {cause}",
        "every retweet helps our {cause}, {cta} now",
    ],
];

const CHAT_TEMPLATES: &[&str] = &[
    "just {activity} with {friend} and it was {mood}",
    "can't believe {event} today lol",
    "anyone else {doing} right now?",
    "good morning everyone, hope your {day} is going well",
    "haha that's so {mood}, i needed that",
    "thinking about {topic} again. why is it always like this",
    "finally finished {task}, time for {treat}",
    "{friend} says i should stop {doing} but i won't",
    "not sure how i feel about {topic} tbh",
    "so tired after {activity}, going to sleep early",
    "{friend} made {treat} and honestly it was {mood}",
];
const ACTIVITIES: &[&str] = &[
    "had lunch",
    "went hiking",
    "watched a film",
    "played football",
    "cooked dinner",
    "went shopping",
    "studied all day",
];
const FRIENDS: &[&str] = &[
    "my sister",
    "my roommate",
    "an old friend",
    "my mom",
    "the neighbours",
    "my brother",
    "my team",
];
const MOODS: &[&str] = &["great", "weird", "funny", "lovely", "awful", "sweet", "boring", "wonderful"];
const EVENTS: &[&str] = &[
    "it snowed",
    "the bus was late again",
    "my phone died",
    "the cat opened the door",
    "we lost the match",
];
const DOINGS: &[&str] = &[
    "drinking coffee",
    "reading",
    "watching the game",
    "doing laundry",
    "working late",
    "eating cereal",
];
const TOPICS: &[&str] = &["work", "the weekend", "exams", "moving house", "the weather", "my plans"];
const TASKS: &[&str] = &["my essay", "the report", "cleaning the kitchen", "the puzzle", "my run"];
const TREATS: &[&str] = &["pizza", "ice cream", "tea", "a nap", "cake", "noodles"];
const DAYS: &[&str] = &["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const CHAT_TAGS: &[&str] = &["#mondaymotivation", "#tbt", "#weekend", "#coffee", "#life", "#family"];
const HANDLES: &[&str] = &["@alex", "@sam_k", "@priya", "@jdoe", "@mike88", "@lena"];
const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

fn fill(template: &str, rng: &mut SeededRng) -> String {
    let mut out = String::with_capacity(template.len() + 32);
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let end = start + rest[start..].find('}').expect("template slots are closed");
        let slot = &rest[start + 1..end];
        let value = match slot {
            "cta" => rng.choose(CTA).to_string(),
            "adj" => rng.choose(ADJ_PROMO).to_string(),
            "product" => rng.choose(PRODUCTS).to_string(),
            "show" => rng.choose(SHOWS).to_string(),
            "prize" => rng.choose(PRIZES).to_string(),
            "headline" => rng.choose(HEADLINES).to_string(),
            "candidate" => rng.choose(CANDIDATES).to_string(),
            "cause" => rng.choose(CAUSES).to_string(),
            "pct" => (10 + 5 * rng.below(12)).to_string(),
            "num" => (100 * (1 + rng.below(50))).to_string(),
            "day" => rng.choose(DAYS).to_string(),
            "activity" => rng.choose(ACTIVITIES).to_string(),
            "friend" => rng.choose(FRIENDS).to_string(),
            "mood" => rng.choose(MOODS).to_string(),
            "event" => rng.choose(EVENTS).to_string(),
            "doing" => rng.choose(DOINGS).to_string(),
            "topic" => rng.choose(TOPICS).to_string(),
            "task" => rng.choose(TASKS).to_string(),
            "treat" => rng.choose(TREATS).to_string(),
            other => panic!("unknown template slot {other:?}"),
        };
        out.push_str(&value);
        rest = &rest[end + 1..];
    }
    out.push_str(rest);
    out
}

fn slug(rng: &mut SeededRng, len: usize) -> String {
    (0..len).map(|_| *rng.choose(ALNUM) as char).collect()
}

fn short_url(rng: &mut SeededRng) -> String {
    let domain = rng.choose(SHORTENERS);
    format!("https://{domain}/{}", slug(rng, 7))
}

fn full_url(rng: &mut SeededRng) -> String {
    let site = rng.choose(FULL_SITES);
    format!("https://{site}/{}", slug(rng, 10).to_lowercase())
}

fn sample_category(weights: &[f64; 6], rng: &mut SeededRng) -> Category {
    let total: f64 = weights.iter().sum();
    let mut u = rng.uniform(0.0, total);
    for (c, &w) in Category::ALL.iter().zip(weights) {
        if u < w {
            return *c;
        }
        u -= w;
    }
    Category::Others
}

fn negative_binomial(mean: f64, dispersion: f64, rng: &mut SeededRng) -> u64 {
    let gamma = Gamma::new(dispersion, mean / dispersion).expect("positive gamma parameters");
    let rate: f64 = gamma.sample(rng);
    if rate <= 0.0 {
        return 0;
    }
    let poisson = Poisson::new(rate).expect("positive poisson rate");
    let draw: f64 = poisson.sample(rng);
    draw as u64
}

fn blackmarket_text(category: Category, boundary: bool, rng: &mut SeededRng) -> String {
    let c = category as usize;
    if boundary {
        // Conversational body with only a single shortened link.
        let body = fill(rng.choose(CHAT_TEMPLATES), rng);
        return format!("{body} {}", short_url(rng));
    }
    let mut text = fill(rng.choose(PROMO_TEMPLATES[c]), rng);
    let urls = 1 + rng.below(2);
    for _ in 0..urls {
        text.push(' ');
        text.push_str(&short_url(rng));
    }
    let tags = 1 + rng.below(4);
    let mut pool: Vec<&str> = TAGS[c].to_vec();
    rng.shuffle(&mut pool);
    for tag in pool.iter().take(tags) {
        text.push(' ');
        text.push_str(tag);
    }
    text
}

fn genuine_text(config: &SynthConfig, boundary: bool, rng: &mut SeededRng) -> String {
    if boundary {
        // Promotional wording and hashtags, but no shortened link.
        let c = rng.below(6);
        let mut text = fill(rng.choose(PROMO_TEMPLATES[c]), rng);
        text.push(' ');
        text.push_str(rng.choose(TAGS[c]));
        if rng.bernoulli(0.5) {
            text.push(' ');
            text.push_str(&full_url(rng));
        }
        return text;
    }
    let mut text = String::new();
    if rng.bernoulli(0.2) {
        text.push_str(rng.choose(HANDLES));
        text.push(' ');
    }
    text.push_str(&fill(rng.choose(CHAT_TEMPLATES), rng));
    if rng.bernoulli(config.genuine_url_prob) {
        text.push(' ');
        text.push_str(&full_url(rng));
    }
    if rng.bernoulli(config.genuine_hashtag_prob) {
        text.push(' ');
        text.push_str(rng.choose(CHAT_TAGS));
    }
    text
}

/// Generates `blackmarket + genuine` labeled records in shuffled order.
pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let root = SeededRng::new(seed);
    let mut rng = root.child("synth.records");
    let e = &config.engagement;

    let mut records = Vec::with_capacity(config.blackmarket + config.genuine);
    for _ in 0..config.blackmarket {
        let category = sample_category(&config.category_weights, &mut rng);
        let boundary = rng.bernoulli(config.difficulty);
        let mut r = TweetRecord::from_text("", blackmarket_text(category, boundary, &mut rng));
        r.lang = Some("en".into());
        r.is_reply = rng.bernoulli(0.05);
        r.media_count = rng.below(3) as u32;
        r.retweets_5d = negative_binomial(e.blackmarket_retweets, e.dispersion, &mut rng);
        r.likes_5d = negative_binomial(e.blackmarket_likes, e.dispersion, &mut rng);
        r.label = Some(Label::Blackmarket);
        r.category = Some(category);
        records.push(r);
    }
    for _ in 0..config.genuine {
        let boundary = rng.bernoulli(config.difficulty);
        let mut r = TweetRecord::from_text("", genuine_text(config, boundary, &mut rng));
        r.lang = Some("en".into());
        r.is_reply = rng.bernoulli(0.3);
        r.media_count = u32::from(rng.bernoulli(0.25));
        r.retweets_5d = negative_binomial(e.genuine_retweets, e.dispersion, &mut rng);
        r.likes_5d = negative_binomial(e.genuine_likes, e.dispersion, &mut rng);
        r.label = Some(Label::Genuine);
        records.push(r);
    }

    root.child("synth.order").shuffle(&mut records);
    for (i, r) in records.iter_mut().enumerate() {
        r.id = format!("t{:06}", i + 1);
    }
    let provenance = format!(
        "{GENERATOR_VERSION} seed={seed} config={}",
        serde_json::to_string(config).expect("config serializes")
    );
    Ok(Dataset::new(records, provenance))
}

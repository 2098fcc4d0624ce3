//! The tweet record shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Genuine,
    Blackmarket,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Genuine, Label::Blackmarket];

    /// Class index used by the classifier head: genuine = 0, blackmarket = 1.
    pub fn index(self) -> usize {
        match self {
            Label::Genuine => 0,
            Label::Blackmarket => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Genuine => "genuine",
            Label::Blackmarket => "blackmarket",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Promotional,
    Entertainment,
    Spam,
    News,
    Politics,
    Others,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Promotional,
        Category::Entertainment,
        Category::Spam,
        Category::News,
        Category::Politics,
        Category::Others,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Promotional => "Promotional",
            Category::Entertainment => "Entertainment",
            Category::Spam => "Spam",
            Category::News => "News",
            Category::Politics => "Politics",
            Category::Others => "Others",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// One tweet with its metadata and, when known, its label and five-day
/// engagement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
    #[serde(default)]
    pub is_reply: bool,
    #[serde(default)]
    pub media_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mentions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hashtags: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub urls: Option<Vec<String>>,
    /// Externally produced part-of-speech tags, one per word token. When
    /// present they replace the built-in tagger.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_tags: Option<Vec<String>>,
    #[serde(default)]
    pub retweets_5d: u64,
    #[serde(default)]
    pub likes_5d: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

impl TweetRecord {
    /// A bare record with only an id and text.
    pub fn from_text(id: impl Into<String>, text: impl Into<String>) -> Self {
        TweetRecord {
            id: id.into(),
            text: text.into(),
            lang: None,
            is_reply: false,
            media_count: 0,
            mentions: None,
            hashtags: None,
            urls: None,
            pos_tags: None,
            retweets_5d: 0,
            likes_5d: 0,
            label: None,
            category: None,
        }
    }
}

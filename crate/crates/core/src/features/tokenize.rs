//! Whitespace tokenizer that recognises mentions, hashtags and URLs.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    Mention,
    Hashtag,
    Url,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
}

impl Token {
    fn new(kind: TokenKind, text: impl Into<String>) -> Self {
        Token { kind, text: text.into() }
    }
}

/// Domains of common link shorteners, matched when a token has no scheme.
pub const SHORTENER_DOMAINS: &[&str] = &[
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
];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn entity(token: &str, sigil: char) -> Option<String> {
    let rest = token.strip_prefix(sigil)?;
    let name: String = rest.chars().take_while(|&c| is_word_char(c)).collect();
    (!name.is_empty()).then(|| format!("{sigil}{name}"))
}

pub fn is_url(token: &str) -> bool {
    let lower = token.to_lowercase();
    if lower.starts_with("http://") || lower.starts_with("https://") {
        return true;
    }
    let bare = lower.strip_prefix("www.").unwrap_or(&lower);
    SHORTENER_DOMAINS.iter().any(|d| {
        bare.strip_prefix(d)
            .is_some_and(|rest| rest.starts_with('/') && rest.len() > 1)
    })
}

/// Splits on whitespace and classifies each piece. Words have leading and
/// trailing non-alphanumeric characters stripped and are lowercased; pieces
/// that strip to nothing are dropped.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.split_whitespace()
        .filter_map(|piece| {
            if let Some(m) = entity(piece, '@') {
                Some(Token::new(TokenKind::Mention, m))
            } else if let Some(h) = entity(piece, '#') {
                Some(Token::new(TokenKind::Hashtag, h))
            } else if is_url(piece) {
                Some(Token::new(TokenKind::Url, piece))
            } else {
                let word = piece.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
                (!word.is_empty()).then(|| Token::new(TokenKind::Word, word))
            }
        })
        .collect()
}

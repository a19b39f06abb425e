//! Tokens and word splits.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{invalid, Result};
use crate::END_OF_WORD;

/// A subword unit. Word-final tokens are distinct from word-internal tokens
/// with the same text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token {
    text: String,
    is_word_final: bool,
}

impl Token {
    pub fn new(text: impl Into<String>, is_word_final: bool) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(invalid("token text must be non-empty"));
        }
        Ok(Self {
            text,
            is_word_final,
        })
    }

    /// Word-internal token. Panics on empty text; meant for literals.
    pub fn inner(text: &str) -> Self {
        Self::new(text, false).expect("non-empty token text")
    }

    /// Word-final token. Panics on empty text; meant for literals.
    pub fn last(text: &str) -> Self {
        Self::new(text, true).expect("non-empty token text")
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn is_word_final(&self) -> bool {
        self.is_word_final
    }

    /// Text plus `</w>` when word-final.
    pub fn rendered(&self) -> String {
        let mut out = String::with_capacity(self.text.len() + END_OF_WORD.len());
        out.push_str(&self.text);
        if self.is_word_final {
            out.push_str(END_OF_WORD);
        }
        out
    }

    /// Inverse of [`Token::rendered`]: a trailing `</w>` marks a word-final
    /// token.
    pub fn parse_rendered(rendered: &str) -> Result<Self> {
        match rendered.strip_suffix(END_OF_WORD) {
            Some(text) => Self::new(text, true),
            None => Self::new(rendered, false),
        }
    }

    /// Concatenation of `self` and `right`; finality follows `right`.
    pub fn concat(&self, right: &Token) -> Token {
        let mut text = String::with_capacity(self.text.len() + right.text.len());
        text.push_str(&self.text);
        text.push_str(&right.text);
        Token {
            text,
            is_word_final: right.is_word_final,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)?;
        if self.is_word_final {
            f.write_str(END_OF_WORD)?;
        }
        Ok(())
    }
}

/// Borrowed view of a [`Token`], hashing identically so maps keyed by
/// `Token` can be probed without allocating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct TokenRef<'a> {
    pub text: &'a str,
    pub is_word_final: bool,
}

impl hashbrown::Equivalent<Token> for TokenRef<'_> {
    fn equivalent(&self, key: &Token) -> bool {
        self.is_word_final == key.is_word_final && self.text == key.text
    }
}

/// The segmentation of one word: exactly the last token is word-final and
/// the token texts concatenate to the word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Split {
    tokens: Vec<Token>,
}

impl Split {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        let Some((last, rest)) = tokens.split_last() else {
            return Err(invalid("split must contain at least one token"));
        };
        if !last.is_word_final || rest.iter().any(Token::is_word_final) {
            return Err(invalid(
                "exactly the last token of a split must be word-final",
            ));
        }
        Ok(Self { tokens })
    }

    pub(crate) fn from_tokens_unchecked(tokens: Vec<Token>) -> Self {
        debug_assert!(Self::new(tokens.clone()).is_ok());
        Self { tokens }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The word this split covers.
    pub fn word(&self) -> String {
        self.tokens.iter().map(Token::text).collect()
    }

    pub fn into_tokens(self) -> Vec<Token> {
        self.tokens
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, token) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{token}")?;
        }
        Ok(())
    }
}

pub(crate) fn check_word(word: &str) -> Result<()> {
    if word.is_empty() {
        return Err(invalid("word must be non-empty"));
    }
    if word.chars().any(char::is_whitespace) {
        return Err(invalid("word must not contain whitespace"));
    }
    Ok(())
}

/// One token per unicode scalar value; only the last is word-final.
pub fn initial_split(word: &str) -> Result<Split> {
    check_word(word)?;
    let mut tokens: Vec<Token> = word
        .chars()
        .map(|c| Token {
            text: String::from(c),
            is_word_final: false,
        })
        .collect();
    if let Some(last) = tokens.last_mut() {
        last.is_word_final = true;
    }
    Ok(Split { tokens })
}

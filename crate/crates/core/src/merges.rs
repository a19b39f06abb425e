//! Ordered merge tables.
//!
//! A rule's position in the table is its priority: index 0 is applied first.
//! Besides the token-level lookup, the table interns every token that takes
//! part in a rule so segmentation can work on integer symbols.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::error::{Error, Result};
use crate::token::Token;

/// `left + right -> left·right`, applied with the given priority.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MergeRule {
    left: Token,
    right: Token,
    priority: u32,
}

impl MergeRule {
    pub fn left(&self) -> &Token {
        &self.left
    }

    pub fn right(&self) -> &Token {
        &self.right
    }

    pub fn priority(&self) -> u32 {
        self.priority
    }

    /// The token produced by applying this rule.
    pub fn result(&self) -> Token {
        self.left.concat(&self.right)
    }
}

/// Symbol id used for characters that appear in no rule.
pub(crate) const NO_SYMBOL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct PairMerge {
    pub priority: u32,
    pub result: u32,
}

#[derive(Hash)]
struct PairRef<'a>(&'a Token, &'a Token);

impl hashbrown::Equivalent<(Token, Token)> for PairRef<'_> {
    fn equivalent(&self, key: &(Token, Token)) -> bool {
        self.0 == &key.0 && self.1 == &key.1
    }
}

#[derive(Debug, Clone, Default)]
pub struct MergeTable {
    rules: Vec<MergeRule>,
    lookup: HashMap<(Token, Token), u32>,
    symbols: HashMap<Token, u32>,
    chars: HashMap<(char, bool), u32>,
    pairs: HashMap<(u32, u32), PairMerge>,
}

impl PartialEq for MergeTable {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules
    }
}

impl Eq for MergeTable {}

impl MergeTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a table from `(left, right)` pairs in priority order.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Token, Token)>,
    {
        let mut table = Self::new();
        for (left, right) in pairs {
            table.push(left, right)?;
        }
        Ok(table)
    }

    /// Appends a rule with the next (lowest) priority and returns it.
    pub fn push(&mut self, left: Token, right: Token) -> Result<u32> {
        if left.is_word_final() {
            return Err(Error::MergeTable(format!(
                "word-final token {left} cannot be the left side of a merge"
            )));
        }
        if self.lookup.contains_key(&PairRef(&left, &right)) {
            return Err(Error::MergeTable(format!("duplicate merge {left} {right}")));
        }
        let priority = u32::try_from(self.rules.len())
            .ok()
            .filter(|&p| p != u32::MAX)
            .ok_or_else(|| Error::MergeTable(String::from("too many rules")))?;

        let result = left.concat(&right);
        let l = self.intern(&left);
        let r = self.intern(&right);
        let out = self.intern(&result);
        self.pairs.insert(
            (l, r),
            PairMerge {
                priority,
                result: out,
            },
        );
        self.lookup.insert((left.clone(), right.clone()), priority);
        self.rules.push(MergeRule {
            left,
            right,
            priority,
        });
        Ok(priority)
    }

    fn intern(&mut self, token: &Token) -> u32 {
        if let Some(&id) = self.symbols.get(token) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.symbols.insert(token.clone(), id);
        let mut chars = token.text().chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            self.chars.insert((c, token.is_word_final()), id);
        }
        id
    }

    pub fn rules(&self) -> &[MergeRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, priority: u32) -> Option<&MergeRule> {
        self.rules.get(priority as usize)
    }

    /// Priority of the merge `left + right`, if the table has it.
    pub fn priority(&self, left: &Token, right: &Token) -> Option<u32> {
        self.lookup.get(&PairRef(left, right)).copied()
    }

    /// The first `k` rules as a table of their own.
    pub fn prefix(&self, k: usize) -> MergeTable {
        let mut table = MergeTable::new();
        for rule in self.rules.iter().take(k) {
            table
                .push(rule.left.clone(), rule.right.clone())
                .expect("prefix of a valid table is valid");
        }
        table
    }

    pub(crate) fn char_symbol(&self, c: char, is_word_final: bool) -> u32 {
        self.chars
            .get(&(c, is_word_final))
            .copied()
            .unwrap_or(NO_SYMBOL)
    }

    pub(crate) fn pair(&self, left: u32, right: u32) -> Option<PairMerge> {
        if left == NO_SYMBOL || right == NO_SYMBOL {
            return None;
        }
        self.pairs.get(&(left, right)).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn priorities_are_positions() {
        let table = MergeTable::from_pairs([
            (Token::inner("a"), Token::inner("b")),
            (Token::inner("ab"), Token::last("c")),
        ])
        .unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(
            table.priority(&Token::inner("a"), &Token::inner("b")),
            Some(0)
        );
        assert_eq!(
            table.priority(&Token::inner("ab"), &Token::last("c")),
            Some(1)
        );
        assert_eq!(
            table.priority(&Token::inner("ab"), &Token::inner("c")),
            None
        );
        assert_eq!(table.get(1).unwrap().result(), Token::last("abc"));
        for (i, rule) in table.rules().iter().enumerate() {
            assert_eq!(rule.priority() as usize, i);
            assert_eq!(
                table.priority(rule.left(), rule.right()),
                Some(rule.priority())
            );
        }
    }

    #[test]
    fn rejects_duplicates_and_final_left() {
        let mut table = MergeTable::new();
        table.push(Token::inner("a"), Token::inner("b")).unwrap();
        assert!(table.push(Token::inner("a"), Token::inner("b")).is_err());
        assert!(table.push(Token::last("a"), Token::inner("b")).is_err());
        // same texts, different finality: a different pair
        assert!(table.push(Token::inner("a"), Token::last("b")).is_ok());
    }

    #[test]
    fn prefix_keeps_order() {
        let table = MergeTable::from_pairs([
            (Token::inner("a"), Token::inner("b")),
            (Token::inner("b"), Token::inner("c")),
            (Token::inner("c"), Token::last("d")),
        ])
        .unwrap();
        let head = table.prefix(2);
        assert_eq!(head.rules(), &table.rules()[..2]);
        assert_eq!(table.prefix(10), table);
    }
}

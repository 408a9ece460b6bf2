//! Token-sequence extraction.
//!
//! An [`ExtractSpec`] names a sequence of token classes and an occurrence. A
//! match of the sequence is a chain of maximal runs, one per class, each
//! starting where the previous ended. Runs are maximal, so a match can never
//! be extended on either side, and at most one match starts at any position.
//! Matches are numbered by start position; a negative occurrence counts from
//! the end (`-1` is the last match).

use std::collections::HashMap;
use std::fmt;

/// Character class used by extraction tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenClass {
    Digits,
    Alnum,
    Alpha,
    Lower,
    Upper,
    Whitespace,
    /// Exactly one occurrence of this character.
    Punct(char),
}

impl TokenClass {
    /// Classes that are always tried, in ranking order. `Punct` classes are
    /// derived from the characters of the example strings.
    pub const GENERAL: [TokenClass; 6] = [
        TokenClass::Digits,
        TokenClass::Alnum,
        TokenClass::Alpha,
        TokenClass::Lower,
        TokenClass::Upper,
        TokenClass::Whitespace,
    ];

    pub fn matches(self, c: char) -> bool {
        match self {
            TokenClass::Digits => c.is_ascii_digit(),
            TokenClass::Alnum => c.is_alphabetic() || c.is_ascii_digit(),
            TokenClass::Alpha => c.is_alphabetic(),
            TokenClass::Lower => c.is_lowercase(),
            TokenClass::Upper => c.is_uppercase(),
            TokenClass::Whitespace => c.is_whitespace(),
            TokenClass::Punct(p) => c == p,
        }
    }

    /// True for characters that get a `Punct` class of their own.
    pub fn is_punct_char(c: char) -> bool {
        !(c.is_alphabetic() || c.is_ascii_digit() || c.is_whitespace())
    }

    pub(crate) fn rank(self) -> u32 {
        match self {
            TokenClass::Digits => 0,
            TokenClass::Alnum => 1,
            TokenClass::Alpha => 2,
            TokenClass::Lower => 3,
            TokenClass::Upper => 4,
            TokenClass::Whitespace => 5,
            TokenClass::Punct(c) => 6 + c as u32,
        }
    }

    /// End of the maximal run of this class starting exactly at `p`, if one
    /// starts there.
    fn run_at(self, s: &[char], p: usize) -> Option<usize> {
        if p >= s.len() || !self.matches(s[p]) {
            return None;
        }
        if let TokenClass::Punct(_) = self {
            return Some(p + 1);
        }
        if p > 0 && self.matches(s[p - 1]) {
            return None;
        }
        let mut e = p + 1;
        while e < s.len() && self.matches(s[e]) {
            e += 1;
        }
        Some(e)
    }

    pub fn name(self) -> String {
        match self {
            TokenClass::Digits => "Digits".into(),
            TokenClass::Alnum => "Alnum".into(),
            TokenClass::Alpha => "Alpha".into(),
            TokenClass::Lower => "Lower".into(),
            TokenClass::Upper => "Upper".into(),
            TokenClass::Whitespace => "Ws".into(),
            TokenClass::Punct(c) => crate::text::quote_char(c),
        }
    }

    pub fn from_name(name: &str) -> Option<TokenClass> {
        Some(match name {
            "Digits" => TokenClass::Digits,
            "Alnum" => TokenClass::Alnum,
            "Alpha" => TokenClass::Alpha,
            "Lower" => TokenClass::Lower,
            "Upper" => TokenClass::Upper,
            "Ws" => TokenClass::Whitespace,
            _ => return None,
        })
    }
}

/// The `occurrence`-th maximal match of a token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtractSpec {
    pub tokens: Vec<TokenClass>,
    pub occurrence: i32,
}

impl ExtractSpec {
    pub fn new(tokens: Vec<TokenClass>, occurrence: i32) -> Self {
        debug_assert!(!tokens.is_empty() && occurrence != 0);
        ExtractSpec { tokens, occurrence }
    }

    /// Applies the spec; `None` when the requested match does not exist.
    pub fn apply(&self, s: &str) -> Option<String> {
        let chars: Vec<char> = s.chars().collect();
        self.apply_chars(&chars)
            .map(|(a, b)| chars[a..b].iter().collect())
    }

    pub(crate) fn apply_chars(&self, s: &[char]) -> Option<(usize, usize)> {
        if self.occurrence > 0 {
            (0..s.len())
                .filter_map(|p| match_at(&self.tokens, s, p).map(|e| (p, e)))
                .nth(self.occurrence as usize - 1)
        } else {
            (0..s.len())
                .rev()
                .filter_map(|p| match_at(&self.tokens, s, p).map(|e| (p, e)))
                .nth(self.occurrence.unsigned_abs() as usize - 1)
        }
    }

    /// Ranking key: fewer tokens, then positive occurrences ascending, then
    /// negative occurrences by magnitude, then token classes.
    pub(crate) fn rank_key(&self) -> (usize, u32, Vec<u32>) {
        let occ = if self.occurrence > 0 {
            self.occurrence as u32 - 1
        } else {
            1000 + self.occurrence.unsigned_abs()
        };
        (
            self.tokens.len(),
            occ,
            self.tokens.iter().map(|t| t.rank()).collect(),
        )
    }
}

impl fmt::Display for ExtractSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let toks: Vec<String> = self.tokens.iter().map(|t| t.name()).collect();
        write!(f, "{{{}#{}}}", toks.join(","), self.occurrence)
    }
}

fn match_at(tokens: &[TokenClass], s: &[char], p: usize) -> Option<usize> {
    tokens.iter().try_fold(p, |pos, t| t.run_at(s, pos))
}

/// Every extraction spec (within the caps) that yields each substring of `s`.
///
/// Maps the extracted substring to its specs sorted best-first.
#[derive(Debug, Clone, Default)]
pub struct ExtractIndex {
    by_text: HashMap<String, Vec<ExtractSpec>>,
}

impl ExtractIndex {
    pub fn build(s: &str, max_tokens: usize, max_occurrence: usize) -> Self {
        let chars: Vec<char> = s.chars().collect();
        let mut classes: Vec<TokenClass> = TokenClass::GENERAL.to_vec();
        let mut puncts: Vec<char> = chars
            .iter()
            .copied()
            .filter(|c| TokenClass::is_punct_char(*c))
            .collect();
        puncts.sort_unstable();
        puncts.dedup();
        classes.extend(puncts.into_iter().map(TokenClass::Punct));

        // All matches per token sequence, in start order.
        let mut per_seq: HashMap<Vec<TokenClass>, Vec<(usize, usize)>> = HashMap::new();
        let mut stack: Vec<TokenClass> = Vec::new();
        for p in 0..chars.len() {
            collect(&chars, &classes, p, p, max_tokens, &mut stack, &mut per_seq);
        }

        let mut by_text: HashMap<String, Vec<ExtractSpec>> = HashMap::new();
        for (seq, matches) in per_seq {
            let n = matches.len();
            for (i, &(a, b)) in matches.iter().enumerate() {
                let text: String = chars[a..b].iter().collect();
                let entry = by_text.entry(text).or_default();
                if i < max_occurrence {
                    entry.push(ExtractSpec::new(seq.clone(), i as i32 + 1));
                }
                if n - i <= max_occurrence {
                    entry.push(ExtractSpec::new(seq.clone(), -((n - i) as i32)));
                }
            }
        }
        for specs in by_text.values_mut() {
            specs.sort_by_cached_key(|s| s.rank_key());
        }
        ExtractIndex { by_text }
    }

    pub fn specs_for(&self, text: &str) -> &[ExtractSpec] {
        self.by_text.get(text).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn collect(
    s: &[char],
    classes: &[TokenClass],
    start: usize,
    pos: usize,
    max_tokens: usize,
    stack: &mut Vec<TokenClass>,
    out: &mut HashMap<Vec<TokenClass>, Vec<(usize, usize)>>,
) {
    if stack.len() == max_tokens {
        return;
    }
    for &c in classes {
        if let Some(e) = c.run_at(s, pos) {
            stack.push(c);
            out.entry(stack.clone()).or_default().push((start, e));
            collect(s, classes, start, e, max_tokens, stack, out);
            stack.pop();
        }
    }
}

//! Phrase lexicons: normalized entries with longest-match lookup over
//! token n-grams. File format: one phrase per line, UTF-8, `#` comments.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tokenize::Token;

fn normalize(phrase: &str) -> String {
    phrase
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    pub name: String,
    entries: HashSet<String>,
    max_phrase_len: usize,
}

impl Lexicon {
    pub fn new(name: impl Into<String>, phrases: impl IntoIterator<Item = String>) -> Lexicon {
        let mut entries = HashSet::new();
        let mut max_phrase_len = 1;
        for phrase in phrases {
            let norm = normalize(&phrase);
            if norm.is_empty() {
                continue;
            }
            max_phrase_len = max_phrase_len.max(norm.split(' ').count());
            entries.insert(norm);
        }
        Lexicon {
            name: name.into(),
            entries,
            max_phrase_len,
        }
    }

    pub fn from_text(name: impl Into<String>, content: &str) -> Lexicon {
        Lexicon::new(
            name,
            content
                .lines()
                .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
                .map(String::from),
        )
    }

    pub fn from_file(name: impl Into<String>, path: &Path) -> Result<Lexicon> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Lexicon::from_text(name, &content))
    }

    /// Writes the normalized entries, sorted, one per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut entries: Vec<&str> = self.entries.iter().map(|s| s.as_str()).collect();
        entries.sort();
        let mut out = entries.join("\n");
        out.push('\n');
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_phrase_len(&self) -> usize {
        self.max_phrase_len
    }

    pub fn contains(&self, phrase: &str) -> bool {
        self.entries.contains(&normalize(phrase))
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|s| s.as_str())
    }

    /// Greedy longest-match over token surfaces, left to right. Returns
    /// one flag per token: covered by some matched phrase or not.
    pub fn match_tokens(&self, tokens: &[Token]) -> Vec<bool> {
        let n = tokens.len();
        let mut covered = vec![false; n];
        let surfaces: Vec<String> = tokens.iter().map(|t| normalize(&t.surface)).collect();
        let mut i = 0;
        while i < n {
            let mut matched = 0;
            let longest = self.max_phrase_len.min(n - i);
            for len in (1..=longest).rev() {
                let phrase = surfaces[i..i + len].join(" ");
                if self.entries.contains(&phrase) {
                    matched = len;
                    break;
                }
            }
            if matched > 0 {
                for flag in covered.iter_mut().skip(i).take(matched) {
                    *flag = true;
                }
                i += matched;
            } else {
                i += 1;
            }
        }
        covered
    }

    /// Longest-match spans `(first_token, last_token_exclusive)`.
    pub fn match_spans(&self, tokens: &[Token]) -> Vec<(usize, usize)> {
        let n = tokens.len();
        let surfaces: Vec<String> = tokens.iter().map(|t| normalize(&t.surface)).collect();
        let mut spans = Vec::new();
        let mut i = 0;
        while i < n {
            let mut matched = 0;
            let longest = self.max_phrase_len.min(n - i);
            for len in (1..=longest).rev() {
                let phrase = surfaces[i..i + len].join(" ");
                if self.entries.contains(&phrase) {
                    matched = len;
                    break;
                }
            }
            if matched > 0 {
                spans.push((i, i + matched));
                i += matched;
            } else {
                i += 1;
            }
        }
        spans
    }
}

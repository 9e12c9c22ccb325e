use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const OOV: u32 = 1;

const PAD_WORD: &str = "<pad>";
const OOV_WORD: &str = "<oov>";

/// Word <-> index bijection with reserved `PAD = 0` and `OOV = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `word`, or [`OOV`].
    pub fn index(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(OOV)
    }

    pub fn word(&self, index: u32) -> Option<&str> {
        self.words.get(index as usize).map(String::as_str)
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        tokenize(text).iter().map(|w| self.index(w)).collect()
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(words: Vec<String>) -> Result<Self> {
        if words.len() < 2 || words[0] != PAD_WORD || words[1] != OOV_WORD {
            return Err(Error::Format("vocabulary must start with <pad>, <oov>".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate().skip(2) {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(Vocabulary { words, index })
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

/// Builds a vocabulary from raw texts. Words seen at least `min_freq` times
/// get indices from 2 upward, most frequent first, ties in lexicographic
/// order.
pub fn build_vocabulary<'a, I>(texts: I, min_freq: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a str>,
{
    if min_freq == 0 {
        return Err(Error::Argument("min_freq must be at least 1".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for text in texts {
        for tok in tokenize(text) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = counts.into_iter().filter(|(_, c)| *c >= min_freq).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let words: Vec<String> =
        [PAD_WORD.to_string(), OOV_WORD.to_string()].into_iter().chain(kept.into_iter().map(|(w, _)| w)).collect();
    Vocabulary::try_from(words)
}

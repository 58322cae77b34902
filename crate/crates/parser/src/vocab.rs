use std::collections::HashMap;

use sentgraph::SentimentGraph;
use serde::{Deserialize, Serialize};

pub const UNK_WORD: usize = 0;
pub const PAD_CHAR: usize = 0;
pub const UNK_CHAR: usize = 1;

/// Word and character inventories, in order of first occurrence in the
/// training data.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    words: Vec<String>,
    chars: Vec<char>,
    #[serde(skip)]
    word_ids: HashMap<String, usize>,
    #[serde(skip)]
    char_ids: HashMap<char, usize>,
}

impl Vocab {
    pub fn build(data: &[SentimentGraph]) -> Vocab {
        let mut v = Vocab {
            words: vec!["<unk>".into()],
            chars: vec!['\u{0}', '\u{fffd}'],
            ..Default::default()
        };
        v.reindex();
        for g in data {
            for tok in &g.sentence.tokens {
                if !v.word_ids.contains_key(&tok.text) {
                    v.word_ids.insert(tok.text.clone(), v.words.len());
                    v.words.push(tok.text.clone());
                }
                for c in tok.text.chars() {
                    if !v.char_ids.contains_key(&c) {
                        v.char_ids.insert(c, v.chars.len());
                        v.chars.push(c);
                    }
                }
            }
        }
        v
    }

    /// Rebuilds the lookup tables after deserialization.
    pub fn reindex(&mut self) {
        self.word_ids = self
            .words
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, w)| (w.clone(), i))
            .collect();
        self.char_ids = self
            .chars
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, &c)| (c, i))
            .collect();
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn n_chars(&self) -> usize {
        self.chars.len()
    }

    pub fn word(&self, w: &str) -> usize {
        self.word_ids.get(w).copied().unwrap_or(UNK_WORD)
    }

    pub fn chars_of(&self, w: &str) -> Vec<usize> {
        w.chars()
            .map(|c| self.char_ids.get(&c).copied().unwrap_or(UNK_CHAR))
            .collect()
    }
}

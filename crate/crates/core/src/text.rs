//! Tokenization and vocabularies.
//!
//! One tokenizer serves the whole crate: corpus token budgets, model inputs,
//! and BLEU all count the same tokens. The rule is whitespace splitting with
//! every non-alphanumeric character emitted as its own token. No lowercasing
//! (names are case-sensitive PII).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::rng::fnv1a64;
use crate::{Error, Result};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Split `text` into tokens: maximal alphanumeric runs, plus one token per
/// remaining non-whitespace character.
pub fn tokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else {
            if let Some(s) = start.take() {
                out.push(&text[s..i]);
            }
            if !ch.is_whitespace() {
                out.push(&text[i..i + ch.len_utf8()]);
            }
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}

pub fn token_count(text: &str) -> usize {
    tokenize(text).len()
}

/// One side of a vocabulary: dense ids, specials at 0..=3, then tokens in
/// first-seen order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    ids: HashMap<String, u32>,
}

impl Vocab {
    pub fn build<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Vocab {
        let mut vocab = Vocab {
            tokens: SPECIALS.iter().map(|s| s.to_string()).collect(),
            ids: HashMap::new(),
        };
        vocab.rebuild_index();
        for text in texts {
            for tok in tokenize(text) {
                if !vocab.ids.contains_key(tok) {
                    vocab.ids.insert(tok.to_string(), vocab.tokens.len() as u32);
                    vocab.tokens.push(tok.to_string());
                }
            }
        }
        vocab
    }

    /// Restore a vocabulary from its serialized token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Vocab> {
        if tokens.len() < SPECIALS.len() || tokens[..4] != SPECIALS {
            return Err(Error::InvalidInput(
                "vocabulary must start with <pad>, <bos>, <eos>, <unk>".into(),
            ));
        }
        let mut vocab = Vocab {
            tokens,
            ids: HashMap::new(),
        };
        vocab.rebuild_index();
        Ok(vocab)
    }

    fn rebuild_index(&mut self) {
        self.ids = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Token id, or [`UNK`] when out of vocabulary.
    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        tokenize(text).into_iter().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut words = Vec::with_capacity(ids.len());
        for &id in ids {
            words.push(self.token(id).ok_or(Error::OutOfVocab {
                id,
                vocab_size: self.len(),
            })?);
        }
        Ok(words.join(" "))
    }

    /// Stable content hash of the token list, for checkpoint headers.
    pub fn content_hash(&self) -> String {
        let joined = self.tokens.join("\x1f");
        format!("{:016x}", fnv1a64(joined.as_bytes()))
    }
}

/// Source and target vocabularies of a parallel corpus.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct VocabPair {
    pub src: Vocab,
    pub tgt: Vocab,
}

impl VocabPair {
    /// Build both sides from (source, target) text pairs.
    pub fn build<'a, I>(pairs: I) -> VocabPair
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut srcs = Vec::new();
        let mut tgts = Vec::new();
        for (s, t) in pairs {
            srcs.push(s);
            tgts.push(t);
        }
        VocabPair {
            src: Vocab::build(srcs),
            tgt: Vocab::build(tgts),
        }
    }

    /// Encode a pair for training/scoring. The target gets a trailing
    /// [`EOS`] so decoding has a learnable stopping point.
    pub fn encode_pair(&self, src_text: &str, tgt_text: &str) -> EncodedPair {
        let mut tgt = self.tgt.encode(tgt_text);
        tgt.push(EOS);
        EncodedPair {
            src: self.src.encode(src_text),
            tgt,
        }
    }
}

/// A tokenized training unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPair {
    pub src: Vec<u32>,
    pub tgt: Vec<u32>,
}

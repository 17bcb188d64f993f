//! Tokenization, IDF tables and the token-level semantic similarity used by
//! the semantic-fidelity reward.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Lowercases and splits on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Document frequencies over a reference corpus.
///
/// `idf(t) = ln((N + 1) / (df(t) + 1)) + 1`; unseen tokens have `df = 0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    pub documents: u64,
    pub document_frequency: BTreeMap<String, u64>,
}

impl IdfTable {
    pub fn from_documents<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut table = IdfTable::default();
        for doc in docs {
            table.documents += 1;
            let mut tokens = tokenize(doc);
            tokens.sort_unstable();
            tokens.dedup();
            for t in tokens {
                *table.document_frequency.entry(t).or_insert(0) += 1;
            }
        }
        table
    }

    pub fn df(&self, token: &str) -> u64 {
        self.document_frequency.get(token).copied().unwrap_or(0)
    }

    pub fn idf(&self, token: &str) -> f64 {
        libm::log((self.documents as f64 + 1.0) / (self.df(token) as f64 + 1.0)) + 1.0
    }
}

/// A text similarity in `[0, 1]`. The semantic reward is written against this
/// trait so a neural scorer can be substituted without touching reward code.
pub trait SemanticSimilarity {
    fn similarity(&self, candidate: &str, reference: &str) -> f64;
}

/// BERTScore-shaped F1 with an exact-match token kernel.
///
/// Every candidate token is greedily matched to its best reference token
/// (similarity 1 on identical strings, 0 otherwise) and vice versa; precision
/// and recall are the IDF-weighted match rates of each side.
#[derive(Debug, Clone, Copy)]
pub struct IdfTokenF1<'a> {
    pub idf: &'a IdfTable,
}

impl<'a> IdfTokenF1<'a> {
    pub fn new(idf: &'a IdfTable) -> Self {
        Self { idf }
    }

    /// Precision, recall and F1 for pre-tokenized inputs.
    pub fn score_tokens(&self, candidate: &[String], reference: &[String]) -> (f64, f64, f64) {
        if candidate.is_empty() || reference.is_empty() {
            return (0.0, 0.0, 0.0);
        }
        let side = |from: &[String], to: &[String]| {
            let mut hit = 0.0;
            let mut total = 0.0;
            for t in from {
                let w = self.idf.idf(t);
                total += w;
                if to.contains(t) {
                    hit += w;
                }
            }
            hit / total
        };
        let precision = side(candidate, reference);
        let recall = side(reference, candidate);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        (precision, recall, f1.clamp(0.0, 1.0))
    }
}

impl SemanticSimilarity for IdfTokenF1<'_> {
    fn similarity(&self, candidate: &str, reference: &str) -> f64 {
        self.score_tokens(&tokenize(candidate), &tokenize(reference)).2
    }
}

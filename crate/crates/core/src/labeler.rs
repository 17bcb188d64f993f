//! Rule-based extraction of a [`LabelVector`] from findings prose.
//!
//! Text is split into clauses on `.`, `!`, `?` and `;`. Within a clause a
//! trigger phrase fires its category; a negation or uncertainty cue that
//! ends before the trigger starts puts it in scope. Uncertainty outranks
//! negation. Across clauses the last mention of a category wins. "No Finding"
//! is never read off the text: it is positive iff the other thirteen
//! categories all came out negative.
//!
//! Phrases are matched as whole token sequences after [`tokenize`].

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::labels::{LabelValue, LabelVector, Pathology, Provenance, CATEGORY_COUNT};
use crate::text::tokenize;

/// Anything that maps findings text to labels.
pub trait Labeler {
    fn extract(&self, text: &str) -> LabelVector;
}

/// Phrase lists for one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelerRule {
    pub category: Pathology,
    pub trigger_phrases: Vec<String>,
    pub negation_cues: Vec<String>,
    pub uncertainty_cues: Vec<String>,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    category: Pathology,
    triggers: Vec<Vec<String>>,
    negation: Vec<Vec<String>>,
    uncertainty: Vec<Vec<String>>,
}

/// One rule per category, compiled to token sequences.
#[derive(Debug, Clone)]
pub struct LabelerLexicon {
    version: String,
    rules: Vec<LabelerRule>,
    compiled: Vec<CompiledRule>,
}

/// On-disk lexicon shape: shared cue lists plus trigger phrases per category name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconFile {
    pub version: String,
    pub negation_cues: Vec<String>,
    pub uncertainty_cues: Vec<String>,
    /// Canonical category name to trigger phrases.
    pub categories: alloc::collections::BTreeMap<String, Vec<String>>,
}

impl LabelerLexicon {
    /// Validates and compiles a rule set. Every problem is reported.
    pub fn new(version: impl Into<String>, mut rules: Vec<LabelerRule>) -> Result<Self, Vec<String>> {
        let mut problems = Vec::new();
        let mut seen = [false; CATEGORY_COUNT];
        for rule in &rules {
            let name = rule.category.name();
            if core::mem::replace(&mut seen[rule.category.index()], true) {
                problems.push(alloc::format!("duplicate rule for \"{name}\""));
            }
            if rule.trigger_phrases.is_empty() {
                problems.push(alloc::format!("\"{name}\" has no trigger phrases"));
            }
            if rule.negation_cues.is_empty() {
                problems.push(alloc::format!("\"{name}\" has no negation cues"));
            }
            if rule.uncertainty_cues.is_empty() {
                problems.push(alloc::format!("\"{name}\" has no uncertainty cues"));
            }
            let lists = [&rule.trigger_phrases, &rule.negation_cues, &rule.uncertainty_cues];
            for phrase in lists.into_iter().flatten() {
                if tokenize(phrase).is_empty() {
                    problems.push(alloc::format!("\"{name}\" has a phrase with no tokens: {phrase:?}"));
                }
            }
        }
        for c in Pathology::ALL {
            if !seen[c.index()] {
                problems.push(alloc::format!("no rule for \"{}\"", c.name()));
            }
        }
        if !problems.is_empty() {
            return Err(problems);
        }
        rules.sort_by_key(|r| r.category);
        let compile = |list: &[String]| list.iter().map(|p| tokenize(p)).collect::<Vec<_>>();
        let compiled = rules
            .iter()
            .map(|r| CompiledRule {
                category: r.category,
                triggers: compile(&r.trigger_phrases),
                negation: compile(&r.negation_cues),
                uncertainty: compile(&r.uncertainty_cues),
            })
            .collect();
        Ok(Self { version: version.into(), rules, compiled })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn rules(&self) -> &[LabelerRule] {
        &self.rules
    }

    pub fn rule(&self, category: Pathology) -> &LabelerRule {
        &self.rules[category.index()]
    }

    pub fn from_file(file: &LexiconFile) -> Result<Self, Vec<String>> {
        let mut problems = Vec::new();
        let mut rules = Vec::new();
        for (name, triggers) in &file.categories {
            match Pathology::from_name(name) {
                Some(category) => rules.push(LabelerRule {
                    category,
                    trigger_phrases: triggers.clone(),
                    negation_cues: file.negation_cues.clone(),
                    uncertainty_cues: file.uncertainty_cues.clone(),
                }),
                None => problems.push(alloc::format!("unknown category \"{name}\"")),
            }
        }
        match Self::new(file.version.clone(), rules) {
            Ok(lex) if problems.is_empty() => Ok(lex),
            Ok(_) => Err(problems),
            Err(more) => {
                problems.extend(more);
                Err(problems)
            }
        }
    }

    /// File form of this lexicon. Cue lists are taken from the first rule.
    pub fn to_file(&self) -> LexiconFile {
        LexiconFile {
            version: self.version.clone(),
            negation_cues: self.rules[0].negation_cues.clone(),
            uncertainty_cues: self.rules[0].uncertainty_cues.clone(),
            categories: self
                .rules
                .iter()
                .map(|r| (r.category.name().to_string(), r.trigger_phrases.clone()))
                .collect(),
        }
    }

    /// Labels a findings narrative.
    pub fn extract_labels(&self, text: &str) -> LabelVector {
        let mut out = LabelVector::filled(LabelValue::Negative, Provenance::LabelerOutput);
        for clause in split_clauses(text) {
            let tokens = tokenize(clause);
            if tokens.is_empty() {
                continue;
            }
            for rule in &self.compiled {
                if rule.category == Pathology::NoFinding {
                    continue;
                }
                if let Some(status) = clause_status(&tokens, rule) {
                    out.set(rule.category, status);
                }
            }
        }
        out.derive_no_finding();
        out
    }
}

impl Labeler for LabelerLexicon {
    fn extract(&self, text: &str) -> LabelVector {
        self.extract_labels(text)
    }
}

/// Clauses end at sentence terminators and semicolons.
pub fn split_clauses(text: &str) -> impl Iterator<Item = &str> {
    text.split(['.', '!', '?', ';']).filter(|c| !c.trim().is_empty())
}

/// Start offsets of every occurrence of `phrase` in `tokens`.
fn occurrences<'a>(tokens: &'a [String], phrase: &'a [String]) -> impl Iterator<Item = usize> + 'a {
    let n = phrase.len();
    (0..tokens.len().saturating_sub(n - 1)).filter(move |&i| tokens[i..i + n] == *phrase)
}

/// True if some cue ends at or before token offset `pos`.
fn cue_before(tokens: &[String], cues: &[Vec<String>], pos: usize) -> bool {
    cues.iter().any(|cue| occurrences(tokens, cue).any(|start| start + cue.len() <= pos))
}

/// Status of the last trigger occurrence in a clause, if any fired.
fn clause_status(tokens: &[String], rule: &CompiledRule) -> Option<LabelValue> {
    let last = rule.triggers.iter().filter_map(|t| occurrences(tokens, t).last()).max()?;
    Some(if cue_before(tokens, &rule.uncertainty, last) {
        LabelValue::Uncertain
    } else if cue_before(tokens, &rule.negation, last) {
        LabelValue::Negative
    } else {
        LabelValue::Positive
    })
}

pub const DEFAULT_NEGATION_CUES: &[&str] = &[
    "no",
    "not",
    "without",
    "free of",
    "negative for",
    "resolved",
    "absence of",
    "clear of",
];

pub const DEFAULT_UNCERTAINTY_CUES: &[&str] = &[
    "possible",
    "possibly",
    "probable",
    "likely",
    "may represent",
    "may be",
    "could represent",
    "cannot exclude",
    "cannot be excluded",
    "questionable",
    "suspicious for",
    "concerning for",
    "suggestive of",
    "versus",
];

/// Built-in trigger phrases, in category order. "No Finding" carries a phrase
/// for completeness but its value is always derived.
pub const DEFAULT_TRIGGERS: [&[&str]; CATEGORY_COUNT] = [
    &["atelectasis", "atelectatic", "collapse"],
    &["cardiomegaly", "enlarged heart", "heart is enlarged", "heart size is enlarged"],
    &["consolidation", "consolidations", "consolidative"],
    &["edema", "vascular congestion"],
    &[
        "enlarged cardiomediastinum",
        "cardiomediastinal silhouette is enlarged",
        "widened mediastinum",
        "mediastinal widening",
        "widening of the mediastinum",
    ],
    &["fracture", "fractures"],
    &["nodule", "nodules", "mass", "masses", "lung lesion", "lesion", "lesions"],
    &["opacity", "opacities", "opacification"],
    &["acute cardiopulmonary process"],
    &["pleural effusion", "pleural effusions", "effusion", "effusions"],
    &["pleural thickening", "pleural plaque", "pleural plaques", "fibrothorax"],
    &["pneumonia", "pneumonias"],
    &["pneumothorax", "pneumothoraces"],
    &[
        "support device",
        "support devices",
        "picc",
        "catheter",
        "port a cath",
        "endotracheal tube",
        "pacemaker",
        "sternotomy wires",
    ],
];

pub const DEFAULT_LEXICON_VERSION: &str = "rrg-default-1";

impl Default for LabelerLexicon {
    fn default() -> Self {
        let owned = |list: &[&str]| list.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let rules = Pathology::ALL
            .iter()
            .map(|&category| LabelerRule {
                category,
                trigger_phrases: owned(DEFAULT_TRIGGERS[category.index()]),
                negation_cues: owned(DEFAULT_NEGATION_CUES),
                uncertainty_cues: owned(DEFAULT_UNCERTAINTY_CUES),
            })
            .collect();
        Self::new(DEFAULT_LEXICON_VERSION, rules).expect("built-in lexicon is valid")
    }
}

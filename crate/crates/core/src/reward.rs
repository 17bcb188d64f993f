//! The five-component composite reward.
//!
//! | component | compares | scale |
//! |-----------|----------|-------|
//! | R1 consistency | labels extracted from think vs. answer labels | CFS |
//! | R2 think accuracy | labels extracted from think vs. ground truth | CFS |
//! | R3 answer accuracy | answer labels vs. ground truth | CFS |
//! | R4 semantic | think text vs. reference findings | similarity in [0, 1] |
//! | R5 format | tag structure and JSON validity | {0, 0.5, 1} |
//!
//! CFS averages an asymmetric per-category score over the fourteen
//! categories; the score table is data ([`CfsScoringMatrix`]).

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::labeler::Labeler;
use crate::labels::{LabelValue, LabelVector, PartialLabels, CATEGORY_COUNT};
use crate::output::{FormatFlags, StructuredOutput};
use crate::text::SemanticSimilarity;

/// Lowest and highest admissible per-category scores.
pub const CFS_MIN: f64 = -0.3;
pub const CFS_MAX: f64 = 2.0;

/// Scores for one ground-truth row, by predicted value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfsRow {
    pub positive: f64,
    pub negative: f64,
    pub uncertain: f64,
    pub missing: f64,
}

impl CfsRow {
    fn get(&self, predicted: Option<LabelValue>) -> f64 {
        match predicted {
            Some(LabelValue::Positive) => self.positive,
            Some(LabelValue::Negative) => self.negative,
            Some(LabelValue::Uncertain) => self.uncertain,
            None => self.missing,
        }
    }

    fn entries(&self) -> [(&'static str, f64); 4] {
        [
            ("positive", self.positive),
            ("negative", self.negative),
            ("uncertain", self.uncertain),
            ("missing", self.missing),
        ]
    }
}

/// The asymmetric per-category scoring function, indexed by ground truth row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfsScoringMatrix {
    pub positive: CfsRow,
    pub negative: CfsRow,
    pub uncertain: CfsRow,
}

impl Default for CfsScoringMatrix {
    fn default() -> Self {
        Self {
            positive: CfsRow { positive: 2.0, negative: -0.3, uncertain: 0.0, missing: 0.0 },
            negative: CfsRow { positive: -0.3, negative: 1.0, uncertain: 0.0, missing: 0.0 },
            uncertain: CfsRow { positive: 0.5, negative: 0.5, uncertain: 0.5, missing: 0.5 },
        }
    }
}

impl CfsScoringMatrix {
    #[inline]
    pub fn score(&self, truth: LabelValue, predicted: Option<LabelValue>) -> f64 {
        match truth {
            LabelValue::Positive => self.positive.get(predicted),
            LabelValue::Negative => self.negative.get(predicted),
            LabelValue::Uncertain => self.uncertain.get(predicted),
        }
    }

    /// Every entry must be finite and inside `[CFS_MIN, CFS_MAX]`.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut problems = Vec::new();
        for (row_name, row) in [("positive", &self.positive), ("negative", &self.negative), ("uncertain", &self.uncertain)] {
            for (col, v) in row.entries() {
                if !(CFS_MIN..=CFS_MAX).contains(&v) {
                    problems.push(alloc::format!(
                        "cfs_matrix.{row_name}.{col} = {v} lies outside [{CFS_MIN}, {CFS_MAX}]"
                    ));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

/// Component weights λ1..λ5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub consistency: f64,
    pub think_accuracy: f64,
    pub answer_accuracy: f64,
    pub semantic: f64,
    pub format: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { consistency: 0.2, think_accuracy: 0.5, answer_accuracy: 1.0, semantic: 0.3, format: 0.5 }
    }
}

impl RewardWeights {
    pub const ZERO: RewardWeights =
        RewardWeights { consistency: 0.0, think_accuracy: 0.0, answer_accuracy: 0.0, semantic: 0.0, format: 0.0 };

    pub fn as_array(&self) -> [f64; 5] {
        [self.consistency, self.think_accuracy, self.answer_accuracy, self.semantic, self.format]
    }

    pub fn from_array(w: [f64; 5]) -> Self {
        Self { consistency: w[0], think_accuracy: w[1], answer_accuracy: w[2], semantic: w[3], format: w[4] }
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let names = ["consistency", "think_accuracy", "answer_accuracy", "semantic", "format"];
        let problems: Vec<String> = names
            .iter()
            .zip(self.as_array())
            .filter(|(_, w)| !(w.is_finite() && *w >= 0.0))
            .map(|(n, w)| alloc::format!("weights.{n} = {w} must be a finite non-negative number"))
            .collect();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

/// Per-category CFS terms behind R1..R3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CfsDiagnostics {
    pub consistency: [f64; CATEGORY_COUNT],
    pub think_accuracy: [f64; CATEGORY_COUNT],
    pub answer_accuracy: [f64; CATEGORY_COUNT],
}

/// Scored candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub r1_consistency: f64,
    pub r2_think_acc: f64,
    pub r3_answer_acc: f64,
    pub r4_semantic: f64,
    pub r5_format: f64,
    pub total: f64,
    pub weights: RewardWeights,
    pub diagnostics: CfsDiagnostics,
}

impl RewardBreakdown {
    pub fn components(&self) -> [f64; 5] {
        [self.r1_consistency, self.r2_think_acc, self.r3_answer_acc, self.r4_semantic, self.r5_format]
    }
}

/// Per-category terms of a CFS evaluation.
pub fn cfs_terms(predicted: &PartialLabels, truth: &LabelVector, matrix: &CfsScoringMatrix) -> [f64; CATEGORY_COUNT] {
    let mut terms = [0.0; CATEGORY_COUNT];
    for (i, (term, truth)) in terms.iter_mut().zip(truth.values()).enumerate() {
        *term = matrix.score(*truth, predicted[i]);
    }
    terms
}

/// Clinical F1 Score: mean per-category score. Missing predictions use the matrix's missing column.
pub fn cfs(predicted: &PartialLabels, truth: &LabelVector, matrix: &CfsScoringMatrix) -> f64 {
    mean(&cfs_terms(predicted, truth, matrix))
}

fn mean(terms: &[f64; CATEGORY_COUNT]) -> f64 {
    terms.iter().sum::<f64>() / CATEGORY_COUNT as f64
}

/// R1: answer labels scored against the labels read off the think text.
pub fn reward_r1_consistency(out: &StructuredOutput, labeler: &dyn Labeler, matrix: &CfsScoringMatrix) -> f64 {
    cfs(&out.answer_prediction(), &labeler.extract(&out.think_text), matrix)
}

/// R2: labels read off the think text scored against ground truth.
pub fn reward_r2_think_acc(
    out: &StructuredOutput,
    truth: &LabelVector,
    labeler: &dyn Labeler,
    matrix: &CfsScoringMatrix,
) -> f64 {
    cfs(&labeler.extract(&out.think_text).as_prediction(), truth, matrix)
}

/// R3: answer labels scored against ground truth.
pub fn reward_r3_answer_acc(out: &StructuredOutput, truth: &LabelVector, matrix: &CfsScoringMatrix) -> f64 {
    cfs(&out.answer_prediction(), truth, matrix)
}

/// R4: semantic similarity of the think text to the reference findings, clamped to [0, 1].
pub fn reward_r4_semantic(think: &str, reference: &str, similarity: &dyn SemanticSimilarity) -> f64 {
    similarity.similarity(think, reference).clamp(0.0, 1.0)
}

/// R5: half a point each for the tag structure and a JSON-object answer.
pub fn reward_r5_format(flags: &FormatFlags) -> f64 {
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    0.5 * ind(flags.tags_present) + 0.5 * ind(flags.json_valid)
}

/// Everything needed to score a candidate besides the candidate and its reference.
#[derive(Clone, Copy)]
pub struct RewardContext<'a> {
    pub weights: RewardWeights,
    pub matrix: CfsScoringMatrix,
    pub labeler: &'a dyn Labeler,
    pub similarity: &'a dyn SemanticSimilarity,
}

/// Scores one candidate: all five components and their weighted sum.
pub fn reward_total(
    out: &StructuredOutput,
    truth_labels: &LabelVector,
    truth_text: &str,
    ctx: &RewardContext<'_>,
) -> RewardBreakdown {
    let extracted = ctx.labeler.extract(&out.think_text);
    let answer = out.answer_prediction();
    let consistency = cfs_terms(&answer, &extracted, &ctx.matrix);
    let think_accuracy = cfs_terms(&extracted.as_prediction(), truth_labels, &ctx.matrix);
    let answer_accuracy = cfs_terms(&answer, truth_labels, &ctx.matrix);

    let r1 = mean(&consistency);
    let r2 = mean(&think_accuracy);
    let r3 = mean(&answer_accuracy);
    let r4 = reward_r4_semantic(&out.think_text, truth_text, ctx.similarity);
    let r5 = reward_r5_format(&out.flags);
    let w = ctx.weights;
    let total = w.consistency * r1 + w.think_accuracy * r2 + w.answer_accuracy * r3 + w.semantic * r4 + w.format * r5;
    RewardBreakdown {
        r1_consistency: r1,
        r2_think_acc: r2,
        r3_answer_acc: r3,
        r4_semantic: r4,
        r5_format: r5,
        total,
        weights: w,
        diagnostics: CfsDiagnostics { consistency, think_accuracy, answer_accuracy },
    }
}

//! Evaluation metrics: BLEU-1..4, ROUGE-L, multilabel F1 and the
//! self-consistency score.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labeler::Labeler;
use crate::labels::{LabelValue, LabelVector, Provenance, CATEGORY_COUNT};
use crate::output::StructuredOutput;
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{predictions} predictions against {truths} references")]
pub struct LengthMismatch {
    pub predictions: usize,
    pub truths: usize,
}

/// How label values collapse to the binary positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertainPolicy {
    #[default]
    AsNegative,
    AsPositive,
}

impl UncertainPolicy {
    #[inline]
    fn positive(self, v: LabelValue) -> bool {
        match v {
            LabelValue::Positive => true,
            LabelValue::Negative => false,
            LabelValue::Uncertain => self == UncertainPolicy::AsPositive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Mode {
    Macro,
    Micro,
}

fn ngrams(tokens: &[String], n: usize) -> Vec<&[String]> {
    if tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).collect()
}

/// Clipped n-gram matches and the candidate n-gram count.
fn clipped_matches(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let cand = ngrams(candidate, n);
    let mut refs = ngrams(reference, n);
    refs.sort_unstable();
    let mut used = vec![false; refs.len()];
    let mut hits = 0;
    for g in &cand {
        // each reference n-gram can be credited once
        let start = refs.partition_point(|r| r < g);
        if let Some(slot) = (start..refs.len()).take_while(|&i| refs[i] == *g).find(|&i| !used[i]) {
            used[slot] = true;
            hits += 1;
        }
    }
    (hits, cand.len())
}

/// Corpus BLEU with uniform weights up to `n` and a brevity penalty; no smoothing.
///
/// Clipped counts and lengths are pooled over all pairs before the geometric mean.
pub fn corpus_bleu(pairs: &[(Vec<String>, Vec<String>)], n: usize) -> f64 {
    assert!((1..=4).contains(&n), "BLEU order must be 1..=4");
    let mut hits = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (cand, reference) in pairs {
        cand_len += cand.len();
        ref_len += reference.len();
        for k in 1..=n {
            let (h, t) = clipped_matches(cand, reference, k);
            hits[k - 1] += h;
            totals[k - 1] += t;
        }
    }
    if cand_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for k in 0..n {
        if hits[k] == 0 || totals[k] == 0 {
            return 0.0;
        }
        log_sum += libm::log(hits[k] as f64 / totals[k] as f64);
    }
    let bp = if cand_len > ref_len { 1.0 } else { libm::exp(1.0 - ref_len as f64 / cand_len as f64) };
    bp * libm::exp(log_sum / n as f64)
}

/// Sentence-level BLEU-n.
pub fn bleu_n(candidate: &[String], reference: &[String], n: usize) -> f64 {
    corpus_bleu(&[(candidate.to_vec(), reference.to_vec())], n)
}

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L F-measure (β = 1) over token sequences.
pub fn rouge_l(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(candidate, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / candidate.len() as f64;
    let r = lcs / reference.len() as f64;
    2.0 * p * r / (p + r)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Confusion {
    tp: u64,
    fp: u64,
    fn_: u64,
}

impl Confusion {
    fn support(&self) -> u64 {
        self.tp + self.fp + self.fn_
    }

    fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

fn confusion(preds: &[LabelVector], truths: &[LabelVector], policy: UncertainPolicy) -> [Confusion; CATEGORY_COUNT] {
    let mut table = [Confusion::default(); CATEGORY_COUNT];
    for (p, t) in preds.iter().zip(truths) {
        for (i, cell) in table.iter_mut().enumerate() {
            match (policy.positive(p.values()[i]), policy.positive(t.values()[i])) {
                (true, true) => cell.tp += 1,
                (true, false) => cell.fp += 1,
                (false, true) => cell.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    table
}

/// Multilabel F1 with the positive class as the event.
///
/// Macro averages per-category F1 over categories that have any positive
/// truth or positive prediction; the rest are skipped. Micro pools TP, FP and
/// FN over all categories. When nothing is positive anywhere the agreement is
/// vacuous and both modes return 1.0.
pub fn multilabel_f1(
    preds: &[LabelVector],
    truths: &[LabelVector],
    mode: F1Mode,
    policy: UncertainPolicy,
) -> Result<f64, LengthMismatch> {
    if preds.len() != truths.len() {
        return Err(LengthMismatch { predictions: preds.len(), truths: truths.len() });
    }
    let table = confusion(preds, truths, policy);
    Ok(match mode {
        F1Mode::Micro => {
            let pooled = table.iter().fold(Confusion::default(), |acc, c| Confusion {
                tp: acc.tp + c.tp,
                fp: acc.fp + c.fp,
                fn_: acc.fn_ + c.fn_,
            });
            pooled.f1()
        }
        F1Mode::Macro => {
            let active: Vec<f64> = table.iter().filter(|c| c.support() > 0).map(Confusion::f1).collect();
            if active.is_empty() {
                1.0
            } else {
                active.iter().sum::<f64>() / active.len() as f64
            }
        }
    })
}

/// Answer labels as a full vector; missing categories count as non-positive.
pub fn answer_or_negative(out: &StructuredOutput) -> LabelVector {
    let pred = out.answer_prediction();
    LabelVector::new(
        core::array::from_fn(|i| pred[i].unwrap_or(LabelValue::Negative)),
        Provenance::AnswerBlock,
    )
}

/// Self-consistency: F1 of the answer labels against labels read off the
/// think text, as (macro, micro).
pub fn scs(outputs: &[StructuredOutput], labeler: &dyn Labeler, policy: UncertainPolicy) -> (f64, f64) {
    let truths: Vec<LabelVector> = outputs.iter().map(|o| labeler.extract(&o.think_text)).collect();
    let preds: Vec<LabelVector> = outputs.iter().map(answer_or_negative).collect();
    let f = |mode| multilabel_f1(&preds, &truths, mode, policy).expect("equal lengths by construction");
    (f(F1Mode::Macro), f(F1Mode::Micro))
}

/// Externally computed scores a report can carry alongside the built-in metrics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalScores {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meteor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bertscore: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radgraph: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radcliq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub green: Option<f64>,
}

/// Full evaluation of a prediction set. All values are fractions in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub bleu: [f64; 4],
    pub rouge_l: f64,
    pub report_macro_f1: f64,
    pub report_micro_f1: f64,
    pub answer_macro_f1: f64,
    pub answer_micro_f1: f64,
    pub scs_macro: f64,
    pub scs_micro: f64,
    pub n_examples: usize,
    #[serde(default)]
    pub external: ExternalScores,
}

/// Scores parsed outputs against reference findings and ground-truth labels.
pub fn evaluate(
    outputs: &[StructuredOutput],
    reference_texts: &[&str],
    truths: &[LabelVector],
    labeler: &dyn Labeler,
    policy: UncertainPolicy,
) -> Result<MetricsReport, LengthMismatch> {
    if outputs.len() != truths.len() || outputs.len() != reference_texts.len() {
        return Err(LengthMismatch { predictions: outputs.len(), truths: truths.len().min(reference_texts.len()) });
    }
    let pairs: Vec<(Vec<String>, Vec<String>)> = outputs
        .iter()
        .zip(reference_texts)
        .map(|(o, r)| (tokenize(&o.think_text), tokenize(r)))
        .collect();
    let bleu = core::array::from_fn(|k| corpus_bleu(&pairs, k + 1));
    let rouge = if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().map(|(c, r)| rouge_l(c, r)).sum::<f64>() / pairs.len() as f64
    };
    let extracted: Vec<LabelVector> = outputs.iter().map(|o| labeler.extract(&o.think_text)).collect();
    let answers: Vec<LabelVector> = outputs.iter().map(answer_or_negative).collect();
    let f1 = |p: &[LabelVector], t: &[LabelVector], m| multilabel_f1(p, t, m, policy);
    Ok(MetricsReport {
        bleu,
        rouge_l: rouge,
        report_macro_f1: f1(&extracted, truths, F1Mode::Macro)?,
        report_micro_f1: f1(&extracted, truths, F1Mode::Micro)?,
        answer_macro_f1: f1(&answers, truths, F1Mode::Macro)?,
        answer_micro_f1: f1(&answers, truths, F1Mode::Micro)?,
        scs_macro: f1(&answers, &extracted, F1Mode::Macro)?,
        scs_micro: f1(&answers, &extracted, F1Mode::Micro)?,
        n_examples: outputs.len(),
        external: ExternalScores::default(),
    })
}

//! Group relative policy optimization on the toy factorized policy.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{reference_actions, render_actions, Split, StudyRecord};
use crate::labeler::Labeler;
use crate::labels::{LabelVector, Pathology};
use crate::metrics::{evaluate, scs, LengthMismatch, MetricsReport, UncertainPolicy};
use crate::output::{parse_output, StructuredOutput};
use crate::policy::{Actions, Observation, PolicyParams, ANSWER_ACTIONS, FINDING_ACTIONS};
use crate::reward::{reward_total, RewardBreakdown, RewardContext, RewardWeights};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrpoError {
    #[error("non-finite objective term for candidate {candidate}")]
    NonFinite { candidate: usize },
    #[error("non-finite KL penalty")]
    NonFiniteKl,
    #[error("group has {0} candidates; at least 2 are required")]
    GroupTooSmall(usize),
    #[error("corpus has no training studies")]
    EmptyCorpus,
    #[error("invalid config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
}

/// One sampled output and its bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub actions: Actions,
    pub output: StructuredOutput,
    pub logprob_old: f64,
    pub logprob_ref: Option<f64>,
    /// Scalar reward used for the advantage.
    pub reward: f64,
    pub breakdown: Option<RewardBreakdown>,
    pub advantage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGroup {
    pub observation: Observation,
    pub candidates: Vec<Candidate>,
    pub reward_mean: f64,
    pub reward_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub group_size: usize,
    pub clip_epsilon: f64,
    pub kl_beta: f64,
    pub adv_epsilon: f64,
    /// Initial step of the backtracking line search.
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
    pub weights: RewardWeights,
    /// Ascent steps per sampled group; the first is always taken at ratio 1.
    pub updates_per_group: usize,
    pub warm_start_epochs: usize,
    pub warm_start_learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            clip_epsilon: 0.2,
            kl_beta: 0.03,
            adv_epsilon: 1e-4,
            learning_rate: 0.5,
            iterations: 500,
            seed: 0,
            weights: RewardWeights::default(),
            updates_per_group: 1,
            warm_start_epochs: 200,
            warm_start_learning_rate: 1.0,
        }
    }
}

impl TrainConfig {
    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut p = Vec::new();
        if self.group_size < 2 {
            p.push(format!("group_size = {} must be at least 2", self.group_size));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            p.push(format!("clip_epsilon = {} must lie in (0, 1)", self.clip_epsilon));
        }
        if !(self.kl_beta >= 0.0 && self.kl_beta.is_finite()) {
            p.push(format!("kl_beta = {} must be finite and non-negative", self.kl_beta));
        }
        if !(self.adv_epsilon >= 0.0 && self.adv_epsilon.is_finite()) {
            p.push(format!("adv_epsilon = {} must be finite and non-negative", self.adv_epsilon));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            p.push(format!("learning_rate = {} must be finite and positive", self.learning_rate));
        }
        if !(self.warm_start_learning_rate > 0.0 && self.warm_start_learning_rate.is_finite()) {
            p.push(format!(
                "warm_start_learning_rate = {} must be finite and positive",
                self.warm_start_learning_rate
            ));
        }
        if self.updates_per_group == 0 {
            p.push("updates_per_group must be at least 1".into());
        }
        if let Err(w) = self.weights.validate() {
            p.extend(w.into_iter().map(|m| format!("weights: {m}")));
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(p)
        }
    }
}

/// Draws `g` candidates from `params_old` and renders each through the templates.
pub fn sample_group(params_old: &PolicyParams, obs: &Observation, g: usize, seed: u64) -> Result<CandidateGroup, GrpoError> {
    if g < 2 {
        return Err(GrpoError::GroupTooSmall(g));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates = (0..g)
        .map(|_| {
            let actions = params_old.sample(obs, &mut rng);
            Candidate {
                output: parse_output(&render_actions(&actions)),
                logprob_old: params_old.log_prob(obs, &actions),
                logprob_ref: None,
                reward: 0.0,
                breakdown: None,
                advantage: 0.0,
                actions,
            }
        })
        .collect();
    Ok(CandidateGroup { observation: *obs, candidates, reward_mean: 0.0, reward_std: 0.0 })
}

/// Scores every candidate against one study.
pub fn score_group(group: &mut CandidateGroup, truth: &LabelVector, reference_text: &str, ctx: &RewardContext<'_>) {
    for c in &mut group.candidates {
        let b = reward_total(&c.output, truth, reference_text, ctx);
        c.reward = b.total;
        c.breakdown = Some(b);
    }
}

/// Standardizes rewards within the group with the population std.
pub fn compute_advantages(group: &mut CandidateGroup, adv_epsilon: f64) {
    let n = group.candidates.len() as f64;
    let first = group.candidates.first().map(|c| c.reward);
    if group.candidates.iter().all(|c| Some(c.reward) == first) {
        group.reward_mean = first.unwrap_or(0.0);
        group.reward_std = 0.0;
        group.candidates.iter_mut().for_each(|c| c.advantage = 0.0);
        return;
    }
    let mean = group.candidates.iter().map(|c| c.reward).sum::<f64>() / n;
    let var = group.candidates.iter().map(|c| (c.reward - mean) * (c.reward - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var);
    group.reward_mean = mean;
    group.reward_std = std;
    for c in &mut group.candidates {
        c.advantage = (c.reward - mean) / (std + adv_epsilon);
    }
}

/// Clipped surrogate minus the KL penalty, and its gradient.
pub fn grpo_objective(
    params: &PolicyParams,
    group: &CandidateGroup,
    reference: &PolicyParams,
    cfg: &TrainConfig,
) -> Result<(f64, PolicyParams), GrpoError> {
    objective(params, group, reference, cfg, true).map(|(v, g)| (v, g.expect("gradient requested")))
}

/// Value of [`grpo_objective`] without the gradient.
pub fn grpo_value(params: &PolicyParams, group: &CandidateGroup, reference: &PolicyParams, cfg: &TrainConfig) -> Result<f64, GrpoError> {
    objective(params, group, reference, cfg, false).map(|(v, _)| v)
}

/// Per-candidate pieces of the clipped surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateTerm {
    pub logprob: f64,
    pub ratio: f64,
    /// `ratio * advantage`.
    pub unclipped: f64,
    /// The smaller of the unclipped and clipped products.
    pub term: f64,
    /// The clipped product was strictly smaller, so the term is locally constant.
    pub clipped_active: bool,
}

/// Evaluates the surrogate for every candidate under `params`.
pub fn surrogate_terms(params: &PolicyParams, group: &CandidateGroup, clip_epsilon: f64) -> Result<Vec<SurrogateTerm>, GrpoError> {
    let obs = &group.observation;
    group
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let logprob = params.log_prob(obs, &c.actions);
            let ratio = libm::exp(logprob - c.logprob_old);
            let unclipped = ratio * c.advantage;
            let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon) * c.advantage;
            if !(logprob.is_finite() && ratio.is_finite() && unclipped.is_finite()) {
                return Err(GrpoError::NonFinite { candidate: i });
            }
            // ties resolve to the unclipped branch, which carries the gradient
            let clipped_active = clipped < unclipped;
            let term = if clipped_active { clipped } else { unclipped };
            Ok(SurrogateTerm { logprob, ratio, unclipped, term, clipped_active })
        })
        .collect()
}

fn objective(
    params: &PolicyParams,
    group: &CandidateGroup,
    reference: &PolicyParams,
    cfg: &TrainConfig,
    want_grad: bool,
) -> Result<(f64, Option<PolicyParams>), GrpoError> {
    let g = group.candidates.len();
    if g < 2 {
        return Err(GrpoError::GroupTooSmall(g));
    }
    let inv_g = 1.0 / g as f64;
    let obs = &group.observation;
    let terms = surrogate_terms(params, group, cfg.clip_epsilon)?;
    let mut value = terms.iter().map(|t| t.term).sum::<f64>() * inv_g;
    let mut grad = want_grad.then(PolicyParams::zeros);
    if let Some(grad) = grad.as_mut() {
        for (c, t) in group.candidates.iter().zip(&terms) {
            if !t.clipped_active && c.advantage != 0.0 {
                params.accumulate_log_prob_grad(obs, &c.actions, inv_g * c.advantage * t.ratio, grad);
            }
        }
    }
    if cfg.kl_beta != 0.0 {
        let kl = params.kl(reference, obs);
        if !kl.is_finite() {
            return Err(GrpoError::NonFiniteKl);
        }
        value -= cfg.kl_beta * kl;
        if let Some(grad) = grad.as_mut() {
            params.accumulate_kl_grad(reference, obs, -cfg.kl_beta, grad);
        }
    }
    Ok((value, grad))
}

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

/// One gradient-ascent step with backtracking; returns the objective before
/// and after. A step that cannot improve the objective leaves `params` alone.
pub fn ascent_step(
    params: &mut PolicyParams,
    group: &CandidateGroup,
    reference: &PolicyParams,
    cfg: &TrainConfig,
) -> Result<(f64, f64), GrpoError> {
    let (v0, grad) = grpo_objective(params, group, reference, cfg)?;
    let gn = grad.norm_sq();
    if gn == 0.0 {
        return Ok((v0, v0));
    }
    let mut alpha = cfg.learning_rate;
    for _ in 0..MAX_BACKTRACKS {
        let mut trial = params.clone();
        trial.axpy(alpha, &grad);
        if trial.is_finite() {
            if let Ok(v1) = grpo_value(&trial, group, reference, cfg) {
                if v1 >= v0 + ARMIJO_C * alpha * gn {
                    *params = trial;
                    return Ok((v0, v1));
                }
            }
        }
        alpha *= 0.5;
    }
    Ok((v0, v0))
}

/// Count-normalized targets of the warm-start fit.
struct ActionCounts {
    finding: Vec<f64>,
    answer: Vec<f64>,
}

impl ActionCounts {
    fn from_corpus(records: &[&StudyRecord]) -> Self {
        let mut counts = PolicyParams::zeros();
        for r in records {
            let obs = r.observation();
            for (&c, a) in Pathology::ALL.iter().zip(&reference_actions(&r.labels)) {
                let e = obs.get(c);
                counts.finding_logits_mut(e, c)[a.finding.index()] += 1.0;
                counts.answer_logits_mut(e, c, a.finding)[a.answer.index()] += 1.0;
            }
        }
        let normalize = |row: &mut [f64]| {
            let n: f64 = row.iter().sum();
            if n > 0.0 {
                row.iter_mut().for_each(|x| *x /= n);
            }
        };
        counts.as_mut_slice()[..FINDING_LEN].chunks_mut(FINDING_ACTIONS).for_each(normalize);
        counts.as_mut_slice()[FINDING_LEN..].chunks_mut(ANSWER_ACTIONS).for_each(normalize);
        Self { finding: counts.finding_part().to_vec(), answer: counts.answer_part().to_vec() }
    }
}

const FINDING_LEN: usize = crate::policy::EVIDENCE_KINDS * crate::labels::CATEGORY_COUNT * FINDING_ACTIONS;

/// Per-context mean log-likelihood of the reference actions: for every head
/// context seen in `records`, the average log-probability the head assigns to
/// the actions observed there, summed over contexts.
pub fn warm_start_objective(params: &PolicyParams, records: &[&StudyRecord]) -> f64 {
    let counts = ActionCounts::from_corpus(records);
    rows_objective(params, &counts)
}

fn rows_objective(params: &PolicyParams, counts: &ActionCounts) -> f64 {
    let mut total = 0.0;
    let rows = params.finding_part().chunks(FINDING_ACTIONS).zip(counts.finding.chunks(FINDING_ACTIONS));
    for (logits, freq) in rows {
        let lp = crate::policy::log_softmax::<FINDING_ACTIONS>(logits);
        total += freq.iter().zip(&lp).filter(|(f, _)| **f > 0.0).map(|(f, l)| f * l).sum::<f64>();
    }
    let rows = params.answer_part().chunks(ANSWER_ACTIONS).zip(counts.answer.chunks(ANSWER_ACTIONS));
    for (logits, freq) in rows {
        let lp = crate::policy::log_softmax::<ANSWER_ACTIONS>(logits);
        total += freq.iter().zip(&lp).filter(|(f, _)| **f > 0.0).map(|(f, l)| f * l).sum::<f64>();
    }
    total
}

/// Supervised fit of both heads to the corpus reference actions by full-batch
/// gradient ascent on [`warm_start_objective`] over the training split.
pub fn warm_start(
    params: &PolicyParams,
    corpus: &[StudyRecord],
    epochs: usize,
    learning_rate: f64,
) -> Result<PolicyParams, GrpoError> {
    let train: Vec<&StudyRecord> = corpus.iter().filter(|r| r.split == Split::Train).collect();
    if train.is_empty() {
        return Err(GrpoError::EmptyCorpus);
    }
    let counts = ActionCounts::from_corpus(&train);
    let mut p = params.clone();
    for _ in 0..epochs {
        warm_start_step(&mut p, &counts, learning_rate);
    }
    Ok(p)
}

fn warm_start_step(p: &mut PolicyParams, counts: &ActionCounts, lr: f64) {
    fn rows<const N: usize>(logits: &mut [f64], freq: &[f64], lr: f64) {
        for (z, f) in logits.chunks_mut(N).zip(freq.chunks(N)) {
            let mass: f64 = f.iter().sum();
            if mass == 0.0 {
                continue;
            }
            let prob = crate::policy::softmax::<N>(z);
            for k in 0..N {
                z[k] += lr * (f[k] - mass * prob[k]);
            }
        }
    }
    let (finding, answer) = p.as_mut_slice().split_at_mut(FINDING_LEN);
    rows::<FINDING_ACTIONS>(finding, &counts.finding, lr);
    rows::<ANSWER_ACTIONS>(answer, &counts.answer, lr);
}

/// Parameters after each warm-start epoch, starting with `params` itself.
pub fn warm_start_trajectory(
    params: &PolicyParams,
    records: &[&StudyRecord],
    epochs: usize,
    learning_rate: f64,
) -> Vec<PolicyParams> {
    let counts = ActionCounts::from_corpus(records);
    let mut p = params.clone();
    let mut out = Vec::with_capacity(epochs + 1);
    out.push(p.clone());
    for _ in 0..epochs {
        warm_start_step(&mut p, &counts, learning_rate);
        out.push(p.clone());
    }
    out
}

/// One line of the training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub study_id: String,
    pub mean_reward: f64,
    /// Group means of R1..R5.
    pub component_means: [f64; 5],
    /// KL to the reference policy at the sampled observation, after the update.
    pub kl: f64,
    pub scs_macro: f64,
    pub scs_micro: f64,
    pub objective_before: f64,
    pub objective_after: f64,
}

/// Runs GRPO from `init` against the frozen `reference`, drawing one training
/// study per iteration.
pub fn train(
    cfg: &TrainConfig,
    corpus: &[StudyRecord],
    init: &PolicyParams,
    reference: &PolicyParams,
    ctx: &RewardContext<'_>,
) -> Result<(PolicyParams, Vec<TraceRecord>), GrpoError> {
    cfg.validate().map_err(GrpoError::InvalidConfig)?;
    let train: Vec<&StudyRecord> = corpus.iter().filter(|r| r.split == Split::Train).collect();
    if train.is_empty() {
        return Err(GrpoError::EmptyCorpus);
    }
    let ctx = RewardContext { weights: cfg.weights, ..*ctx };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init.clone();
    let mut trace = Vec::with_capacity(cfg.iterations);
    for iteration in 0..cfg.iterations {
        let study = train[rng.gen_range(0..train.len())];
        let obs = study.observation();
        let mut group = sample_group(&params, &obs, cfg.group_size, rng.gen())?;
        for c in &mut group.candidates {
            c.logprob_ref = Some(reference.log_prob(&obs, &c.actions));
        }
        score_group(&mut group, &study.labels, &study.findings_text, &ctx);
        compute_advantages(&mut group, cfg.adv_epsilon);

        let (before, _) = ascent_step(&mut params, &group, reference, cfg)?;
        let mut after = before;
        for _ in 1..cfg.updates_per_group {
            after = ascent_step(&mut params, &group, reference, cfg)?.1;
        }
        if cfg.updates_per_group == 1 {
            after = grpo_value(&params, &group, reference, cfg)?;
        }

        let n = group.candidates.len() as f64;
        let mut component_means = [0.0; 5];
        for c in &group.candidates {
            let comps = c.breakdown.as_ref().map(RewardBreakdown::components).unwrap_or_default();
            for (m, x) in component_means.iter_mut().zip(comps) {
                *m += x / n;
            }
        }
        let outputs: Vec<StructuredOutput> = group.candidates.iter().map(|c| c.output.clone()).collect();
        let (scs_macro, scs_micro) = scs(&outputs, ctx.labeler, UncertainPolicy::AsNegative);
        trace.push(TraceRecord {
            iteration,
            study_id: study.study_id.clone(),
            mean_reward: group.reward_mean,
            component_means,
            kl: params.kl(reference, &obs),
            scs_macro,
            scs_micro,
            objective_before: before,
            objective_after: after,
        });
    }
    Ok((params, trace))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoding {
    #[default]
    Sample,
    Greedy,
}

/// One output per study.
pub fn generate_outputs(params: &PolicyParams, records: &[StudyRecord], decoding: Decoding, seed: u64) -> Vec<StructuredOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records
        .iter()
        .map(|r| {
            let obs = r.observation();
            let actions = match decoding {
                Decoding::Sample => params.sample(&obs, &mut rng),
                Decoding::Greedy => params.mode(&obs),
            };
            parse_output(&render_actions(&actions))
        })
        .collect()
}

/// Generates outputs for `records` and scores them.
pub fn evaluate_policy(
    params: &PolicyParams,
    records: &[StudyRecord],
    labeler: &dyn Labeler,
    decoding: Decoding,
    seed: u64,
) -> Result<MetricsReport, LengthMismatch> {
    let outputs = generate_outputs(params, records, decoding, seed);
    let refs: Vec<&str> = records.iter().map(|r| r.findings_text.as_str()).collect();
    let truths: Vec<LabelVector> = records.iter().map(|r| r.labels).collect();
    evaluate(&outputs, &refs, &truths, labeler, UncertainPolicy::AsNegative)
}

/// Mean KL to `reference` over the observations of `records`.
pub fn mean_kl(params: &PolicyParams, reference: &PolicyParams, records: &[StudyRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| params.kl(reference, &r.observation())).sum::<f64>() / records.len() as f64
}

/// Fraction of (study, category) answers that match the labels under greedy decoding.
pub fn answer_accuracy(params: &PolicyParams, records: &[StudyRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let hits: usize = records
        .iter()
        .map(|r| {
            let a = params.mode(&r.observation());
            a.iter().zip(r.labels.values()).filter(|(a, v)| a.answer == **v).count()
        })
        .sum();
    hits as f64 / (records.len() * crate::labels::CATEGORY_COUNT) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, CorpusSpec};
    use crate::labels::{LabelValue, CATEGORY_COUNT};
    use crate::policy::{CategoryAction, Evidence, FindingAction};

    fn group_with_rewards(rewards: &[f64]) -> CandidateGroup {
        let obs = Observation([Evidence::Negative; CATEGORY_COUNT]);
        let actions = [CategoryAction { finding: FindingAction::Omit, answer: LabelValue::Negative }; CATEGORY_COUNT];
        let candidates = rewards
            .iter()
            .map(|&r| Candidate {
                actions,
                output: parse_output(""),
                logprob_old: 0.0,
                logprob_ref: None,
                reward: r,
                breakdown: None,
                advantage: 0.0,
            })
            .collect();
        CandidateGroup { observation: obs, candidates, reward_mean: 0.0, reward_std: 0.0 }
    }

    fn advantages(g: &CandidateGroup) -> Vec<f64> {
        g.candidates.iter().map(|c| c.advantage).collect()
    }

    #[test]
    fn advantage_fixtures() {
        let mut g = group_with_rewards(&[0.0, 1.0]);
        compute_advantages(&mut g, 0.0);
        assert_eq!(advantages(&g), [-1.0, 1.0]);
        let mut g = group_with_rewards(&[0.3; 8]);
        compute_advantages(&mut g, 1e-4);
        assert!(advantages(&g).iter().all(|&a| a == 0.0));
    }

    #[test]
    fn clipped_min_fixture() {
        // ratios 0.5 and 1.5 come from log-probabilities relative to the old ones
        let mut g = group_with_rewards(&[0.0, 1.0]);
        compute_advantages(&mut g, 0.0);
        let params = PolicyParams::zeros();
        let lp = params.log_prob(&g.observation, &g.candidates[0].actions);
        g.candidates[0].logprob_old = lp - libm::log(0.5);
        g.candidates[1].logprob_old = lp - libm::log(1.5);
        let cfg = TrainConfig { kl_beta: 0.0, ..Default::default() };
        let v = grpo_value(&params, &g, &params, &cfg).unwrap();
        assert!((v - 0.2).abs() < 1e-12, "{v}");
    }

    #[test]
    fn rejects_small_groups_and_bad_configs() {
        assert_eq!(sample_group(&PolicyParams::zeros(), &Observation([Evidence::Negative; 14]), 1, 0).unwrap_err(), GrpoError::GroupTooSmall(1));
        let cfg = TrainConfig { group_size: 1, clip_epsilon: 1.0, kl_beta: -1.0, ..Default::default() };
        assert_eq!(cfg.validate().unwrap_err().len(), 3);
    }

    #[test]
    fn non_finite_reports_candidate() {
        let mut g = group_with_rewards(&[0.0, 1.0, 2.0]);
        compute_advantages(&mut g, 0.0);
        g.candidates[1].logprob_old = f64::NAN;
        let p = PolicyParams::zeros();
        assert_eq!(grpo_value(&p, &g, &p, &TrainConfig::default()), Err(GrpoError::NonFinite { candidate: 1 }));
    }

    #[test]
    fn zero_epochs_is_identity() {
        let corpus = generate_corpus(&CorpusSpec { n_studies: 30, ..Default::default() });
        let p = PolicyParams::zeros();
        assert_eq!(warm_start(&p, &corpus, 0, 1.0).unwrap(), p);
        assert_eq!(warm_start(&p, &[], 5, 1.0), Err(GrpoError::EmptyCorpus));
    }

    #[test]
    fn warm_start_fits_realizable_corpus() {
        let corpus = generate_corpus(&CorpusSpec { n_studies: 200, ..Default::default() });
        let p = warm_start(&PolicyParams::zeros(), &corpus, 200, 1.0).unwrap();
        assert!(answer_accuracy(&p, &corpus) > 0.999);
    }
}

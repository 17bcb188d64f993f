//! The toy factorized-categorical policy.
//!
//! Each category is generated independently given its evidence symbol, in
//! two stages that mirror reasoning then summarization: a finding head picks
//! which sentence (if any) the narrative states about the category, then an
//! answer head, conditioned on both the evidence and that sentence choice,
//! picks the structured label.
//!
//! Parameters are one flat logit buffer:
//! finding logits `[evidence][category][finding]` followed by answer logits
//! `[evidence][category][finding][answer]`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::labels::{LabelValue, Pathology, CATEGORY_COUNT};

pub const EVIDENCE_KINDS: usize = 3;
pub const FINDING_ACTIONS: usize = 4;
pub const ANSWER_ACTIONS: usize = 3;

const FINDING_LEN: usize = EVIDENCE_KINDS * CATEGORY_COUNT * FINDING_ACTIONS;
const ANSWER_LEN: usize = FINDING_LEN * ANSWER_ACTIONS;

/// Per-category evidence: the stand-in for what the image shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    Positive,
    Negative,
    Ambiguous,
}

impl Evidence {
    pub const ALL: [Evidence; EVIDENCE_KINDS] = [Evidence::Positive, Evidence::Negative, Evidence::Ambiguous];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// Noise-free evidence for a label.
    pub fn for_label(label: LabelValue) -> Self {
        match label {
            LabelValue::Positive => Evidence::Positive,
            LabelValue::Negative => Evidence::Negative,
            LabelValue::Uncertain => Evidence::Ambiguous,
        }
    }
}

/// Evidence for all fourteen categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Observation(pub [Evidence; CATEGORY_COUNT]);

impl Observation {
    pub fn get(&self, category: Pathology) -> Evidence {
        self.0[category.index()]
    }
}

/// What the narrative says about a category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingAction {
    AssertPositive,
    AssertNegative,
    AssertUncertain,
    Omit,
}

impl FindingAction {
    pub const ALL: [FindingAction; FINDING_ACTIONS] = [
        FindingAction::AssertPositive,
        FindingAction::AssertNegative,
        FindingAction::AssertUncertain,
        FindingAction::Omit,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

/// One category's sampled pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CategoryAction {
    pub finding: FindingAction,
    pub answer: LabelValue,
}

pub type Actions = [CategoryAction; CATEGORY_COUNT];

#[inline]
fn finding_offset(e: Evidence, c: usize) -> usize {
    (e.index() * CATEGORY_COUNT + c) * FINDING_ACTIONS
}

#[inline]
fn answer_offset(e: Evidence, c: usize, f: FindingAction) -> usize {
    FINDING_LEN + (finding_offset(e, c) + f.index()) * ANSWER_ACTIONS
}

/// Numerically stable log-softmax.
pub fn log_softmax<const N: usize>(logits: &[f64]) -> [f64; N] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = libm::log(logits.iter().map(|z| libm::exp(z - max)).sum::<f64>());
    core::array::from_fn(|k| logits[k] - max - lse)
}

pub fn softmax<const N: usize>(logits: &[f64]) -> [f64; N] {
    log_softmax::<N>(logits).map(libm::exp)
}

fn sample_index<const N: usize, R: Rng + ?Sized>(probs: &[f64; N], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // rounding left u above the last partial sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(N - 1)
}

/// Σ p (log p - log q), with 0·log 0 = 0.
fn categorical_kl<const N: usize>(logp: &[f64; N], logq: &[f64; N]) -> f64 {
    let mut kl = 0.0;
    for k in 0..N {
        let p = libm::exp(logp[k]);
        if p > 0.0 {
            kl += p * (logp[k] - logq[k]);
        }
    }
    kl
}

/// Policy logits. Also used as a gradient buffer of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    data: Vec<f64>,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self::zeros()
    }
}

impl PolicyParams {
    pub const LEN: usize = FINDING_LEN + ANSWER_LEN;

    /// All-zero logits: the uniform policy.
    pub fn zeros() -> Self {
        Self { data: vec![0.0; Self::LEN] }
    }

    pub fn from_parts(finding: &[f64], answer: &[f64]) -> Option<Self> {
        if finding.len() != FINDING_LEN || answer.len() != ANSWER_LEN {
            return None;
        }
        let mut data = Vec::with_capacity(Self::LEN);
        data.extend_from_slice(finding);
        data.extend_from_slice(answer);
        Some(Self { data })
    }

    pub fn finding_part(&self) -> &[f64] {
        &self.data[..FINDING_LEN]
    }

    pub fn answer_part(&self) -> &[f64] {
        &self.data[FINDING_LEN..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn finding_logits(&self, e: Evidence, c: Pathology) -> &[f64] {
        let o = finding_offset(e, c.index());
        &self.data[o..o + FINDING_ACTIONS]
    }

    pub fn finding_logits_mut(&mut self, e: Evidence, c: Pathology) -> &mut [f64] {
        let o = finding_offset(e, c.index());
        &mut self.data[o..o + FINDING_ACTIONS]
    }

    pub fn answer_logits(&self, e: Evidence, c: Pathology, f: FindingAction) -> &[f64] {
        let o = answer_offset(e, c.index(), f);
        &self.data[o..o + ANSWER_ACTIONS]
    }

    pub fn answer_logits_mut(&mut self, e: Evidence, c: Pathology, f: FindingAction) -> &mut [f64] {
        let o = answer_offset(e, c.index(), f);
        &mut self.data[o..o + ANSWER_ACTIONS]
    }

    pub fn finding_probs(&self, e: Evidence, c: Pathology) -> [f64; FINDING_ACTIONS] {
        softmax(self.finding_logits(e, c))
    }

    pub fn answer_probs(&self, e: Evidence, c: Pathology, f: FindingAction) -> [f64; ANSWER_ACTIONS] {
        softmax(self.answer_logits(e, c, f))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &PolicyParams) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn dot(&self, other: &PolicyParams) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// Exact log-probability of a full action assignment.
    pub fn log_prob(&self, obs: &Observation, actions: &Actions) -> f64 {
        Pathology::ALL
            .iter()
            .zip(actions)
            .map(|(&c, a)| {
                let e = obs.get(c);
                let lf = log_softmax::<FINDING_ACTIONS>(self.finding_logits(e, c))[a.finding.index()];
                let la = log_softmax::<ANSWER_ACTIONS>(self.answer_logits(e, c, a.finding))[a.answer.index()];
                lf + la
            })
            .sum()
    }

    /// Adds `scale * ∇ log π(actions | obs)` into `grad`.
    pub fn accumulate_log_prob_grad(&self, obs: &Observation, actions: &Actions, scale: f64, grad: &mut PolicyParams) {
        for (&c, a) in Pathology::ALL.iter().zip(actions) {
            let e = obs.get(c);
            let pf = self.finding_probs(e, c);
            let g = grad.finding_logits_mut(e, c);
            for k in 0..FINDING_ACTIONS {
                let indicator = if k == a.finding.index() { 1.0 } else { 0.0 };
                g[k] += scale * (indicator - pf[k]);
            }
            let pa = self.answer_probs(e, c, a.finding);
            let g = grad.answer_logits_mut(e, c, a.finding);
            for k in 0..ANSWER_ACTIONS {
                let indicator = if k == a.answer.index() { 1.0 } else { 0.0 };
                g[k] += scale * (indicator - pa[k]);
            }
        }
    }

    /// Draws one action assignment.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &Observation, rng: &mut R) -> Actions {
        core::array::from_fn(|i| {
            let c = Pathology::ALL[i];
            let e = obs.get(c);
            let finding = FindingAction::ALL[sample_index(&self.finding_probs(e, c), rng)];
            let answer = LabelValue::ALL[sample_index(&self.answer_probs(e, c, finding), rng)];
            CategoryAction { finding, answer }
        })
    }

    /// Most probable finding, then most probable answer given it. Ties go to the lower index.
    pub fn mode(&self, obs: &Observation) -> Actions {
        fn argmax(p: &[f64]) -> usize {
            let mut best = 0;
            for k in 1..p.len() {
                if p[k] > p[best] {
                    best = k;
                }
            }
            best
        }
        core::array::from_fn(|i| {
            let c = Pathology::ALL[i];
            let e = obs.get(c);
            let finding = FindingAction::ALL[argmax(self.finding_logits(e, c))];
            let answer = LabelValue::ALL[argmax(self.answer_logits(e, c, finding))];
            CategoryAction { finding, answer }
        })
    }

    /// Exact KL(self ‖ reference) of the joint action distribution given `obs`.
    ///
    /// Per category this is the finding-head KL plus the answer-head KL averaged
    /// under this policy's finding probabilities (the chain rule for KL).
    pub fn kl(&self, reference: &PolicyParams, obs: &Observation) -> f64 {
        Pathology::ALL.iter().map(|&c| self.category_kl(reference, obs.get(c), c).0).sum()
    }

    /// Category KL and the per-finding answer-head KLs.
    fn category_kl(&self, reference: &PolicyParams, e: Evidence, c: Pathology) -> (f64, [f64; FINDING_ACTIONS]) {
        let lp = log_softmax::<FINDING_ACTIONS>(self.finding_logits(e, c));
        let lq = log_softmax::<FINDING_ACTIONS>(reference.finding_logits(e, c));
        let answer_kl: [f64; FINDING_ACTIONS] = core::array::from_fn(|f| {
            let f = FindingAction::ALL[f];
            categorical_kl::<ANSWER_ACTIONS>(
                &log_softmax(self.answer_logits(e, c, f)),
                &log_softmax(reference.answer_logits(e, c, f)),
            )
        });
        let mut total = categorical_kl(&lp, &lq);
        for f in 0..FINDING_ACTIONS {
            let p = libm::exp(lp[f]);
            if p > 0.0 {
                total += p * answer_kl[f];
            }
        }
        (total, answer_kl)
    }

    /// Adds `scale * ∇ KL(self ‖ reference | obs)` into `grad`.
    pub fn accumulate_kl_grad(&self, reference: &PolicyParams, obs: &Observation, scale: f64, grad: &mut PolicyParams) {
        for &c in Pathology::ALL.iter() {
            let e = obs.get(c);
            let (kl_c, answer_kl) = self.category_kl(reference, e, c);
            let lp = log_softmax::<FINDING_ACTIONS>(self.finding_logits(e, c));
            let lq = log_softmax::<FINDING_ACTIONS>(reference.finding_logits(e, c));
            let pf = lp.map(libm::exp);
            {
                // d/dz_k Σ_f p_f g_f with g_f = log(p_f/q_f) + KL_f is p_k (g_k - KL)
                let g = grad.finding_logits_mut(e, c);
                for k in 0..FINDING_ACTIONS {
                    if pf[k] > 0.0 {
                        g[k] += scale * pf[k] * (lp[k] - lq[k] + answer_kl[k] - kl_c);
                    }
                }
            }
            for (fi, &f) in FindingAction::ALL.iter().enumerate() {
                if pf[fi] == 0.0 {
                    continue;
                }
                let la = log_softmax::<ANSWER_ACTIONS>(self.answer_logits(e, c, f));
                let lr = log_softmax::<ANSWER_ACTIONS>(reference.answer_logits(e, c, f));
                let g = grad.answer_logits_mut(e, c, f);
                for k in 0..ANSWER_ACTIONS {
                    let pa = libm::exp(la[k]);
                    if pa > 0.0 {
                        g[k] += scale * pf[fi] * pa * (la[k] - lr[k] - answer_kl[fi]);
                    }
                }
            }
        }
    }
}

/// Versioned on-disk form of [`PolicyParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyCheckpoint {
    pub format: alloc::string::String,
    pub version: u32,
    pub finding_shape: [usize; 3],
    pub answer_shape: [usize; 4],
    pub finding_logits: Vec<f64>,
    pub answer_logits: Vec<f64>,
}

pub const CHECKPOINT_FORMAT: &str = "rrg-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

impl From<&PolicyParams> for PolicyCheckpoint {
    fn from(p: &PolicyParams) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            finding_shape: [EVIDENCE_KINDS, CATEGORY_COUNT, FINDING_ACTIONS],
            answer_shape: [EVIDENCE_KINDS, CATEGORY_COUNT, FINDING_ACTIONS, ANSWER_ACTIONS],
            finding_logits: p.finding_part().to_vec(),
            answer_logits: p.answer_part().to_vec(),
        }
    }
}

impl PolicyCheckpoint {
    pub fn into_params(self) -> Result<PolicyParams, alloc::string::String> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(alloc::format!("unsupported checkpoint {} v{}", self.format, self.version));
        }
        let params = PolicyParams::from_parts(&self.finding_logits, &self.answer_logits)
            .ok_or_else(|| alloc::string::String::from("checkpoint tensor sizes do not match the policy shape"))?;
        if !params.is_finite() {
            return Err("checkpoint holds non-finite logits".into());
        }
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut ChaCha8Rng, scale: f64) -> PolicyParams {
        let mut p = PolicyParams::zeros();
        for x in p.as_mut_slice() {
            *x = (rng.gen::<f64>() * 2.0 - 1.0) * scale;
        }
        p
    }

    fn random_obs(rng: &mut ChaCha8Rng) -> Observation {
        Observation(core::array::from_fn(|_| Evidence::ALL[rng.gen_range(0..3)]))
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = random_params(&mut rng, 30.0);
            for e in Evidence::ALL {
                for c in Pathology::ALL {
                    assert!((p.finding_probs(e, c).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    for f in FindingAction::ALL {
                        assert!((p.answer_probs(e, c, f).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn kl_zero_at_identity_and_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let p = random_params(&mut rng, 3.0);
            let q = random_params(&mut rng, 3.0);
            let obs = random_obs(&mut rng);
            assert_eq!(p.kl(&p, &obs), 0.0);
            assert!(p.kl(&q, &obs) >= 0.0);
        }
    }

    #[test]
    fn kl_deterministic_against_half() {
        // one finding row: p puts all mass on action 0, q puts half there
        let obs = Observation([Evidence::Negative; CATEGORY_COUNT]);
        let mut q = PolicyParams::zeros();
        let mut p = PolicyParams::zeros();
        // q: logits (ln 3, 0, 0, 0) gives probabilities (1/2, 1/6, 1/6, 1/6)
        q.finding_logits_mut(Evidence::Negative, Pathology::Edema)[0] = libm::log(3.0);
        p.finding_logits_mut(Evidence::Negative, Pathology::Edema)[0] = 1e6;
        // answer heads equal, so the only contribution is log 2
        assert!((p.kl(&q, &obs) - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn deterministic_logits_have_zero_log_prob() {
        let mut p = PolicyParams::zeros();
        for e in Evidence::ALL {
            for c in Pathology::ALL {
                p.finding_logits_mut(e, c)[1] = 1e6;
                for f in FindingAction::ALL {
                    p.answer_logits_mut(e, c, f)[2] = 1e6;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let obs = random_obs(&mut rng);
        let a = p.sample(&obs, &mut rng);
        for x in &a {
            assert_eq!(x.finding, FindingAction::AssertNegative);
            assert_eq!(x.answer, LabelValue::Uncertain);
        }
        assert_eq!(p.log_prob(&obs, &a), 0.0);
        assert_eq!(p.mode(&obs), a);
    }

    #[test]
    fn log_prob_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_params(&mut rng, 2.0);
        let obs = random_obs(&mut rng);
        let a = p.sample(&obs, &mut rng);
        let mut g = PolicyParams::zeros();
        p.accumulate_log_prob_grad(&obs, &a, 1.0, &mut g);
        let h = 1e-6;
        for i in 0..PolicyParams::LEN {
            let mut plus = p.clone();
            plus.as_mut_slice()[i] += h;
            let mut minus = p.clone();
            minus.as_mut_slice()[i] -= h;
            let fd = (plus.log_prob(&obs, &a) - minus.log_prob(&obs, &a)) / (2.0 * h);
            assert!((fd - g.as_slice()[i]).abs() < 1e-7, "param {i}: {fd} vs {}", g.as_slice()[i]);
        }
    }

    #[test]
    fn kl_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_params(&mut rng, 2.0);
        let q = random_params(&mut rng, 2.0);
        let obs = random_obs(&mut rng);
        let mut g = PolicyParams::zeros();
        p.accumulate_kl_grad(&q, &obs, 1.0, &mut g);
        let h = 1e-6;
        for i in 0..PolicyParams::LEN {
            let mut plus = p.clone();
            plus.as_mut_slice()[i] += h;
            let mut minus = p.clone();
            minus.as_mut_slice()[i] -= h;
            let fd = (plus.kl(&q, &obs) - minus.kl(&q, &obs)) / (2.0 * h);
            assert!((fd - g.as_slice()[i]).abs() < 1e-7, "param {i}: {fd} vs {}", g.as_slice()[i]);
        }
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let p = PolicyParams::zeros();
        let obs = Observation([Evidence::Ambiguous; CATEGORY_COUNT]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 10_000;
        let mut finding = [0usize; FINDING_ACTIONS];
        let mut answer = [0usize; ANSWER_ACTIONS];
        for _ in 0..n {
            let a = p.sample(&obs, &mut rng);
            finding[a[0].finding.index()] += 1;
            answer[a[0].answer.index()] += 1;
        }
        let within = |count: usize, prob: f64| {
            let sigma = libm::sqrt(n as f64 * prob * (1.0 - prob));
            (count as f64 - n as f64 * prob).abs() <= 3.0 * sigma
        };
        assert!(finding.iter().all(|&k| within(k, 0.25)), "{finding:?}");
        assert!(answer.iter().all(|&k| within(k, 1.0 / 3.0)), "{answer:?}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_params(&mut rng, 1.0);
        let ck = PolicyCheckpoint::from(&p);
        let text = serde_json::to_string(&ck).unwrap();
        let back: PolicyCheckpoint = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_params().unwrap(), p);
        let mut bad = PolicyCheckpoint::from(&p);
        bad.answer_logits.pop();
        assert!(bad.into_params().is_err());
    }
}

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrg_core::corpus::{generate_corpus, reference_actions, CorpusSpec, Split, StudyRecord};
use rrg_core::grpo::*;
use rrg_core::labels::{LabelValue, Pathology, CATEGORY_COUNT};
use rrg_core::policy::{Evidence, Observation, PolicyParams};
use rrg_core::reward::{CfsScoringMatrix, RewardContext, RewardWeights};
use rrg_core::text::IdfTokenF1;
use rrg_core::LabelerLexicon;

fn random_params(rng: &mut ChaCha8Rng, scale: f64) -> PolicyParams {
    let mut p = PolicyParams::zeros();
    for x in p.as_mut_slice() {
        *x = (rng.gen::<f64>() * 2.0 - 1.0) * scale;
    }
    p
}

fn random_obs(rng: &mut ChaCha8Rng) -> Observation {
    Observation(std::array::from_fn(|_| Evidence::ALL[rng.gen_range(0..3)]))
}

struct Instance {
    params: PolicyParams,
    reference: PolicyParams,
    group: CandidateGroup,
    cfg: TrainConfig,
}

// Current params are a perturbation of the sampling params, so ratios spread
// on both sides of the clip window. Instances with a ratio within `margin` of
// a clip edge are redrawn: the objective has a kink there.
fn instance(seed: u64, margin: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let old = random_params(&mut rng, 1.5);
        let reference = random_params(&mut rng, 1.5);
        let obs = random_obs(&mut rng);
        let g = rng.gen_range(2..=8);
        let mut group = sample_group(&old, &obs, g, rng.gen()).unwrap();
        for c in &mut group.candidates {
            c.reward = rng.gen::<f64>() * 3.0 - 0.5;
        }
        compute_advantages(&mut group, 1e-4);
        let mut params = old.clone();
        params.axpy(0.08, &random_params(&mut rng, 1.0));
        let cfg = TrainConfig { kl_beta: rng.gen::<f64>() * 0.5, ..Default::default() };
        let terms = surrogate_terms(&params, &group, cfg.clip_epsilon).unwrap();
        let near_edge = terms.iter().any(|t| {
            (t.ratio - (1.0 - cfg.clip_epsilon)).abs() < margin || (t.ratio - (1.0 + cfg.clip_epsilon)).abs() < margin
        });
        if !near_edge {
            return Instance { params, reference, group, cfg };
        }
    }
}

fn fd_gradient(inst: &Instance, h: f64) -> PolicyParams {
    let mut fd = PolicyParams::zeros();
    let mut p = inst.params.clone();
    for i in 0..PolicyParams::LEN {
        let x = p.as_slice()[i];
        p.as_mut_slice()[i] = x + h;
        let up = grpo_value(&p, &inst.group, &inst.reference, &inst.cfg).unwrap();
        p.as_mut_slice()[i] = x - h;
        let down = grpo_value(&p, &inst.group, &inst.reference, &inst.cfg).unwrap();
        p.as_mut_slice()[i] = x;
        fd.as_mut_slice()[i] = (up - down) / (2.0 * h);
    }
    fd
}

fn max_relative_error(analytic: &PolicyParams, fd: &PolicyParams) -> f64 {
    let scale = fd.as_slice().iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1e-12);
    analytic.as_slice().iter().zip(fd.as_slice()).map(|(a, f)| (a - f).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn gradient_matches_central_differences() {
    let mut clipped_seen = 0;
    for seed in 0..12 {
        let inst = instance(seed, 1e-3);
        clipped_seen += surrogate_terms(&inst.params, &inst.group, 0.2).unwrap().iter().filter(|t| t.clipped_active).count();
        let (_, g) = grpo_objective(&inst.params, &inst.group, &inst.reference, &inst.cfg).unwrap();
        let err = max_relative_error(&g, &fd_gradient(&inst, 1e-5));
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
    assert!(clipped_seen > 0, "no instance exercised the clipped branch");
}

#[test]
fn identity_objective_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = random_params(&mut rng, 1.0);
    let obs = random_obs(&mut rng);
    let mut group = sample_group(&p, &obs, 8, 11).unwrap();
    for (i, c) in group.candidates.iter_mut().enumerate() {
        c.reward = i as f64 * 0.37;
    }
    compute_advantages(&mut group, 1e-4);
    let terms = surrogate_terms(&p, &group, 0.2).unwrap();
    assert!(terms.iter().all(|t| t.ratio == 1.0));
    let v = grpo_value(&p, &group, &p, &TrainConfig::default()).unwrap();
    assert!(v.abs() < 1e-15, "{v}");
}

#[test]
fn sampling_is_seed_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = random_params(&mut rng, 1.0);
    let obs = random_obs(&mut rng);
    assert_eq!(sample_group(&p, &obs, 8, 99).unwrap(), sample_group(&p, &obs, 8, 99).unwrap());
}

#[test]
fn deterministic_policy_yields_identical_candidates() {
    let mut p = PolicyParams::zeros();
    for e in Evidence::ALL {
        for c in Pathology::ALL {
            p.finding_logits_mut(e, c)[1] = 1e6;
            for f in rrg_core::policy::FindingAction::ALL {
                p.answer_logits_mut(e, c, f)[1] = 1e6;
            }
        }
    }
    let obs = Observation([Evidence::Ambiguous; CATEGORY_COUNT]);
    let g = sample_group(&p, &obs, 8, 5).unwrap();
    assert!(g.candidates.iter().all(|c| c.actions == g.candidates[0].actions && c.logprob_old.abs() < 1e-12));
}

fn trained_context() -> (Vec<StudyRecord>, LabelerLexicon) {
    (generate_corpus(&CorpusSpec { n_studies: 200, seed: 1, ..Default::default() }), LabelerLexicon::default())
}

#[test]
fn huge_kl_coefficient_pins_the_policy() {
    let (corpus, lex) = trained_context();
    let idf = rrg_core::corpus::build_idf(&corpus);
    let sim = IdfTokenF1::new(&idf);
    let ctx = RewardContext { weights: RewardWeights::default(), matrix: CfsScoringMatrix::default(), labeler: &lex, similarity: &sim };
    let reference = warm_start(&PolicyParams::zeros(), &corpus, 20, 1.0).unwrap();
    let cfg = TrainConfig { kl_beta: 1e6, iterations: 150, seed: 2, ..Default::default() };
    let (p, trace) = train(&cfg, &corpus, &reference, &reference, &ctx).unwrap();
    assert!(mean_kl(&p, &reference, &corpus) < 1e-3);
    assert!(trace.iter().all(|t| t.kl < 1e-3));
}

#[test]
fn training_trace_is_reproducible() {
    let (corpus, lex) = trained_context();
    let idf = rrg_core::corpus::build_idf(&corpus);
    let sim = IdfTokenF1::new(&idf);
    let ctx = RewardContext { weights: RewardWeights::default(), matrix: CfsScoringMatrix::default(), labeler: &lex, similarity: &sim };
    let reference = warm_start(&PolicyParams::zeros(), &corpus, 20, 1.0).unwrap();
    let cfg = TrainConfig { iterations: 60, seed: 8, ..Default::default() };
    let a = train(&cfg, &corpus, &reference, &reference, &ctx).unwrap();
    let b = train(&cfg, &corpus, &reference, &reference, &ctx).unwrap();
    assert_eq!(a, b);
}

// Expected R3 contribution of each answer for one category, enumerating the
// truth values that noise-free evidence allows.
#[test]
fn noise_free_answer_bandit_has_a_unique_best_arm() {
    let m = CfsScoringMatrix::default();
    for truth in LabelValue::ALL {
        let e = Evidence::for_label(truth);
        let consistent: Vec<LabelValue> = LabelValue::ALL.into_iter().filter(|&t| Evidence::for_label(t) == e).collect();
        assert_eq!(consistent, [truth]);
        let best = LabelValue::ALL
            .into_iter()
            .max_by(|a, b| m.score(truth, Some(*a)).partial_cmp(&m.score(truth, Some(*b))).unwrap())
            .unwrap();
        let runner_up = LabelValue::ALL.into_iter().filter(|&a| a != best).map(|a| m.score(truth, Some(a))).fold(f64::MIN, f64::max);
        if truth == LabelValue::Uncertain {
            // every answer earns the flat half point: any arm is optimal
            assert_eq!(runner_up, m.score(truth, Some(best)));
        } else {
            assert_eq!(best, truth);
            assert!(m.score(truth, Some(best)) > runner_up);
        }
    }
}

#[test]
fn answer_only_reward_learns_the_answers() {
    let corpus = generate_corpus(&CorpusSpec { n_studies: 200, seed: 4, ..Default::default() });
    let lex = LabelerLexicon::default();
    let idf = rrg_core::corpus::build_idf(&corpus);
    let sim = IdfTokenF1::new(&idf);
    let weights = RewardWeights::from_array([0.0, 0.0, 1.0, 0.0, 0.0]);
    let ctx = RewardContext { weights, matrix: CfsScoringMatrix::default(), labeler: &lex, similarity: &sim };
    let cfg = TrainConfig { weights, iterations: 500, seed: 4, ..Default::default() };
    let start = PolicyParams::zeros();
    let (p, _) = train(&cfg, &corpus, &start, &start, &ctx).unwrap();
    let acc = answer_accuracy(&p, &corpus);
    assert!(acc >= 0.95, "{acc}");
}

#[test]
fn warm_start_ascent_is_monotone() {
    let corpus = generate_corpus(&CorpusSpec { n_studies: 300, seed: 6, ..Default::default() });
    let train_split: Vec<&StudyRecord> = corpus.iter().filter(|r| r.split == Split::Train).collect();
    let held_out: Vec<&StudyRecord> = corpus.iter().filter(|r| r.split != Split::Train).collect();
    let path = warm_start_trajectory(&PolicyParams::zeros(), &train_split, 60, 1.0);
    for w in path.windows(2) {
        assert!(warm_start_objective(&w[1], &train_split) >= warm_start_objective(&w[0], &train_split));
        assert!(warm_start_objective(&w[1], &held_out) >= warm_start_objective(&w[0], &held_out));
    }
}

#[test]
fn warm_start_accuracy_grows_with_epochs() {
    let corpus = generate_corpus(&CorpusSpec { n_studies: 200, seed: 2, ..Default::default() });
    let mut last = 0.0;
    for epochs in [1, 10, 100] {
        let p = warm_start(&PolicyParams::zeros(), &corpus, epochs, 1.0).unwrap();
        let mut hits = 0;
        let mut total = 0;
        for r in &corpus {
            let reference = reference_actions(&r.labels);
            let got = p.mode(&r.observation());
            hits += reference.iter().zip(&got).filter(|(a, b)| a == b).count();
            total += CATEGORY_COUNT;
        }
        let acc = hits as f64 / total as f64;
        assert!(acc >= last);
        last = acc;
    }
    assert_eq!(last, 1.0);
}

fn rewards_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5f64..3.0, 2..12)
}

fn group_from(rewards: &[f64], seed: u64) -> CandidateGroup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_params(&mut rng, 1.0);
    let obs = random_obs(&mut rng);
    let mut g = sample_group(&p, &obs, rewards.len(), seed).unwrap();
    for (c, r) in g.candidates.iter_mut().zip(rewards) {
        c.reward = *r;
    }
    g
}

proptest! {
    #[test]
    fn advantages_are_standardized(rewards in rewards_strategy(), seed in any::<u64>()) {
        let mut g = group_from(&rewards, seed);
        compute_advantages(&mut g, 0.0);
        let a: Vec<f64> = g.candidates.iter().map(|c| c.advantage).collect();
        prop_assert!(a.iter().sum::<f64>().abs() < 1e-12);
        if g.reward_std > 1e-6 {
            let var = a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64;
            prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn update_is_affine_invariant(rewards in rewards_strategy(), scale in 0.1f64..10.0, shift in -5.0f64..5.0, seed in any::<u64>()) {
        let mut g1 = group_from(&rewards, seed);
        let mut g2 = g1.clone();
        for c in &mut g2.candidates {
            c.reward = scale * c.reward + shift;
        }
        compute_advantages(&mut g1, 0.0);
        compute_advantages(&mut g2, 0.0);
        prop_assume!(g1.reward_std > 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut p = random_params(&mut rng, 1.0);
        p.axpy(0.05, &random_params(&mut rng, 1.0));
        let reference = random_params(&mut rng, 1.0);
        let cfg = TrainConfig::default();
        let (_, d1) = grpo_objective(&p, &g1, &reference, &cfg).unwrap();
        let (_, d2) = grpo_objective(&p, &g2, &reference, &cfg).unwrap();
        let mut diff = d1.clone();
        diff.axpy(-1.0, &d2);
        prop_assert!(diff.norm_sq().sqrt() <= 1e-9 * (1.0 + d1.norm_sq().sqrt()));
    }

    #[test]
    fn clipped_term_never_exceeds_unclipped(seed in any::<u64>()) {
        let inst = instance(seed, 0.0);
        for t in surrogate_terms(&inst.params, &inst.group, inst.cfg.clip_epsilon).unwrap() {
            prop_assert!(t.term <= t.unclipped);
        }
    }

    #[test]
    fn equal_rewards_give_no_surrogate_update(r in -0.5f64..3.0, g in 2usize..10, seed in any::<u64>()) {
        let mut group = group_from(&vec![r; g], seed);
        compute_advantages(&mut group, 1e-4);
        prop_assert!(group.candidates.iter().all(|c| c.advantage == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(&mut rng, 1.0);
        let cfg = TrainConfig { kl_beta: 0.0, ..Default::default() };
        let (v, grad) = grpo_objective(&p, &group, &p, &cfg).unwrap();
        prop_assert_eq!(v, 0.0);
        prop_assert!(grad.as_slice().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn kl_is_nonnegative_and_zero_at_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(&mut rng, 3.0);
        let q = random_params(&mut rng, 3.0);
        let obs = random_obs(&mut rng);
        prop_assert!(p.kl(&q, &obs) >= 0.0);
        prop_assert_eq!(p.kl(&p, &obs), 0.0);
    }

    #[test]
    fn fresh_groups_have_unit_ratios(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(&mut rng, 2.0);
        let g = sample_group(&p, &random_obs(&mut rng), 8, seed).unwrap();
        prop_assert!(surrogate_terms(&p, &g, 0.2).unwrap().iter().all(|t| t.ratio == 1.0));
    }
}

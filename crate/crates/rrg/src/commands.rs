use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use rrg_core::corpus::{build_idf, generate_corpus, CorpusSpec, Split, StudyRecord};
use rrg_core::grpo::{generate_outputs, train, warm_start, TraceRecord};
use rrg_core::labeler::{Labeler, LabelerLexicon, LexiconFile};
use rrg_core::labels::{LabelVector, Pathology, Provenance};
use rrg_core::metrics::{evaluate, MetricsReport, UncertainPolicy};
use rrg_core::output::{parse_output, render_output, StructuredOutput};
use rrg_core::policy::{PolicyCheckpoint, PolicyParams};
use rrg_core::reward::{reward_r5_format, reward_total, RewardBreakdown, RewardContext};
use rrg_core::text::IdfTokenF1;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::{RunConfig, DEFAULT_SEED};
use crate::error::CliError;
use crate::jsonl::{read_json, read_lines, read_studies, write_json, write_lines, write_studies};
use crate::report::{fraction_table, metrics_table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Table,
}

fn render<T: Serialize>(format: Format, value: &T, table: impl FnOnce() -> String) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value).expect("summary serializes");
            s.push('\n');
            s
        }
        Format::Table => table(),
    }
}

#[derive(Serialize)]
struct CorpusSummary {
    n_studies: usize,
    splits: BTreeMap<&'static str, usize>,
    positives: BTreeMap<&'static str, usize>,
    seed: u64,
}

/// Generates a synthetic corpus. `--seed` overrides the seed in the corpus spec file.
pub fn cmd_gen_corpus(spec: Option<&Path>, out: &Path, seed: Option<u64>, format: Format) -> Result<String, CliError> {
    let mut spec: CorpusSpec = match spec {
        Some(p) => read_json(p)?,
        None => CorpusSpec { seed: DEFAULT_SEED, ..Default::default() },
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate().map_err(|v| CliError::data("invalid corpus spec", v))?;
    let records = generate_corpus(&spec);
    write_studies(out, &records)?;

    let mut splits = BTreeMap::new();
    for r in &records {
        let name = match r.split {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        };
        *splits.entry(name).or_insert(0) += 1;
    }
    let positives = Pathology::ALL
        .iter()
        .map(|&c| (c.name(), records.iter().filter(|r| r.labels.get(c).is_positive()).count()))
        .collect();
    let summary = CorpusSummary { n_studies: records.len(), splits, positives, seed: spec.seed };
    Ok(render(format, &summary, || {
        let mut s = format!("wrote {} studies (seed {})\n", summary.n_studies, summary.seed);
        for (k, v) in &summary.splits {
            s.push_str(&format!("  {k:<5} {v}\n"));
        }
        s
    }))
}

#[derive(Deserialize)]
struct RawOutputLine {
    #[serde(default)]
    study_id: Option<String>,
    output: String,
}

#[derive(Serialize)]
struct ParsedLine<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    study_id: Option<&'a str>,
    #[serde(flatten)]
    parsed: &'a StructuredOutput,
    r5_format: f64,
}

#[derive(Serialize, Default)]
struct FlagSummary {
    n: usize,
    tags_present: usize,
    json_valid: usize,
    schema_complete: usize,
    ordering_ok: usize,
    mean_r5: f64,
}

/// Parses raw emissions `{"study_id": .., "output": ".."}` into structured outputs.
pub fn cmd_parse(input: &Path, out: &Path, format: Format) -> Result<String, CliError> {
    let rows: Vec<(usize, RawOutputLine)> = read_lines(input)?;
    let parsed: Vec<StructuredOutput> = rows.iter().map(|(_, r)| parse_output(&r.output)).collect();
    let mut s = FlagSummary { n: parsed.len(), ..Default::default() };
    for p in &parsed {
        s.tags_present += usize::from(p.flags.tags_present);
        s.json_valid += usize::from(p.flags.json_valid);
        s.schema_complete += usize::from(p.flags.schema_complete);
        s.ordering_ok += usize::from(p.flags.ordering_ok);
        s.mean_r5 += reward_r5_format(&p.flags);
    }
    if s.n > 0 {
        s.mean_r5 /= s.n as f64;
    }
    write_lines(
        out,
        rows.iter().zip(&parsed).map(|((_, r), p)| ParsedLine {
            study_id: r.study_id.as_deref(),
            parsed: p,
            r5_format: reward_r5_format(&p.flags),
        }),
    )?;
    Ok(render(format, &s, || {
        let frac = |k: usize| if s.n == 0 { 0.0 } else { k as f64 / s.n as f64 };
        fraction_table(
            &format!("format compliance over {} outputs", s.n),
            &[
                ("tags present", frac(s.tags_present)),
                ("valid JSON", frac(s.json_valid)),
                ("schema complete", frac(s.schema_complete)),
                ("ordering ok", frac(s.ordering_ok)),
                ("mean R5", s.mean_r5),
            ],
        )
    }))
}

#[derive(Deserialize)]
struct TextLine {
    #[serde(default)]
    study_id: Option<String>,
    findings_text: String,
}

#[derive(Serialize)]
struct LabelLine<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    study_id: Option<&'a str>,
    labels: LabelVector,
}

pub fn load_lexicon(path: Option<&Path>) -> Result<LabelerLexicon, CliError> {
    match path {
        None => Ok(LabelerLexicon::default()),
        Some(p) => {
            let file: LexiconFile = read_json(p)?;
            LabelerLexicon::from_file(&file).map_err(|v| CliError::data(format!("{}: invalid lexicon", p.display()), v))
        }
    }
}

/// Labels `findings_text` of every input line.
pub fn cmd_label(input: &Path, lexicon: Option<&Path>, out: &Path, format: Format) -> Result<String, CliError> {
    let lex = load_lexicon(lexicon)?;
    let rows: Vec<(usize, TextLine)> = read_lines(input)?;
    let labels: Vec<LabelVector> = rows.iter().map(|(_, r)| lex.extract_labels(&r.findings_text)).collect();
    write_lines(
        out,
        rows.iter().zip(&labels).map(|((_, r), l)| LabelLine { study_id: r.study_id.as_deref(), labels: *l }),
    )?;
    let prevalence: Vec<(&str, f64)> = Pathology::ALL
        .iter()
        .map(|&c| {
            let n = labels.iter().filter(|l| l.get(c).is_positive()).count();
            (c.name(), if labels.is_empty() { 0.0 } else { n as f64 / labels.len() as f64 })
        })
        .collect();
    let map: BTreeMap<&str, f64> = prevalence.iter().copied().collect();
    Ok(render(format, &map, || {
        fraction_table(&format!("positive rate over {} reports (lexicon {})", labels.len(), lex.version()), &prevalence)
    }))
}

#[derive(Deserialize)]
struct PredictionLine {
    study_id: String,
    #[serde(default)]
    output: Option<String>,
    #[serde(default)]
    findings_text: Option<String>,
    #[serde(default)]
    labels: Option<Map<String, Value>>,
}

/// Prediction lines carry either a raw `output` or a study-shaped
/// `findings_text` plus `labels`, which is rendered through the protocol.
fn read_predictions(path: &Path) -> Result<Vec<(String, StructuredOutput)>, CliError> {
    let rows: Vec<(usize, PredictionLine)> = read_lines(path)?;
    let mut out = Vec::with_capacity(rows.len());
    let mut problems = Vec::new();
    for (n, row) in rows {
        match (row.output, row.findings_text, row.labels) {
            (Some(raw), _, _) => out.push((row.study_id, parse_output(&raw))),
            (None, Some(text), Some(labels)) => match LabelVector::from_ground_truth_json(&labels) {
                Ok(l) => match render_output(&text, &l.with_provenance(Provenance::AnswerBlock)) {
                    Ok(raw) => out.push((row.study_id, parse_output(&raw))),
                    Err(e) => problems.push(format!("line {n}: {e}")),
                },
                Err(report) => problems.push(format!("line {n}: labels: {report}")),
            },
            _ => problems.push(format!("line {n}: needs \"output\" or both \"findings_text\" and \"labels\"")),
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(CliError::data(format!("{}: invalid prediction lines", path.display()), problems))
    }
}

fn index_references(refs: &[StudyRecord]) -> BTreeMap<&str, &StudyRecord> {
    refs.iter().map(|r| (r.study_id.as_str(), r)).collect()
}

#[derive(Serialize)]
struct RewardLine<'a> {
    study_id: &'a str,
    candidate: usize,
    #[serde(flatten)]
    reward: &'a RewardBreakdown,
}

#[derive(Serialize)]
struct RewardSummary {
    n: usize,
    r1_consistency: f64,
    r2_think_acc: f64,
    r3_answer_acc: f64,
    r4_semantic: f64,
    r5_format: f64,
    total: f64,
}

/// Scores every prediction against its reference study.
pub fn cmd_reward(
    predictions: &Path,
    references: &Path,
    config: Option<&Path>,
    out: &Path,
    format: Format,
) -> Result<String, CliError> {
    let loaded = RunConfig::load(config)?;
    let refs = read_studies(references)?;
    let preds = read_predictions(predictions)?;
    let index = index_references(&refs);
    let missing: Vec<String> = preds
        .iter()
        .filter(|(id, _)| !index.contains_key(id.as_str()))
        .map(|(id, _)| format!("no reference for study_id \"{id}\""))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::data("predictions do not match references", missing));
    }
    let idf = build_idf(&refs);
    let sim = IdfTokenF1::new(&idf);
    let (lexicon, weights, matrix) = (&loaded.lexicon, loaded.config.train.weights, loaded.matrix);
    let scored: Vec<RewardBreakdown> = preds
        .par_iter()
        .map(|(id, p)| {
            let ctx = RewardContext { weights, matrix, labeler: lexicon, similarity: &sim };
            let r = index[id.as_str()];
            reward_total(p, &r.labels, &r.findings_text, &ctx)
        })
        .collect();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let lines: Vec<RewardLine> = preds
        .iter()
        .zip(&scored)
        .map(|((id, _), reward)| {
            let k = seen.entry(id.as_str()).or_insert(0);
            *k += 1;
            RewardLine { study_id: id, candidate: *k - 1, reward }
        })
        .collect();
    write_lines(out, lines)?;

    let n = scored.len();
    let mean = |f: fn(&RewardBreakdown) -> f64| if n == 0 { 0.0 } else { scored.iter().map(f).sum::<f64>() / n as f64 };
    let s = RewardSummary {
        n,
        r1_consistency: mean(|r| r.r1_consistency),
        r2_think_acc: mean(|r| r.r2_think_acc),
        r3_answer_acc: mean(|r| r.r3_answer_acc),
        r4_semantic: mean(|r| r.r4_semantic),
        r5_format: mean(|r| r.r5_format),
        total: mean(|r| r.total),
    };
    Ok(render(format, &s, || {
        let mut t = format!("mean rewards over {n} candidates\n");
        for (k, v) in [
            ("R1 consistency", s.r1_consistency),
            ("R2 think accuracy", s.r2_think_acc),
            ("R3 answer accuracy", s.r3_answer_acc),
            ("R4 semantic", s.r4_semantic),
            ("R5 format", s.r5_format),
            ("total", s.total),
        ] {
            t.push_str(&format!("{k:<18}  {v:>8.4}\n"));
        }
        t
    }))
}

fn evaluation_inputs(
    preds: Vec<(String, StructuredOutput)>,
    refs: &[StudyRecord],
) -> Result<(Vec<StructuredOutput>, Vec<&StudyRecord>), CliError> {
    let index = index_references(refs);
    let mut problems = Vec::new();
    let mut by_id: BTreeMap<String, StructuredOutput> = BTreeMap::new();
    for (id, p) in preds {
        if !index.contains_key(id.as_str()) {
            problems.push(format!("no reference for study_id \"{id}\""));
        } else if let std::collections::btree_map::Entry::Vacant(slot) = by_id.entry(id.clone()) {
            slot.insert(p);
        } else {
            problems.push(format!("more than one prediction for study_id \"{id}\""));
        }
    }
    for r in refs {
        if !by_id.contains_key(&r.study_id) {
            problems.push(format!("no prediction for study_id \"{}\"", r.study_id));
        }
    }
    if !problems.is_empty() {
        return Err(CliError::data("predictions do not match references", problems));
    }
    let outputs = refs.iter().map(|r| by_id.remove(&r.study_id).expect("checked above")).collect();
    Ok((outputs, refs.iter().collect()))
}

fn score(outputs: &[StructuredOutput], refs: &[&StudyRecord], labeler: &dyn Labeler) -> MetricsReport {
    let texts: Vec<&str> = refs.iter().map(|r| r.findings_text.as_str()).collect();
    let truths: Vec<LabelVector> = refs.iter().map(|r| r.labels).collect();
    evaluate(outputs, &texts, &truths, labeler, UncertainPolicy::AsNegative).expect("lengths match by construction")
}

/// Full metric suite; exactly one prediction per reference study.
pub fn cmd_eval(predictions: &Path, references: &Path, config: Option<&Path>, out: &Path, format: Format) -> Result<String, CliError> {
    let loaded = RunConfig::load(config)?;
    let refs = read_studies(references)?;
    let preds = read_predictions(predictions)?;
    let (outputs, ordered) = evaluation_inputs(preds, &refs)?;
    let report = score(&outputs, &ordered, &loaded.lexicon);
    write_json(out, &report)?;
    Ok(render(format, &report, || metrics_table(&report)))
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    iterations: usize,
    seed: u64,
    final_mean_reward: f64,
    final_kl: f64,
    eval: &'a MetricsReport,
}

/// Warm start then GRPO. Writes into `out_dir`: `reference.json` and
/// `policy.json` checkpoints, `trace.jsonl`, `eval.json`, the resolved
/// `config.json` and, when generated, `corpus.jsonl`.
pub fn cmd_train(config: Option<&Path>, out_dir: &Path, seed: Option<u64>, format: Format) -> Result<String, CliError> {
    let loaded = RunConfig::load(config)?;
    let mut cfg = loaded.config.clone();
    if let Some(s) = seed {
        cfg.train.seed = s;
        if let Some(spec) = cfg.corpus_spec.as_mut() {
            spec.seed = s;
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let corpus = match &cfg.corpus {
        Some(p) => read_studies(p)?,
        None => {
            let spec = cfg.corpus_spec.clone().unwrap_or(CorpusSpec { n_studies: 200, seed: cfg.train.seed, ..Default::default() });
            let records = generate_corpus(&spec);
            write_studies(&out_dir.join("corpus.jsonl"), &records)?;
            records
        }
    };
    let eval_records: Vec<StudyRecord> = match &cfg.eval_corpus {
        Some(p) => read_studies(p)?,
        None => corpus.iter().filter(|r| r.split == Split::Test).cloned().collect(),
    };

    let t = &cfg.train;
    let reference = warm_start(&PolicyParams::zeros(), &corpus, t.warm_start_epochs, t.warm_start_learning_rate)?;
    let idf = build_idf(&corpus);
    let sim = IdfTokenF1::new(&idf);
    let ctx = RewardContext { weights: t.weights, matrix: loaded.matrix, labeler: &loaded.lexicon, similarity: &sim };
    let (params, trace) = train(t, &corpus, &reference, &reference, &ctx)?;

    let outputs = generate_outputs(&params, &eval_records, cfg.eval_decoding, t.seed.wrapping_add(1));
    let refs: Vec<&StudyRecord> = eval_records.iter().collect();
    let report = score(&outputs, &refs, &loaded.lexicon);

    write_json(&out_dir.join("config.json"), &cfg)?;
    write_json(&out_dir.join("reference.json"), &PolicyCheckpoint::from(&reference))?;
    write_json(&out_dir.join("policy.json"), &PolicyCheckpoint::from(&params))?;
    write_lines(&out_dir.join("trace.jsonl"), trace.iter())?;
    write_json(&out_dir.join("eval.json"), &report)?;

    let last: Option<&TraceRecord> = trace.last();
    let summary = TrainSummary {
        iterations: trace.len(),
        seed: t.seed,
        final_mean_reward: last.map_or(0.0, |r| r.mean_reward),
        final_kl: last.map_or(0.0, |r| r.kl),
        eval: &report,
    };
    Ok(render(format, &summary, || {
        format!(
            "trained {} iterations (seed {}), final group reward {:.4}, KL {:.4}\n{}",
            summary.iterations,
            summary.seed,
            summary.final_mean_reward,
            summary.final_kl,
            metrics_table(&report)
        )
    }))
}

//! Synthetic studies and the sentence templates shared by the corpus
//! generator and the toy policy.
//!
//! Every (category, finding action) pair renders to one fixed sentence. The
//! default lexicon is closed over these sentences, so labeling a rendered
//! narrative recovers the intended labels exactly.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::labels::{LabelValue, LabelVector, Pathology, Provenance, CATEGORY_COUNT};
use crate::output::render_blocks;
use crate::policy::{Actions, CategoryAction, Evidence, FindingAction, Observation};
use crate::text::IdfTable;

/// Positive, negative and uncertain sentences per category.
pub const TEMPLATES: [[&str; 3]; CATEGORY_COUNT] = [
    ["There is bibasilar atelectasis.", "There is no atelectasis.", "Possible bibasilar atelectasis."],
    ["Cardiomegaly is present.", "The heart size is normal.", "Possible mild cardiomegaly."],
    [
        "There is focal consolidation in the left lower lobe.",
        "There is no focal consolidation.",
        "Possible consolidation at the left base.",
    ],
    ["There is mild pulmonary edema.", "There is no pulmonary edema.", "Possible mild interstitial edema."],
    [
        "The cardiomediastinal silhouette is enlarged.",
        "The cardiomediastinal silhouette is within normal limits.",
        "Possible widening of the mediastinum.",
    ],
    ["There is an acute rib fracture.", "No displaced fracture is seen.", "Possible nondisplaced rib fracture."],
    [
        "A nodule is seen in the left upper lobe.",
        "There is no pulmonary nodule or mass.",
        "Possible nodule in the left upper lobe.",
    ],
    [
        "Opacity is observed in the right lower lobe.",
        "There is no focal opacity.",
        "Possible opacity in the right lower lobe.",
    ],
    [
        "No acute cardiopulmonary process.",
        "Abnormal cardiopulmonary findings are present.",
        "Possible acute cardiopulmonary process.",
    ],
    [
        "A small left pleural effusion is present.",
        "There is no pleural effusion.",
        "Possible small right pleural effusion.",
    ],
    [
        "There is right apical pleural thickening.",
        "There is no pleural thickening.",
        "Possible pleural thickening at the left apex.",
    ],
    ["Findings are consistent with pneumonia.", "There is no evidence of pneumonia.", "Possible pneumonia."],
    [
        "There is a small right apical pneumothorax.",
        "There is no pneumothorax.",
        "Possible tiny left apical pneumothorax.",
    ],
    [
        "A right-sided PICC line is in place.",
        "No support devices are seen.",
        "Possible catheter projecting over the neck.",
    ],
];

/// Categories whose negatives a reference report states explicitly; other
/// negatives go unmentioned.
pub const ROUTINE_NEGATIVES: [Pathology; 5] = [
    Pathology::Cardiomegaly,
    Pathology::EnlargedCardiomediastinum,
    Pathology::Consolidation,
    Pathology::PleuralEffusion,
    Pathology::Pneumothorax,
];

/// The sentence a finding action contributes, if any.
pub fn template(category: Pathology, finding: FindingAction) -> Option<&'static str> {
    let row = &TEMPLATES[category.index()];
    match finding {
        FindingAction::AssertPositive => Some(row[0]),
        FindingAction::AssertNegative => Some(row[1]),
        FindingAction::AssertUncertain => Some(row[2]),
        FindingAction::Omit => None,
    }
}

/// Narrative for a set of finding actions, sentences in category order.
pub fn render_findings(findings: impl IntoIterator<Item = (Pathology, FindingAction)>) -> String {
    let mut text = String::new();
    for (c, f) in findings {
        if let Some(s) = template(c, f) {
            if !text.is_empty() {
                text.push(' ');
            }
            text.push_str(s);
        }
    }
    text
}

/// Full protocol emission for an action assignment.
pub fn render_actions(actions: &Actions) -> String {
    let think = render_findings(Pathology::ALL.iter().zip(actions).map(|(&c, a)| (c, a.finding)));
    let labels = LabelVector::new(actions.map(|a| a.answer), Provenance::AnswerBlock);
    render_blocks(&think, &labels).expect("templates contain no delimiters")
}

/// The actions that reproduce a study's reference report and labels.
pub fn reference_actions(labels: &LabelVector) -> Actions {
    core::array::from_fn(|i| {
        let c = Pathology::ALL[i];
        let answer = labels.get(c);
        let finding = match answer {
            LabelValue::Positive => FindingAction::AssertPositive,
            LabelValue::Uncertain => FindingAction::AssertUncertain,
            LabelValue::Negative if ROUTINE_NEGATIVES.contains(&c) => FindingAction::AssertNegative,
            LabelValue::Negative => FindingAction::Omit,
        };
        CategoryAction { finding, answer }
    })
}

/// Reference findings text for a label vector.
pub fn reference_report(labels: &LabelVector) -> String {
    render_findings(Pathology::ALL.iter().zip(reference_actions(labels)).map(|(&c, a)| (c, a.finding)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One study: reference findings, ground-truth labels and toy evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRecord {
    pub study_id: String,
    pub findings_text: String,
    pub labels: LabelVector,
    /// Evidence symbols; absent for externally labeled data.
    pub observation: Option<Observation>,
    pub split: Split,
    /// Fields this crate does not interpret, kept for round-tripping.
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl StudyRecord {
    /// Stored evidence, or noise-free evidence derived from the labels.
    pub fn observation(&self) -> Observation {
        self.observation
            .unwrap_or_else(|| Observation(self.labels.values().map(Evidence::for_label)))
    }
}

/// Marginal probabilities of one category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Marginal {
    pub positive: f64,
    pub uncertain: f64,
}

/// Recipe for a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub n_studies: usize,
    /// Per-category marginals keyed by canonical name. "No Finding" is derived
    /// and must not appear. Unlisted categories use [`CorpusSpec::default_marginal`].
    #[serde(default = "default_marginals")]
    pub marginals: BTreeMap<String, Marginal>,
    /// Probability that an evidence symbol is replaced by one of the other two.
    #[serde(default)]
    pub p_noise: f64,
    #[serde(default)]
    pub seed: u64,
    /// Fractions of studies assigned to train and val; the rest go to test.
    #[serde(default = "default_split_fractions")]
    pub split_fractions: [f64; 2],
}

fn default_split_fractions() -> [f64; 2] {
    [0.8, 0.1]
}

fn default_marginals() -> BTreeMap<String, Marginal> {
    let table: [(Pathology, f64, f64); 13] = [
        (Pathology::Atelectasis, 0.20, 0.05),
        (Pathology::Cardiomegaly, 0.15, 0.04),
        (Pathology::Consolidation, 0.08, 0.04),
        (Pathology::Edema, 0.12, 0.05),
        (Pathology::EnlargedCardiomediastinum, 0.06, 0.04),
        (Pathology::Fracture, 0.04, 0.02),
        (Pathology::LungLesion, 0.05, 0.02),
        (Pathology::LungOpacity, 0.22, 0.04),
        (Pathology::PleuralEffusion, 0.20, 0.05),
        (Pathology::PleuralOther, 0.03, 0.02),
        (Pathology::Pneumonia, 0.07, 0.06),
        (Pathology::Pneumothorax, 0.05, 0.02),
        (Pathology::SupportDevices, 0.25, 0.02),
    ];
    table
        .iter()
        .map(|&(c, positive, uncertain)| (c.name().into(), Marginal { positive, uncertain }))
        .collect()
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_studies: 1000,
            marginals: default_marginals(),
            p_noise: 0.0,
            seed: 0,
            split_fractions: default_split_fractions(),
        }
    }
}

impl CorpusSpec {
    pub fn default_marginal() -> Marginal {
        Marginal { positive: 0.05, uncertain: 0.02 }
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut problems = Vec::new();
        for (name, m) in &self.marginals {
            match Pathology::from_name(name) {
                None => problems.push(format!("marginals: unknown category \"{name}\"")),
                Some(Pathology::NoFinding) => {
                    problems.push("marginals: \"No Finding\" is derived from the other categories".into())
                }
                Some(_) => {}
            }
            let probs_ok = (0.0..=1.0).contains(&m.positive)
                && (0.0..=1.0).contains(&m.uncertain)
                && m.positive + m.uncertain <= 1.0;
            if !probs_ok {
                problems.push(format!(
                    "marginals.{name}: positive={} uncertain={} must be probabilities summing to at most 1",
                    m.positive, m.uncertain
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.p_noise) {
            problems.push(format!("p_noise = {} must lie in [0, 1]", self.p_noise));
        }
        let [train, val] = self.split_fractions;
        if !((0.0..=1.0).contains(&train) && (0.0..=1.0).contains(&val) && train + val <= 1.0) {
            problems.push(format!("split_fractions = [{train}, {val}] must be fractions summing to at most 1"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }

    fn marginal(&self, c: Pathology) -> Marginal {
        self.marginals.get(c.name()).copied().unwrap_or_else(Self::default_marginal)
    }
}

/// 64-bit FNV-1a over the seed bytes and the id, with a final avalanche.
fn split_hash(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(id.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // FNV leaves the high bits poorly mixed for ids that differ in a suffix
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

/// Split for a study id, reproducible from the seed alone.
pub fn assign_split(seed: u64, study_id: &str, fractions: [f64; 2]) -> Split {
    let u = (split_hash(seed, study_id) >> 11) as f64 / (1u64 << 53) as f64;
    if u < fractions[0] {
        Split::Train
    } else if u < fractions[0] + fractions[1] {
        Split::Val
    } else {
        Split::Test
    }
}

/// Replaces each symbol, with probability `p_noise`, by one of the other two.
pub fn corrupt<R: Rng + ?Sized>(labels: &LabelVector, p_noise: f64, rng: &mut R) -> Observation {
    Observation(labels.values().map(|v| {
        let clean = Evidence::for_label(v);
        // draw unconditionally so the stream layout does not depend on p_noise
        let (u, pick): (f64, bool) = (rng.gen(), rng.gen());
        if u < p_noise {
            let others: Vec<Evidence> = Evidence::ALL.iter().copied().filter(|&e| e != clean).collect();
            others[usize::from(pick)]
        } else {
            clean
        }
    }))
}

/// Samples a labeled corpus. Deterministic in `spec.seed`.
pub fn generate_corpus(spec: &CorpusSpec) -> Vec<StudyRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.n_studies)
        .map(|i| {
            let mut labels = LabelVector::filled(LabelValue::Negative, Provenance::GroundTruth);
            for c in Pathology::ALL {
                let u: f64 = rng.gen();
                if c == Pathology::NoFinding {
                    continue;
                }
                let m = spec.marginal(c);
                let v = if u < m.positive {
                    LabelValue::Positive
                } else if u < m.positive + m.uncertain {
                    LabelValue::Uncertain
                } else {
                    LabelValue::Negative
                };
                labels.set(c, v);
            }
            labels.derive_no_finding();
            let observation = corrupt(&labels, spec.p_noise, &mut rng);
            let study_id = format!("study-{i:06}");
            StudyRecord {
                split: assign_split(spec.seed, &study_id, spec.split_fractions),
                study_id,
                findings_text: reference_report(&labels),
                labels,
                observation: Some(observation),
                extra: BTreeMap::new(),
            }
        })
        .collect()
}

/// IDF table over the reference findings of a corpus.
pub fn build_idf(records: &[StudyRecord]) -> IdfTable {
    IdfTable::from_documents(records.iter().map(|r| r.findings_text.as_str()))
}

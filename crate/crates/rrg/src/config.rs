use std::path::{Path, PathBuf};

use rrg_core::corpus::CorpusSpec;
use rrg_core::grpo::{Decoding, TrainConfig};
use rrg_core::labeler::{LabelerLexicon, LexiconFile};
use rrg_core::reward::{CfsScoringMatrix, RewardWeights};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::jsonl::read_json;

/// Seed used whenever neither `--seed` nor a config file supplies one.
pub const DEFAULT_SEED: u64 = 0;

/// Everything a run reads besides its positional inputs.
///
/// Relative paths are resolved against the directory of the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides `train.weights` when present.
    #[serde(default)]
    pub weights: Option<RewardWeights>,
    #[serde(default)]
    pub train: TrainConfig,
    /// JSON file holding a scoring matrix.
    #[serde(default)]
    pub matrix: Option<PathBuf>,
    /// JSON lexicon file for the labeler.
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    /// Study corpus for training.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    /// Corpus to generate instead of reading one.
    #[serde(default)]
    pub corpus_spec: Option<CorpusSpec>,
    /// Studies to evaluate on after training; defaults to the test split.
    #[serde(default)]
    pub eval_corpus: Option<PathBuf>,
    #[serde(default)]
    pub eval_decoding: Decoding,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// A validated config with its referenced files loaded.
pub struct LoadedConfig {
    pub config: RunConfig,
    pub matrix: CfsScoringMatrix,
    pub lexicon: LabelerLexicon,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<LoadedConfig, CliError> {
        let (mut config, base) = match path {
            Some(p) => (read_json::<RunConfig>(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
            None => (RunConfig::default(), PathBuf::new()),
        };
        for p in [&mut config.matrix, &mut config.lexicon, &mut config.corpus, &mut config.eval_corpus, &mut config.out_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(w) = config.weights {
            config.train.weights = w;
        }
        config.validate()
    }

    /// Checks every constraint and loads referenced files, reporting all problems together.
    pub fn validate(self) -> Result<LoadedConfig, CliError> {
        let mut problems = Vec::new();
        for (name, p) in [("matrix", &self.matrix), ("lexicon", &self.lexicon), ("corpus", &self.corpus), ("eval_corpus", &self.eval_corpus)] {
            if let Some(p) = p {
                if !p.is_file() {
                    problems.push(format!("{name}: {} does not exist", p.display()));
                }
            }
        }
        if self.corpus.is_some() && self.corpus_spec.is_some() {
            problems.push("corpus and corpus_spec are mutually exclusive".into());
        }
        if let Err(v) = self.train.validate() {
            problems.extend(v.into_iter().map(|m| format!("train: {m}")));
        }
        if let Some(spec) = &self.corpus_spec {
            if let Err(v) = spec.validate() {
                problems.extend(v.into_iter().map(|m| format!("corpus_spec: {m}")));
            }
        }
        let matrix = match &self.matrix {
            Some(p) if p.is_file() => match read_json::<CfsScoringMatrix>(p) {
                Ok(m) => {
                    if let Err(v) = m.validate() {
                        problems.extend(v.into_iter().map(|e| format!("matrix: {e}")));
                    }
                    m
                }
                Err(e) => {
                    problems.push(format!("matrix: {}", e.message));
                    CfsScoringMatrix::default()
                }
            },
            _ => CfsScoringMatrix::default(),
        };
        let lexicon = match &self.lexicon {
            Some(p) if p.is_file() => match read_json::<LexiconFile>(p) {
                Ok(file) => LabelerLexicon::from_file(&file).unwrap_or_else(|v| {
                    problems.extend(v.into_iter().map(|e| format!("lexicon: {e}")));
                    LabelerLexicon::default()
                }),
                Err(e) => {
                    problems.push(format!("lexicon: {}", e.message));
                    LabelerLexicon::default()
                }
            },
            _ => LabelerLexicon::default(),
        };
        if problems.is_empty() {
            Ok(LoadedConfig { config: self, matrix, lexicon })
        } else {
            Err(CliError::data("invalid config", problems))
        }
    }
}

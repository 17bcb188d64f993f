//! Reward shaping and group-relative policy optimization for structured
//! radiology report generation, with a toy factorized policy to train.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod corpus;
pub mod grpo;
pub mod labeler;
pub mod labels;
pub mod metrics;
pub mod output;
pub mod policy;
pub mod reward;
pub mod text;

pub use labeler::{Labeler, LabelerLexicon};
pub use labels::{LabelValue, LabelVector, Pathology, Provenance};
pub use output::{parse_output, render_output, StructuredOutput};
pub use reward::{reward_total, CfsScoringMatrix, RewardBreakdown, RewardContext, RewardWeights};

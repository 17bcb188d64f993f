//! The two-block output protocol.
//!
//! A compliant emission is
//!
//! ```text
//! <think>free-text findings</think><answer>{ ...14 label keys... }</answer>
//! ```
//!
//! Tags are matched case-sensitively. Each of the four delimiters must occur
//! exactly once and the think block must close before the answer block opens.
//! Whitespace between the blocks and any text before or after them is ignored.
//! The answer payload must be a single JSON object.
//!
//! Parsing is total: malformed input never errors, it only clears flags.

use alloc::borrow::Cow;
use alloc::string::String;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::labels::{scan_json_map, LabelVector, PartialLabels, Provenance, SchemaReport, CATEGORY_COUNT};

pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";
pub const ANSWER_OPEN: &str = "<answer>";
pub const ANSWER_CLOSE: &str = "</answer>";

const DELIMITERS: [&str; 4] = [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE];

/// Format-compliance indicators.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FormatFlags {
    /// Exactly one think block and one answer block, think first.
    pub tags_present: bool,
    /// The answer payload is a syntactically valid JSON object.
    pub json_valid: bool,
    /// The answer object carries all fourteen canonical keys with admissible values.
    pub schema_complete: bool,
    /// Both blocks exist once each and the think block closes before the answer opens.
    pub ordering_ok: bool,
}

/// A parsed model emission.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuredOutput {
    /// Trimmed contents of the think block; empty when it could not be located.
    pub think_text: String,
    /// Raw contents of the answer block; empty when it could not be located.
    pub answer_raw: String,
    /// Present iff the answer is valid JSON and schema-complete.
    pub answer_labels: Option<LabelVector>,
    /// Whatever admissible assignments the answer object carries, even when incomplete.
    #[serde(skip)]
    pub answer_partial: PartialLabels,
    /// Schema problems of a syntactically valid answer object.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_report: Option<SchemaReport>,
    pub flags: FormatFlags,
}

impl StructuredOutput {
    /// Answer predictions with absent categories marked missing.
    pub fn answer_prediction(&self) -> PartialLabels {
        match &self.answer_labels {
            Some(v) => v.as_prediction(),
            None => self.answer_partial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("think text is empty")]
    EmptyThink,
    #[error("think text contains the reserved delimiter {0}")]
    ReservedDelimiter(&'static str),
}

/// Position of a delimiter when it occurs exactly once.
fn unique(raw: &str, needle: &str) -> Option<usize> {
    let first = raw.find(needle)?;
    match raw[first + needle.len()..].find(needle) {
        Some(_) => None,
        None => Some(first),
    }
}

/// Inner text of a block whose open and close delimiters each occur once, in order.
fn block<'a>(raw: &'a str, open: &str, close: &str) -> Option<(usize, &'a str, usize)> {
    let start = unique(raw, open)?;
    let end = unique(raw, close)?;
    let inner_start = start + open.len();
    if end < inner_start {
        return None;
    }
    Some((start, &raw[inner_start..end], end + close.len()))
}

/// Parses arbitrary text into a [`StructuredOutput`].
pub fn parse_output(raw: &str) -> StructuredOutput {
    let think = block(raw, THINK_OPEN, THINK_CLOSE);
    let answer = block(raw, ANSWER_OPEN, ANSWER_CLOSE);

    let mut flags = FormatFlags::default();
    if let (Some((_, _, think_end)), Some((answer_start, _, _))) = (think, answer) {
        // With every delimiter unique, disjoint ordered blocks also rule out nesting.
        flags.ordering_ok = think_end <= answer_start;
        flags.tags_present = flags.ordering_ok;
    }

    let think_text = think.map(|(_, t, _)| t.trim()).unwrap_or("");
    let answer_raw = answer.map(|(_, a, _)| a).unwrap_or("");

    let mut answer_labels = None;
    let mut answer_partial = [None; CATEGORY_COUNT];
    let mut schema_report = None;
    if answer.is_some() {
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(answer_raw) {
            flags.json_valid = true;
            match LabelVector::from_json_map(&map, Provenance::AnswerBlock) {
                Ok(v) => {
                    flags.schema_complete = true;
                    answer_labels = Some(v);
                    answer_partial = v.as_prediction();
                }
                Err(report) => {
                    answer_partial = scan_json_map(&map, false).0;
                    schema_report = Some(report);
                }
            }
        }
    }

    StructuredOutput {
        think_text: think_text.into(),
        answer_raw: answer_raw.into(),
        answer_labels,
        answer_partial,
        schema_report,
        flags,
    }
}

/// Byte-level entry point; invalid UTF-8 is replaced before parsing.
pub fn parse_output_bytes(raw: &[u8]) -> StructuredOutput {
    let text: Cow<'_, str> = String::from_utf8_lossy(raw);
    parse_output(&text)
}

/// Renders think text and labels into a compliant protocol string.
///
/// The think text is trimmed and must be non-empty and free of the four
/// delimiters.
pub fn render_output(think: &str, labels: &LabelVector) -> Result<String, RenderError> {
    let think = think.trim();
    if think.is_empty() {
        return Err(RenderError::EmptyThink);
    }
    render_blocks(think, labels)
}

/// [`render_output`] without the non-empty requirement. The toy policy can
/// omit every sentence, which still has to produce a well-formed emission.
pub(crate) fn render_blocks(think: &str, labels: &LabelVector) -> Result<String, RenderError> {
    if let Some(d) = DELIMITERS.iter().find(|d| think.contains(**d)) {
        return Err(RenderError::ReservedDelimiter(d));
    }
    let mut out = String::with_capacity(think.len() + 420);
    out.push_str(THINK_OPEN);
    out.push('\n');
    if !think.is_empty() {
        out.push_str(think);
        out.push('\n');
    }
    out.push_str(THINK_CLOSE);
    out.push('\n');
    out.push_str(ANSWER_OPEN);
    out.push_str("\n{\n");
    for (i, (c, v)) in labels.iter().enumerate() {
        out.push_str("  \"");
        out.push_str(c.name());
        out.push_str("\": ");
        out.push_str(match v.to_f64() {
            x if x > 0.0 => "1.0",
            x if x < 0.0 => "-1.0",
            _ => "0.0",
        });
        if i + 1 < CATEGORY_COUNT {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("}\n");
    out.push_str(ANSWER_CLOSE);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{LabelValue, Pathology};
    use alloc::format;

    const APPENDIX: &str = "<think>\nThe cardiomediastinal silhouette is within normal limits. The lungs are clear.\n\
There is no pleural effusion or pneumothorax. A port-a-cath is in place, with its\ntip in the expected location.\n</think>\n\
<answer>\n{\n  \"Atelectasis\": 0.0,\n  \"Cardiomegaly\": 0.0,\n  \"Consolidation\": 0.0,\n  \"Edema\": 0.0,\n\
\x20 \"Enlarged Cardiomediastinum\": 0.0,\n  \"Fracture\": 0.0,\n  \"Lung Lesion\": 0.0,\n  \"Lung Opacity\": 0.0,\n\
\x20 \"No Finding\": 1.0,\n  \"Pleural Effusion\": 0.0,\n  \"Pleural Other\": 0.0,\n  \"Pneumonia\": 0.0,\n\
\x20 \"Pneumothorax\": 0.0,\n  \"Support Devices\": 1.0\n}\n</answer>";

    #[test]
    fn appendix_example_is_compliant() {
        let out = parse_output(APPENDIX);
        assert!(out.flags.tags_present && out.flags.json_valid && out.flags.schema_complete);
        assert!(out.think_text.starts_with("The cardiomediastinal"));
        let labels = out.answer_labels.unwrap();
        assert_eq!(labels.get(Pathology::SupportDevices), LabelValue::Positive);
        assert_eq!(labels.get(Pathology::NoFinding), LabelValue::Positive);
    }

    #[test]
    fn untagged_text() {
        let out = parse_output("Lungs clear. {\"Edema\": 0.0}");
        assert!(!out.flags.tags_present);
        assert!(!out.flags.json_valid);
        assert!(out.answer_labels.is_none());
        assert_eq!(out.think_text, "");
    }

    #[test]
    fn non_json_answer() {
        let out = parse_output("<think>t</think><answer>not json</answer>");
        assert!(out.flags.tags_present);
        assert!(!out.flags.json_valid);
        assert!(!out.flags.schema_complete);
        assert_eq!(out.think_text, "t");
    }

    #[test]
    fn json_array_is_not_an_object() {
        let out = parse_output("<think>t</think><answer>[1, 2]</answer>");
        assert!(out.flags.tags_present && !out.flags.json_valid);
    }

    #[test]
    fn incomplete_object_keeps_partial_predictions() {
        let out = parse_output("<think>t</think><answer>{\"Edema\": 1, \"Foo\": 0}</answer>");
        assert!(out.flags.json_valid && !out.flags.schema_complete);
        let pred = out.answer_prediction();
        assert_eq!(pred[Pathology::Edema.index()], Some(LabelValue::Positive));
        assert_eq!(pred.iter().filter(|p| p.is_some()).count(), 1);
        let report = out.schema_report.unwrap();
        assert_eq!(report.unknown_keys, vec![String::from("Foo")]);
        assert_eq!(report.missing.len(), 13);
    }

    #[test]
    fn reversed_blocks() {
        let out = parse_output("<answer>{}</answer><think>t</think>");
        assert!(!out.flags.tags_present);
        assert!(!out.flags.ordering_ok);
        // the answer block itself is still well-formed JSON
        assert!(out.flags.json_valid);
    }

    #[test]
    fn duplicate_and_nested_blocks_are_not_compliant() {
        let twice = "<think>a</think><think>b</think><answer>{}</answer>";
        assert!(!parse_output(twice).flags.tags_present);
        let nested = "<think>a<answer>{}</answer></think>";
        assert!(!parse_output(nested).flags.tags_present);
        let interleaved = "<think>a<answer></think>{}</answer>";
        assert!(!parse_output(interleaved).flags.tags_present);
    }

    #[test]
    fn surrounding_text_and_case() {
        let labels = LabelVector::no_finding(Provenance::GroundTruth);
        let body = render_output("Lungs clear.", &labels).unwrap();
        let out = parse_output(&format!("Sure, here it is:\n{body}\nThanks."));
        assert!(out.flags.tags_present && out.flags.schema_complete);
        let upper = body.replace("<think>", "<THINK>");
        assert!(!parse_output(&upper).flags.tags_present);
    }

    #[test]
    fn render_matches_appendix_shape() {
        let mut labels = LabelVector::no_finding(Provenance::GroundTruth);
        labels.set(Pathology::SupportDevices, LabelValue::Positive);
        let think = "The cardiomediastinal silhouette is within normal limits. The lungs are clear.\n\
There is no pleural effusion or pneumothorax. A port-a-cath is in place, with its\ntip in the expected location.";
        assert_eq!(render_output(think, &labels).unwrap(), APPENDIX);
    }

    #[test]
    fn render_rejects_delimiters_and_empty() {
        let v = LabelVector::no_finding(Provenance::GroundTruth);
        assert_eq!(render_output("a </think> b", &v), Err(RenderError::ReservedDelimiter("</think>")));
        assert_eq!(render_output("  \n", &v), Err(RenderError::EmptyThink));
        assert!(render_blocks("", &v).is_ok());
    }

    #[test]
    fn empty_think_block_parses() {
        let v = LabelVector::no_finding(Provenance::GroundTruth);
        let out = parse_output(&render_blocks("", &v).unwrap());
        assert!(out.flags.tags_present && out.flags.schema_complete);
        assert_eq!(out.think_text, "");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_labels() -> impl Strategy<Value = LabelVector> {
            proptest::array::uniform14(prop_oneof![
                Just(LabelValue::Positive),
                Just(LabelValue::Negative),
                Just(LabelValue::Uncertain)
            ])
            .prop_map(|v| LabelVector::new(v, Provenance::AnswerBlock))
        }

        proptest! {
            #[test]
            fn parse_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
                let out = parse_output_bytes(&bytes);
                prop_assert!(!out.flags.schema_complete || out.flags.json_valid);
                prop_assert!(out.answer_labels.is_none() || out.flags.json_valid);
            }

            #[test]
            fn parse_is_total_on_tag_soup(
                parts in proptest::collection::vec(prop_oneof![
                    Just("<think>".to_string()), Just("</think>".to_string()),
                    Just("<answer>".to_string()), Just("</answer>".to_string()),
                    Just("{}".to_string()), Just("{\"Edema\": 1}".to_string()),
                    "[a-z <>/{}\":,.0-9]{0,12}",
                ], 0..10)
            ) {
                let raw: String = parts.concat();
                let out = parse_output(&raw);
                prop_assert!(!out.flags.tags_present || out.flags.ordering_ok);
                prop_assert!(!out.flags.schema_complete || out.flags.json_valid);
            }

            #[test]
            fn render_parse_round_trip(think in "[A-Za-z0-9 ,.;]{1,80}", labels in any_labels()) {
                prop_assume!(!think.trim().is_empty());
                let raw = render_output(&think, &labels).unwrap();
                let out = parse_output(&raw);
                prop_assert!(out.flags.tags_present && out.flags.json_valid && out.flags.schema_complete);
                prop_assert_eq!(out.answer_labels, Some(labels));
                prop_assert_eq!(out.think_text.as_str(), think.trim());
                // re-rendering the parse is a fixed point
                let again = parse_output(&render_output(&out.think_text, &out.answer_labels.unwrap()).unwrap());
                prop_assert_eq!(again, out);
            }
        }
    }
}

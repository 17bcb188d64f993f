//! The fourteen-category chest X-ray label vocabulary.
//!
//! Every other module speaks in [`LabelVector`]s: the labeler produces them
//! from prose, the answer block is parsed into one, and rewards and metrics
//! compare them category by category in the fixed [`Pathology::ALL`] order.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Number of label categories.
pub const CATEGORY_COUNT: usize = 14;

/// Canonical category names, in index order. These are the exact JSON keys
/// of the answer block.
pub const CATEGORY_NAMES: [&str; CATEGORY_COUNT] = [
    "Atelectasis",
    "Cardiomegaly",
    "Consolidation",
    "Edema",
    "Enlarged Cardiomediastinum",
    "Fracture",
    "Lung Lesion",
    "Lung Opacity",
    "No Finding",
    "Pleural Effusion",
    "Pleural Other",
    "Pneumonia",
    "Pneumothorax",
    "Support Devices",
];

/// One of the fourteen pathology categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Pathology {
    Atelectasis = 0,
    Cardiomegaly = 1,
    Consolidation = 2,
    Edema = 3,
    EnlargedCardiomediastinum = 4,
    Fracture = 5,
    LungLesion = 6,
    LungOpacity = 7,
    NoFinding = 8,
    PleuralEffusion = 9,
    PleuralOther = 10,
    Pneumonia = 11,
    Pneumothorax = 12,
    SupportDevices = 13,
}

impl Pathology {
    pub const ALL: [Pathology; CATEGORY_COUNT] = [
        Pathology::Atelectasis,
        Pathology::Cardiomegaly,
        Pathology::Consolidation,
        Pathology::Edema,
        Pathology::EnlargedCardiomediastinum,
        Pathology::Fracture,
        Pathology::LungLesion,
        Pathology::LungOpacity,
        Pathology::NoFinding,
        Pathology::PleuralEffusion,
        Pathology::PleuralOther,
        Pathology::Pneumonia,
        Pathology::Pneumothorax,
        Pathology::SupportDevices,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        CATEGORY_NAMES[self.index()]
    }

    /// Exact lookup of a canonical name. Surrounding whitespace is ignored,
    /// case and inner spacing are not.
    pub fn from_name(name: &str) -> Option<Self> {
        let name = name.trim();
        CATEGORY_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| Self::ALL[i])
    }
}

impl fmt::Display for Pathology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single category assignment. Label maps carry it as `1.0` / `0.0` / `-1.0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelValue {
    Positive,
    Negative,
    Uncertain,
}

impl LabelValue {
    pub const ALL: [LabelValue; 3] = [LabelValue::Positive, LabelValue::Negative, LabelValue::Uncertain];

    pub fn to_f64(self) -> f64 {
        match self {
            LabelValue::Positive => 1.0,
            LabelValue::Negative => 0.0,
            LabelValue::Uncertain => -1.0,
        }
    }

    /// Admits exactly 1, 0 and -1 (integer or float spelling). Anything else is rejected.
    pub fn from_f64(value: f64) -> Option<Self> {
        if value == 1.0 {
            Some(LabelValue::Positive)
        } else if value == 0.0 {
            Some(LabelValue::Negative)
        } else if value == -1.0 {
            Some(LabelValue::Uncertain)
        } else {
            None
        }
    }

    /// Position of this value in [`LabelValue::ALL`]; used to index policy heads.
    #[inline]
    pub fn index(self) -> usize {
        match self {
            LabelValue::Positive => 0,
            LabelValue::Negative => 1,
            LabelValue::Uncertain => 2,
        }
    }

    pub fn is_positive(self) -> bool {
        self == LabelValue::Positive
    }
}

/// Where a label vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    GroundTruth,
    LabelerOutput,
    AnswerBlock,
}

/// A complete assignment of all fourteen categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabelVector {
    values: [LabelValue; CATEGORY_COUNT],
    provenance: Provenance,
}

impl LabelVector {
    pub fn new(values: [LabelValue; CATEGORY_COUNT], provenance: Provenance) -> Self {
        Self { values, provenance }
    }

    /// Every category set to `value`.
    pub fn filled(value: LabelValue, provenance: Provenance) -> Self {
        Self::new([value; CATEGORY_COUNT], provenance)
    }

    /// The all-negative vector with "No Finding" positive.
    pub fn no_finding(provenance: Provenance) -> Self {
        let mut v = Self::filled(LabelValue::Negative, provenance);
        v.set(Pathology::NoFinding, LabelValue::Positive);
        v
    }

    #[inline]
    pub fn get(&self, category: Pathology) -> LabelValue {
        self.values[category.index()]
    }

    #[inline]
    pub fn set(&mut self, category: Pathology, value: LabelValue) {
        self.values[category.index()] = value;
    }

    pub fn values(&self) -> &[LabelValue; CATEGORY_COUNT] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (Pathology, LabelValue)> + '_ {
        Pathology::ALL.iter().map(move |&c| (c, self.get(c)))
    }

    /// Recomputes "No Finding": positive iff all thirteen other categories are negative.
    pub fn derive_no_finding(&mut self) {
        let clear = self
            .iter()
            .filter(|(c, _)| *c != Pathology::NoFinding)
            .all(|(_, v)| v == LabelValue::Negative);
        let value = if clear { LabelValue::Positive } else { LabelValue::Negative };
        self.set(Pathology::NoFinding, value);
    }

    /// Prediction view with every category present.
    pub fn as_prediction(&self) -> PartialLabels {
        let mut out = [None; CATEGORY_COUNT];
        for (slot, v) in out.iter_mut().zip(self.values.iter()) {
            *slot = Some(*v);
        }
        out
    }

    /// JSON object keyed by canonical names (key order follows the canonical order,
    /// which is also lexicographic).
    pub fn to_json_map(&self) -> Map<String, Value> {
        let mut map = Map::new();
        for (c, v) in self.iter() {
            map.insert(c.name().to_string(), Value::from(v.to_f64()));
        }
        map
    }

    /// Strict schema check of a parsed JSON object.
    ///
    /// Succeeds iff all fourteen canonical keys are present exactly once (after
    /// trimming) with a value in {1, 0, -1}; otherwise every problem found is
    /// listed in the returned [`SchemaReport`].
    pub fn from_json_map(raw: &Map<String, Value>, provenance: Provenance) -> Result<Self, SchemaReport> {
        Self::from_json_map_with(raw, provenance, false)
    }

    /// Like [`LabelVector::from_json_map`] but maps JSON `null` (an external
    /// labeler's blank / unmentioned state) to `Negative`. Used for ground truth.
    pub fn from_ground_truth_json(raw: &Map<String, Value>) -> Result<Self, SchemaReport> {
        Self::from_json_map_with(raw, Provenance::GroundTruth, true)
    }

    fn from_json_map_with(
        raw: &Map<String, Value>,
        provenance: Provenance,
        blank_is_negative: bool,
    ) -> Result<Self, SchemaReport> {
        let (partial, mut report) = scan_json_map(raw, blank_is_negative);
        let mut values = [LabelValue::Negative; CATEGORY_COUNT];
        for (i, slot) in partial.iter().enumerate() {
            match slot {
                Some(v) => values[i] = *v,
                None => {
                    let c = Pathology::ALL[i];
                    let flagged = report.out_of_range.iter().any(|(k, _)| Pathology::from_name(k) == Some(c));
                    if !flagged {
                        report.missing.push(c);
                    }
                }
            }
        }
        if report.is_clean() {
            Ok(Self::new(values, provenance))
        } else {
            Err(report)
        }
    }
}

impl Serialize for LabelVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(CATEGORY_COUNT))?;
        for (c, v) in self.iter() {
            map.serialize_entry(c.name(), &v.to_f64())?;
        }
        map.end()
    }
}

/// Per-category predictions where `None` means the category is missing.
pub type PartialLabels = [Option<LabelValue>; CATEGORY_COUNT];

/// Everything wrong with a candidate label object.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SchemaReport {
    pub missing: Vec<Pathology>,
    pub unknown_keys: Vec<String>,
    /// Canonical key and the offending value rendered as JSON text.
    pub out_of_range: Vec<(String, String)>,
    pub duplicate_keys: Vec<String>,
}

impl SchemaReport {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty()
            && self.unknown_keys.is_empty()
            && self.out_of_range.is_empty()
            && self.duplicate_keys.is_empty()
    }
}

impl Serialize for Pathology {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Pathology {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let name = <alloc::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        Pathology::from_name(&name)
            .ok_or_else(|| serde::de::Error::custom(alloc::format!("unknown category \"{name}\"")))
    }
}

impl fmt::Display for SchemaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| {
            if first {
                first = false;
                Ok(())
            } else {
                f.write_str("; ")
            }
        };
        if !self.missing.is_empty() {
            sep(f)?;
            f.write_str("missing keys:")?;
            for c in &self.missing {
                write!(f, " \"{}\"", c.name())?;
            }
        }
        if !self.unknown_keys.is_empty() {
            sep(f)?;
            f.write_str("unknown keys:")?;
            for k in &self.unknown_keys {
                write!(f, " \"{}\"", k)?;
            }
        }
        if !self.out_of_range.is_empty() {
            sep(f)?;
            f.write_str("out-of-range values:")?;
            for (k, v) in &self.out_of_range {
                write!(f, " \"{}\"={}", k, v)?;
            }
        }
        if !self.duplicate_keys.is_empty() {
            sep(f)?;
            f.write_str("duplicate keys:")?;
            for k in &self.duplicate_keys {
                write!(f, " \"{}\"", k)?;
            }
        }
        Ok(())
    }
}

/// Reads whatever valid assignments a JSON object carries. Missing keys are
/// left to the caller, everything else lands in the report.
pub(crate) fn scan_json_map(raw: &Map<String, Value>, blank_is_negative: bool) -> (PartialLabels, SchemaReport) {
    let mut partial: PartialLabels = [None; CATEGORY_COUNT];
    let mut seen = [false; CATEGORY_COUNT];
    let mut report = SchemaReport::default();
    for (key, value) in raw {
        let Some(c) = Pathology::from_name(key) else {
            report.unknown_keys.push(key.clone());
            continue;
        };
        if seen[c.index()] {
            report.duplicate_keys.push(key.clone());
            continue;
        }
        seen[c.index()] = true;
        let parsed = match value {
            Value::Number(n) => n.as_f64().and_then(LabelValue::from_f64),
            Value::Null if blank_is_negative => Some(LabelValue::Negative),
            _ => None,
        };
        match parsed {
            Some(v) => partial[c.index()] = Some(v),
            None => report.out_of_range.push((key.clone(), value.to_string())),
        }
    }
    (partial, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn appendix_example() -> Map<String, Value> {
        let mut map = Map::new();
        for name in CATEGORY_NAMES {
            map.insert(name.to_string(), json!(0.0));
        }
        map.insert("No Finding".to_string(), json!(1.0));
        map
    }

    #[test]
    fn golden_category_order() {
        let names: Vec<&str> = Pathology::ALL.iter().map(|c| c.name()).collect();
        assert_eq!(names, CATEGORY_NAMES.to_vec());
        for (i, c) in Pathology::ALL.iter().enumerate() {
            assert_eq!(c.index(), i);
        }
        // canonical order is also the JSON object key order
        let keys: Vec<String> = LabelVector::no_finding(Provenance::GroundTruth)
            .to_json_map()
            .keys()
            .cloned()
            .collect();
        assert_eq!(keys, CATEGORY_NAMES.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    }

    #[test]
    fn appendix_map_parses() {
        let v = LabelVector::from_json_map(&appendix_example(), Provenance::AnswerBlock).unwrap();
        let positives: Vec<_> = v.iter().filter(|(_, x)| x.is_positive()).map(|(c, _)| c).collect();
        assert_eq!(positives, vec![Pathology::NoFinding]);
        assert_eq!(v.provenance(), Provenance::AnswerBlock);
    }

    #[test]
    fn empty_map_reports_all_missing() {
        let err = LabelVector::from_json_map(&Map::new(), Provenance::AnswerBlock).unwrap_err();
        assert_eq!(err.missing.len(), 14);
        assert!(err.unknown_keys.is_empty());
    }

    #[test]
    fn fractional_value_is_out_of_range() {
        let mut map = appendix_example();
        map.insert("Edema".into(), json!(0.5));
        let err = LabelVector::from_json_map(&map, Provenance::AnswerBlock).unwrap_err();
        assert_eq!(err.out_of_range, vec![("Edema".to_string(), "0.5".to_string())]);
        assert!(err.missing.is_empty());
    }

    #[test]
    fn integer_forms_and_whitespace_keys() {
        let mut map = Map::new();
        for name in CATEGORY_NAMES {
            map.insert(alloc::format!("  {name} "), json!(0));
        }
        map.insert(" Pneumonia".into(), json!(-1));
        map.remove("  Pneumonia ");
        let v = LabelVector::from_json_map(&map, Provenance::AnswerBlock).unwrap();
        assert_eq!(v.get(Pathology::Pneumonia), LabelValue::Uncertain);
    }

    #[test]
    fn near_miss_keys_are_unknown() {
        let mut map = appendix_example();
        let value = map.remove("Lung Opacity").unwrap();
        map.insert("lung opacity".into(), value);
        let err = LabelVector::from_json_map(&map, Provenance::AnswerBlock).unwrap_err();
        assert_eq!(err.unknown_keys, vec!["lung opacity".to_string()]);
        assert_eq!(err.missing, vec![Pathology::LungOpacity]);
    }

    #[test]
    fn duplicate_after_trim() {
        let mut map = appendix_example();
        map.insert("Edema ".into(), json!(1.0));
        let err = LabelVector::from_json_map(&map, Provenance::AnswerBlock).unwrap_err();
        assert_eq!(err.duplicate_keys.len(), 1);
    }

    #[test]
    fn blank_maps_to_negative_only_for_ground_truth() {
        let mut map = appendix_example();
        map.insert("Fracture".into(), Value::Null);
        assert!(LabelVector::from_json_map(&map, Provenance::AnswerBlock).is_err());
        let v = LabelVector::from_ground_truth_json(&map).unwrap();
        assert_eq!(v.get(Pathology::Fracture), LabelValue::Negative);
    }

    #[test]
    fn value_round_trip() {
        for v in LabelValue::ALL {
            assert_eq!(LabelValue::from_f64(v.to_f64()), Some(v));
        }
        assert_eq!(LabelValue::from_f64(2.0), None);
        assert_eq!(LabelValue::from_f64(f64::NAN), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        pub(crate) fn any_vector() -> impl Strategy<Value = LabelVector> {
            proptest::array::uniform14(prop_oneof![
                Just(LabelValue::Positive),
                Just(LabelValue::Negative),
                Just(LabelValue::Uncertain)
            ])
            .prop_map(|vals| LabelVector::new(vals, Provenance::AnswerBlock))
        }

        proptest! {
            #[test]
            fn json_round_trip(v in any_vector()) {
                let back = LabelVector::from_json_map(&v.to_json_map(), Provenance::AnswerBlock).unwrap();
                prop_assert_eq!(back, v);
                let text = serde_json::to_string(&v).unwrap();
                let parsed: Map<String, Value> = serde_json::from_str(&text).unwrap();
                prop_assert_eq!(LabelVector::from_json_map(&parsed, Provenance::AnswerBlock).unwrap(), v);
            }
        }
    }
}

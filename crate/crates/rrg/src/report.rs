//! Plain-text tables.

use std::fmt::Write;

use rrg_core::metrics::MetricsReport;

/// Two-column numeric table with a fraction and a percentage per row.
pub fn fraction_table(title: &str, rows: &[(&str, f64)]) -> String {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    writeln!(out, "{title}").unwrap();
    writeln!(out, "{:<width$}  {:>8}  {:>7}", "metric", "fraction", "x100").unwrap();
    for (name, v) in rows {
        writeln!(out, "{name:<width$}  {v:>8.4}  {:>7.2}", v * 100.0).unwrap();
    }
    out
}

pub fn metrics_rows(r: &MetricsReport) -> Vec<(&'static str, f64)> {
    let mut rows = vec![
        ("BLEU-1", r.bleu[0]),
        ("BLEU-2", r.bleu[1]),
        ("BLEU-3", r.bleu[2]),
        ("BLEU-4", r.bleu[3]),
        ("ROUGE-L", r.rouge_l),
        ("Report Macro-F1", r.report_macro_f1),
        ("Report Micro-F1", r.report_micro_f1),
        ("Answer Macro-F1", r.answer_macro_f1),
        ("Answer Micro-F1", r.answer_micro_f1),
        ("SCS Macro", r.scs_macro),
        ("SCS Micro", r.scs_micro),
    ];
    let e = &r.external;
    for (name, v) in [
        ("METEOR", e.meteor),
        ("BERTScore", e.bertscore),
        ("RadGraph", e.radgraph),
        ("RadCliQ", e.radcliq),
        ("GREEN", e.green),
    ] {
        if let Some(v) = v {
            rows.push((name, v));
        }
    }
    rows
}

pub fn metrics_table(r: &MetricsReport) -> String {
    fraction_table(&format!("evaluation over {} studies", r.n_examples), &metrics_rows(r))
}

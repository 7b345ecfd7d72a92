use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// AUC plus enough metadata to reproduce the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub dataset: String,
    pub split: String,
    pub auc: f64,
    pub n: usize,
    pub seed: u64,
    pub config_hash: String,
    #[serde(skip)]
    pub config: BTreeMap<String, String>,
}

/// First 16 hex digits of SHA-256 over sorted `key=value` lines.
pub fn config_hash(config: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for (k, v) in config {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())[..16].to_string()
}

impl EvalReport {
    pub fn new(
        model: impl Into<String>,
        dataset: impl Into<String>,
        split: impl Into<String>,
        auc: f64,
        n: usize,
        seed: u64,
        config: BTreeMap<String, String>,
    ) -> Self {
        EvalReport {
            model: model.into(),
            dataset: dataset.into(),
            split: split.into(),
            auc,
            n,
            seed,
            config_hash: config_hash(&config),
            config,
        }
    }
}

/// JSON lines (one report per line) and an aligned text table.
pub fn emit_report(reports: &[EvalReport]) -> (String, String) {
    let mut jsonl = String::new();
    for r in reports {
        jsonl.push_str(&serde_json::to_string(r).expect("report serializes"));
        jsonl.push('\n');
    }

    let header = ["model", "dataset", "split", "auc", "n", "seed"];
    let rows: Vec<[String; 6]> = reports
        .iter()
        .map(|r| {
            [
                r.model.clone(),
                r.dataset.clone(),
                r.split.clone(),
                format!("{:.4}", r.auc),
                r.n.to_string(),
                r.seed.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut table = String::new();
    let line = |cells: &[&str], out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&header, &mut table);
    for row in &rows {
        line(&row.each_ref().map(String::as_str), &mut table);
    }
    (jsonl, table)
}

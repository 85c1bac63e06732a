//! Result files: `results.csv`, `details.json`, `manifest.json` and
//! algorithm-specific artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use ctlab_core::Result;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::fixtures::{input_digests, sha256_hex};
use crate::runner::{ResultRow, RunOutput};

pub const COLUMNS: [&str; 13] = ["experiment", "fixture", "method", "K", "T", "vocab", "N", "n", "seed", "nll", "excess", "kl", "extra"];

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// RFC 4180 CSV with a fixed header; floats in shortest round-trip form.
pub fn results_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.fixture.clone(),
            r.method.clone(),
            r.k.to_string(),
            r.t.to_string(),
            r.vocab.to_string(),
            r.big_n.to_string(),
            r.n.to_string(),
            r.seed.to_string(),
            num(r.nll),
            num(r.excess),
            num(r.kl),
            serde_json::to_string(&r.extra)?,
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub algorithm: String,
    pub tool_version: String,
    /// SHA-256 of the canonical configuration JSON.
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub source_sizes: Vec<usize>,
    pub target_sizes: Vec<usize>,
    pub input_digests: BTreeMap<String, String>,
    /// SHA-256 of `results.csv`.
    pub results_hash: String,
    pub rows: usize,
    pub artifacts: Vec<String>,
    pub wall_clock_seconds: f64,
}

pub fn manifest(cfg: &ExperimentConfig, out: &RunOutput, csv_text: &str, wall_clock_seconds: f64) -> Result<RunManifest> {
    Ok(RunManifest {
        experiment: cfg.experiment.clone(),
        algorithm: cfg.algorithm.name().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: sha256_hex(cfg.canonical_json().as_bytes()),
        seeds: cfg.seeds.clone(),
        source_sizes: cfg.source_sizes.clone(),
        target_sizes: cfg.n.clone(),
        input_digests: input_digests(&cfg.fixture)?,
        results_hash: sha256_hex(csv_text.as_bytes()),
        rows: out.rows.len(),
        artifacts: out.artifacts.keys().cloned().collect(),
        wall_clock_seconds,
    })
}

/// Writes every output file of a run into `dir`.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, out: &RunOutput, wall_clock_seconds: f64) -> Result<RunManifest> {
    std::fs::create_dir_all(dir)?;
    let csv_text = results_csv(&out.rows)?;
    std::fs::write(dir.join("results.csv"), &csv_text)?;
    std::fs::write(dir.join("details.json"), serde_json::to_string_pretty(&out.rows)? + "\n")?;
    for (name, body) in &out.artifacts {
        std::fs::write(dir.join(name), body)?;
    }
    let m = manifest(cfg, out, &csv_text, wall_clock_seconds)?;
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn csv_quotes_the_json_blob() {
        let row = ResultRow {
            experiment: "e".into(),
            fixture: "f".into(),
            method: "m".into(),
            k: 1,
            t: 2,
            vocab: 3,
            big_n: 4,
            n: 5,
            seed: 6,
            nll: Some(0.5),
            excess: None,
            kl: Some(f64::INFINITY),
            extra: json!({ "a": [1, 2] }),
        };
        let text = results_csv(&[row]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), r#"e,f,m,1,2,3,4,5,6,0.5,,inf,"{""a"":[1,2]}""#);
    }
}

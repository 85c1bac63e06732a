//! Aggregation of `results.csv` into summary and per-method curve files.

use std::collections::BTreeMap;
use std::path::Path;

use ctlab_core::{CtlabError, Result};

const REQUIRED: [&str; 6] = ["method", "N", "n", "nll", "excess", "kl"];
const METRICS: [&str; 3] = ["nll", "excess", "kl"];

#[derive(Clone, Debug, Default, PartialEq)]
struct Acc {
    values: [Vec<f64>; 3],
}

fn mean_sd(v: &[f64]) -> (String, String) {
    if v.is_empty() {
        return (String::new(), String::new());
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let sd = if v.len() > 1 { (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt().to_string() } else { String::new() };
    (m.to_string(), sd)
}

/// Summary per `(method, N, n)` with mean and sample sd of each metric
/// (blank sd for a single run), and one curve file per method.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub summary_csv: String,
    pub curves: BTreeMap<String, String>,
}

pub fn summarize(results_csv: &str) -> Result<Report> {
    let mut rdr = csv::Reader::from_reader(results_csv.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| CtlabError::InvalidConfig(format!("results file lacks column {name:?}")))
    };
    let idx: Vec<usize> = REQUIRED.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let mut groups: BTreeMap<(String, usize, usize), Acc> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse_usize = |i: usize| {
            rec[i].parse::<usize>().map_err(|e| CtlabError::InvalidConfig(format!("column {}: {e}", REQUIRED[i])))
        };
        let key = (rec[idx[0]].to_string(), parse_usize(idx[1])?, parse_usize(idx[2])?);
        let acc = groups.entry(key).or_default();
        for (k, &c) in idx[3..].iter().enumerate() {
            if !rec[c].is_empty() {
                let v = rec[c].parse::<f64>().map_err(|e| CtlabError::InvalidConfig(format!("column {}: {e}", METRICS[k])))?;
                acc.values[k].push(v);
            }
        }
    }
    let header = "method,N,n,runs,nll_mean,nll_sd,excess_mean,excess_sd,kl_mean,kl_sd\n";
    let mut summary = String::from(header);
    let mut curves: BTreeMap<String, String> = BTreeMap::new();
    for ((method, big_n, n), acc) in &groups {
        let runs = acc.values.iter().map(Vec::len).max().unwrap_or(0);
        let stats: Vec<String> = acc.values.iter().flat_map(|v| { let (m, s) = mean_sd(v); [m, s] }).collect();
        let line = format!("{method},{big_n},{n},{runs},{}\n", stats.join(","));
        summary.push_str(&line);
        curves
            .entry(method.clone())
            .or_insert_with(|| "N,n,runs,nll_mean,nll_sd,excess_mean,excess_sd,kl_mean,kl_sd\n".to_string())
            .push_str(&format!("{big_n},{n},{runs},{}\n", stats.join(",")));
    }
    Ok(Report { summary_csv: summary, curves })
}

/// Reads `dir/results.csv` and writes `summary.csv` plus `curve_<method>.csv`.
pub fn write_report(dir: &Path) -> Result<Report> {
    let path = dir.join("results.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| CtlabError::InvalidConfig(format!("{}: {e}", path.display())))?;
    let report = summarize(&text)?;
    std::fs::write(dir.join("summary.csv"), &report.summary_csv)?;
    for (method, body) in &report.curves {
        std::fs::write(dir.join(format!("curve_{method}.csv")), body)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "experiment,fixture,method,K,T,vocab,N,n,seed,nll,excess,kl,extra\n";

    #[test]
    fn single_run_summary_equals_row() {
        let text = format!("{HEAD}e,f,m,1,4,10,100,5,0,1.5,0.25,0.25,{{}}\n");
        let r = summarize(&text).unwrap();
        assert_eq!(r.summary_csv.lines().nth(1).unwrap(), "m,100,5,1,1.5,,0.25,,0.25,");
    }

    #[test]
    fn three_seeds_fill_sd_and_methods_split_curves() {
        let mut text = HEAD.to_string();
        for (m, s, v) in [("a", 0, 1.0), ("a", 1, 2.0), ("a", 2, 3.0), ("b", 0, 1.0)] {
            text.push_str(&format!("e,f,{m},1,4,10,100,5,{s},{v},{v},{v},{{}}\n"));
        }
        let r = summarize(&text).unwrap();
        let a = r.summary_csv.lines().nth(1).unwrap();
        assert_eq!(a, "a,100,5,3,2,1,2,1,2,1");
        assert_eq!(r.curves.len(), 2);
    }

    #[test]
    fn missing_column_is_a_config_error() {
        let r = summarize("method,N,n\nm,1,1\n");
        assert!(matches!(r, Err(CtlabError::InvalidConfig(_))));
    }
}

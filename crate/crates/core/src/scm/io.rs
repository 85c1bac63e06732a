//! SCM fixture JSON and dataset CSV formats.
//!
//! ```json
//! {"vocab_size": 10,
//!  "variables": [{"id": "x", "parents": [], "op": "unif", "noise_p": 0.0},
//!                {"id": "y", "parents": ["x"], "op": "plus1", "noise_p": 0.1}]}
//! ```
//!
//! Variables with `"op": "table"` list their `exogenous` inputs by name and a
//! `table` indexed by parents then exogenous values; the exogenous laws live
//! in `shared_exogenous`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::model::{ExogenousVar, Mechanism, Scm, Variable};
use super::operator::NoisyOperator;
use super::sample::{Dataset, DomainId};
use crate::error::{CtlabError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScmFile {
    pub vocab_size: usize,
    pub variables: Vec<VariableEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shared_exogenous: Vec<ExogenousVar>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableEntry {
    pub id: String,
    pub parents: Vec<String>,
    pub op: String,
    #[serde(default)]
    pub noise_p: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exogenous: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<usize>,
}

impl ScmFile {
    pub fn from_scm(scm: &Scm) -> Self {
        let names: Vec<&str> = scm.variables().iter().map(|v| v.name.as_str()).collect();
        let variables = scm
            .variables()
            .iter()
            .map(|v| {
                let parents = v.parents.iter().map(|&p| names[p].to_string()).collect();
                match &v.mechanism {
                    Mechanism::Noisy(op) => VariableEntry {
                        id: v.name.clone(),
                        parents,
                        op: op.kind.to_string(),
                        noise_p: op.noise_p,
                        exogenous: Vec::new(),
                        table: Vec::new(),
                    },
                    Mechanism::Table { exogenous, table } => VariableEntry {
                        id: v.name.clone(),
                        parents,
                        op: "table".into(),
                        noise_p: 0.0,
                        exogenous: exogenous.iter().map(|&u| scm.exogenous()[u].name.clone()).collect(),
                        table: table.clone(),
                    },
                }
            })
            .collect();
        Self { vocab_size: scm.vocab(), variables, shared_exogenous: scm.exogenous().to_vec() }
    }

    pub fn to_scm(&self) -> Result<Scm> {
        let mut variables = Vec::with_capacity(self.variables.len());
        for (i, entry) in self.variables.iter().enumerate() {
            let parents = entry
                .parents
                .iter()
                .map(|p| {
                    self.variables[..i]
                        .iter()
                        .position(|v| &v.id == p)
                        .ok_or_else(|| CtlabError::InvalidScm(format!("`{}`: parent `{p}` is not an earlier variable", entry.id)))
                })
                .collect::<Result<Vec<_>>>()?;
            let mechanism = if entry.op == "table" {
                let exogenous = entry
                    .exogenous
                    .iter()
                    .map(|u| {
                        self.shared_exogenous
                            .iter()
                            .position(|e| &e.name == u)
                            .ok_or_else(|| CtlabError::InvalidScm(format!("`{}`: unknown exogenous `{u}`", entry.id)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Mechanism::Table { exogenous, table: entry.table.clone() }
            } else {
                Mechanism::Noisy(NoisyOperator::new(entry.op.parse()?, entry.noise_p)?)
            };
            variables.push(Variable { name: entry.id.clone(), parents, mechanism });
        }
        Scm::new(self.vocab_size, variables, self.shared_exogenous.clone())
    }
}

pub fn scm_to_json(scm: &Scm) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ScmFile::from_scm(scm))?)
}

pub fn scm_from_json(s: &str) -> Result<Scm> {
    serde_json::from_str::<ScmFile>(s)?.to_scm()
}

/// Writes `domain_id,seed,v1..vT` with one sample per row.
pub fn write_dataset_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["domain_id".to_string(), "seed".to_string()];
    header.extend((1..=data.n_vars()).map(|k| format!("v{k}")));
    w.write_record(&header)?;
    let domain = data.domain().to_string();
    let seed = data.seed().to_string();
    let mut rec: Vec<String> = Vec::with_capacity(data.n_vars() + 2);
    for row in data.rows() {
        rec.clear();
        rec.push(domain.clone());
        rec.push(seed.clone());
        rec.extend(row.iter().map(|t| t.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "domain_id" || &header[1] != "seed" {
        return Err(CtlabError::InvalidConfig("dataset header must start with domain_id,seed".into()));
    }
    let n_vars = header.len() - 2;
    let mut domain = None;
    let mut seed = 0;
    let mut data = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let d: DomainId = rec[0].parse()?;
        if *domain.get_or_insert(d) != d {
            return Err(CtlabError::InvalidConfig("mixed domain ids in one dataset".into()));
        }
        seed = rec[1].parse().map_err(|_| CtlabError::InvalidConfig(format!("bad seed `{}`", &rec[1])))?;
        for field in rec.iter().skip(2) {
            data.push(field.parse().map_err(|_| CtlabError::InvalidConfig(format!("bad token `{field}`")))?);
        }
    }
    Dataset::new(domain.unwrap_or(DomainId::Target), seed, n_vars, data)
}

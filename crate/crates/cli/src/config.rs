//! Experiment configuration files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ctlab_core::{CtlabError, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    SimpleTr,
    SimpleAd,
    ModuleTr,
    CircuitTr,
    CircuitAd,
    Twostage,
    Bounds,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SimpleTr => "simple-tr",
            Algorithm::SimpleAd => "simple-ad",
            Algorithm::ModuleTr => "module-tr",
            Algorithm::CircuitTr => "circuit-tr",
            Algorithm::CircuitAd => "circuit-ad",
            Algorithm::Twostage => "twostage",
            Algorithm::Bounds => "bounds",
        }
    }
}

/// Opt-in comparison methods run on the same cell data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Tabular fit of the query on the target rows alone.
    TargetOnly,
    /// Tabular fit on source and target rows pooled as one domain.
    ErmPool,
    /// Tabular fit with the domain as an input, evaluated on the target.
    ErmJoint,
    /// Held-out selection between the true structure and no transport.
    CircuitAdGuided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureFiles {
    pub sources: Vec<PathBuf>,
    pub target: PathBuf,
}

/// A named fixture with its knobs, or SCM files. For `random` fixtures
/// without an explicit seed the run seed picks the fixture, and the length
/// and vocabulary are drawn from `[length, max_length]` and
/// `[vocab, max_vocab]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_vocab: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<FixtureFiles>,
}

impl FixtureSpec {
    /// Label used in result rows.
    pub fn label(&self) -> String {
        match (&self.name, &self.files) {
            (Some(n), _) => n.clone(),
            (None, Some(_)) => "files".into(),
            (None, None) => "unnamed".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateSet {
    /// Every structure within the caps.
    Exhaustive,
    /// The true structure and no transport.
    Guided,
    /// Single-module transport of the query over the prefix.
    ModuleTr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchParams {
    /// Hypothesised target length; the full target by default.
    pub target_len: Option<usize>,
    pub candidates: CandidateSet,
    pub max_parents: usize,
    pub partition_cap: u64,
    pub diagram_cap: u64,
    pub split_fraction: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            target_len: None,
            candidates: CandidateSet::Exhaustive,
            max_parents: 2,
            partition_cap: 100_000,
            diagram_cap: 100_000,
            split_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoStageParams {
    pub lambda: f64,
    pub max_parents: usize,
    /// Smoothing of the pretrained tables.
    pub pretrain_alpha: f64,
    pub finetune_max_parents: usize,
    pub fallback_arity: usize,
    /// With `n = 0`, also compare against exhaustive pretraining on every
    /// source prefix up to this length.
    pub exhaustive_max_len: usize,
}

impl Default for TwoStageParams {
    fn default() -> Self {
        Self { lambda: 1e-3, max_parents: 2, pretrain_alpha: 0.1, finetune_max_parents: 2, fallback_arity: 2, exhaustive_max_len: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Additive smoothing of fitted tables.
    pub alpha: f64,
    /// Replace source samples by their exact distributions.
    pub exact_sources: bool,
    /// Observed prefix for circuit queries; `T* - 1` by default.
    pub prefix_len: Option<usize>,
    /// Circuit transport at every prefix length instead of one.
    pub all_prefixes: bool,
    pub baselines: Vec<Baseline>,
    pub search: SearchParams,
    pub twostage: TwoStageParams,
    /// Random feasible laws drawn when probing bound tightness.
    pub probe_samples: usize,
    pub max_width: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            alpha: ctlab_core::inference::DEFAULT_ALPHA,
            exact_sources: false,
            prefix_len: None,
            all_prefixes: false,
            baselines: Vec::new(),
            search: SearchParams::default(),
            twostage: TwoStageParams::default(),
            probe_samples: 0,
            max_width: ctlab_core::inference::DEFAULT_MAX_WIDTH,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub fixture: FixtureSpec,
    pub algorithm: Algorithm,
    /// Rows per source.
    #[serde(rename = "N", default = "zero_grid")]
    pub source_sizes: Vec<usize>,
    /// Target rows.
    #[serde(default = "zero_grid")]
    pub n: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub params: Params,
}

fn zero_grid() -> Vec<usize> {
    vec![0]
}

fn invalid(msg: impl Into<String>) -> CtlabError {
    CtlabError::InvalidConfig(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.is_empty() || self.experiment.contains(['/', '\\']) {
            return Err(invalid(format!("experiment name {:?} must be a plain non-empty name", self.experiment)));
        }
        if self.source_sizes.is_empty() || self.n.is_empty() || self.seeds.is_empty() {
            return Err(invalid("N, n and seed grids must be non-empty"));
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(invalid("seeds must be distinct"));
        }
        if self.fixture.name.is_some() == self.fixture.files.is_some() {
            return Err(invalid("fixture needs exactly one of `name` and `files`"));
        }
        if !(self.params.alpha >= 0.0 && self.params.alpha.is_finite()) {
            return Err(invalid(format!("alpha {} must be finite and non-negative", self.params.alpha)));
        }
        let s = &self.params.search;
        if !(s.split_fraction > 0.0 && s.split_fraction < 1.0) {
            return Err(invalid(format!("split fraction {} outside (0, 1)", s.split_fraction)));
        }
        if self.params.twostage.lambda < 0.0 {
            return Err(invalid("lambda must be non-negative"));
        }
        Ok(())
    }

    /// Canonical serialisation hashed into the manifest.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }
}

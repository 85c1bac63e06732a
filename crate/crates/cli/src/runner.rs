//! Executes the `(N, n, seed)` grid of an experiment.

use std::collections::{BTreeMap, BTreeSet};

use ctlab_core::adaptation::{module_tr_hypotheses, regime_report, select_among, SearchConfig, SelectionResult, StructureHypothesis};
use ctlab_core::bounds::{analyze_bow, conditional_one, erm_vs_cro_curve, probe_conditional, BowAnalysis, BowProblem, CurveConfig};
use ctlab_core::inference::{fit_cpt, query_truth, true_risk, Cpt, Evidence, Predictor, QueryTruth, RiskReport, RowSet};
use ctlab_core::scm::fixtures::euclid_gcd;
use ctlab_core::scm::{joint_budget, sample_dataset, Dataset, DiscrepancyOracle, DomainCollection, DomainId};
use ctlab_core::transport::{circuit_tr, module_tr, simple_tr, true_diagrams, BoundModule, ParentLists, TransportOptions};
use ctlab_core::twostage::{erm_joint, erm_pool, exhaustive_pretrain, pretrain_tabular, two_stage, PretrainConfig, TwoStageConfig};
use ctlab_core::{CtlabError, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Algorithm, Baseline, CandidateSet, ExperimentConfig};
use crate::fixtures;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub fixture: String,
    pub method: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub vocab: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub seed: u64,
    pub nll: Option<f64>,
    pub excess: Option<f64>,
    pub kl: Option<f64>,
    pub extra: Value,
}

impl ResultRow {
    fn sort_key(&self) -> (String, usize, usize, u64, String) {
        (self.method.clone(), self.big_n, self.n, self.seed, self.extra.to_string())
    }
}

/// Rows plus extra named artifacts (file name to contents).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub artifacts: BTreeMap<String, String>,
}

/// Independent stream seed for one sampled dataset.
pub fn derive_seed(seed: u64, stream: u64, size: usize) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03) ^ (size as u64).wrapping_mul(0x8CB9_2BA7_2F3D_8DD7);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    dc: &'a DomainCollection,
    big_n: usize,
    n: usize,
    seed: u64,
    sources: Vec<Dataset>,
    target: Dataset,
}

impl<'a> Cell<'a> {
    fn new(cfg: &'a ExperimentConfig, dc: &'a DomainCollection, big_n: usize, n: usize, seed: u64) -> Self {
        let sources = if cfg.params.exact_sources {
            Vec::new()
        } else {
            dc.sources
                .iter()
                .enumerate()
                .map(|(j, s)| sample_dataset(s, big_n, derive_seed(seed, 1 + j as u64, big_n), DomainId::Source(j)))
                .collect()
        };
        let target = sample_dataset(&dc.target, n, derive_seed(seed, 0, n), DomainId::Target);
        Self { cfg, dc, big_n, n, seed, sources, target }
    }

    fn source_evidence(&self) -> Vec<Evidence<'_>> {
        if self.cfg.params.exact_sources {
            self.dc.sources.iter().map(|scm| Evidence::Exact { scm, weight: self.big_n.max(1) as f64 }).collect()
        } else {
            self.sources.iter().map(Evidence::Samples).collect()
        }
    }

    fn sampled_sources(&self) -> Result<&[Dataset]> {
        if self.cfg.params.exact_sources {
            return Err(CtlabError::InvalidConfig(format!("{} needs sampled sources", self.cfg.algorithm.name())));
        }
        Ok(&self.sources)
    }

    fn row(&self, method: &str, risk: Option<RiskReport>, extra: Value) -> ResultRow {
        ResultRow {
            experiment: self.cfg.experiment.clone(),
            fixture: self.cfg.fixture.label(),
            method: method.to_string(),
            k: self.dc.n_sources(),
            t: self.dc.target.len(),
            vocab: self.dc.vocab(),
            big_n: self.big_n,
            n: self.n,
            seed: self.seed,
            nll: risk.map(|r| r.nll),
            excess: risk.map(|r| r.excess),
            kl: risk.map(|r| r.kl),
            extra,
        }
    }

    fn t(&self) -> usize {
        self.dc.target.len()
    }

    fn prefix_len(&self) -> Result<usize> {
        let m = self.cfg.params.prefix_len.unwrap_or(self.t() - 1);
        if m == 0 || m >= self.t() {
            return Err(CtlabError::InvalidConfig(format!("prefix length {m} for a target of length {}", self.t())));
        }
        Ok(m)
    }

    fn circuit_truth(&self, m: usize) -> Result<QueryTruth> {
        let prefix: Vec<usize> = (0..m).collect();
        query_truth(&self.dc.target, self.t() - 1, &prefix, joint_budget())
    }

    fn opts(&self) -> TransportOptions {
        TransportOptions { alpha: self.cfg.params.alpha, max_width: self.cfg.params.max_width }
    }

    fn target_only_cpt(&self, y: usize, xs: &[usize]) -> Result<Cpt> {
        if self.n == 0 {
            return Ok(Cpt::uniform(xs.len(), self.dc.vocab()));
        }
        fit_cpt(&RowSet::from_dataset(&self.target, y, xs)?, self.dc.vocab(), self.cfg.params.alpha)
    }

    fn single_query(&self) -> Result<Vec<ResultRow>> {
        let y = self.t() - 1;
        let xs = self.dc.target.parents(y).to_vec();
        let truth = query_truth(&self.dc.target, y, &xs, joint_budget())?;
        let vocab = self.dc.vocab();
        let alpha = self.cfg.params.alpha;
        let oracle = DiscrepancyOracle::induced(self.dc);
        let delta: Vec<BTreeSet<usize>> = (0..self.dc.n_sources()).map(|j| oracle.delta_set(j)).collect();
        let sources = self.source_evidence();
        let target = Evidence::Samples(&self.target);
        let mut rows = Vec::new();
        match self.cfg.algorithm {
            Algorithm::SimpleTr => {
                let cpt = simple_tr(&sources, &target, &delta, y, &xs, vocab, alpha)?;
                rows.push(self.row("simple-tr", Some(true_risk(&cpt, &truth)?), json!({ "delta": delta })));
            }
            Algorithm::ModuleTr => {
                let bind = |scm: &ctlab_core::scm::Scm| BoundModule::new(scm.len() - 1, scm.parents(scm.len() - 1).to_vec());
                let parents = ParentLists { sources: self.dc.sources.iter().map(bind).collect(), target: bind(&self.dc.target) };
                let cpt = module_tr(&sources, &target, &delta, &parents, vocab, alpha)?;
                let pooled = ctlab_core::transport::transport_set(&delta, y);
                rows.push(self.row("module-tr", Some(true_risk(&cpt, &truth)?), json!({ "transport_set": pooled })));
            }
            Algorithm::SimpleAd => {
                let r = ctlab_core::adaptation::simple_ad(self.sampled_sources()?, &self.target, y, &xs, vocab, alpha, self.seed)?;
                let extra = json!({ "chosen": r.chosen, "count": r.count });
                rows.push(self.row("simple-ad", Some(true_risk(&r.predictor, &truth)?), extra));
            }
            _ => unreachable!("single-query algorithms only"),
        }
        for b in &self.cfg.params.baselines {
            match b {
                Baseline::TargetOnly => {
                    let cpt = self.target_only_cpt(y, &xs)?;
                    rows.push(self.row("target-only", Some(true_risk(&cpt, &truth)?), json!({})));
                }
                other => return Err(CtlabError::InvalidConfig(format!("baseline {other:?} needs a circuit query"))),
            }
        }
        Ok(rows)
    }

    fn circuit_transport(&self) -> Result<Vec<ResultRow>> {
        let mut evidence: BTreeMap<DomainId, Evidence> =
            self.source_evidence().into_iter().enumerate().map(|(j, e)| (DomainId::Source(j), e)).collect();
        if self.n > 0 {
            evidence.insert(DomainId::Target, Evidence::Samples(&self.target));
        }
        let oracle = DiscrepancyOracle::induced(self.dc);
        let diagrams = true_diagrams(self.dc);
        let prefixes: Vec<usize> = if self.cfg.params.all_prefixes { (1..self.t()).collect() } else { vec![self.prefix_len()?] };
        let mut rows = Vec::new();
        for m in prefixes {
            let r = circuit_tr(&evidence, &oracle, &diagrams, m, self.dc.vocab(), self.opts())?;
            let truth = self.circuit_truth(m)?;
            let status: Vec<Value> = r
                .status
                .iter()
                .map(|s| json!({ "position": s.position, "transported": s.transported, "pooled": s.pooled.len(), "weight": s.weight }))
                .collect();
            let mut extra = json!({
                "prefix": m,
                "linf": linf_to_truth(&r.predictor, &truth),
                "n_transported": r.n_transported(),
                "status": status,
            });
            if self.cfg.fixture.name.as_deref() == Some("gcd") && m == 2 {
                extra["euclid_agreement"] = json!(euclid_agreement(&r.predictor, self.dc.vocab()));
            }
            rows.push(self.row("circuit-tr", Some(true_risk(&r.predictor, &truth)?), extra));
        }
        Ok(rows)
    }

    fn search_config(&self, target_len: usize, m: usize) -> SearchConfig {
        let s = &self.cfg.params.search;
        SearchConfig {
            max_parents: s.max_parents,
            partition_cap: s.partition_cap,
            diagram_cap: s.diagram_cap,
            split_fraction: s.split_fraction,
            split_seed: self.seed,
            alpha: self.cfg.params.alpha,
            max_width: self.cfg.params.max_width,
            ..SearchConfig::new(target_len, m)
        }
    }

    fn select(&self, set: CandidateSet, target_len: usize, m: usize) -> Result<(SelectionResult, Option<Vec<usize>>)> {
        let sources = self.sampled_sources()?;
        let config = self.search_config(target_len, m);
        let (candidates, truth) = match set {
            CandidateSet::Exhaustive => {
                let lengths: Vec<usize> = sources.iter().map(Dataset::n_vars).collect();
                (ctlab_core::adaptation::enumerate_structures(&config, &lengths)?, None)
            }
            CandidateSet::Guided => {
                if target_len != self.t() {
                    return Err(CtlabError::InvalidConfig("guided candidates need the full target length".into()));
                }
                let truth = StructureHypothesis::truth(self.dc);
                let enc = truth.encoding();
                let guided = SearchConfig { candidates: vec![truth], ..config.clone() };
                let lengths: Vec<usize> = sources.iter().map(Dataset::n_vars).collect();
                (ctlab_core::adaptation::enumerate_structures(&guided, &lengths)?, Some(enc))
            }
            CandidateSet::ModuleTr => {
                if target_len != m + 1 {
                    return Err(CtlabError::InvalidConfig("module-TR candidates need target length prefix + 1".into()));
                }
                let diagrams: Vec<_> = self.dc.sources.iter().map(|s| s.diagram()).collect();
                (module_tr_hypotheses(&diagrams, m, config.max_parents), None)
            }
        };
        Ok((select_among(sources, &self.target, &config, self.dc.vocab(), candidates)?, truth))
    }

    fn selection_row(&self, method: &str, sel: &SelectionResult, truth_enc: Option<Vec<usize>>, risk: RiskReport) -> Result<ResultRow> {
        let none_enc = {
            let lengths: Vec<usize> = sel.hypothesis.diagrams.iter().map(|g| g.len()).collect();
            StructureHypothesis::no_transport(sel.hypothesis.domains.clone(), &lengths).encoding()
        };
        let none_nll = sel.scores.iter().find(|c| c.encoding == none_enc).map(|c| c.nll);
        let circuit = sel.transport.predictor.nodes().len();
        let regime = regime_report(circuit.max(1), self.n.max(1), self.dc.n_sources().max(1))?;
        let extra = json!({
            "chosen_encoding": sel.hypothesis.encoding(),
            "chosen_is_truth": truth_enc.map(|e| e == sel.hypothesis.encoding()),
            "chosen_nll": sel.chosen_nll(),
            "no_transport_nll": none_nll,
            "count": sel.count,
            "log_count": sel.log_count,
            "excess_bound": sel.excess_bound(self.n.max(1)),
            "n_transported": sel.transport.n_transported(),
            "regime": regime.regime,
        });
        Ok(self.row(method, Some(risk), extra))
    }

    fn circuit_baselines(&self, m: usize, truth: &QueryTruth) -> Result<Vec<ResultRow>> {
        let mut rows = Vec::new();
        let (vocab, alpha) = (self.dc.vocab(), self.cfg.params.alpha);
        for b in &self.cfg.params.baselines {
            let (name, cpt) = match b {
                Baseline::TargetOnly => ("target-only", self.target_only_cpt(self.t() - 1, &(0..m).collect::<Vec<_>>())?),
                Baseline::ErmJoint => ("erm-joint", erm_joint(&self.target, m, vocab, alpha)?),
                Baseline::ErmPool => ("erm-pool", erm_pool(self.sampled_sources()?, &self.target, m, vocab, alpha)?),
                Baseline::CircuitAdGuided => {
                    let (sel, enc) = self.select(CandidateSet::Guided, self.t(), m)?;
                    let risk = true_risk(&sel.transport.predictor, truth)?;
                    rows.push(self.selection_row("circuit-ad-guided", &sel, enc, risk)?);
                    continue;
                }
            };
            rows.push(self.row(name, Some(true_risk(&cpt, truth)?), json!({})));
        }
        Ok(rows)
    }

    fn circuit_adaptation(&self) -> Result<Vec<ResultRow>> {
        let m = self.prefix_len()?;
        let target_len = self.cfg.params.search.target_len.unwrap_or(self.t());
        let truth = self.circuit_truth(m)?;
        let (sel, enc) = self.select(self.cfg.params.search.candidates, target_len, m)?;
        let risk = true_risk(&sel.transport.predictor, &truth)?;
        let mut rows = vec![self.selection_row("circuit-ad", &sel, enc, risk)?];
        rows.extend(self.circuit_baselines(m, &truth)?);
        Ok(rows)
    }

    fn pretrain_config(&self) -> PretrainConfig {
        let p = &self.cfg.params.twostage;
        PretrainConfig { lambda: p.lambda, max_parents: p.max_parents, alpha: p.pretrain_alpha }
    }

    fn pretraining(&self) -> Result<Vec<ResultRow>> {
        let vocab = self.dc.vocab();
        let pre = pretrain_tabular(&self.source_evidence(), vocab, self.pretrain_config())?;
        let as_sets = |g: &ctlab_core::scm::CausalDiagram| -> Vec<BTreeSet<usize>> {
            g.all_parents().iter().map(|p| p.iter().copied().collect()).collect()
        };
        let recovered = pre.diagrams.iter().zip(&self.dc.sources).all(|(g, s)| as_sets(g) == as_sets(&s.diagram()));
        let mut checks = Vec::new();
        for len in 1..=self.cfg.params.twostage.exhaustive_max_len {
            let cols: Vec<usize> = (0..len).collect();
            let prefixes = self.sampled_sources()?.iter().map(|d| d.project(&cols)).collect::<Result<Vec<_>>>()?;
            let ev: Vec<Evidence> = prefixes.iter().map(Evidence::Samples).collect();
            let two = pretrain_tabular(&ev, vocab, self.pretrain_config())?;
            let ex = exhaustive_pretrain(&ev, vocab, self.pretrain_config())?;
            checks.push(json!({ "len": len, "two_phase": two.objective, "exhaustive": ex.objective }));
        }
        let extra = json!({
            "classes": pre.d,
            "objective": pre.objective,
            "parent_matrices": pre.parent_matrices(),
            "recovered": recovered,
            "exhaustive": checks,
        });
        Ok(vec![self.row("pretrain", None, extra)])
    }

    fn two_stage(&self) -> Result<Vec<ResultRow>> {
        if self.n == 0 {
            return self.pretraining();
        }
        let m = self.prefix_len()?;
        let p = &self.cfg.params.twostage;
        let config = TwoStageConfig {
            pretrain: self.pretrain_config(),
            finetune_max_parents: p.finetune_max_parents,
            fallback_arity: p.fallback_arity,
            alpha: self.cfg.params.alpha,
            prefix_len: m,
            split_seed: self.seed,
            max_width: self.cfg.params.max_width,
        };
        let r = two_stage(&self.source_evidence(), &self.target, self.dc.vocab(), &config)?;
        let truth = self.circuit_truth(m)?;
        let oracle = DiscrepancyOracle::induced(self.dc);
        let shared = |i: usize| oracle.matching((DomainId::Target, i)).iter().any(|(d, _)| *d != DomainId::Target);
        let (matched, novel): (Vec<usize>, Vec<usize>) = (m..self.t()).partition(|&i| shared(i));
        let extra = json!({
            "s": r.finetune.s,
            "matched": matched,
            "novel": novel,
            "target_parents": r.finetune.structure.parents.all_parents(),
            "classes": r.pretrain.d,
        });
        let mut rows = vec![self.row("twostage", Some(true_risk(&r.predictor, &truth)?), extra)];
        rows.extend(self.circuit_baselines(m, &truth)?);
        Ok(rows)
    }

    fn run(&self) -> Result<Vec<ResultRow>> {
        match self.cfg.algorithm {
            Algorithm::SimpleTr | Algorithm::ModuleTr | Algorithm::SimpleAd => self.single_query(),
            Algorithm::CircuitTr => self.circuit_transport(),
            Algorithm::CircuitAd => self.circuit_adaptation(),
            Algorithm::Twostage => self.two_stage(),
            Algorithm::Bounds => unreachable!("bounds run outside the cell grid"),
        }
    }
}

/// Largest gap between predicted and true conditionals over prefixes with
/// positive mass.
pub fn linf_to_truth(pred: &dyn Predictor, truth: &QueryTruth) -> f64 {
    let exact = truth.conditional();
    let v = truth.vocab();
    let mut x = vec![0usize; truth.arity()];
    let mut mu = vec![0.0; v];
    let mut worst = 0.0f64;
    for (r, px) in truth.marginal_x().iter().enumerate() {
        if *px <= 0.0 {
            continue;
        }
        let mut rem = r;
        for d in x.iter_mut().rev() {
            *d = rem % v;
            rem /= v;
        }
        pred.distribution(&x, &mut mu);
        for (a, b) in mu.iter().zip(exact.row(&x)) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// Share of the `|V|^2` two-token prefixes whose most likely output is the
/// Euclid gcd.
pub fn euclid_agreement(pred: &dyn Predictor, vocab: usize) -> f64 {
    let mut mu = vec![0.0; vocab];
    let mut hits = 0;
    for a in 0..vocab {
        for b in 0..vocab {
            pred.distribution(&[a, b], &mut mu);
            if ctlab_core::inference::argmax(&mu) == euclid_gcd(a, b) {
                hits += 1;
            }
        }
    }
    hits as f64 / (vocab * vocab) as f64
}

fn bounds_run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut groups: BTreeMap<Option<u64>, Vec<u64>> = BTreeMap::new();
    for &s in &cfg.seeds {
        groups.entry(fixtures::is_seeded(&cfg.fixture).then_some(s)).or_default().push(s);
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut curve_csv = String::from("n,seed,method,risk\n");
    let mut curve_rows = Vec::new();
    for (fixture_seed, seeds) in groups {
        let dc = fixtures::build(&cfg.fixture, fixture_seed.unwrap_or(seeds[0]))?;
        let problem = BowProblem::from_collection(&dc)?;
        let truth = problem.target;
        let analysis: BowAnalysis = analyze_bow(problem)?;
        let curve_cfg = CurveConfig { n_grid: cfg.n.clone(), seeds: seeds.clone(), alpha: cfg.params.alpha };
        let curve = erm_vs_cro_curve(&dc.target, &truth, &analysis.bounds, &analysis.cro, &curve_cfg)?;
        let sound = (0..2).all(|x| {
            let (l, u) = analysis.bounds.interval(x, 1);
            let p = conditional_one(&truth, x);
            l - 1e-9 <= p && p <= u + 1e-9
        });
        let probe = (cfg.params.probe_samples > 0)
            .then(|| probe_conditional(&analysis.polytope, 1, 1, cfg.params.probe_samples, fixture_seed.unwrap_or(0)));
        let entries: Vec<Value> = analysis
            .bounds
            .entries
            .iter()
            .map(|e| json!({ "x": e.x, "y": e.y, "l": e.l, "u": e.u, "l_vertex": e.l_vertex, "u_vertex": e.u_vertex, "degenerate": e.degenerate, "witness_q": e.witness_q }))
            .collect();
        reports.push(json!({
            "fixture_seed": fixture_seed,
            "source_conditionals": analysis.problem.sources.iter().map(|p| [conditional_one(p, 0), conditional_one(p, 1)]).collect::<Vec<_>>(),
            "target_conditional": [conditional_one(&truth, 0), conditional_one(&truth, 1)],
            "delta": analysis.problem.delta,
            "bounds": entries,
            "method_gap": analysis.bounds.method_gap(),
            "n_vertices": analysis.bounds.n_vertices,
            "px1_range": analysis.px1_range,
            "cro": analysis.cro,
            "truth_in_bounds": sound,
            "probe": probe,
            "bayes_risk": curve.bayes_risk,
            "summary": curve.summary,
        }));
        for r in &curve.rows {
            curve_rows.push(r.clone());
            let risk = RiskReport { nll: r.risk, bayes_nll: curve.bayes_risk, excess: r.risk - curve.bayes_risk, kl: r.risk - curve.bayes_risk };
            rows.push(ResultRow {
                experiment: cfg.experiment.clone(),
                fixture: cfg.fixture.label(),
                method: r.method.clone(),
                k: dc.n_sources(),
                t: dc.target.len(),
                vocab: dc.vocab(),
                big_n: 0,
                n: r.n,
                seed: r.seed,
                nll: Some(risk.nll),
                excess: Some(risk.excess),
                kl: Some(risk.kl),
                extra: json!({ "truth_in_bounds": sound }),
            });
        }
    }
    curve_rows.sort_by(|a, b| (a.n, a.seed, &a.method).cmp(&(b.n, b.seed, &b.method)));
    for r in curve_rows {
        curve_csv.push_str(&format!("{},{},{},{}\n", r.n, r.seed, r.method, r.risk));
    }
    let mut artifacts = BTreeMap::new();
    artifacts.insert("bounds.json".to_string(), serde_json::to_string_pretty(&reports)? + "\n");
    artifacts.insert("curve.csv".to_string(), curve_csv);
    Ok(RunOutput { rows, artifacts })
}

/// Runs every cell in parallel; rows come back sorted.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    if cfg.algorithm == Algorithm::Bounds {
        let mut out = bounds_run(cfg)?;
        out.rows.sort_by_key(ResultRow::sort_key);
        return Ok(out);
    }
    // fixtures that ignore the run seed are built once
    let mut collections: BTreeMap<Option<u64>, DomainCollection> = BTreeMap::new();
    for &s in &cfg.seeds {
        let key = fixtures::is_seeded(&cfg.fixture).then_some(s);
        if let std::collections::btree_map::Entry::Vacant(e) = collections.entry(key) {
            e.insert(fixtures::build(&cfg.fixture, s)?);
        }
    }
    let cells: Vec<(usize, usize, u64)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.source_sizes.iter().flat_map(move |&big| cfg.n.iter().map(move |&n| (big, n, s))))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(big_n, n, seed)| {
            let dc = &collections[&fixtures::is_seeded(&cfg.fixture).then_some(seed)];
            Cell::new(cfg, dc, big_n, n, seed).run()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<ResultRow> = rows.into_iter().flatten().collect();
    rows.sort_by_key(ResultRow::sort_key);
    Ok(RunOutput { rows, artifacts: BTreeMap::new() })
}

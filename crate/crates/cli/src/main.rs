use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ctlab_cli::config::{Algorithm, ExperimentConfig, FixtureSpec};
use ctlab_cli::{exit_code, fixtures, output, report, run_experiment};
use ctlab_core::scm::io::{scm_to_json, write_dataset_csv};
use ctlab_core::scm::{exact_joint, joint_budget, sample_dataset};
use ctlab_core::{CtlabError, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "ctlab", version, about = "Causal transportability laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the configured seed list by this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured grid and write results, details and manifest.
    Run(Common),
    /// Write SCM files and sampled datasets for the first grid cell.
    Gen(Common),
    /// Summarise a results directory.
    Report {
        /// Directory holding results.csv.
        dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the exact joint distribution of every domain.
    Oracle(Common),
    /// Partial-transport bounds for a bow fixture (default: the named one).
    Bounds(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let path = common.config.as_ref().ok_or_else(|| CtlabError::InvalidConfig("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = common.seed {
        cfg.seeds = vec![s];
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &ExperimentConfig) -> PathBuf {
    common.out.clone().unwrap_or_else(|| Path::new("results").join(&cfg.experiment))
}

fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CtlabError::InvalidConfig("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CtlabError::InvalidConfig(e.to_string()))?;
    }
    Ok(())
}

fn run(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    set_jobs(common.jobs)?;
    let start = Instant::now();
    let out = run_experiment(&cfg)?;
    let dir = out_dir(common, &cfg);
    let m = output::write_run(&dir, &cfg, &out, start.elapsed().as_secs_f64())?;
    println!("{} rows -> {} (config {})", m.rows, dir.join("results.csv").display(), &m.config_hash[..12]);
    Ok(())
}

fn gen(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let seed = cfg.seeds[0];
    let dc = fixtures::build(&cfg.fixture, seed)?;
    let dir = out_dir(common, &cfg);
    std::fs::create_dir_all(&dir)?;
    for d in dc.domain_ids() {
        let scm = dc.scm(d);
        let size = if d == ctlab_core::scm::DomainId::Target { cfg.n[0] } else { cfg.source_sizes[0] };
        let stream = match d {
            ctlab_core::scm::DomainId::Source(j) => 1 + j as u64,
            ctlab_core::scm::DomainId::Target => 0,
        };
        std::fs::write(dir.join(format!("scm_{d}.json")), scm_to_json(scm)? + "\n")?;
        let data = sample_dataset(scm, size, ctlab_cli::runner::derive_seed(seed, stream, size), d);
        write_dataset_csv(&data, std::fs::File::create(dir.join(format!("data_{d}.csv")))?)?;
    }
    println!("{} domains -> {}", dc.domain_ids().len(), dir.display());
    Ok(())
}

fn oracle(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let dc = fixtures::build(&cfg.fixture, cfg.seeds[0])?;
    let dir = out_dir(common, &cfg);
    std::fs::create_dir_all(&dir)?;
    for d in dc.domain_ids() {
        let j = exact_joint(dc.scm(d), joint_budget())?;
        let body = json!({ "domain": d.to_string(), "vocab": j.vocab(), "n_vars": j.n_vars(), "probs": j.probs() });
        std::fs::write(dir.join(format!("oracle_{d}.json")), serde_json::to_string(&body)? + "\n")?;
    }
    println!("exact joints -> {}", dir.display());
    Ok(())
}

fn bounds(common: &Common) -> Result<()> {
    let cfg = match &common.config {
        Some(_) => load(common)?,
        None => ExperimentConfig {
            experiment: "bounds".into(),
            fixture: FixtureSpec { name: Some("bow".into()), ..Default::default() },
            algorithm: Algorithm::Bounds,
            source_sizes: vec![0],
            n: vec![5, 20, 100, 1000],
            seeds: (0..20).collect(),
            params: Default::default(),
        },
    };
    if cfg.algorithm != Algorithm::Bounds {
        return Err(CtlabError::InvalidConfig("the bounds command needs algorithm \"bounds\"".into()));
    }
    set_jobs(common.jobs)?;
    let start = Instant::now();
    let out = run_experiment(&cfg)?;
    match &common.out {
        Some(dir) => {
            output::write_run(dir, &cfg, &out, start.elapsed().as_secs_f64())?;
            println!("bounds -> {}", dir.join("bounds.json").display());
        }
        None => print!("{}", out.artifacts["bounds.json"]),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::Gen(c) => gen(c),
        Command::Oracle(c) => oracle(c),
        Command::Bounds(c) => bounds(c),
        Command::Report { dir, out } => {
            let dir = dir.clone().or_else(|| out.clone()).unwrap_or_else(|| PathBuf::from("."));
            report::write_report(&dir).map(|r| println!("{} summary rows, {} curves", r.summary_csv.lines().count() - 1, r.curves.len()))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

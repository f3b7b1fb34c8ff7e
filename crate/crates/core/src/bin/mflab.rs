use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mflab::harness::{self, registry_list, ExperimentConfig, ResultTable, ALIASES};
use mflab::MflabError;

#[derive(Parser)]
#[command(name = "mflab", version, about = "Mean-field-game master equation laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a registered experiment.
    Run {
        id: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// List registered experiments.
    List,
    /// Log-log OLS of one CSV column against another.
    Fit { csv: PathBuf, xcol: String, ycol: String },
    /// Alias of `run mollifier.evaluate`.
    Mollify(RunOpts),
    /// Alias of `run lions.derivative`.
    DerivativeCheck(RunOpts),
    /// Alias of `run nash.rate`.
    NashRate(RunOpts),
    /// Alias of `run nash.chaos`.
    Chaos(RunOpts),
    /// Alias of `run nash.empirical-rate`.
    EmpiricalRate(RunOpts),
}

#[derive(Args)]
struct RunOpts {
    /// JSON config; its `id` must match.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default `results/<id>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dot-path override, e.g. `nash.N_grid=[4,8,16]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Exit with status 4 when an acceptance check fails.
    #[arg(long)]
    assert: bool,
}

fn alias(name: &str) -> &'static str {
    ALIASES.iter().find(|a| a.0 == name).map(|a| a.1).expect("alias is registered")
}

fn load_config(id: &str, opts: &RunOpts) -> Result<ExperimentConfig, MflabError> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| MflabError::Config {
                path: path.display().to_string(),
                msg: e.to_string(),
            })?;
            let cfg = ExperimentConfig::from_json_str(&text)?;
            if cfg.id != id {
                return Err(MflabError::Config {
                    path: "id".into(),
                    msg: format!("config is for `{}`, not `{id}`", cfg.id),
                });
            }
            cfg
        }
        None => ExperimentConfig::new(id),
    };
    cfg = cfg.with_overrides(&opts.sets)?;
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(out) = &opts.out {
        cfg.out = Some(out.clone());
    }
    if cfg.out.is_none() {
        cfg.out = Some(PathBuf::from("results").join(id));
    }
    Ok(cfg)
}

fn run(id: &str, opts: &RunOpts) -> Result<ExitCode, MflabError> {
    harness::descriptor(id)?;
    let cfg = load_config(id, opts)?;
    let table = harness::run(&cfg)?;
    let dir = cfg.out.as_ref().expect("out is set");
    println!("{id}: {} rows -> {}", table.rows.len(), dir.display());
    println!("config hash {}", table.provenance.config_hash);
    println!("{}", serde_json::to_string_pretty(&table.summary)?);
    for c in &table.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if opts.assert && !table.passed() {
        return Ok(ExitCode::from(harness::ASSERT_FAILED as u8));
    }
    Ok(ExitCode::SUCCESS)
}

fn fit(csv: &PathBuf, xcol: &str, ycol: &str) -> Result<ExitCode, MflabError> {
    let (columns, rows) = ResultTable::read_csv(std::fs::File::open(csv)?)?;
    let f = harness::fit_rate(&columns, &rows, xcol, ycol)?;
    println!("{}", serde_json::to_string_pretty(&f)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run { id, opts } => run(id, opts),
        Cmd::List => {
            for d in registry_list() {
                println!("{:<36} {}", d.id, d.description);
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Fit { csv, xcol, ycol } => fit(csv, xcol, ycol),
        Cmd::Mollify(o) => run(alias("mollify"), o),
        Cmd::DerivativeCheck(o) => run(alias("derivative-check"), o),
        Cmd::NashRate(o) => run(alias("nash-rate"), o),
        Cmd::Chaos(o) => run(alias("chaos"), o),
        Cmd::EmpiricalRate(o) => run(alias("empirical-rate"), o),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error ({}): {e}", e.kind());
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}

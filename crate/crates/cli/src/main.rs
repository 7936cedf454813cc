//! `fracwave`: batch experiment runner and acceptance self-test.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration,
//! 3 numerical failure, 4 failed check (`run --check`) or failing criteria
//! (`self-test`).

mod config;
mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fracwave_core::acceptance::{run_criterion, Mutation, Scale, CRITERIA};

use output::{sha256_hex, write_file, Manifest};

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Validation(String),
    Numerical(String),
    CheckFailed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::CheckFailed(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Validation(m) | CliError::Numerical(m) | CliError::CheckFailed(m) => m,
        }
    }
}

impl From<fracwave_core::Error> for CliError {
    fn from(e: fracwave_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "fracwave", version, about = "Spectral simulation lab for stochastic fractional wave equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "fracwave-out")]
        out: PathBuf,
        /// Override a config entry, e.g. `--set solver.seed=7` (value parsed as JSON, else string).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Worker threads for path-level parallelism (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Compare the results against the model's predictions; exit 4 on disagreement.
        #[arg(long)]
        check: bool,
    },
    /// Run the acceptance suite.
    SelfTest {
        #[arg(long, value_enum, default_value_t = ScaleArg::Quick)]
        scale: ScaleArg,
        /// Only these criteria (comma separated ids).
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
        /// Inject a deliberate defect to confirm the suite catches it.
        #[arg(long, value_enum)]
        mutation: Option<MutationArg>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Quick,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    FlipKernelSign,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            overrides,
            workers,
            check,
        } => set_workers(workers).and_then(|_| run(&config, &out, &overrides, check)),
        Command::SelfTest {
            scale,
            criteria,
            mutation,
            workers,
        } => set_workers(workers).and_then(|_| self_test(scale, &criteria, mutation)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn set_workers(workers: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Validation("cli: --workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(format!("cli: thread pool: {e}")))?;
    }
    Ok(())
}

fn run(config: &Path, out: &Path, overrides: &[String], check: bool) -> Result<(), CliError> {
    let started = chrono::Utc::now();
    let text = std::fs::read_to_string(config)
        .map_err(|e| CliError::Io(format!("cli: cannot read {}: {e}", config.display())))?;
    let env_seed = std::env::var("FRACWAVE_SEED").ok();
    let cfg = config::load(&text, env_seed.as_deref(), overrides)?;
    let echoed = serde_json::to_string_pretty(&cfg).expect("config serializes");
    let digest = sha256_hex(serde_json::to_string(&cfg).expect("config serializes").as_bytes());

    let outcome = experiments::run(&cfg)?;

    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("cli: cannot create {}: {e}", out.display())))?;
    let io = |e: std::io::Error| CliError::Io(format!("cli: write failed: {e}"));
    let mut files = Vec::new();
    write_file(out, "config.json", echoed.as_bytes(), &mut files).map_err(io)?;
    for t in &outcome.tables {
        write_file(out, &format!("{}.csv", t.name), t.to_csv().as_bytes(), &mut files).map_err(io)?;
    }
    let failed = check && outcome.check.as_ref().is_some_and(|(ok, _)| !ok);
    let status = match (&outcome.check, check) {
        (Some((ok, _)), true) => if *ok { "check-passed" } else { "check-failed" }.to_string(),
        _ => "ok".to_string(),
    };
    let manifest = Manifest {
        tool: "fracwave",
        version: env!("CARGO_PKG_VERSION"),
        config_digest: digest,
        seed: cfg.solver.seed,
        experiment: serde_json::to_value(&cfg.experiment).expect("serializes")["kind"]
            .as_str()
            .unwrap_or_default()
            .to_string(),
        started: started.to_rfc3339(),
        finished: chrono::Utc::now().to_rfc3339(),
        status,
        files,
    };
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(out.join("manifest.json"), body).map_err(io)?;

    for t in &outcome.tables {
        println!("wrote {}", out.join(format!("{}.csv", t.name)).display());
    }
    if check {
        match &outcome.check {
            Some((ok, detail)) => println!("check {}: {detail}", if *ok { "passed" } else { "FAILED" }),
            None => println!("check: no prediction to compare for this experiment"),
        }
    }
    if failed {
        let detail = outcome.check.map(|c| c.1).unwrap_or_default();
        return Err(CliError::CheckFailed(format!("cli: check failed: {detail}")));
    }
    Ok(())
}

fn self_test(scale: ScaleArg, criteria: &[u8], mutation: Option<MutationArg>) -> Result<(), CliError> {
    let scale = match scale {
        ScaleArg::Quick => Scale::Quick,
        ScaleArg::Full => Scale::Full,
    };
    let mutation = mutation.map(|m| match m {
        MutationArg::FlipKernelSign => Mutation::FlipKernelSign,
    });
    if let Some(bad) = criteria.iter().find(|c| !CRITERIA.iter().any(|k| k.0 == **c)) {
        return Err(CliError::Validation(format!("cli: no criterion {bad}")));
    }
    let mut failing = Vec::new();
    for &(id, name) in CRITERIA {
        if !criteria.is_empty() && !criteria.contains(&id) {
            continue;
        }
        let r = run_criterion(id, scale, mutation);
        println!("{}", r.line());
        if !r.passed {
            failing.push(format!("{id} ({name})"));
        }
    }
    if failing.is_empty() {
        println!("all selected criteria passed");
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("self-test: failing criteria: {}", failing.join(", "))))
    }
}

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use distexperts::harness::verify::{run_suite, Suite};
use distexperts::harness::{cmd_run, cmd_sweep_figures, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "distexperts", version, about = "Distributed experts protocols in the coordinator model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One RunReport CSV per (variant, p, R, seed) plus summary.csv
    Run(Common),
    /// Run outputs plus comm_vs_p.csv, reward_vs_p.csv and comm_vs_regret.csv
    SweepFigures(Common),
    /// Statistical self-check: constants, maxstability, moments, middle, pipeline or all
    Verify {
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `out` in the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the master `seed` in the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

const EXIT_INVALID: u8 = 1;
const EXIT_VERIFY_FAILED: u8 = 2;

fn load(common: &Common) -> Result<ExperimentConfig, HarnessError> {
    let text = fs::read_to_string(&common.config).map_err(|source| HarnessError::Io {
        context: format!("reading {}", common.config.display()),
        source,
    })?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn experiment(common: &Common, sweep: bool) -> ExitCode {
    let result = load(common).and_then(|cfg| {
        let runs = if sweep {
            cmd_sweep_figures(&cfg, common.jobs)?
        } else {
            cmd_run(&cfg, common.jobs)?
        };
        Ok((cfg, runs))
    });
    match result {
        Ok((cfg, runs)) => {
            let out = cfg.out.as_deref().map(|p| p.display().to_string()).unwrap_or_default();
            println!("{} runs written to {out} (config_hash={})", runs.len(), cfg.hash());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn verify(suite: &str, seed: u64, jobs: usize) -> ExitCode {
    let suites = if suite.eq_ignore_ascii_case("all") {
        Suite::ALL.to_vec()
    } else {
        match suite.parse::<Suite>() {
            Ok(s) => vec![s],
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_INVALID);
            }
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let mut all_pass = true;
    for suite in suites {
        println!("[{suite}] seed={seed}");
        for check in pool.install(|| run_suite(suite, seed)) {
            all_pass &= check.pass;
            println!("  {check}");
        }
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY_FAILED)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(common) => experiment(common, false),
        Command::SweepFigures(common) => experiment(common, true),
        Command::Verify { suite, seed, jobs } => verify(suite, *seed, *jobs),
    }
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use fhd::{ConfigError, JobKind};

/// Fibered holomorphic dynamics jobs.
#[derive(Parser)]
#[command(name = "fhd", version)]
struct Cli {
    /// Job to run; must match the job in the configuration.
    job: JobKind,
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (default: logical cores).
    #[arg(long, env = "FHD_THREADS")]
    threads: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the configured one, else the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_CHECKS_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    let mut config = match fhd::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if config.job.kind() != cli.job {
        let e = ConfigError::Schema { pointer: "/job".into(), message: format!("configuration holds a {} job, not {}", config.job.kind().name(), cli.job.name()) };
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let out = cli.out.or_else(|| config.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let start = Instant::now();
    eprintln!("fhd: {} on {} (seed {}) -> {}", cli.job.name(), config.system.label(), config.seed, out.display());
    let report = match fhd::run(&config, &out) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    for c in &report.checks {
        let target = c.target.map(|t| format!(" target={t:e}")).unwrap_or_default();
        println!("{} {} value={:e}{target} bound={:e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.bound);
    }
    for f in &report.failures {
        println!("FAIL stage {}: {}", f.stage, f.error);
    }
    eprintln!("fhd: wall time {:.3} s, {} artifacts", start.elapsed().as_secs_f64(), report.artifacts.len());
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECKS_FAILED)
    }
}

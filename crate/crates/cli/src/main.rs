use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use elax_cli::{exit_code, parse_config, run_experiment, Kind};

/// Numerical laboratory for Lax pairs of the incompressible Euler equations.
#[derive(Parser, Debug)]
#[command(name = "elax", version)]
struct Cli {
    /// simulate2d, simulate3d, laxcheck2d, laxcheck3d, spectrum, pseudospec, lyapunov or expand
    kind: Kind,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `dir` in [output].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the top-level `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("ELAX_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| format!("ELAX_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        return Err("ELAX_THREADS must be at least 1".into());
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match parse_config(&text, Some(cli.kind)) {
        Ok(c) => c,
        Err(errors) => {
            for e in errors {
                eprintln!("{}: {e}", cli.config.display());
            }
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.unwrap_or_else(|| cfg.out_dir.clone());
    match run_experiment(cli.kind, &cfg, &out) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("{} wrote {} files to {}", cli.kind, outcome.files.len(), out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

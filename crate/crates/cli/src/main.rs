use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use riskvoi_cli::{load_config, run, summary, write_outputs, Mode, RunConfig};

#[derive(Parser)]
#[command(name = "riskvoi", version, about = "Value-of-information analysis for structural risk management")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prior decision table over the eight action sets.
    Prior(RunArgs),
    /// VoI of the sources listed in the config.
    Voi(RunArgs),
    /// Perfect-information VoI of every subset of test, inspection and SHM.
    Subsets(RunArgs),
    /// VoI of one noisy source over a grid of measurement precisions.
    Sweep(RunArgs),
    /// Multi-window sequence optimization and dynamic VoI.
    Dynamic(RunArgs),
    /// Runs the mode named in the config file.
    Run(RunArgs),
    /// Prints a config with every default filled in.
    InitConfig {
        /// Write to this file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Outer Monte Carlo draws.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "RISKVOI_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
}

fn execute(mode: Option<Mode>, args: RunArgs) -> anyhow::Result<()> {
    let mut cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = mode {
        cfg.analysis.mode = m;
    }
    if let Some(n) = args.samples {
        cfg.analysis.n_outer = n;
    }
    if let Some(s) = args.seed {
        cfg.analysis.seed = s;
    }
    cfg.validate()?;
    log::info!("running {} analysis, seed {}", cfg.analysis.mode.as_str(), cfg.analysis.seed);
    let record = run(&cfg)?;
    let written = write_outputs(&record, &args.out_dir)
        .with_context(|| format!("writing results to {}", args.out_dir.display()))?;
    print!("{}", summary(&record));
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prior(a) => execute(Some(Mode::Prior), a),
        Command::Voi(a) => execute(Some(Mode::Voi), a),
        Command::Subsets(a) => execute(Some(Mode::Subsets), a),
        Command::Sweep(a) => execute(Some(Mode::Sweep), a),
        Command::Dynamic(a) => execute(Some(Mode::Dynamic), a),
        Command::Run(a) => execute(None, a),
        Command::InitConfig { output } => {
            let text = RunConfig::default().to_toml_string();
            match output {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

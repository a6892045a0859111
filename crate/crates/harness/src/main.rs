use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fbm_pv_harness::commands::{run, verdict};
use fbm_pv_harness::record::RECORD_FILE;
use fbm_pv_harness::{CommandSpec, ExperimentConfig, HarnessError, Result, RunRecord, Suite};

#[derive(Parser)]
#[command(name = "fbmpv", version, about = "Principal-value functionals of fractional Brownian motion")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides master_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; affects speed only.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample paths and write them as CSV with a manifest.
    Sample,
    /// Principal-value functionals along the selected routes.
    Pv,
    /// Local-time fields per path.
    Localtime,
    /// Hilbert transform of a sampled function.
    Hilbert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        fft: bool,
        #[arg(long)]
        inverse: bool,
    },
    /// Generalised quadratic covariation (H < 1/2).
    Qcov,
    /// Verification suites.
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: Suite,
    },
    /// Re-run a saved record from its configuration snapshot.
    Replay { record: PathBuf },
}

fn load_config(cli: &Cli) -> Result<Option<ExperimentConfig>> {
    let Some(path) = &cli.config else { return Ok(None) };
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    Ok(Some(cfg))
}

fn execute(cli: &Cli) -> Result<()> {
    let (spec, cfg) = match &cli.cmd {
        Cmd::Sample => (CommandSpec::Sample, load_config(cli)?),
        Cmd::Pv => (CommandSpec::Pv, load_config(cli)?),
        Cmd::Localtime => (CommandSpec::Localtime, load_config(cli)?),
        Cmd::Qcov => (CommandSpec::Qcov, load_config(cli)?),
        Cmd::Hilbert { input, fft, inverse } => (
            CommandSpec::Hilbert {
                input: input.clone(),
                fft: *fft,
                inverse: *inverse,
            },
            load_config(cli)?,
        ),
        Cmd::Verify { suite } => (CommandSpec::Verify { suite: *suite }, load_config(cli)?),
        Cmd::Replay { record } => {
            let (spec, mut cfg) = RunRecord::load_invocation(record)?;
            if let (Some(c), Some(o)) = (cfg.as_mut(), &cli.out) {
                c.output_dir = o.clone();
            }
            (spec, cfg)
        }
    };
    let out = run(&spec, cfg.as_ref(), cli.threads)?;
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    out.write(&dir)?;
    for c in &out.record.checks {
        println!("{}", c.line());
    }
    log::info!("wrote {} files and {} to {}", out.artifacts.len(), RECORD_FILE, dir.display());
    verdict(&out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code: HarnessError = e;
            ExitCode::from(code.exit_code() as u8)
        }
    }
}

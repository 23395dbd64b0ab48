use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcwave::harness::{run_to_file, Experiment, ExperimentSpec};
use mcwave::Error;

/// OFDM / GFDM / WCP-COQAM out-of-band emission and CFO error-rate experiments.
#[derive(Parser)]
#[command(name = "mcwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo periodogram PSDs, written as CSV.
    Psd(Opts),
    /// Symbol error rates versus SNR and CFO, written as CSV.
    Ser(Opts),
    /// Closed-form OFDM PSDs, written as CSV.
    AnalyticPsd(Opts),
}

#[derive(Args)]
struct Opts {
    /// Flat `key = value` file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mc_runs: Option<usize>,
    /// OFDM with MK subcarriers (K = 1152, 684 occupied).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    equal_se: Option<bool>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated: OFDM, GFDM, WCP-COQAM.
    #[arg(long)]
    schemes: Option<String>,
    /// Comma-separated: plain, G, W, GW.
    #[arg(long)]
    variants: Option<String>,
    /// CFO values in units of F_s/1152, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    cfo_sweep: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    snr_grid_db: Option<String>,
    /// cost207 or awgn.
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    dsic_iters: Option<usize>,
}

fn build_spec(experiment: Experiment, o: Opts) -> mcwave::Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(experiment);
    if let Some(path) = &o.config {
        spec.load_config(path)?;
    }
    let overrides: [(&str, Option<String>); 10] = [
        ("seed", o.seed.map(|v| v.to_string())),
        ("mc_runs", o.mc_runs.map(|v| v.to_string())),
        ("equal_se", o.equal_se.map(|v| v.to_string())),
        ("out", o.out.map(|p| p.to_string_lossy().into_owned())),
        ("schemes", o.schemes),
        ("variants", o.variants),
        ("cfo_sweep", o.cfo_sweep),
        ("snr_grid_db", o.snr_grid_db),
        ("channel", o.channel),
        ("dsic_iters", o.dsic_iters.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            spec.set(key, &v)?;
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (experiment, opts) = match cli.command {
        Command::Psd(o) => (Experiment::Psd, o),
        Command::Ser(o) => (Experiment::Ser, o),
        Command::AnalyticPsd(o) => (Experiment::AnalyticPsd, o),
    };
    let result = build_spec(experiment, opts).and_then(|spec| {
        let rows = run_to_file(&spec)?;
        eprintln!("wrote {rows} rows to {}", spec.output_path.display());
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

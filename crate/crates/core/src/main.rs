use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nfdbp::experiment::{
    bench_scaling, run_experiment, write_report, ExperimentConfig, OutputFormat,
};
use nfdbp::selftest::run_selftest;

#[derive(Parser)]
#[command(
    name = "nfdbp",
    version,
    about = "Nonlinear Fourier domain backpropagation link simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Clamp window, spans and packet length to desk-scale limits.
    #[arg(long, global = true)]
    desk_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a launch-power sweep from a TOML file or a preset name.
    Run {
        /// Path to a TOML config, or one of: desk-normal-nyquist, desk-anomalous-ofdm, full-scale.
        config: String,
    },
    /// Time the scattering stages against D and both backpropagators against span count.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [4096usize, 8192, 16384, 32768, 65536])]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8])]
        spans: Vec<usize>,
        #[arg(long, default_value_t = 4096)]
        span_window: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Quick numerical checks of every stage.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn output(cli: &Cli) -> std::io::Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn load(source: &str) -> Result<ExperimentConfig, Box<dyn std::error::Error>> {
    if let Some(cfg) = ExperimentConfig::preset(source) {
        return Ok(cfg);
    }
    let text = std::fs::read_to_string(source).map_err(|e| format!("{source}: {e}"))?;
    Ok(ExperimentConfig::from_toml(&text)?)
}

fn run(cli: &Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match &cli.command {
        Command::Run { config } => {
            let mut cfg = load(config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if cli.desk_scale {
                cfg.apply_desk_scale();
            }
            let report = run_experiment(&cfg)?;
            if !report.guard_ok {
                eprintln!("warning: guard interval is shorter than the dispersion memory");
            }
            for f in &report.failures {
                eprintln!(
                    "cell failed: power {} dBm, trial {}, {}: {}",
                    f.power_dbm,
                    f.trial,
                    f.equalizer.as_deref().unwrap_or("link"),
                    f.message
                );
            }
            let format = match cli.format {
                Format::Csv => OutputFormat::Csv,
                Format::Json => OutputFormat::Json,
            };
            write_report(&report, output(cli)?, format)?;
            Ok(true)
        }
        Command::Bench {
            sizes,
            spans,
            span_window,
            repeats,
        } => {
            let (sizes, span_window) = if cli.desk_scale {
                let s: Vec<usize> = sizes.iter().copied().filter(|&d| d <= 4096).collect();
                (s, (*span_window).min(4096))
            } else {
                (sizes.clone(), *span_window)
            };
            let report = bench_scaling(&sizes, spans, span_window, *repeats)?;
            let mut out = output(cli)?;
            match cli.format {
                Format::Json => {
                    serde_json::to_writer_pretty(&mut out, &report)?;
                    writeln!(out)?;
                }
                Format::Csv => {
                    writeln!(out, "d,scatter_ms,backrotate_ms,inverse_ms")?;
                    for r in &report.sizes {
                        writeln!(
                            out,
                            "{},{},{},{}",
                            r.d, r.scatter_ms, r.backrotate_ms, r.inverse_ms
                        )?;
                    }
                    writeln!(out)?;
                    writeln!(out, "spans,nfd_ms,ssfm_ms")?;
                    for r in &report.spans {
                        writeln!(out, "{},{},{}", r.spans, r.nfd_ms, r.ssfm_ms)?;
                    }
                }
            }
            Ok(true)
        }
        Command::Selftest => {
            let mut ok = true;
            for c in run_selftest() {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
                ok &= c.passed;
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

//! A short launch-power sweep on the desk normal-dispersion preset, written as CSV to stdout.
use nfdbp::experiment::{run_experiment, write_csv, ExperimentConfig};

fn main() -> nfdbp::Result<()> {
    let mut cfg = ExperimentConfig::desk_normal_nyquist();
    cfg.trials = 4;
    cfg.power_sweep_dbm = vec![-8.0, 0.0, 8.0];
    let report = run_experiment(&cfg)?;
    eprintln!("config {} hash {}", cfg.name, report.config_hash);
    write_csv(&report, std::io::stdout().lock())
}

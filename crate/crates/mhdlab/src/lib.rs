//! Experiment runner for the rotating-MHD spectral laboratory: configs,
//! scenarios and deterministic reports.

pub mod config;
pub mod report;
pub mod scenario;

use std::path::{Path, PathBuf};

pub use config::{parse_config, parse_config_str, ExperimentConfig, Scenario};
pub use report::{emit_report, Format, Outcome};

/// Environment variable that overrides every other output directory.
pub const OUT_ENV: &str = "MHDLAB_OUT";

/// Base output directory: `MHDLAB_OUT`, then `cli`, then the config, then `out`.
pub fn resolve_out_base(cli: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(v) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(v);
    }
    cli.map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Runs the configured scenario and writes its report into `dir`.
pub fn run_to_dir(
    cfg: &ExperimentConfig,
    dir: &Path,
    format: Format,
    verbose: bool,
) -> anyhow::Result<Outcome> {
    let ctx = scenario::Context {
        out_dir: Some(dir.to_path_buf()),
        verbose,
    };
    let outcome = scenario::run(cfg, &ctx)?;
    emit_report(&outcome, cfg, dir, format)?;
    Ok(outcome)
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::bail;
use clap::{Parser, ValueEnum};
use mhdlab::{parse_config, resolve_out_base, run_to_dir, Format, Scenario};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Run one experiment scenario and write its tables and verdicts.
#[derive(Debug, Parser)]
#[command(name = "mhdlab", version)]
struct Cli {
    /// energy, converge, resonance, dispersion or probe; must match the config.
    scenario: Scenario,
    #[arg(long)]
    config: PathBuf,
    /// Output base directory; results go to `<out>/<scenario>`. MHDLAB_OUT wins over this.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel sweeps.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long)]
    verbose: bool,
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    if let Some(k) = cli.threads {
        if k == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    let cfg = parse_config(&cli.config)?;
    if cfg.scenario != cli.scenario {
        bail!(
            "config {} describes scenario `{}`, not `{}`",
            cli.config.display(),
            cfg.scenario.name(),
            cli.scenario.name()
        );
    }
    let dir = resolve_out_base(cli.out.as_deref(), &cfg).join(cfg.scenario.name());
    let format = match cli.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let outcome = run_to_dir(&cfg, &dir, format, cli.verbose)?;
    for v in &outcome.verdicts {
        println!(
            "{} {} value={:e} bound={}",
            if v.passed { "PASS" } else { "FAIL" },
            v.name,
            v.value,
            v.bound
        );
    }
    println!("report: {}", dir.display());
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("mhdlab: {e:#}");
            ExitCode::from(2)
        }
    }
}

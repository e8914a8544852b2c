use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use qsd_duffing::config::{load, Mode, OutputFormat, Overrides, Preset};
use qsd_duffing::run::{run, run_panels, RunError, THREADS_ENV};

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    QsdEnsemble,
    MasterOracle,
    Classical,
    NemsMap,
    Compare,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::QsdEnsemble => Mode::QsdEnsemble,
            ModeArg::MasterOracle => Mode::MasterOracle,
            ModeArg::Classical => Mode::Classical,
            ModeArg::NemsMap => Mode::NemsMap,
            ModeArg::Compare => Mode::Compare,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Fig1,
    Fig2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Quantum state diffusion simulator for the driven damped double-well
/// Duffing oscillator.
///
/// Exit status: 0 success, 2 configuration error, 3 numerical blowup,
/// 4 invariant failure.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// TOML experiment description.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the `mode` key.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Run a parameter grid over the configuration.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Master seed of the trajectory ensemble.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads; takes precedence over the environment cap.
    #[arg(long)]
    threads: Option<usize>,
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, String> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got {v:?}")),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn config_error(message: String) -> RunError {
    RunError::Config(qsd_duffing::config::ConfigError {
        message,
        line: None,
    })
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match thread_count(cli.threads).map_err(config_error)? {
        Some(0) => return Err(config_error("thread count must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_error(e.to_string()))?,
        None => {}
    }
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let overrides = Overrides {
        mode: cli.mode.map(Mode::from),
        seed: cli.seed,
        output_path: cli.out,
        output_format: cli.format.map(|f| match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }),
    };
    let manifest = match cli.preset {
        Some(p) => {
            let preset = match p {
                PresetArg::Fig1 => Preset::Fig1,
                PresetArg::Fig2 => Preset::Fig2,
            };
            let panels = preset.expand(&text, &overrides)?;
            run_panels(&panels, Some(preset.name()))?
        }
        None => {
            if cli.config.is_none() && cli.mode.is_none() {
                return Err(config_error("give --config, --mode or --preset".into()));
            }
            run(&load(&text, &overrides)?)?
        }
    };
    for panel in &manifest.panels {
        log::info!(
            "{}: {} in {:.1} s -> {}",
            panel.label,
            panel.status,
            panel.seconds,
            panel.artifacts.join(", ")
        );
    }
    Ok(())
}

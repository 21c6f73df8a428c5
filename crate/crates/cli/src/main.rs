use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use locpriv_core::config::SchemeSection;
use locpriv_core::montecarlo::{run_delay_trials, run_position_trials};
use locpriv_core::sweep::{emit_csv, run_sweep};
use locpriv_core::{load_config, run_bounds, BMode, ConfigFile, Error, Preset, SweepSpec};

/// Localization bounds under artificial-noise and artificial-multipath pilots.
#[derive(Debug, Parser)]
#[command(name = "locpriv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print delay and position bounds for a scenario as JSON.
    Bounds {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a preset sweep and write it as CSV.
    Sweep {
        config: PathBuf,
        /// fig2, fig3, fig4, fig5a or fig5b; defaults to the config's sweep.preset.
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo check of the bounds; prints JSON.
    Mc {
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Check that a config file loads into a valid scenario.
    Validate { config: PathBuf },
}

#[derive(Debug, Args)]
struct Common {
    /// Seed of the artificial-noise perturbation.
    #[arg(long)]
    an_seed: Option<u64>,
    /// How the position-stage score covariance is formed: paper or true.
    #[arg(long, default_value = "paper")]
    b_mode: BMode,
    /// Multiplier applied to every |alpha|^2.
    #[arg(long)]
    gain_cal: Option<f64>,
}

impl Common {
    fn apply(&self, cfg: &mut ConfigFile) {
        if let Some(seed) = self.an_seed {
            if let SchemeSection::An { seed: s, .. } = &mut cfg.scheme {
                *s = seed;
            }
            cfg.sweep.an_seed = Some(seed);
        }
        if let Some(g) = self.gain_cal {
            cfg.scenario.gain_calibration = Some(g);
        }
    }
}

fn load(path: &Path, common: Option<&Common>) -> anyhow::Result<ConfigFile> {
    let mut cfg = load_config(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(c) = common {
        c.apply(&mut cfg);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Bounds { config, common } => {
            let scenario = load(&config, Some(&common))?.scenario()?;
            let report = run_bounds(&scenario, common.b_mode)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Sweep {
            config,
            preset,
            out,
            common,
        } => {
            let cfg = load(&config, Some(&common))?;
            let preset = preset
                .or(cfg.sweep.preset)
                .ok_or_else(|| Error::Validation("no preset given (use --preset or sweep.preset)".into()))?;
            let mut spec = SweepSpec::new(preset, cfg.scenario()?);
            spec.b_mode = common.b_mode;
            if let Some(seed) = cfg.sweep.an_seed {
                spec.an_seed = seed;
            }
            if let Some(v) = &cfg.sweep.values {
                spec.primary = v.clone();
            }
            if let Some(v) = &cfg.sweep.secondary_values {
                spec.secondary = v.clone();
            }
            let rows = run_sweep(&spec)?;
            emit_csv(&rows, preset, &out).with_context(|| format!("writing {}", out.display()))?;
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            eprintln!("wrote {} rows to {} ({failed} failed)", rows.len(), out.display());
        }
        Command::Mc {
            config,
            trials,
            seed,
            common,
        } => {
            let scenario = load(&config, Some(&common))?.scenario()?;
            let position = run_position_trials(&scenario, trials, seed, common.b_mode)?;
            let delays = scenario
                .eve_ids()
                .into_iter()
                .map(|id| run_delay_trials(&scenario, id, trials, seed))
                .collect::<Result<Vec<_>, _>>()?;
            let out = serde_json::json!({ "position": position, "eve_delays": delays });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Validate { config } => {
            let scenario = load(&config, None)?.scenario()?;
            println!(
                "ok: {} anchors ({} eavesdroppers), scheme {}",
                scenario.anchors().len(),
                scenario.eve_ids().len(),
                scenario.scheme().tag().as_str()
            );
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_validation() => 2,
        Some(Error::Io(_) | Error::Csv(_)) => 2,
        Some(_) => 3,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

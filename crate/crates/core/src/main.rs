//! Command-line front end for the link simulator and experiment harness.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bb84link::calibrate::{calibrate, CalibrationTargets};
use bb84link::config::RunConfig;
use bb84link::experiment::{
    max_split, run_ob_sweep, run_time_evolution, sig6, write_evolution_csv, write_sweep_csv,
};
use bb84link::presets;
use bb84link::source::{attenuation_to_target, photons_per_pulse};
use bb84link::{Error, Result};

const VERSION_LINE: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (config-format 1, timetag-csv 1, sweep-csv 1, evolve-csv 1)"
);

#[derive(Parser)]
#[command(name = "bb84link", version = VERSION_LINE)]
#[command(about = "Photon-level BB84 link simulator and post-processing harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Configuration file (flat `key = value` lines).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the simulation RNG seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Write CSV output here instead of the configured path / stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Override the pulses per run (rounded up to whole pattern periods).
    #[arg(long, value_name = "N")]
    pulses: Option<u64>,
    /// Skip Monte Carlo; fill the output from the analytic model.
    #[arg(long)]
    analytic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the optical budget and emit rate/QBER rows as CSV.
    Sweep(CommonOpts),
    /// Per-block time evolution of rate and QBER, one trace per basis.
    Evolve(CommonOpts),
    /// Fit (eta_bob, e_opt, effective dark rate) to anchor observations.
    Calibrate {
        #[command(flatten)]
        common: CommonOpts,
        /// Raw key rate at 0 dB budget, bits/s.
        #[arg(long, default_value_t = 7600.0)]
        r0: f64,
        /// QBER at 0 dB budget.
        #[arg(long, default_value_t = 0.042)]
        q0: f64,
        /// Budget at which the QBER crosses the threshold, dB.
        #[arg(long, default_value_t = 15.2)]
        ob_threshold: f64,
        /// QBER threshold value.
        #[arg(long, default_value_t = 0.11)]
        q_max: f64,
    },
    /// Largest passive 1:N split that fits a loss budget.
    Split {
        /// Available optical budget, dB.
        #[arg(long, default_value_t = 15.2)]
        ob_threshold: f64,
        /// Excess loss per split stage, dB.
        #[arg(long, default_value_t = 0.5)]
        excess: f64,
    },
    /// Convert optical power to mean photon number per pulse.
    Photons {
        /// Optical power in watts; alternatively give --current-ma.
        #[arg(long, value_name = "W")]
        power: Option<f64>,
        /// Drive current for the preset's L-I curve, mA.
        #[arg(long, value_name = "MA")]
        current_ma: Option<f64>,
        /// Emitter preset supplying wavelength (and L-I curve).
        #[arg(long, default_value = "sige_unfiltered")]
        preset: String,
        /// Wavelength override, nm.
        #[arg(long, value_name = "NM")]
        wavelength: Option<f64>,
        /// Symbol rate, Hz.
        #[arg(long, default_value_t = 1e9)]
        rate: f64,
        /// Report the attenuation down to this mean photon number.
        #[arg(long, default_value_t = 0.1)]
        target_mu: f64,
    },
}

fn load_config(common: &CommonOpts) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.link.rng_seed = seed;
    }
    if let Some(pulses) = common.pulses {
        config.link.pulse_count = pulses;
    }
    if let Some(out) = &common.out {
        config.output_path = Some(out.clone());
    }
    config.analytic_only = common.analytic;
    Ok(config)
}

/// Writes `emit`'s output to the configured file, or stdout if none.
fn emit_csv<F>(config: &RunConfig, emit: F) -> Result<()>
where
    F: Fn(&mut dyn Write) -> std::io::Result<()>,
{
    match &config.output_path {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = std::io::BufWriter::new(file);
            emit(&mut w).map_err(|e| Error::io(path, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            emit(&mut w).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep(common) => {
            let config = load_config(&common)?;
            let rows = run_ob_sweep(&config)?;
            emit_csv(&config, |w| write_sweep_csv(w, &rows))
        }
        Command::Evolve(common) => {
            let config = load_config(&common)?;
            let table = run_time_evolution(&config)?;
            emit_csv(&config, |w| write_evolution_csv(w, &table))
        }
        Command::Calibrate {
            common,
            r0,
            q0,
            ob_threshold,
            q_max,
        } => {
            let config = load_config(&common)?;
            let fit = calibrate(
                &CalibrationTargets {
                    raw_rate_bps: r0,
                    qber: q0,
                    ob_threshold_db: ob_threshold,
                    qber_threshold: q_max,
                },
                &config.link,
            )?;
            println!("eta_bob = {:.6e}", fit.eta_bob);
            println!("e_opt = {:.6}", fit.e_opt);
            println!("dark_eff_cps = {:.4}", fit.dark_eff_cps);
            println!(
                "residuals = rate {:.2e}, qber {:.2e}, qber_threshold {:.2e}",
                fit.residuals.raw_rate, fit.residuals.qber, fit.residuals.qber_threshold
            );
            Ok(())
        }
        Command::Split {
            ob_threshold,
            excess,
        } => {
            println!("{}", max_split(ob_threshold, excess));
            Ok(())
        }
        Command::Photons {
            power,
            current_ma,
            preset,
            wavelength,
            rate,
            target_mu,
        } => {
            let spec = presets::preset(&preset)
                .map(|p| p.emitter)
                .ok_or_else(|| Error::param("preset", format!("unknown preset `{preset}`")))?;
            let power_w = match (power, current_ma) {
                (Some(p), None) => p,
                (None, Some(ma)) => {
                    let curve = spec.li_curve.as_ref().ok_or_else(|| {
                        Error::param("current_ma", format!("preset `{preset}` has no L-I curve"))
                    })?;
                    curve.power_at(ma)?
                }
                (Some(_), Some(_)) => {
                    return Err(Error::param(
                        "power",
                        "give either --power or --current-ma, not both",
                    ))
                }
                (None, None) => {
                    return Err(Error::param(
                        "power",
                        "one of --power or --current-ma is required",
                    ))
                }
            };
            let lambda = wavelength.unwrap_or(spec.center_wavelength_nm);
            let mu = photons_per_pulse(power_w, lambda, rate)?;
            println!("power_w = {}", sig6(power_w));
            println!("wavelength_nm = {}", sig6(lambda));
            println!("symbol_rate_hz = {}", sig6(rate));
            println!("mu = {}", sig6(mu));
            if mu >= target_mu && target_mu > 0.0 {
                println!(
                    "attenuation_to_mu_{} = {} dB",
                    target_mu,
                    sig6(attenuation_to_target(mu, target_mu)?)
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}: {err}", err.category());
            ExitCode::FAILURE
        }
    }
}

//! Command-line front end. Exit codes: 0 on success, 1 for an invalid
//! configuration, 2 for a runtime failure.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use linksim::config::{parse_snr_list, SimConfig};
use linksim::output::{emit_results, OutputFormat};
use linksim::papr::compare_papr;
use linksim::selftest::run_selftest;
use linksim::sim::run_sweep;

#[derive(Parser)]
#[command(
    name = "linksim",
    version,
    about = "AFDM link-level Monte Carlo simulator"
)]
struct Cli {
    /// Log progress and per-point diagnostics to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an SNR sweep over the configured schemes and emit a table.
    Simulate {
        /// TOML configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the SNR grid: "0,2,4" or "start:step:stop" in dB.
        #[arg(long)]
        snr: Option<String>,
        /// Override the scheme list (comma-separated tokens).
        #[arg(long)]
        schemes: Option<String>,
        /// Override frames per sweep point.
        #[arg(long)]
        frames: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write results here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Output encoding.
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Run the built-in oracle and consistency checks.
    Selftest,
    /// Compare waveform peak-to-average power between pilot layouts.
    Papr {
        /// TOML configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Frames to average per layout.
        #[arg(long, default_value_t = 10_000)]
        frames: usize,
        /// Per-symbol data power in dB.
        #[arg(long, default_value_t = 10.0)]
        symbol_power_db: f64,
        /// Pilot power in dB.
        #[arg(long, default_value_t = 45.0)]
        pilot_power_db: f64,
        /// Dump the first prefixed guard-free frame here as interleaved
        /// little-endian f64 (re, im) pairs.
        #[arg(long)]
        dump_waveform: Option<PathBuf>,
    },
    /// Print the constants a configuration derives to.
    Info {
        /// TOML configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum AppError {
    Config(String),
    Runtime(String),
}

fn load_config(path: Option<&PathBuf>) -> Result<SimConfig, AppError> {
    let config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| AppError::Config(format!("reading {}: {e}", p.display())))?;
            SimConfig::from_toml(&text).map_err(AppError::Config)?
        }
        None => SimConfig::default(),
    };
    config.validate().map_err(AppError::Config)?;
    Ok(config)
}

fn chirp_display(c: afdm_core::Chirp) -> String {
    match c {
        afdm_core::Chirp::Ratio(num, den) => format!("{num}/{den} = {}", c.value()),
        afdm_core::Chirp::Real(v) => format!("{v}"),
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Simulate {
            config,
            snr,
            schemes,
            frames,
            seed,
            output,
            format,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(list) = snr {
                cfg.snr_db_list = parse_snr_list(&list).map_err(AppError::Config)?;
            }
            if let Some(list) = schemes {
                cfg.schemes = list.split(',').map(|s| s.trim().to_string()).collect();
            }
            if let Some(n) = frames {
                cfg.frames_per_point = n;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            cfg.validate().map_err(AppError::Config)?;
            log::info!(
                "sweeping {} SNR points x {} schemes x {} frames",
                cfg.snr_db_list.len(),
                cfg.schemes.len(),
                cfg.frames_per_point
            );
            let rows = run_sweep(&cfg).map_err(AppError::Config)?;
            emit_results(&rows, format, output.as_deref()).map_err(AppError::Runtime)
        }
        Command::Selftest => {
            if run_selftest() {
                Ok(())
            } else {
                Err(AppError::Runtime("self-test failed".into()))
            }
        }
        Command::Papr {
            config,
            frames,
            symbol_power_db,
            pilot_power_db,
            dump_waveform,
        } => {
            let cfg = load_config(config.as_ref())?;
            if frames == 0 {
                return Err(AppError::Config("frames must be positive".into()));
            }
            let report = compare_papr(
                &cfg,
                symbol_power_db,
                pilot_power_db,
                frames,
                dump_waveform.as_deref(),
            )
            .map_err(AppError::Runtime)?;
            println!("frames per layout: {}", report.frames);
            println!("mean papr classic_gi: {:.4} dB", report.classic_mean_db);
            println!("mean papr gi_free:    {:.4} dB", report.gifree_mean_db);
            println!("gap: {:.4} dB", report.gap_db());
            Ok(())
        }
        Command::Info { config } => {
            let cfg = load_config(config.as_ref())?;
            let params = cfg
                .modem_params()
                .map_err(|e| AppError::Config(e.to_string()))?;
            let constellation = cfg.parsed_constellation().map_err(AppError::Config)?;
            let q = afdm_core::params::guard_width(cfg.l_max, cfg.k_max);
            let bits = constellation.bits_per_symbol();
            let classic = afdm_core::params::spectral_efficiency(
                afdm_core::PilotScheme::ClassicGi,
                cfg.n,
                q,
                bits,
            )
            .map_err(|e| AppError::Config(e.to_string()))?;
            let gifree = afdm_core::params::spectral_efficiency(
                afdm_core::PilotScheme::GiFree,
                cfg.n,
                q,
                bits,
            )
            .map_err(|e| AppError::Config(e.to_string()))?;
            println!("frame length N: {}", params.n);
            println!(
                "subcarrier spacing: {} Hz (bandwidth {} Hz, frame {} s)",
                params.delta_f,
                params.n as f64 * params.delta_f,
                1.0 / params.delta_f
            );
            println!("c1: {}", chirp_display(params.c1));
            println!("c2: {}", chirp_display(params.c2));
            println!("prefix length: {}", params.l_cp);
            println!("guard width Q: {q} (pilot region {} samples)", q + 1);
            println!("constellation: {} ({bits} bit/symbol)", cfg.constellation);
            println!("eta classic_gi: {classic:.3}");
            println!("eta gi_free: {gifree:.3}");
            println!("improvement: {:.1}%", 100.0 * (gifree - classic) / classic);
            Ok(())
        }
    }
}

/// Restore the default SIGPIPE disposition so piping output into a pager
/// or `head` ends the process quietly instead of panicking on a broken
/// pipe (Rust ignores SIGPIPE by default).
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = Cli::parse();
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or(if cli.verbose { "info" } else { "warn" }),
    )
    .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(1)
        }
        Err(AppError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

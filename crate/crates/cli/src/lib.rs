//! Monte Carlo link simulator over the AFDM core: configuration, the
//! trial/sweep harness, result emission, peak-power comparison, and the
//! built-in self-test.

pub mod config;
pub mod output;
pub mod papr;
pub mod selftest;
pub mod sim;

pub use config::{Scheme, SimConfig};
pub use output::{csv_string, emit_results, json_string, parse_csv, OutputFormat, CSV_HEADER};
pub use papr::{compare_papr, PaprReport};
pub use sim::{run_sweep, run_trial, trial_rng, SweepRow, TrialResult};

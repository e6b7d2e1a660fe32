//! `synth`: generate a seeded synthetic dataset with exact ground truth.

use disagg::dataio::{synth_generate, write_channel_csv, SynthSpec};

use crate::commands::{ensure_dir, write_string};
use crate::config::Settings;
use crate::{CliError, RunStatus};

#[allow(clippy::too_many_arguments)]
pub fn run(
    settings: &Settings,
    devices: usize,
    states: usize,
    days: usize,
    samples_per_day: usize,
    correlation: f64,
    off_days: &[String],
) -> Result<RunStatus, CliError> {
    let out = settings.require_out()?;
    let spec = SynthSpec {
        device_count: devices,
        states_per_device: states,
        day_count: days,
        samples_per_day,
        correlation,
        off_days: parse_off_days(off_days)?,
        seed: settings.seed,
    };
    let dataset = synth_generate(&spec)?;

    ensure_dir(out)?;
    write_channel_csv(out.join("data.csv"), &dataset.table)?;
    write_string(&out.join("schema.toml"), &dataset.schema.to_toml_string())?;

    println!(
        "generated {devices} devices x {days} days at {samples_per_day} samples/day (seed {})",
        settings.seed
    );
    println!("wrote {}", out.join("data.csv").display());
    println!("wrote {}", out.join("schema.toml").display());
    Ok(RunStatus::Clean)
}

/// Parses `device:day` pairs such as `2:5`.
fn parse_off_days(pairs: &[String]) -> Result<Vec<(usize, usize)>, CliError> {
    let mut out = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let pair = pair.trim();
        if pair.is_empty() {
            continue;
        }
        let parsed = pair.split_once(':').and_then(|(d, day)| {
            Some((d.trim().parse().ok()?, day.trim().parse().ok()?))
        });
        match parsed {
            Some(p) => out.push(p),
            None => {
                return Err(CliError::config(format!(
                    "bad --off-days entry '{pair}' (want device:day, e.g. 2:5)"
                )))
            }
        }
    }
    Ok(out)
}

//! Helpers shared by the CLI integration and acceptance suites.

#![allow(dead_code)] // each test target uses its own subset

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const BIN: &str = env!("CARGO_BIN_EXE_disagg");

/// Runs the binary with `args`, panicking only on spawn failure — callers
/// assert on status and streams.
pub fn disagg(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("spawn disagg binary")
}

pub fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process terminated by signal")
}

/// Asserts success and returns stdout.
pub fn run_ok(args: &[&str]) -> String {
    let out = disagg(args);
    assert!(
        out.status.success(),
        "disagg {:?} failed ({}):\n{}",
        args,
        exit_code(&out),
        stderr_of(&out)
    );
    stdout_of(&out)
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// A generated two-level dataset on disk: the building aggregate is the
/// exact sum of `other` and `hvac`, and `hvac` is the exact sum of the
/// component channels. Both stages therefore have exact sparse solutions.
pub struct TwoLevelDataset {
    pub data: PathBuf,
    pub stage1_schema: PathBuf,
    pub stage2_schema: PathBuf,
    pub components: Vec<String>,
    pub day_count: usize,
    pub samples_per_day: usize,
}

/// Writes a two-level mixture: `component_count` components cycle through
/// `states` daily profiles each; hvac = their sum; one extra top-level
/// device; aggregate = hvac + other. `off` lists (component, day) pairs
/// zeroed out.
pub fn write_two_level_dataset(
    dir: &Path,
    component_count: usize,
    states: usize,
    day_count: usize,
    samples_per_day: usize,
    seed: u64,
    off: &[(usize, usize)],
) -> TwoLevelDataset {
    let m = samples_per_day;
    let period = 86_400 / m as i64;
    assert_eq!(86_400 % m as i64, 0, "samples must divide a day");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profile = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..m).map(|_| rng.gen_range(0.3..1.5)).collect()
    };
    let comp_profiles: Vec<Vec<Vec<f64>>> = (0..component_count)
        .map(|_| (0..states).map(|_| profile(&mut rng)).collect())
        .collect();
    let other_profiles: Vec<Vec<f64>> = (0..states).map(|_| profile(&mut rng)).collect();

    let components: Vec<String> = (0..component_count).map(|i| format!("comp{i}")).collect();
    let mut csv = String::from("timestamp,aggregate,hvac,other");
    for c in &components {
        csv.push(',');
        csv.push_str(c);
    }
    csv.push('\n');

    for day in 0..day_count {
        // States cycle deterministically so every state shows up at least
        // every `states` days — any training split larger than `states`
        // days has seen every profile, keeping held-out days exactly
        // reconstructable.
        let comp_day: Vec<&[f64]> = (0..component_count)
            .map(|i| comp_profiles[i][(day + i) % states].as_slice())
            .collect();
        let other_day = other_profiles[(day + 1) % states].as_slice();
        for row in 0..m {
            let ts = day as i64 * 86_400 + row as i64 * period;
            let comps: Vec<f64> = (0..component_count)
                .map(|i| {
                    if off.contains(&(i, day)) {
                        0.0
                    } else {
                        comp_day[i][row]
                    }
                })
                .collect();
            let hvac: f64 = comps.iter().sum();
            let other = other_day[row];
            let aggregate = hvac + other;
            csv.push_str(&format!("{ts},{aggregate},{hvac},{other}"));
            for v in &comps {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
    }

    let data = dir.join("two_level.csv");
    fs::write(&data, csv).expect("write dataset");

    let stage1_schema = dir.join("stage1.toml");
    fs::write(
        &stage1_schema,
        "aggregate_channel = \"aggregate\"\nhvac_device = \"hvac\"\n\n\
         [[device]]\nid = \"hvac\"\n\n[[device]]\nid = \"other\"\n",
    )
    .expect("write stage-1 schema");

    let stage2_schema = dir.join("stage2.toml");
    let mut s2 = String::new();
    for c in &components {
        s2.push_str(&format!("[[device]]\nid = \"{c}\"\n\n"));
    }
    fs::write(&stage2_schema, s2).expect("write stage-2 schema");

    TwoLevelDataset {
        data,
        stage1_schema,
        stage2_schema,
        components,
        day_count,
        samples_per_day,
    }
}

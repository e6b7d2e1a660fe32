//! On-disk layout for resumable runs: CSV matrices plus JSON manifests.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! save/load cycle reproduces the same values (bitwise for unnormalized
//! dictionaries) and identical inputs produce byte-identical files.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataio::splits::SplitPlan;
use crate::dataio::table::ChannelTable;
use crate::error::{Error, Result};
use crate::signal::{DeviceGroup, GroupedDictionary, Normalization, SignalMatrix, SignalUnit};

#[derive(Debug, Serialize, Deserialize)]
struct DictManifest {
    sample_period: f64,
    unit: SignalUnit,
    normalization: Normalization,
    samples: usize,
    basis_count: usize,
    groups: Vec<DeviceGroup>,
    column_scales: Vec<f64>,
}

/// Writes `dir/manifest.json` and `dir/bases.csv`. The CSV holds the raw
/// (pre-normalization) columns under their labels, so the file is auditable
/// against the source data; the manifest records how to renormalize.
pub fn save_dictionary(dir: impl AsRef<Path>, dict: &GroupedDictionary) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let manifest = DictManifest {
        sample_period: dict.sample_period(),
        unit: dict.unit(),
        normalization: dict.normalization(),
        samples: dict.samples(),
        basis_count: dict.basis_count(),
        groups: dict.groups().to_vec(),
        column_scales: dict.column_scales().to_vec(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join("manifest.json"), json)?;

    let mut writer = csv::Writer::from_path(dir.join("bases.csv"))?;
    writer.write_record(dict.column_labels())?;
    let scales = dict.column_scales();
    for row in 0..dict.samples() {
        let record: Vec<String> = (0..dict.basis_count())
            .map(|j| format!("{}", dict.bases()[[row, j]] * scales[j]))
            .collect();
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Loads a dictionary saved by [`save_dictionary`].
pub fn load_dictionary(dir: impl AsRef<Path>) -> Result<GroupedDictionary> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| {
        Error::data(format!("cannot read {}: {e}", manifest_path.display()))
    })?;
    let manifest: DictManifest = serde_json::from_str(&text)?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(dir.join("bases.csv"))?;
    let labels: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut raw = Array2::<f64>::zeros((manifest.samples, manifest.basis_count));
    let mut row = 0usize;
    for record in reader.records() {
        let record = record?;
        if row >= manifest.samples || record.len() != manifest.basis_count {
            return Err(Error::data(format!(
                "bases.csv does not match the manifest: expected {}x{}",
                manifest.samples, manifest.basis_count
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            raw[[row, j]] = cell
                .parse::<f64>()
                .map_err(|_| Error::data(format!("bases.csv row {row}: bad number '{cell}'")))?;
        }
        row += 1;
    }
    if row != manifest.samples {
        return Err(Error::data(format!(
            "bases.csv has {row} rows, manifest says {}",
            manifest.samples
        )));
    }
    GroupedDictionary::new(
        raw,
        manifest.groups,
        manifest.normalization,
        manifest.sample_period,
        manifest.unit,
        labels,
    )
}

pub fn save_split_plan(path: impl AsRef<Path>, plan: &SplitPlan) -> Result<()> {
    let mut json = serde_json::to_string_pretty(plan)?;
    json.push('\n');
    fs::write(path.as_ref(), json)?;
    Ok(())
}

pub fn load_split_plan(path: impl AsRef<Path>) -> Result<SplitPlan> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes a signal as plot-ready CSV: one `offset_s` column (seconds from
/// window start) and one column per window.
pub fn write_signal_csv(path: impl AsRef<Path>, signal: &SignalMatrix) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["offset_s".to_string()];
    header.extend(signal.window_labels().iter().cloned());
    writer.write_record(&header)?;
    for row in 0..signal.samples() {
        let mut record = vec![format!("{}", row as f64 * signal.sample_period())];
        record.extend(
            (0..signal.windows()).map(|j| format!("{}", signal.values()[[row, j]])),
        );
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes a channel table as `timestamp` plus one column per channel —
/// the same shape [`load_channel_csv`](crate::dataio::load_channel_csv)
/// reads back.
pub fn write_channel_csv(path: impl AsRef<Path>, table: &ChannelTable) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(table.channel_names().iter().cloned());
    writer.write_record(&header)?;
    for (row, ts) in table.timestamps().iter().enumerate() {
        let mut record = vec![format!("{ts}")];
        record.extend(
            (0..table.channel_names().len()).map(|c| format!("{}", table.values()[[row, c]])),
        );
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::splits::make_splits;
    use crate::dataio::synth::{synth_generate, SynthSpec};
    use crate::dataio::table::load_channel_csv;
    use crate::signal::dictionary_from_blocks;
    use ndarray::array;

    fn sample_dict(norm: Normalization) -> GroupedDictionary {
        dictionary_from_blocks(
            &[
                ("a", array![[1.0, 0.25], [2.0, 0.5]]),
                ("b", array![[0.125], [4.0]]),
            ],
            norm,
            60.0,
            SignalUnit::Watt,
        )
        .unwrap()
    }

    #[test]
    fn dictionary_round_trip_unnormalized_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let dict = sample_dict(Normalization::None);
        save_dictionary(dir.path(), &dict).unwrap();
        let back = load_dictionary(dir.path()).unwrap();
        assert_eq!(back.bases(), dict.bases());
        assert_eq!(back.groups(), dict.groups());
        assert_eq!(back.column_labels(), dict.column_labels());
        assert_eq!(back.sample_period(), 60.0);
        assert_eq!(back.unit(), SignalUnit::Watt);
        assert_eq!(back.normalization(), Normalization::None);
    }

    #[test]
    fn dictionary_round_trip_unit_l2_preserves_scales() {
        let dir = tempfile::tempdir().unwrap();
        let dict = sample_dict(Normalization::UnitL2);
        save_dictionary(dir.path(), &dict).unwrap();
        let back = load_dictionary(dir.path()).unwrap();
        assert_eq!(back.normalization(), Normalization::UnitL2);
        for (a, b) in back.column_scales().iter().zip(dict.column_scales()) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
        for (a, b) in back.bases().iter().zip(dict.bases()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn corrupt_bases_shape_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_dictionary(dir.path(), &sample_dict(Normalization::None)).unwrap();
        // drop a data row
        let path = dir.path().join("bases.csv");
        let text = std::fs::read_to_string(&path).unwrap();
        let truncated: Vec<&str> = text.lines().take(2).collect();
        std::fs::write(&path, truncated.join("\n")).unwrap();
        assert!(load_dictionary(dir.path()).is_err());
    }

    #[test]
    fn split_plan_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let plan = make_splits(30, 0.8, 4, 9).unwrap();
        let path = dir.path().join("plan.json");
        save_split_plan(&path, &plan).unwrap();
        assert_eq!(load_split_plan(&path).unwrap(), plan);
    }

    #[test]
    fn signal_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let sig = SignalMatrix::new(
            array![[1.0, 3.0], [2.0, 4.0]],
            30.0,
            SignalUnit::Ampere,
            vec!["d1".into(), "d2".into()],
        )
        .unwrap();
        let path = dir.path().join("sig.csv");
        write_signal_csv(&path, &sig).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "offset_s,d1,d2\n0,1,3\n30,2,4\n");
    }

    #[test]
    fn channel_table_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let data = synth_generate(&SynthSpec {
            day_count: 2,
            samples_per_day: 24,
            seed: 3,
            ..SynthSpec::default()
        })
        .unwrap();
        let path = dir.path().join("data.csv");
        write_channel_csv(&path, &data.table).unwrap();
        let (back, report) = load_channel_csv(&path, &data.schema).unwrap();
        assert_eq!(back.values(), data.table.values());
        assert_eq!(back.sample_period(), data.table.sample_period());
        assert_eq!(back.channel_names(), data.table.channel_names());
        assert_eq!(report.filled_missing, 0);
    }
}

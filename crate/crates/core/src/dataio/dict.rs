//! Dictionary assembly: one basis column per device per training day.

use ndarray::Array2;

use crate::dataio::schema::DatasetSchema;
use crate::dataio::table::ChannelTable;
use crate::error::{Error, Result};
use crate::signal::{DeviceGroup, GroupedDictionary, Normalization, SignalMatrix, SignalUnit};

/// Columns that were left out of the dictionary.
#[derive(Debug, Clone, Default)]
pub struct DictionaryBuildReport {
    /// `(device id, day label)` of training days skipped because the device
    /// recorded nothing that day.
    pub skipped_zero_days: Vec<(String, String)>,
}

impl DictionaryBuildReport {
    pub fn warnings(&self) -> Vec<String> {
        self.skipped_zero_days
            .iter()
            .map(|(dev, day)| format!("skipped all-zero training day {day} for device '{dev}'"))
            .collect()
    }
}

/// Extracts one channel's selected day windows as a sample-by-day matrix.
/// `days` index into `table.day_windows()`; window labels are the days'
/// calendar dates.
pub fn day_matrix(
    table: &ChannelTable,
    channel: &str,
    days: &[usize],
    unit: SignalUnit,
) -> Result<SignalMatrix> {
    let ch = table.channel_index(channel)?;
    let m = table.samples_per_day();
    check_days(table, days)?;
    let mut values = Array2::<f64>::zeros((m, days.len()));
    let mut labels = Vec::with_capacity(days.len());
    for (j, &day) in days.iter().enumerate() {
        values.column_mut(j).assign(&table.day_samples(ch, day));
        labels.push(table.day_label(day));
    }
    SignalMatrix::new(values, table.sample_period() as f64, unit, labels)
}

fn check_days(table: &ChannelTable, days: &[usize]) -> Result<()> {
    if days.is_empty() {
        return Err(Error::data("no days selected"));
    }
    if let Some(&bad) = days.iter().find(|&&d| d >= table.day_windows().len()) {
        return Err(Error::data(format!(
            "day index {bad} out of range; table has {} complete days",
            table.day_windows().len()
        )));
    }
    Ok(())
}

/// Builds the grouped dictionary: group `i` holds device `i`'s signal on
/// each training day, ordered by day. All-zero days are skipped per device
/// (reported); a device with no usable day at all is an error because its
/// group would be empty.
pub fn build_dictionary(
    table: &ChannelTable,
    schema: &DatasetSchema,
    train_days: &[usize],
    normalization: Normalization,
) -> Result<(GroupedDictionary, DictionaryBuildReport)> {
    check_days(table, train_days)?;
    let m = table.samples_per_day();
    let mut report = DictionaryBuildReport::default();

    // Collect kept columns per device first; total count fixes the layout.
    let mut kept: Vec<(usize, Vec<usize>)> = Vec::new(); // (channel idx, kept days)
    for dev in schema.devices() {
        let ch = table.channel_index(dev.channel_name())?;
        let mut days = Vec::new();
        for &day in train_days {
            if table.day_samples(ch, day).iter().all(|&v| v == 0.0) {
                report
                    .skipped_zero_days
                    .push((dev.id.clone(), table.day_label(day)));
            } else {
                days.push(day);
            }
        }
        if days.is_empty() {
            return Err(Error::data(format!(
                "device '{}' has no non-zero training day; its group would be empty",
                dev.id
            )));
        }
        kept.push((ch, days));
    }

    let total: usize = kept.iter().map(|(_, days)| days.len()).sum();
    let mut bases = Array2::<f64>::zeros((m, total));
    let mut groups = Vec::with_capacity(kept.len());
    let mut labels = Vec::with_capacity(total);
    let mut col = 0usize;
    for (dev, (ch, days)) in schema.devices().iter().zip(&kept) {
        groups.push(DeviceGroup {
            device_id: dev.id.clone(),
            column_start: col,
            column_count: days.len(),
        });
        for &day in days {
            bases.column_mut(col).assign(&table.day_samples(*ch, day));
            labels.push(format!("{}/{}", dev.id, table.day_label(day)));
            col += 1;
        }
    }

    let dict = GroupedDictionary::new(
        bases,
        groups,
        normalization,
        table.sample_period() as f64,
        schema.unit(),
        labels,
    )?;
    Ok((dict, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    /// Table with `days` complete days at 4 samples/day; channel `c`'s value
    /// on day `d`, sample `s` is `base(c, d, s)`.
    fn table_4(
        names: &[&str],
        days: usize,
        base: impl Fn(usize, usize, usize) -> f64,
    ) -> ChannelTable {
        let per_day = 4usize;
        let n = days * per_day;
        let timestamps: Vec<i64> = (0..n).map(|i| i as i64 * 21_600).collect();
        let mut values = Array2::<f64>::zeros((n, names.len()));
        for c in 0..names.len() {
            for d in 0..days {
                for s in 0..per_day {
                    values[[d * per_day + s, c]] = base(c, d, s);
                }
            }
        }
        ChannelTable::from_grid(
            timestamps,
            names.iter().map(|s| s.to_string()).collect(),
            values,
        )
        .unwrap()
    }

    fn schema(devices: &[&str]) -> DatasetSchema {
        let toml: String = devices
            .iter()
            .map(|d| format!("[[device]]\nid = \"{d}\"\n"))
            .collect();
        DatasetSchema::from_toml_str(&toml).unwrap()
    }

    #[test]
    fn nineteen_devices_292_days_gives_5548_columns() {
        let names: Vec<String> = (0..19).map(|i| format!("dev{i:02}")).collect();
        let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let table = table_4(&name_refs, 365, |c, d, s| 1.0 + ((c + d + s) % 5) as f64);
        let train: Vec<usize> = (0..292).collect();
        let (dict, report) =
            build_dictionary(&table, &schema(&name_refs), &train, Normalization::None).unwrap();
        assert_eq!(dict.device_count(), 19);
        assert_eq!(dict.basis_count(), 5548);
        assert!(report.skipped_zero_days.is_empty());
    }

    #[test]
    fn constant_day_unit_l2_records_scale() {
        // constant signal c·1 over m = 4 samples has norm c·sqrt(m)
        let table = table_4(&["only"], 1, |_, _, _| 2.0);
        let (dict, _) =
            build_dictionary(&table, &schema(&["only"]), &[0], Normalization::UnitL2).unwrap();
        assert_eq!(dict.basis_count(), 1);
        assert!((dict.column_scales()[0] - 2.0 * 4f64.sqrt()).abs() < 1e-12);
        for v in dict.bases().column(0) {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn kept_day_counts_shape_the_groups() {
        // device a: 3 usable days; device b: day 1 all-zero, 2 usable
        let table = table_4(&["a", "b"], 3, |c, d, _| {
            if c == 1 && d == 1 {
                0.0
            } else {
                1.0 + d as f64
            }
        });
        let (dict, report) =
            build_dictionary(&table, &schema(&["a", "b"]), &[0, 1, 2], Normalization::None)
                .unwrap();
        let sizes: Vec<usize> = dict.groups().iter().map(|g| g.column_count).collect();
        assert_eq!(sizes, [3, 2]);
        assert_eq!(dict.groups()[1].column_start, 3);
        assert_eq!(report.skipped_zero_days, vec![("b".to_string(), "1970-01-02".to_string())]);
        assert_eq!(dict.column_labels()[0], "a/1970-01-01");
    }

    #[test]
    fn device_with_no_usable_day_errors() {
        let table = table_4(&["a", "b"], 2, |c, _, _| if c == 1 { 0.0 } else { 1.0 });
        let err = build_dictionary(&table, &schema(&["a", "b"]), &[0, 1], Normalization::None)
            .unwrap_err();
        assert!(err.to_string().contains("'b'"));
    }

    #[test]
    fn day_matrix_extracts_selected_days_in_order() {
        let table = table_4(&["x"], 3, |_, d, s| (10 * d + s) as f64 + 1.0);
        let sig = day_matrix(&table, "x", &[2, 0], SignalUnit::Ampere).unwrap();
        assert_eq!(sig.samples(), 4);
        assert_eq!(sig.windows(), 2);
        assert_eq!(sig.values().column(0).to_vec(), vec![21.0, 22.0, 23.0, 24.0]);
        assert_eq!(sig.values().column(1).to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(sig.window_labels()[0], "1970-01-03");
    }

    #[test]
    fn unknown_channel_and_bad_day_index_error() {
        let table = table_4(&["x"], 2, |_, _, _| 1.0);
        assert!(day_matrix(&table, "nope", &[0], SignalUnit::Ampere).is_err());
        assert!(day_matrix(&table, "x", &[5], SignalUnit::Ampere).is_err());
    }
}

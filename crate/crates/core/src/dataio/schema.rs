//! Dataset description: which CSV columns hold what.
//!
//! Column naming varies across meter exports, so the mapping from channels
//! to device ids lives in a TOML file instead of code. The `[[device]]`
//! order fixes the dictionary's group order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SignalUnit;

/// One metered device: its id and the CSV column carrying its samples
/// (defaults to the id itself).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
}

impl DeviceSpec {
    pub fn channel_name(&self) -> &str {
        self.channel.as_deref().unwrap_or(&self.id)
    }
}

/// TOML-backed description of a dataset's layout.
///
/// ```toml
/// timestamp_column = "unix_ts"
/// aggregate_channel = "WHE"
/// unit = "ampere"            # or "watt"
/// hvac_device = "hvac"       # only for hierarchical runs
///
/// [[device]]
/// id = "fridge"
/// channel = "FGE"            # omitted -> column named like the id
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSchema {
    #[serde(default = "default_timestamp_column")]
    timestamp_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aggregate_channel: Option<String>,
    #[serde(default)]
    unit: SignalUnit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hvac_device: Option<String>,
    #[serde(rename = "device", default)]
    devices: Vec<DeviceSpec>,
}

fn default_timestamp_column() -> String {
    "timestamp".to_string()
}

impl DatasetSchema {
    pub fn new(
        timestamp_column: impl Into<String>,
        aggregate_channel: Option<String>,
        unit: SignalUnit,
        devices: Vec<DeviceSpec>,
    ) -> Result<Self> {
        let schema = DatasetSchema {
            timestamp_column: timestamp_column.into(),
            aggregate_channel,
            unit,
            hvac_device: None,
            devices,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: DatasetSchema = toml::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read schema {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::data(format!("schema {}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("schema serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.devices.is_empty() {
            return Err(Error::data("schema lists no devices"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for d in &self.devices {
            if d.id.is_empty() {
                return Err(Error::data("device ids must be non-empty"));
            }
            if !seen.insert(d.id.as_str()) {
                return Err(Error::data(format!("duplicate device id '{}'", d.id)));
            }
        }
        if let Some(hvac) = &self.hvac_device {
            if !self.devices.iter().any(|d| &d.id == hvac) {
                return Err(Error::data(format!(
                    "hvac_device '{hvac}' is not among the listed devices"
                )));
            }
        }
        Ok(())
    }

    pub fn timestamp_column(&self) -> &str {
        &self.timestamp_column
    }

    pub fn aggregate_channel(&self) -> Option<&str> {
        self.aggregate_channel.as_deref()
    }

    /// The aggregate channel, required (e.g. before a disaggregation run).
    pub fn require_aggregate(&self) -> Result<&str> {
        self.aggregate_channel
            .as_deref()
            .ok_or_else(|| Error::data("schema does not name an aggregate_channel"))
    }

    pub fn unit(&self) -> SignalUnit {
        self.unit
    }

    pub fn hvac_device(&self) -> Option<&str> {
        self.hvac_device.as_deref()
    }

    pub fn with_hvac_device(mut self, id: impl Into<String>) -> Result<Self> {
        self.hvac_device = Some(id.into());
        self.validate()?;
        Ok(self)
    }

    /// Devices in group order.
    pub fn devices(&self) -> &[DeviceSpec] {
        &self.devices
    }

    pub fn device_ids(&self) -> Vec<&str> {
        self.devices.iter().map(|d| d.id.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_schema_defaults() {
        let s = DatasetSchema::from_toml_str(
            r#"
[[device]]
id = "fridge"
"#,
        )
        .unwrap();
        assert_eq!(s.timestamp_column(), "timestamp");
        assert_eq!(s.unit(), SignalUnit::Ampere);
        assert_eq!(s.devices()[0].channel_name(), "fridge");
        assert!(s.aggregate_channel().is_none());
    }

    #[test]
    fn full_schema_round_trips() {
        let s = DatasetSchema::from_toml_str(
            r#"
timestamp_column = "unix_ts"
aggregate_channel = "WHE"
unit = "watt"
hvac_device = "hvac"

[[device]]
id = "hvac"
channel = "HPE"

[[device]]
id = "fridge"
channel = "FGE"
"#,
        )
        .unwrap();
        assert_eq!(s.unit(), SignalUnit::Watt);
        assert_eq!(s.hvac_device(), Some("hvac"));
        assert_eq!(s.device_ids(), ["hvac", "fridge"]);
        let back = DatasetSchema::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(back.device_ids(), s.device_ids());
        assert_eq!(back.aggregate_channel(), s.aggregate_channel());
    }

    #[test]
    fn duplicate_ids_and_unknown_hvac_rejected() {
        assert!(DatasetSchema::from_toml_str(
            "[[device]]\nid = \"a\"\n[[device]]\nid = \"a\"\n"
        )
        .is_err());
        assert!(DatasetSchema::from_toml_str(
            "hvac_device = \"x\"\n[[device]]\nid = \"a\"\n"
        )
        .is_err());
    }

    #[test]
    fn empty_device_list_rejected() {
        assert!(DatasetSchema::from_toml_str("timestamp_column = \"ts\"\n").is_err());
    }
}

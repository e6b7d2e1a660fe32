//! Dataset ingestion, dictionary construction, splits, and synthetic data.
//!
//! The unit of analysis is the midnight-aligned day: ingestion repairs a
//! channel table onto a uniform sample grid, then exposes the complete days
//! as windows. Dictionary building stacks selected training days per device
//! into grouped basis columns; splitting assigns day indices to folds;
//! [`synth`] fabricates ground-truth datasets whose aggregate is the exact
//! sum of the device channels.

mod dict;
mod schema;
mod splits;
mod store;
pub mod synth;
mod table;

pub use dict::{build_dictionary, day_matrix, DictionaryBuildReport};
pub use schema::{DatasetSchema, DeviceSpec};
pub use splits::{make_kfold_splits, make_splits, Fold, SplitMode, SplitPlan};
pub use store::{
    load_dictionary, load_split_plan, save_dictionary, save_split_plan, write_channel_csv,
    write_signal_csv,
};
pub use synth::{synth_generate, SynthDataset, SynthSpec};
pub use table::{load_channel_csv, ChannelTable, DayWindow, IngestReport, SECONDS_PER_DAY};

//! Run configuration: a TOML file merged with command-line flags.
//!
//! Precedence is flag over file over built-in default. Environment
//! variables are deliberately ignored — a run is fully described by its
//! config and flags, which is what makes reports reproducible.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use disagg::signal::Normalization;
use disagg::solvers::{
    ElasticNetConfig, LassoConfig, MethodConfig, S2kConfig, DEFAULT_BETA,
    DEFAULT_OFF_THRESHOLD_PCEC,
};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    S2k,
    Lasso,
    ElasticNet,
}

impl MethodName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::S2k => "s2k",
            MethodName::Lasso => "lasso",
            MethodName::ElasticNet => "elastic-net",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationName {
    None,
    UnitL2,
}

impl From<NormalizationName> for Normalization {
    fn from(n: NormalizationName) -> Self {
        match n {
            NormalizationName::None => Normalization::None,
            NormalizationName::UnitL2 => Normalization::UnitL2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvMode {
    /// Repeated random subsampling at each requested fraction.
    Subsample,
    /// Disjoint k-fold partition (ignores the split fractions).
    KFold,
}

/// Flags shared by every command. Unset flags fall back to the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// TOML run configuration; explicit flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Input CSV (header row, one timestamp column, one column per channel)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Dataset schema TOML mapping channels to devices
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// RNG seed for splits and generation
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for per-window solves (0 = all cores)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Disaggregation method
    #[arg(long, value_enum)]
    pub method: Option<MethodName>,
    /// Sum-to-one weight for the s2k method
    #[arg(long)]
    pub beta: Option<f64>,
    /// L1 weight for lasso / elastic-net
    #[arg(long)]
    pub beta1: Option<f64>,
    /// L2 weight for elastic-net
    #[arg(long)]
    pub beta2: Option<f64>,
    /// Dictionary column normalization
    #[arg(long, value_enum)]
    pub normalization: Option<NormalizationName>,
    /// Training fractions for crossval, comma separated (e.g. 0.8,0.5,0.2)
    #[arg(long, value_delimiter = ',')]
    pub splits: Option<Vec<f64>>,
    /// Fold count
    #[arg(long)]
    pub folds: Option<usize>,
}

/// The config-file side of [`CommonArgs`], plus file-only keys.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub stage2_schema: Option<PathBuf>,
    pub dict: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub method: Option<MethodName>,
    pub methods: Option<Vec<MethodName>>,
    pub beta: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub tol: Option<f64>,
    pub normalization: Option<NormalizationName>,
    pub train_fraction: Option<f64>,
    pub splits: Option<Vec<f64>>,
    pub folds: Option<usize>,
    pub cv_mode: Option<CvMode>,
    pub off_threshold_pcec: Option<f64>,
    pub days: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))
    }
}

/// Fully resolved settings every command works from.
#[derive(Debug, Clone)]
pub struct Settings {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub stage2_schema: Option<PathBuf>,
    pub dict: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub workers: usize,
    pub method: MethodName,
    pub methods: Vec<MethodName>,
    pub beta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub tol: Option<f64>,
    pub normalization: Normalization,
    pub train_fraction: f64,
    pub splits: Vec<f64>,
    pub folds: usize,
    pub cv_mode: CvMode,
    pub off_threshold_pcec: f64,
    pub days: String,
}

impl Settings {
    pub fn resolve(args: &CommonArgs, file: &FileConfig) -> Self {
        let lasso_default = LassoConfig::default();
        let enet_default = ElasticNetConfig::default();
        Settings {
            data: args.data.clone().or_else(|| file.data.clone()),
            schema: args.schema.clone().or_else(|| file.schema.clone()),
            stage2_schema: file.stage2_schema.clone(),
            dict: file.dict.clone(),
            out: args.out.clone().or_else(|| file.out.clone()),
            seed: args.seed.or(file.seed).unwrap_or(0),
            workers: args.workers.or(file.workers).unwrap_or(0),
            method: args.method.or(file.method).unwrap_or(MethodName::S2k),
            methods: file.methods.clone().unwrap_or_else(|| {
                vec![MethodName::S2k, MethodName::Lasso, MethodName::ElasticNet]
            }),
            beta: args.beta.or(file.beta).unwrap_or(DEFAULT_BETA),
            beta1: args.beta1.or(file.beta1).unwrap_or(lasso_default.beta1),
            beta2: args.beta2.or(file.beta2).unwrap_or(enet_default.beta2),
            tol: file.tol,
            normalization: args
                .normalization
                .or(file.normalization)
                .map(Normalization::from)
                .unwrap_or(Normalization::None),
            train_fraction: file.train_fraction.unwrap_or(0.8),
            splits: args
                .splits
                .clone()
                .or_else(|| file.splits.clone())
                .unwrap_or_else(|| vec![0.8]),
            folds: args.folds.or(file.folds).unwrap_or(1),
            cv_mode: file.cv_mode.unwrap_or(CvMode::Subsample),
            off_threshold_pcec: file
                .off_threshold_pcec
                .unwrap_or(DEFAULT_OFF_THRESHOLD_PCEC),
            days: file.days.clone().unwrap_or_else(|| "all".to_string()),
        }
    }

    /// The method a single-method command runs with.
    pub fn method_config(&self, name: MethodName) -> Result<MethodConfig, CliError> {
        let out = match name {
            MethodName::S2k => {
                let mut cfg = S2kConfig::new(self.beta)?;
                cfg.off_threshold_pcec = self.off_threshold_pcec;
                if let Some(tol) = self.tol {
                    cfg.tol = tol;
                }
                cfg.validate()?;
                MethodConfig::S2k(cfg)
            }
            MethodName::Lasso => {
                let mut cfg = LassoConfig::new(self.beta1)?;
                if let Some(tol) = self.tol {
                    cfg.tol = tol;
                }
                cfg.validate()?;
                MethodConfig::Lasso(cfg)
            }
            MethodName::ElasticNet => {
                let mut cfg = ElasticNetConfig::new(self.beta1, self.beta2)?;
                if let Some(tol) = self.tol {
                    cfg.tol = tol;
                }
                cfg.validate()?;
                MethodConfig::ElasticNet(cfg)
            }
        };
        Ok(out)
    }

    pub fn require_data(&self) -> Result<&Path, CliError> {
        self.data
            .as_deref()
            .ok_or_else(|| CliError::config("no input data given (--data or `data` in config)"))
    }

    pub fn require_schema(&self) -> Result<&Path, CliError> {
        self.schema
            .as_deref()
            .ok_or_else(|| CliError::config("no schema given (--schema or `schema` in config)"))
    }

    pub fn require_out(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::config("no output directory given (--out or `out` in config)"))
    }

    /// Parses the day selection: `all` or a comma-separated index list.
    pub fn parse_days(&self, available: usize) -> Result<Vec<usize>, CliError> {
        if self.days.trim() == "all" {
            return Ok((0..available).collect());
        }
        let mut out = Vec::new();
        for piece in self.days.split(',') {
            let piece = piece.trim();
            let idx: usize = piece
                .parse()
                .map_err(|_| CliError::config(format!("bad day index '{piece}'")))?;
            if idx >= available {
                return Err(CliError::config(format!(
                    "day index {idx} out of range; data has {available} complete days"
                )));
            }
            out.push(idx);
        }
        if out.is_empty() {
            return Err(CliError::config("empty day selection"));
        }
        Ok(out)
    }
}


pub mod audit;
pub mod estimate;
pub mod synth;
pub mod train;

use rbaudit_core::data::{load_csv, CsvSchema, Dataset, DatasetManifest};
use rbaudit_core::Error as CoreError;
use std::fmt;
use std::path::{Path, PathBuf};

/// CLI failure with its exit code: 2 for usage/config problems, 3 for
/// numerical failures, 1 for everything else.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Other(_) => 1,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) | CliError::Other(m) => f.write_str(m),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match &e {
            CoreError::NanLoss { .. } | CoreError::NonFinite { .. } => {
                CliError::Numeric(e.to_string())
            }
            CoreError::Io(_) | CoreError::Json(_) => CliError::Other(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("bad JSON: {e}"))
    }
}

/// Dataset-loading flags shared by train and estimate.
#[derive(Debug, Clone, clap::Args)]
pub struct DataArgs {
    /// Dataset CSV (header row; see the dataset manifest for column roles).
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Label column name. Defaults to the sidecar manifest, then "label".
    #[arg(long)]
    pub label_col: Option<String>,

    /// Attribute column names, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub attr_cols: Option<Vec<String>>,

    /// Standardize features to zero mean / unit variance before any
    /// computation. Distances are then in standardized units; recorded in
    /// the manifest. Never applied implicitly.
    #[arg(long)]
    pub standardize: bool,
}

pub struct LoadedDataset {
    pub dataset: Dataset,
    pub path: PathBuf,
    pub standardized: bool,
}

/// Sidecar manifest path for a dataset file: `x.csv` -> `x.manifest.json`.
pub fn sidecar_manifest_path(data: &Path) -> PathBuf {
    data.with_extension("manifest.json")
}

pub fn load_dataset(args: &DataArgs) -> Result<LoadedDataset, CliError> {
    let path = args
        .data
        .clone()
        .ok_or_else(|| CliError::usage("--data is required"))?;
    let sidecar = sidecar_manifest_path(&path);
    let manifest: Option<DatasetManifest> = match std::fs::read_to_string(&sidecar) {
        Ok(text) => Some(serde_json::from_str(&text)?),
        Err(_) => None,
    };
    let schema = match (&args.label_col, &args.attr_cols, &manifest) {
        (None, None, Some(m)) => m.schema(),
        _ => {
            let label = args.label_col.clone().unwrap_or_else(|| "label".to_string());
            CsvSchema::new(label).with_attributes(args.attr_cols.clone().unwrap_or_default())
        }
    };
    let dataset = load_csv(&path, &schema)?;
    let dataset = if args.standardize {
        dataset.standardized().0
    } else {
        dataset
    };
    Ok(LoadedDataset {
        dataset,
        path,
        standardized: args.standardize,
    })
}

/// Layer a clap-provided value over a config-file value over a default.
pub fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>, default: T) -> T {
    flag.clone().or_else(|| file.clone()).unwrap_or(default)
}

pub fn pick_opt<T: Clone>(flag: &Option<T>, file: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| file.clone())
}

/// Read a command config file when `--config` is given.
pub fn load_config_file<T: serde::de::DeserializeOwned + Default>(
    path: &Option<PathBuf>,
) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

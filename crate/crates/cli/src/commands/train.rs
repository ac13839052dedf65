use super::{load_config_file, load_dataset, pick, pick_opt, CliError, DataArgs};
use crate::manifest::{hash_file, ManifestBuilder};
use rbaudit_core::data::{parse_partition_spec, resolve_partitions, Partition, PartitionSpec};
use rbaudit_core::models::{accuracy, train, Arch, ModelFile, Objective, TrainConfig};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Architecture: "affine" or "mlp:H1,H2,...".
    #[arg(long)]
    pub arch: Option<String>,

    #[arg(long)]
    pub epochs: Option<usize>,

    #[arg(long)]
    pub batch_size: Option<usize>,

    #[arg(long)]
    pub learning_rate: Option<f64>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// "erm" (default) or "adverm".
    #[arg(long)]
    pub objective: Option<String>,

    /// Penalty weight alpha (adverm).
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Distance threshold tau inside the penalty (adverm).
    #[arg(long)]
    pub tau: Option<f64>,

    /// Sigmoid relaxation temperature (adverm).
    #[arg(long)]
    pub temperature: Option<f64>,

    /// Protected partition, e.g. "attribute:gender=F" (adverm).
    #[arg(long)]
    pub partition: Option<String>,

    /// Output model JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Loss trace CSV (default: `<out>.loss.csv`).
    #[arg(long)]
    pub loss_trace: Option<PathBuf>,

    /// Run manifest path (default: `<out>.run.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// JSON file supplying any of the flags above; explicit flags override.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// File-config twin of the flags; every field optional.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFileConfig {
    data: Option<PathBuf>,
    label_col: Option<String>,
    attr_cols: Option<Vec<String>>,
    standardize: Option<bool>,
    arch: Option<String>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    seed: Option<u64>,
    objective: Option<String>,
    alpha: Option<f64>,
    tau: Option<f64>,
    temperature: Option<f64>,
    partition: Option<String>,
    out: Option<PathBuf>,
    loss_trace: Option<PathBuf>,
}

/// Effective configuration, recorded verbatim in the manifest.
#[derive(Debug, Serialize)]
struct EffectiveTrain {
    data: PathBuf,
    label_col: Option<String>,
    attr_cols: Option<Vec<String>>,
    standardize: bool,
    arch: String,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
    objective: String,
    alpha: f64,
    tau: f64,
    temperature: f64,
    partition: Option<String>,
}

pub fn parse_arch(spec: &str) -> Result<Arch, CliError> {
    if spec == "affine" {
        return Ok(Arch::Affine);
    }
    if let Some(rest) = spec.strip_prefix("mlp:") {
        let hidden: Result<Vec<usize>, _> = rest.split(',').map(|s| s.trim().parse()).collect();
        match hidden {
            Ok(h) if !h.is_empty() && h.iter().all(|&v| v > 0) => return Ok(Arch::Mlp { hidden: h }),
            _ => {}
        }
    }
    Err(CliError::usage(format!(
        "bad --arch {spec:?}; expected \"affine\" or \"mlp:H1,H2\""
    )))
}

fn parse_objective(spec: &str) -> Result<Objective, CliError> {
    match spec {
        "erm" => Ok(Objective::Erm),
        "adverm" => Ok(Objective::AdvErm),
        other => Err(CliError::usage(format!(
            "bad --objective {other:?}; expected erm or adverm"
        ))),
    }
}

fn resolve_protected(
    dataset: &rbaudit_core::data::Dataset,
    spec: &str,
) -> Result<Partition, CliError> {
    let parsed = parse_partition_spec(spec)?;
    match &parsed {
        PartitionSpec::AttributeValue(..) => {}
        _ => {
            return Err(CliError::usage(
                "the protected partition must select a single group: attribute:<name>=<value>"
                    .to_string(),
            ))
        }
    }
    let mut parts = resolve_partitions(dataset, &parsed)?;
    Ok(parts.remove(0))
}

pub fn run(mut args: TrainArgs) -> Result<(), CliError> {
    let file: TrainFileConfig = load_config_file(&args.config)?;

    args.data.data = pick_opt(&args.data.data, &file.data);
    args.data.label_col = pick_opt(&args.data.label_col, &file.label_col);
    args.data.attr_cols = pick_opt(&args.data.attr_cols, &file.attr_cols);
    if !args.data.standardize {
        args.data.standardize = file.standardize.unwrap_or(false);
    }

    let effective = EffectiveTrain {
        data: args
            .data
            .data
            .clone()
            .ok_or_else(|| CliError::usage("--data is required"))?,
        label_col: args.data.label_col.clone(),
        attr_cols: args.data.attr_cols.clone(),
        standardize: args.data.standardize,
        arch: pick(&args.arch, &file.arch, "affine".to_string()),
        epochs: pick(&args.epochs, &file.epochs, 200),
        batch_size: pick(&args.batch_size, &file.batch_size, 32),
        learning_rate: pick(&args.learning_rate, &file.learning_rate, 0.1),
        seed: pick(&args.seed, &file.seed, 0),
        objective: pick(&args.objective, &file.objective, "erm".to_string()),
        alpha: pick(&args.alpha, &file.alpha, 0.0),
        tau: pick(&args.tau, &file.tau, 0.5),
        temperature: pick(&args.temperature, &file.temperature, 0.1),
        partition: pick_opt(&args.partition, &file.partition),
    };
    let out = pick_opt(&args.out, &file.out)
        .ok_or_else(|| CliError::usage("--out is required"))?;
    let loss_trace = pick_opt(&args.loss_trace, &file.loss_trace)
        .unwrap_or_else(|| out.with_extension("loss.csv"));
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| out.with_extension("run.json"));

    let arch = parse_arch(&effective.arch)?;
    let objective = parse_objective(&effective.objective)?;

    let loaded = load_dataset(&args.data)?;
    let dataset_hash = hash_file(&loaded.path)?;

    let protected = match (&objective, &effective.partition) {
        (Objective::AdvErm, Some(spec)) => Some(resolve_protected(&loaded.dataset, spec)?),
        (Objective::AdvErm, None) => {
            return Err(CliError::usage(
                "--objective adverm requires --partition".to_string(),
            ))
        }
        _ => None,
    };

    let train_cfg = TrainConfig {
        epochs: effective.epochs,
        batch_size: effective.batch_size,
        learning_rate: effective.learning_rate,
        seed: effective.seed,
        objective,
        regularizer_weight: effective.alpha,
        threshold: effective.tau,
        relaxation_temperature: effective.temperature,
        protected_partition: protected,
    };
    train_cfg.validate()?;

    let mut builder = ManifestBuilder::new(
        "train",
        serde_json::to_value(&effective)?,
        Some(effective.seed),
    );
    builder.input("dataset", &loaded.path)?;
    let id = builder.id();

    let outcome = train(&loaded.dataset, &arch, &train_cfg)?;
    let acc = accuracy(&outcome.model, &loaded.dataset)?;

    let mut model_file = ModelFile::new(outcome.model);
    model_file.train_config = Some(serde_json::to_value(&train_cfg)?);
    model_file.dataset_hash = Some(dataset_hash);
    model_file.manifest_id = Some(id.clone());
    model_file.save(&out)?;
    builder.output(&out);

    let mut trace = Vec::new();
    writeln!(trace, "# manifest: {id}")?;
    writeln!(trace, "epoch,loss")?;
    for (epoch, loss) in outcome.loss_trace.iter().enumerate() {
        writeln!(trace, "{epoch},{loss}")?;
    }
    std::fs::write(&loss_trace, trace)?;
    builder.output(&loss_trace);

    builder.write(&manifest_path)?;
    println!(
        "trained {} on {} examples: training accuracy {acc:.4}; model -> {}",
        effective.arch,
        loaded.dataset.len(),
        out.display()
    );
    Ok(())
}

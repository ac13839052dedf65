use super::{load_config_file, load_dataset, pick, pick_opt, CliError, DataArgs};
use crate::manifest::ManifestBuilder;
use rbaudit_core::attacks::{attack_distances, AttackConfig, AttackMethod, CwConfig};
use rbaudit_core::geometry::exact_distance_table;
use rbaudit_core::models::{Classifier, ModelFile};
use rbaudit_core::smoothing::{default_sigma, smoothing_distances, SmoothingConfig};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Exact,
    Deepfool,
    Cw,
    Smoothing,
}

#[derive(Debug, clap::Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Trained model JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub method: Option<Method>,

    /// Output distances CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Certificates CSV for the smoothing method
    /// (default: `<out>.certs.csv`).
    #[arg(long)]
    pub certificates: Option<PathBuf>,

    // DeepFool knobs.
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub overshoot: Option<f64>,

    // Carlini-Wagner knobs.
    #[arg(long)]
    pub cw_initial_c: Option<f64>,
    #[arg(long)]
    pub cw_binary_search_steps: Option<usize>,
    #[arg(long)]
    pub cw_inner_iterations: Option<usize>,
    #[arg(long)]
    pub cw_learning_rate: Option<f64>,
    #[arg(long)]
    pub cw_confidence: Option<f64>,

    // Smoothing knobs.
    /// Noise scale; defaults to a quarter of the median pairwise feature
    /// distance (reported in the manifest).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,

    /// Run manifest path (default: `<out>.run.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// JSON file supplying any of the flags above; explicit flags override.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EstimateFileConfig {
    data: Option<PathBuf>,
    label_col: Option<String>,
    attr_cols: Option<Vec<String>>,
    standardize: Option<bool>,
    model: Option<PathBuf>,
    method: Option<String>,
    out: Option<PathBuf>,
    certificates: Option<PathBuf>,
    max_iterations: Option<usize>,
    overshoot: Option<f64>,
    cw_initial_c: Option<f64>,
    cw_binary_search_steps: Option<usize>,
    cw_inner_iterations: Option<usize>,
    cw_learning_rate: Option<f64>,
    cw_confidence: Option<f64>,
    sigma: Option<f64>,
    n0: Option<usize>,
    n: Option<usize>,
    alpha: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct EffectiveEstimate {
    data: PathBuf,
    model: PathBuf,
    method: String,
    standardize: bool,
    max_iterations: usize,
    overshoot: f64,
    cw_initial_c: f64,
    cw_binary_search_steps: usize,
    cw_inner_iterations: usize,
    cw_learning_rate: f64,
    cw_confidence: f64,
    sigma: Option<f64>,
    n0: usize,
    n: usize,
    alpha: f64,
    seed: u64,
}

fn parse_method(s: &str) -> Result<Method, CliError> {
    match s {
        "exact" => Ok(Method::Exact),
        "deepfool" => Ok(Method::Deepfool),
        "cw" => Ok(Method::Cw),
        "smoothing" => Ok(Method::Smoothing),
        other => Err(CliError::usage(format!("bad method {other:?}"))),
    }
}

pub fn run(mut args: EstimateArgs) -> Result<(), CliError> {
    let file: EstimateFileConfig = load_config_file(&args.config)?;

    args.data.data = pick_opt(&args.data.data, &file.data);
    args.data.label_col = pick_opt(&args.data.label_col, &file.label_col);
    args.data.attr_cols = pick_opt(&args.data.attr_cols, &file.attr_cols);
    if !args.data.standardize {
        args.data.standardize = file.standardize.unwrap_or(false);
    }

    let method = match args.method {
        Some(m) => m,
        None => match &file.method {
            Some(s) => parse_method(s)?,
            None => return Err(CliError::usage("--method is required")),
        },
    };
    let model_path = pick_opt(&args.model, &file.model)
        .ok_or_else(|| CliError::usage("--model is required"))?;
    let out = pick_opt(&args.out, &file.out)
        .ok_or_else(|| CliError::usage("--out is required"))?;

    let loaded = load_dataset(&args.data)?;
    let model_file = ModelFile::load(&model_path)?;
    let model = model_file.model;

    if model.input_dim() != loaded.dataset.dim() {
        return Err(CliError::usage(format!(
            "model expects {} features, dataset has {}",
            model.input_dim(),
            loaded.dataset.dim()
        )));
    }

    let attack_cfg = AttackConfig {
        max_iterations: pick(&args.max_iterations, &file.max_iterations, 50),
        overshoot: pick(&args.overshoot, &file.overshoot, 0.02),
        cw: CwConfig {
            initial_c: pick(&args.cw_initial_c, &file.cw_initial_c, 1e-2),
            binary_search_steps: pick(
                &args.cw_binary_search_steps,
                &file.cw_binary_search_steps,
                9,
            ),
            inner_iterations: pick(&args.cw_inner_iterations, &file.cw_inner_iterations, 1000),
            learning_rate: pick(&args.cw_learning_rate, &file.cw_learning_rate, 1e-2),
            confidence: pick(&args.cw_confidence, &file.cw_confidence, 0.0),
        },
        box_bounds: None,
    };
    let sigma_flag = pick_opt(&args.sigma, &file.sigma);
    let smoothing_cfg = SmoothingConfig {
        sigma_noise: sigma_flag.unwrap_or_else(|| default_sigma(&loaded.dataset)),
        n0: pick(&args.n0, &file.n0, 100),
        n: pick(&args.n, &file.n, 1000),
        alpha: pick(&args.alpha, &file.alpha, 0.001),
        seed: pick(&args.seed, &file.seed, 0),
    };

    let effective = EffectiveEstimate {
        data: loaded.path.clone(),
        model: model_path.clone(),
        method: format!("{method:?}").to_lowercase(),
        standardize: loaded.standardized,
        max_iterations: attack_cfg.max_iterations,
        overshoot: attack_cfg.overshoot,
        cw_initial_c: attack_cfg.cw.initial_c,
        cw_binary_search_steps: attack_cfg.cw.binary_search_steps,
        cw_inner_iterations: attack_cfg.cw.inner_iterations,
        cw_learning_rate: attack_cfg.cw.learning_rate,
        cw_confidence: attack_cfg.cw.confidence,
        // The resolved value, so the manifest pins the heuristic outcome.
        sigma: Some(smoothing_cfg.sigma_noise),
        n0: smoothing_cfg.n0,
        n: smoothing_cfg.n,
        alpha: smoothing_cfg.alpha,
        seed: smoothing_cfg.seed,
    };
    let mut builder = ManifestBuilder::new(
        "estimate",
        serde_json::to_value(&effective)?,
        Some(smoothing_cfg.seed),
    );
    builder.input("dataset", &loaded.path)?;
    builder.input("model", &model_path)?;
    let id = builder.id();

    let table = match method {
        Method::Exact => {
            let affine = model.as_affine().ok_or_else(|| {
                CliError::usage(
                    "--method exact requires an affine model; closed-form distances are \
                     undefined for nonlinear classifiers (use deepfool, cw, or smoothing)"
                        .to_string(),
                )
            })?;
            exact_distance_table(affine, &loaded.dataset)?
        }
        Method::Deepfool | Method::Cw => {
            let attack_method = if method == Method::Deepfool {
                AttackMethod::DeepFool
            } else {
                AttackMethod::Cw
            };
            let batch = attack_distances(&model, &loaded.dataset, attack_method, &attack_cfg)?;
            for (idx, msg) in &batch.errors {
                builder.warn(format!("example {idx}: {msg}"));
            }
            batch.table
        }
        Method::Smoothing => {
            let batch = smoothing_distances(&model, &loaded.dataset, &smoothing_cfg)?;
            for (idx, msg) in &batch.errors {
                builder.warn(format!("example {idx}: {msg}"));
            }
            let certs = pick_opt(&args.certificates, &file.certificates)
                .unwrap_or_else(|| out.with_extension("certs.csv"));
            batch.write_certificates_csv(&certs, Some(&id))?;
            builder.output(&certs);
            batch.to_distance_table()
        }
    };

    table.write_csv(&out, Some(&id))?;
    builder.output(&out);
    let failure_rate = table.failure_rate();
    if failure_rate > 0.0 {
        builder.warn(format!(
            "{:.1}% of estimates failed and carry the inf sentinel",
            100.0 * failure_rate
        ));
    }
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| out.with_extension("run.json"));
    builder.write(&manifest_path)?;
    println!(
        "estimated {} distances ({}) -> {}",
        table.len(),
        table.method(),
        out.display()
    );
    Ok(())
}

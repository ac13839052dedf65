use super::{load_config_file, load_dataset, pick_opt, CliError, DataArgs};
use crate::manifest::ManifestBuilder;
use rbaudit_core::data::{parse_partition_spec, resolve_partitions, Partition};
use rbaudit_core::metrics::{
    curve, no_bias_check, sigma, sign_agreement, BiasScore, BoundKind, DistanceTable,
    RobustnessCurve,
};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, clap::Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Partition selector: `class`, `attribute:<name>`, or
    /// `attribute:<name>=<value>`.
    #[arg(long)]
    pub by: Option<String>,

    /// Distance tables to audit (repeat for cross-estimator agreement).
    #[arg(long = "table")]
    pub tables: Vec<PathBuf>,

    /// Budgets at which RB is reported (default: each table's median
    /// finite distance).
    #[arg(long = "rb-tau")]
    pub rb_taus: Vec<f64>,

    /// When set, also check sup-RB against this tolerance per partition.
    #[arg(long)]
    pub no_bias_tolerance: Option<f64>,

    /// Output curves CSV.
    #[arg(long)]
    pub out_curves: Option<PathBuf>,

    /// Output scores JSON.
    #[arg(long)]
    pub out_scores: Option<PathBuf>,

    /// Run manifest path (default: `<out-scores>.run.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// JSON file supplying any of the flags above; explicit flags override.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AuditFileConfig {
    data: Option<PathBuf>,
    label_col: Option<String>,
    attr_cols: Option<Vec<String>>,
    standardize: Option<bool>,
    by: Option<String>,
    tables: Option<Vec<PathBuf>>,
    rb_taus: Option<Vec<f64>>,
    no_bias_tolerance: Option<f64>,
    out_curves: Option<PathBuf>,
    out_scores: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct EffectiveAudit {
    data: PathBuf,
    by: String,
    tables: Vec<PathBuf>,
    rb_taus: Vec<f64>,
    no_bias_tolerance: Option<f64>,
    standardize: bool,
}

#[derive(Serialize)]
struct ScoreEntry {
    method: String,
    partition: String,
    sigma: f64,
    auc_in: f64,
    auc_out: f64,
    rb_at: Vec<RbAtEntry>,
}

#[derive(Serialize)]
struct RbAtEntry {
    tau: f64,
    rb: f64,
}

#[derive(Serialize)]
struct AgreementEntry {
    method_a: String,
    method_b: String,
    count_agree: usize,
    total: usize,
    mean_diff: f64,
    var_diff: f64,
}

#[derive(Serialize)]
struct NoBiasEntry {
    method: String,
    partition: String,
    within_tolerance: bool,
}

#[derive(Serialize)]
struct FailureEntry {
    method: String,
    rate: f64,
}

#[derive(Serialize)]
struct ScoresFile {
    manifest_id: String,
    partition_spec: String,
    methods: Vec<String>,
    scores: Vec<ScoreEntry>,
    agreement: Vec<AgreementEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    no_bias: Option<Vec<NoBiasEntry>>,
    failure_rates: Vec<FailureEntry>,
}

fn bound_for_method(method: &str) -> Option<BoundKind> {
    match method {
        "exact" => Some(BoundKind::Exact),
        "deepfool" | "cw" => Some(BoundKind::Upper),
        "smoothing" => Some(BoundKind::Lower),
        _ => None,
    }
}

fn median_finite(table: &DistanceTable) -> f64 {
    let mut finite: Vec<f64> = table
        .rows()
        .iter()
        .map(|r| r.distance)
        .filter(|d| d.is_finite())
        .collect();
    if finite.is_empty() {
        return 0.0;
    }
    finite.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    finite[finite.len() / 2]
}

pub fn run(mut args: AuditArgs) -> Result<(), CliError> {
    let file: AuditFileConfig = load_config_file(&args.config)?;

    args.data.data = pick_opt(&args.data.data, &file.data);
    args.data.label_col = pick_opt(&args.data.label_col, &file.label_col);
    args.data.attr_cols = pick_opt(&args.data.attr_cols, &file.attr_cols);
    if !args.data.standardize {
        args.data.standardize = file.standardize.unwrap_or(false);
    }
    let by = pick_opt(&args.by, &file.by).ok_or_else(|| CliError::usage("--by is required"))?;
    let table_paths = if args.tables.is_empty() {
        file.tables.unwrap_or_default()
    } else {
        args.tables.clone()
    };
    if table_paths.is_empty() {
        return Err(CliError::usage("at least one --table is required"));
    }
    let rb_taus = if args.rb_taus.is_empty() {
        file.rb_taus.unwrap_or_default()
    } else {
        args.rb_taus.clone()
    };
    let no_bias_tolerance = args.no_bias_tolerance.or(file.no_bias_tolerance);
    let out_curves = pick_opt(&args.out_curves, &file.out_curves)
        .ok_or_else(|| CliError::usage("--out-curves is required"))?;
    let out_scores = pick_opt(&args.out_scores, &file.out_scores)
        .ok_or_else(|| CliError::usage("--out-scores is required"))?;

    let loaded = load_dataset(&args.data)?;
    let spec = parse_partition_spec(&by)?;
    let partitions: Vec<Partition> = resolve_partitions(&loaded.dataset, &spec)?;

    let effective = EffectiveAudit {
        data: loaded.path.clone(),
        by: by.clone(),
        tables: table_paths.clone(),
        rb_taus: rb_taus.clone(),
        no_bias_tolerance,
        standardize: loaded.standardized,
    };
    let mut builder = ManifestBuilder::new("audit", serde_json::to_value(&effective)?, None);
    builder.input("dataset", &loaded.path)?;

    let mut tables = Vec::new();
    for path in &table_paths {
        // Peek at the method column to classify the bound direction.
        let peek = DistanceTable::read_csv(path, BoundKind::Upper)?;
        let bound = match bound_for_method(peek.method()) {
            Some(b) => b,
            None => {
                builder.warn(format!(
                    "unknown method {:?} in {}; treating as an upper bound",
                    peek.method(),
                    path.display()
                ));
                BoundKind::Upper
            }
        };
        let table = DistanceTable::new(peek.method(), bound, peek.rows().to_vec());
        if table.len() != loaded.dataset.len() {
            return Err(CliError::usage(format!(
                "table {} has {} rows but the dataset has {} examples",
                path.display(),
                table.len(),
                loaded.dataset.len()
            )));
        }
        builder.input("table", path)?;
        tables.push(table);
    }
    let id = builder.id();

    let mut curves: Vec<(String, RobustnessCurve)> = Vec::new();
    let mut scores: Vec<ScoreEntry> = Vec::new();
    let mut per_method_scores: Vec<(String, Vec<BiasScore>)> = Vec::new();
    let mut no_bias_entries: Vec<NoBiasEntry> = Vec::new();
    let mut failure_rates = Vec::new();

    for table in &tables {
        let taus = if rb_taus.is_empty() {
            vec![median_finite(table)]
        } else {
            rb_taus.clone()
        };
        let mut method_scores = Vec::new();
        for p in &partitions {
            curves.push((table.method().to_string(), curve(table, p)?));
            let score = sigma(table, p, &taus)?;
            scores.push(ScoreEntry {
                method: table.method().to_string(),
                partition: p.name.clone(),
                sigma: score.sigma,
                auc_in: score.auc_in,
                auc_out: score.auc_out,
                rb_at: score
                    .rb_at
                    .iter()
                    .map(|&(tau, rb)| RbAtEntry { tau, rb })
                    .collect(),
            });
            method_scores.push(score);
        }
        if let Some(tol) = no_bias_tolerance {
            for (partition, ok) in no_bias_check(table, &partitions, tol)? {
                no_bias_entries.push(NoBiasEntry {
                    method: table.method().to_string(),
                    partition,
                    within_tolerance: ok,
                });
            }
        }
        failure_rates.push(FailureEntry {
            method: table.method().to_string(),
            rate: table.failure_rate(),
        });
        per_method_scores.push((table.method().to_string(), method_scores));
    }

    let mut agreement = Vec::new();
    for i in 0..per_method_scores.len() {
        for j in (i + 1)..per_method_scores.len() {
            let stats = sign_agreement(&per_method_scores[i].1, &per_method_scores[j].1)?;
            agreement.push(AgreementEntry {
                method_a: per_method_scores[i].0.clone(),
                method_b: per_method_scores[j].0.clone(),
                count_agree: stats.count_agree,
                total: stats.total,
                mean_diff: stats.mean_diff,
                var_diff: stats.var_diff,
            });
        }
    }

    rbaudit_core::metrics::write_curves_csv(&curves, &out_curves, Some(&id))?;
    builder.output(&out_curves);

    let scores_file = ScoresFile {
        manifest_id: id.clone(),
        partition_spec: by,
        methods: tables.iter().map(|t| t.method().to_string()).collect(),
        scores,
        agreement,
        no_bias: if no_bias_entries.is_empty() {
            None
        } else {
            Some(no_bias_entries)
        },
        failure_rates,
    };
    std::fs::write(&out_scores, serde_json::to_string_pretty(&scores_file)?)?;
    builder.output(&out_scores);

    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| out_scores.with_extension("run.json"));
    builder.write(&manifest_path)?;
    println!(
        "audited {} partitions x {} tables -> {}",
        partitions.len(),
        tables.len(),
        out_scores.display()
    );
    Ok(())
}

use super::CliError;
use crate::manifest::ManifestBuilder;
use clap::Subcommand;
use rbaudit_core::data::synth::{
    make_three_class_gaussians, make_two_subgroup_toy, toy_boundary_a, toy_boundary_b,
};
use rbaudit_core::data::{write_csv, write_manifest, Dataset};
use rbaudit_core::models::{AffineClassifier, Model, ModelFile};
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    #[command(subcommand)]
    pub kind: SynthKind,
}

#[derive(Debug, Subcommand)]
pub enum SynthKind {
    /// Two classes x two subgroups with hand-placed boundary distances;
    /// also writes the two reference separator models.
    TwoSubgroup {
        /// Points per class-subgroup cell (>= 10).
        #[arg(long, default_value_t = 10)]
        n_per_subgroup: usize,
        /// Budget scale tau of the construction.
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "toy")]
        prefix: String,
    },
    /// Three isotropic Gaussian blobs, one per class.
    Gaussians {
        #[arg(long, default_value_t = 50)]
        n_per_class: usize,
        /// Three planar means as "x,y;x,y;x,y".
        #[arg(long, default_value = "0,0;4,0;2,3.4")]
        means: String,
        #[arg(long, default_value_t = 0.6)]
        stddev: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "blobs")]
        prefix: String,
    },
}

fn parse_means(spec: &str) -> Result<[(f64, f64); 3], CliError> {
    let points: Vec<(f64, f64)> = spec
        .split(';')
        .map(|pair| {
            let (x, y) = pair
                .split_once(',')
                .ok_or_else(|| CliError::usage(format!("bad mean {pair:?}; expected x,y")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::usage(format!("bad coordinate {s:?}")))
            };
            Ok((parse(x)?, parse(y)?))
        })
        .collect::<Result<_, CliError>>()?;
    <[(f64, f64); 3]>::try_from(points)
        .map_err(|v: Vec<_>| CliError::usage(format!("expected 3 means, got {}", v.len())))
}

fn write_dataset_outputs(
    dataset: &Dataset,
    out_dir: &Path,
    prefix: &str,
    seed: u64,
    builder: &mut ManifestBuilder,
) -> Result<(PathBuf, PathBuf), CliError> {
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{prefix}.csv"));
    let manifest_path = out_dir.join(format!("{prefix}.manifest.json"));
    write_csv(dataset, &csv_path, Some(&builder.id()))?;
    write_manifest(dataset, &manifest_path, false, Some(seed))?;
    builder.output(&csv_path);
    builder.output(&manifest_path);
    Ok((csv_path, manifest_path))
}

fn write_boundary_model(
    rows: Vec<Vec<f64>>,
    biases: Vec<f64>,
    path: &Path,
    manifest_id: &str,
) -> Result<(), CliError> {
    let model = Model::Affine(AffineClassifier::from_rows(rows, biases)?);
    let mut file = ModelFile::new(model);
    file.manifest_id = Some(manifest_id.to_string());
    file.save(path)?;
    Ok(())
}

pub fn run(args: SynthArgs) -> Result<(), CliError> {
    match args.kind {
        SynthKind::TwoSubgroup {
            n_per_subgroup,
            separation,
            seed,
            out_dir,
            prefix,
        } => {
            let config = json!({
                "kind": "two_subgroup",
                "n_per_subgroup": n_per_subgroup,
                "separation": separation,
                "seed": seed,
            });
            let mut builder = ManifestBuilder::new("synth", config, Some(seed));
            let dataset = make_two_subgroup_toy(n_per_subgroup, separation, seed)?;
            write_dataset_outputs(&dataset, &out_dir, &prefix, seed, &mut builder)?;
            let id = builder.id();
            for (name, (rows, biases)) in [
                ("boundary_a", toy_boundary_a()),
                ("boundary_b", toy_boundary_b()),
            ] {
                let path = out_dir.join(format!("{prefix}_{name}.model.json"));
                write_boundary_model(rows, biases, &path, &id)?;
                builder.output(&path);
            }
            let run_path = out_dir.join(format!("{prefix}.run.json"));
            builder.write(&run_path)?;
            println!("wrote {} ({} examples)", out_dir.join(format!("{prefix}.csv")).display(), dataset.len());
            Ok(())
        }
        SynthKind::Gaussians {
            n_per_class,
            means,
            stddev,
            seed,
            out_dir,
            prefix,
        } => {
            let parsed = parse_means(&means)?;
            let config = json!({
                "kind": "gaussians",
                "n_per_class": n_per_class,
                "means": means,
                "stddev": stddev,
                "seed": seed,
            });
            let mut builder = ManifestBuilder::new("synth", config, Some(seed));
            let dataset = make_three_class_gaussians(n_per_class, parsed, stddev, seed)?;
            write_dataset_outputs(&dataset, &out_dir, &prefix, seed, &mut builder)?;
            let run_path = out_dir.join(format!("{prefix}.run.json"));
            builder.write(&run_path)?;
            println!("wrote {} ({} examples)", out_dir.join(format!("{prefix}.csv")).display(), dataset.len());
            Ok(())
        }
    }
}

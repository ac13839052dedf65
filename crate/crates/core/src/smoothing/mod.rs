//! Certified lower bounds on boundary distance via randomized smoothing.
//!
//! The smoothed classifier takes a majority vote over Gaussian-perturbed
//! copies of the input. Certification is two-phase Monte Carlo: a small
//! selection round picks the candidate class, a fresh estimation round
//! counts its hits, and the exact Clopper-Pearson lower bound on the hit
//! probability converts into an L2 radius `sigma * quantile(p_lower)`, or
//! an abstention when the bound cannot clear 1/2.

mod stats;

pub use stats::{clopper_pearson_lower, erf, erfc, inv_norm_cdf, std_normal_cdf};

use crate::data::Dataset;
use crate::metrics::{BoundKind, DistanceRecord, DistanceTable};
use crate::models::{argmax, Classifier};
use crate::parallel::map_indexed;
use crate::sampling::{stream_rng, NormalSource};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub sigma_noise: f64,
    /// Selection samples (phase one).
    pub n0: usize,
    /// Estimation samples (phase two).
    pub n: usize,
    /// One-sided failure probability of each certificate.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            sigma_noise: 0.25,
            n0: 100,
            n: 1000,
            alpha: 0.001,
            seed: 0,
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_noise.is_nan() || self.sigma_noise <= 0.0 {
            return Err(Error::InvalidConfig("sigma_noise must be positive".to_string()));
        }
        if self.n0 == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("n0 and n must be >= 1".to_string()));
        }
        if self.alpha.is_nan() || self.alpha <= 0.0 || self.alpha >= 1.0 {
            return Err(Error::InvalidConfig("alpha must be in (0,1)".to_string()));
        }
        Ok(())
    }
}

/// Certified result for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Top class of the smoothed classifier (phase-one majority).
    pub predicted_class: usize,
    /// Certified L2 radius; 0 when abstaining.
    pub radius: f64,
    pub abstained: bool,
    /// Clopper-Pearson lower bound on the top-class probability.
    pub p_lower: f64,
}

fn count_noisy_predictions<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    sigma: f64,
    samples: usize,
    normals: &mut NormalSource<rand_chacha::ChaCha12Rng>,
    counts: &mut [usize],
) -> Result<()> {
    let d = x.len();
    let k = counts.len();
    const CHUNK: usize = 512;
    let mut buffer = vec![0.0; CHUNK.min(samples) * d];
    let mut remaining = samples;
    while remaining > 0 {
        let m = CHUNK.min(remaining);
        for row in 0..m {
            for j in 0..d {
                buffer[row * d + j] = x[j] + sigma * normals.sample();
            }
        }
        let logits = model.batch_logits(&buffer[..m * d], m)?;
        for row in 0..m {
            counts[argmax(&logits[row * k..(row + 1) * k])] += 1;
        }
        remaining -= m;
    }
    Ok(())
}

/// Certify one input using the random stream `(config.seed, stream)`.
/// Batch runs derive `stream` from the example index so per-example
/// certificates are independent of scheduling.
pub fn certify_stream<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    config: &SmoothingConfig,
    stream: u64,
) -> Result<Certificate> {
    config.validate()?;
    if x.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: x.len(),
        });
    }
    let k = model.num_classes();
    let mut normals = NormalSource::new(stream_rng(config.seed, stream));

    let mut counts0 = vec![0usize; k];
    count_noisy_predictions(model, x, config.sigma_noise, config.n0, &mut normals, &mut counts0)?;
    let candidate = {
        let mut best = 0;
        for (j, &c) in counts0.iter().enumerate().skip(1) {
            if c > counts0[best] {
                best = j;
            }
        }
        best
    };

    let mut counts = vec![0usize; k];
    count_noisy_predictions(model, x, config.sigma_noise, config.n, &mut normals, &mut counts)?;
    let hits = counts[candidate];
    let p_lower = clopper_pearson_lower(hits, config.n, config.alpha)?;

    if p_lower > 0.5 {
        Ok(Certificate {
            predicted_class: candidate,
            radius: config.sigma_noise * inv_norm_cdf(p_lower)?,
            abstained: false,
            p_lower,
        })
    } else {
        Ok(Certificate {
            predicted_class: candidate,
            radius: 0.0,
            abstained: true,
            p_lower,
        })
    }
}

/// Certify one input on the default stream.
pub fn certify<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    config: &SmoothingConfig,
) -> Result<Certificate> {
    certify_stream(model, x, config, 0)
}

/// Per-example certificate as written to the certificates CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRecord {
    pub example_index: usize,
    pub smoothed_prediction: usize,
    pub true_label: usize,
    pub radius: f64,
    pub p_lower: f64,
    pub abstained: bool,
}

/// Certificates for a whole dataset plus the config that produced them.
#[derive(Debug, Clone)]
pub struct SmoothingBatch {
    pub records: Vec<CertificateRecord>,
    pub config: SmoothingConfig,
    pub errors: Vec<(usize, String)>,
}

impl SmoothingBatch {
    /// Lower-bound distance table: the radius stands in for the distance
    /// (0 for abstentions), and correctness compares the smoothed
    /// prediction with the true label.
    pub fn to_distance_table(&self) -> DistanceTable {
        let rows = self
            .records
            .iter()
            .map(|r| DistanceRecord {
                example_index: r.example_index,
                true_label: r.true_label,
                predicted_label: r.smoothed_prediction,
                distance: r.radius,
                success: !r.abstained,
                iterations: self.config.n,
            })
            .collect();
        DistanceTable::new("smoothing", BoundKind::Lower, rows)
    }

    pub fn write_certificates_csv(
        &self,
        path: impl AsRef<Path>,
        manifest_id: Option<&str>,
    ) -> Result<()> {
        let mut out = Vec::new();
        if let Some(id) = manifest_id {
            writeln!(out, "# manifest: {id}")?;
        }
        writeln!(
            out,
            "example_index,smoothed_prediction,true_label,radius,p_lower,abstained,n0,n,alpha,sigma_noise"
        )?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.example_index,
                r.smoothed_prediction,
                r.true_label,
                r.radius,
                r.p_lower,
                r.abstained,
                self.config.n0,
                self.config.n,
                self.config.alpha,
                self.config.sigma_noise
            )?;
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Certify every example. Per-example random streams derive from
/// `(config.seed, example index)`, so results are identical however the
/// work is scheduled.
pub fn smoothing_distances<C: Classifier>(
    model: &C,
    dataset: &Dataset,
    config: &SmoothingConfig,
) -> Result<SmoothingBatch> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    config.validate()?;
    let outcomes: Vec<(CertificateRecord, Option<String>)> = map_indexed(dataset.len(), |i| {
        match certify_stream(model, dataset.feature_row(i), config, i as u64) {
            Ok(cert) => (
                CertificateRecord {
                    example_index: i,
                    smoothed_prediction: cert.predicted_class,
                    true_label: dataset.label(i),
                    radius: cert.radius,
                    p_lower: cert.p_lower,
                    abstained: cert.abstained,
                },
                None,
            ),
            Err(e) => (
                CertificateRecord {
                    example_index: i,
                    smoothed_prediction: 0,
                    true_label: dataset.label(i),
                    radius: 0.0,
                    p_lower: 0.0,
                    abstained: true,
                },
                Some(e.to_string()),
            ),
        }
    });
    let mut records = Vec::with_capacity(outcomes.len());
    let mut errors = Vec::new();
    for (i, (rec, err)) in outcomes.into_iter().enumerate() {
        records.push(rec);
        if let Some(msg) = err {
            errors.push((i, msg));
        }
    }
    Ok(SmoothingBatch {
        records,
        config: config.clone(),
        errors,
    })
}

/// Heuristic noise scale: a quarter of the median pairwise feature distance
/// (over an evenly strided subsample when the dataset is large). Reported in
/// run outputs so certified radii stay interpretable in input units.
pub fn default_sigma(dataset: &Dataset) -> f64 {
    const MAX_POINTS: usize = 512;
    let n = dataset.len();
    let stride = n.div_ceil(MAX_POINTS);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let mut dists = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let d: f64 = dataset
                .feature_row(i)
                .iter()
                .zip(dataset.feature_row(j))
                .map(|(u, v)| (u - v) * (u - v))
                .sum();
            dists.push(d.sqrt());
        }
    }
    if dists.is_empty() {
        return 0.25;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    0.25 * dists[dists.len() / 2]
}

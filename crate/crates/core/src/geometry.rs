//! Exact distance to the nearest decision boundary for affine models, plus a
//! bisection probe used as an independent oracle.

use crate::data::Dataset;
use crate::metrics::{BoundKind, DistanceRecord, DistanceTable};
use crate::models::{argmax, AffineClassifier, Classifier};
use crate::parallel::map_indexed;
use crate::{Error, Result};

/// Closed-form distance from a point to the nearest class boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactDistance {
    /// L2 distance in input units, >= 0.
    pub value: f64,
    /// The rival class whose boundary is nearest (ties to lowest index).
    pub nearest_rival_class: usize,
}

/// Minimum over rival classes of the point-to-hyperplane distance
/// `|(w_y - w_j) . x + (b_y - b_j)| / ||w_y - w_j||`.
///
/// Rivals whose score function is globally parallel to the predicted
/// class's (equal weights, different bias) never cross it and are skipped;
/// a rival with identical weights and bias makes the model degenerate, as
/// does a model with no crossing rival at all.
pub fn exact_distance(model: &AffineClassifier, x: &[f64]) -> Result<ExactDistance> {
    let yhat = model.predict(x)?;
    let wy = model.weight_row(yhat);
    let by = model.bias(yhat);
    let mut best: Option<ExactDistance> = None;
    for j in 0..model.num_classes() {
        if j == yhat {
            continue;
        }
        let wj = model.weight_row(j);
        let dw_norm_sq: f64 = wy.iter().zip(wj).map(|(a, b)| (a - b) * (a - b)).sum();
        if dw_norm_sq == 0.0 {
            if by == model.bias(j) {
                return Err(Error::DegenerateModel);
            }
            continue;
        }
        let margin: f64 = wy
            .iter()
            .zip(wj)
            .zip(x)
            .map(|((a, b), xv)| (a - b) * xv)
            .sum::<f64>()
            + (by - model.bias(j));
        let dist = margin.abs() / dw_norm_sq.sqrt();
        if best.is_none_or(|b| dist < b.value) {
            best = Some(ExactDistance {
                value: dist,
                nearest_rival_class: j,
            });
        }
    }
    best.ok_or(Error::DegenerateModel)
}

/// Smallest radius along a ray at which the prediction changes.
///
/// Scans `max_radius` at fixed resolution to bracket the first flip, then
/// bisects the bracket to within `tol` (depth capped at 200 so termination
/// never depends on `tol`). Returns `None` when no flip is observed. For an
/// affine model the predicted-class region is convex, so the ray leaves it
/// at most once and the result is the true crossing radius.
pub fn boundary_probe<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    direction: &[f64],
    max_radius: f64,
    tol: f64,
) -> Result<Option<f64>> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidConfig("tol must be positive".to_string()));
    }
    if max_radius.is_nan() || max_radius <= 0.0 {
        return Err(Error::InvalidConfig("max_radius must be positive".to_string()));
    }
    let norm: f64 = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "direction must be a unit vector (norm {norm})"
        )));
    }
    let base = model.predict(x)?;
    let probe_at = |t: f64| -> Result<usize> {
        let point: Vec<f64> = x.iter().zip(direction).map(|(xv, dv)| xv + t * dv).collect();
        model.predict(&point)
    };

    const SCAN_STEPS: usize = 64;
    let mut lo = 0.0;
    let mut hi = None;
    for s in 1..=SCAN_STEPS {
        let t = max_radius * s as f64 / SCAN_STEPS as f64;
        if probe_at(t)? != base {
            hi = Some(t);
            break;
        }
        lo = t;
    }
    let Some(mut hi) = hi else {
        return Ok(None);
    };
    let mut iterations = 0;
    while hi - lo > tol && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if probe_at(mid)? != base {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(Some(hi))
}

/// Exact distances for a whole dataset, one record per example.
pub fn exact_distance_table(model: &AffineClassifier, dataset: &Dataset) -> Result<DistanceTable> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let logits = model.batch_logits(dataset.features(), dataset.len())?;
    let k = model.num_classes();
    let rows: Vec<Result<DistanceRecord>> = map_indexed(dataset.len(), |i| {
        let d = exact_distance(model, dataset.feature_row(i))?;
        Ok(DistanceRecord {
            example_index: i,
            true_label: dataset.label(i),
            predicted_label: argmax(&logits[i * k..(i + 1) * k]),
            distance: d.value,
            success: true,
            iterations: 0,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DistanceTable::new("exact", BoundKind::Exact, rows))
}

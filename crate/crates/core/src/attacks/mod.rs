//! Upper-bound distance estimators via adversarial example construction.
//!
//! A successful attack produces a point on the other side of the boundary,
//! so its perturbation norm can only overestimate the true distance. DeepFool
//! steps onto the nearest linearized boundary; the Carlini-Wagner L2 attack
//! minimizes the perturbation norm against a hinge on the logit margin with
//! a binary search over the trade-off constant.

mod cw;
mod deepfool;

pub use cw::carlini_wagner_l2;
pub use deepfool::deepfool;

use crate::data::Dataset;
use crate::metrics::{BoundKind, DistanceRecord, DistanceTable};
use crate::models::{argmax, Classifier};
use crate::parallel::map_indexed;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Carlini-Wagner hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CwConfig {
    pub initial_c: f64,
    pub binary_search_steps: usize,
    pub inner_iterations: usize,
    pub learning_rate: f64,
    /// Margin confidence kappa; 0 flips at the boundary.
    pub confidence: f64,
}

impl Default for CwConfig {
    fn default() -> Self {
        Self {
            initial_c: 1e-2,
            binary_search_steps: 9,
            inner_iterations: 1000,
            learning_rate: 1e-2,
            confidence: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    /// DeepFool iteration cap.
    pub max_iterations: usize,
    /// DeepFool overshoot eta applied to the final perturbation.
    pub overshoot: f64,
    pub cw: CwConfig,
    /// Optional per-dimension (lo, hi) box; the C&W optimizer then works in
    /// tanh space so candidates stay inside.
    pub box_bounds: Option<Vec<(f64, f64)>>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            overshoot: 0.02,
            cw: CwConfig::default(),
            box_bounds: None,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".to_string()));
        }
        if self.overshoot < 0.0 {
            return Err(Error::InvalidConfig("overshoot must be >= 0".to_string()));
        }
        if self.cw.binary_search_steps == 0 {
            return Err(Error::InvalidConfig(
                "binary_search_steps must be >= 1".to_string(),
            ));
        }
        if self.cw.inner_iterations == 0 {
            return Err(Error::InvalidConfig("inner_iterations must be >= 1".to_string()));
        }
        if self.cw.learning_rate.is_nan() || self.cw.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be positive".to_string()));
        }
        if self.cw.initial_c.is_nan() || self.cw.initial_c <= 0.0 {
            return Err(Error::InvalidConfig("initial_c must be positive".to_string()));
        }
        if let Some(bounds) = &self.box_bounds {
            if bounds.iter().any(|(lo, hi)| lo.partial_cmp(hi) != Some(std::cmp::Ordering::Less)) {
                return Err(Error::InvalidConfig("box bounds need lo < hi".to_string()));
            }
        }
        Ok(())
    }
}

/// Outcome of one attack.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub adversarial_point: Vec<f64>,
    /// `||x - x_adv||_2`, or +inf when no flip was found.
    pub distance: f64,
    pub success: bool,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMethod {
    DeepFool,
    Cw,
}

impl AttackMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttackMethod::DeepFool => "deepfool",
            AttackMethod::Cw => "cw",
        }
    }
}

/// Batch of per-example estimates plus any per-example failures. Errors do
/// not abort the run: the affected row keeps the +inf sentinel.
#[derive(Debug, Clone)]
pub struct EstimateBatch {
    pub table: DistanceTable,
    pub errors: Vec<(usize, String)>,
}

/// Attack every example and collect an upper-bound distance table. Rows are
/// in example order regardless of how the work is scheduled.
pub fn attack_distances<C: Classifier>(
    model: &C,
    dataset: &Dataset,
    method: AttackMethod,
    config: &AttackConfig,
) -> Result<EstimateBatch> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    config.validate()?;
    let logits = model.batch_logits(dataset.features(), dataset.len())?;
    let k = model.num_classes();
    let outcomes: Vec<(DistanceRecord, Option<String>)> = map_indexed(dataset.len(), |i| {
        let x = dataset.feature_row(i);
        let predicted = argmax(&logits[i * k..(i + 1) * k]);
        let attack = match method {
            AttackMethod::DeepFool => deepfool(model, x, config),
            AttackMethod::Cw => carlini_wagner_l2(model, x, config),
        };
        match attack {
            Ok(res) => (
                DistanceRecord {
                    example_index: i,
                    true_label: dataset.label(i),
                    predicted_label: predicted,
                    distance: if res.success { res.distance } else { f64::INFINITY },
                    success: res.success,
                    iterations: res.iterations_used,
                },
                None,
            ),
            Err(e) => (
                DistanceRecord {
                    example_index: i,
                    true_label: dataset.label(i),
                    predicted_label: predicted,
                    distance: f64::INFINITY,
                    success: false,
                    iterations: 0,
                },
                Some(e.to_string()),
            ),
        }
    });
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut errors = Vec::new();
    for (i, (row, err)) in outcomes.into_iter().enumerate() {
        rows.push(row);
        if let Some(msg) = err {
            errors.push((i, msg));
        }
    }
    Ok(EstimateBatch {
        table: DistanceTable::new(method.as_str(), BoundKind::Upper, rows),
        errors,
    })
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Margin seeds `e_base - e_j` for every rival `j` of `base`.
pub(crate) fn rival_seeds(k: usize, base: usize) -> (Vec<usize>, Vec<Vec<f64>>) {
    let rivals: Vec<usize> = (0..k).filter(|&j| j != base).collect();
    let seeds = rivals
        .iter()
        .map(|&j| {
            let mut s = vec![0.0; k];
            s[base] = 1.0;
            s[j] = -1.0;
            s
        })
        .collect();
    (rivals, seeds)
}

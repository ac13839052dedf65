use super::{l2, AttackConfig, AttackResult};
use crate::models::{argmax, Classifier};
use crate::{Error, Result};

/// Carlini-Wagner L2, untargeted: minimize `||delta||^2 + c * g(x + delta)`
/// with the hinge `g = max(z_y - max_{j != y} z_j, -kappa)`, plain gradient
/// descent inside, and a binary search over `c`. With box bounds the
/// optimizer works on the tanh reparameterization so every candidate stays
/// inside the box. Returns the smallest-norm successful candidate seen
/// anywhere in the schedule.
pub fn carlini_wagner_l2<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    config: &AttackConfig,
) -> Result<AttackResult> {
    cw_with_trace(model, x, config).map(|(res, _)| res)
}

/// As [`carlini_wagner_l2`], also reporting the best norm after each binary
/// search step (+inf until the first success). The sequence is
/// non-increasing: refinement never discards a better candidate.
pub(crate) fn cw_with_trace<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    config: &AttackConfig,
) -> Result<(AttackResult, Vec<f64>)> {
    config.validate()?;
    let d = model.input_dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    if let Some(bounds) = &config.box_bounds {
        if bounds.len() != d {
            return Err(Error::InvalidConfig(format!(
                "box bounds cover {} of {} dimensions",
                bounds.len(),
                d
            )));
        }
    }
    let k = model.num_classes();
    let y0 = model.predict(x)?;
    let kappa = config.cw.confidence;
    let lr = config.cw.learning_rate;

    // Optimization variable: delta directly, or w with
    // x' = lo + (hi - lo) (tanh w + 1) / 2 under box bounds.
    let to_point = |var: &[f64]| -> Vec<f64> {
        match &config.box_bounds {
            None => x.iter().zip(var).map(|(xv, dv)| xv + dv).collect(),
            Some(bounds) => var
                .iter()
                .zip(bounds)
                .map(|(w, (lo, hi))| lo + (hi - lo) * (w.tanh() + 1.0) / 2.0)
                .collect(),
        }
    };
    let var_init = || -> Vec<f64> {
        match &config.box_bounds {
            None => vec![0.0; d],
            Some(bounds) => x
                .iter()
                .zip(bounds)
                .map(|(xv, (lo, hi))| {
                    let u = ((xv - lo) / (hi - lo)).clamp(1e-6, 1.0 - 1e-6);
                    (2.0 * u - 1.0).atanh()
                })
                .collect(),
        }
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut trace = Vec::with_capacity(config.cw.binary_search_steps);
    let mut c = config.cw.initial_c;
    let mut c_lo = 0.0_f64;
    let mut c_hi = f64::INFINITY;
    let mut total_iterations = 0usize;

    let mut seed = vec![0.0; k];
    for _ in 0..config.cw.binary_search_steps {
        let mut var = var_init();
        let mut succeeded = false;

        let consider = |point: &[f64], best: &mut Option<(f64, Vec<f64>)>| -> Result<bool> {
            let flipped = argmax(&model.logits(point)?) != y0;
            if flipped {
                let delta: Vec<f64> = point.iter().zip(x).map(|(p, xv)| p - xv).collect();
                let norm = l2(&delta);
                if best.as_ref().is_none_or(|(b, _)| norm < *b) {
                    *best = Some((norm, point.to_vec()));
                }
            }
            Ok(flipped)
        };

        for _ in 0..config.cw.inner_iterations {
            total_iterations += 1;
            let point = to_point(&var);
            let logits = model.logits(&point)?;
            succeeded |= consider(&point, &mut best)?;

            // Strongest rival of the original class at the current point.
            let mut rival = usize::MAX;
            for j in 0..k {
                if j != y0 && (rival == usize::MAX || logits[j] > logits[rival]) {
                    rival = j;
                }
            }
            let margin = logits[y0] - logits[rival];

            // d objective / d point.
            let mut grad_point: Vec<f64> =
                point.iter().zip(x).map(|(p, xv)| 2.0 * (p - xv)).collect();
            if margin > -kappa {
                seed.iter_mut().for_each(|s| *s = 0.0);
                seed[y0] = 1.0;
                seed[rival] = -1.0;
                let g = model.input_grads(&point, std::slice::from_ref(&seed))?;
                for (gp, gv) in grad_point.iter_mut().zip(&g[0]) {
                    *gp += c * gv;
                }
            }

            match &config.box_bounds {
                None => {
                    for (v, g) in var.iter_mut().zip(&grad_point) {
                        *v -= lr * g;
                    }
                }
                Some(bounds) => {
                    for ((v, g), (lo, hi)) in var.iter_mut().zip(&grad_point).zip(bounds) {
                        let t = v.tanh();
                        let dpoint_dvar = (hi - lo) / 2.0 * (1.0 - t * t);
                        *v -= lr * g * dpoint_dvar;
                    }
                }
            }
        }
        succeeded |= consider(&to_point(&var), &mut best)?;

        trace.push(best.as_ref().map_or(f64::INFINITY, |(n, _)| *n));
        if succeeded {
            c_hi = c;
            c = 0.5 * (c_lo + c_hi);
        } else {
            c_lo = c;
            c = if c_hi.is_finite() {
                0.5 * (c_lo + c_hi)
            } else {
                c * 10.0
            };
        }
    }

    let result = match best {
        Some((norm, point)) => AttackResult {
            adversarial_point: point,
            distance: norm,
            success: true,
            iterations_used: total_iterations,
        },
        None => AttackResult {
            adversarial_point: x.to_vec(),
            distance: f64::INFINITY,
            success: false,
            iterations_used: total_iterations,
        },
    };
    Ok((result, trace))
}

use super::{argmax, AffineClassifier, Classifier, Layer, MlpClassifier, Model};
use crate::data::{Dataset, Partition};
use crate::diffcore::{Graph, NodeId, Tensor};
use crate::sampling::stream_rng;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Training objective: plain cross-entropy, or cross-entropy plus the
/// relaxed robustness-bias penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Erm,
    AdvErm,
}

/// Architecture to train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arch {
    Affine,
    Mlp { hidden: Vec<usize> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub objective: Objective,
    /// Weight of the bias penalty (alpha).
    pub regularizer_weight: f64,
    /// Distance threshold tau inside the penalty.
    pub threshold: f64,
    /// Temperature of the sigmoid that relaxes the indicator, in input
    /// distance units.
    pub relaxation_temperature: f64,
    pub protected_partition: Option<Partition>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.1,
            seed: 0,
            objective: Objective::Erm,
            regularizer_weight: 0.0,
            threshold: 0.5,
            relaxation_temperature: 0.1,
            protected_partition: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".to_string()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be positive".to_string()));
        }
        if self.objective == Objective::AdvErm {
            if self.regularizer_weight.is_nan() || self.regularizer_weight <= 0.0 {
                return Err(Error::InvalidConfig(
                    "adverm requires regularizer_weight > 0".to_string(),
                ));
            }
            if self.protected_partition.is_none() {
                return Err(Error::InvalidConfig(
                    "adverm requires a protected partition".to_string(),
                ));
            }
            if self.relaxation_temperature.is_nan() || self.relaxation_temperature <= 0.0 {
                return Err(Error::InvalidConfig(
                    "relaxation_temperature must be positive".to_string(),
                ));
            }
            if self.threshold < 0.0 {
                return Err(Error::InvalidConfig("threshold must be >= 0".to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean objective value per epoch.
    pub loss_trace: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Layer stack for the training loop; the last layer has no activation.
fn init_layers(dims: &[usize], seed: u64) -> Vec<Layer> {
    let mut rng = stream_rng(seed, 2);
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let scale = 1.0 / (fan_in as f64).sqrt();
        let draw = |rng: &mut rand_chacha::ChaCha12Rng| (rng.random::<f64>() * 2.0 - 1.0) * scale;
        let weights = (0..fan_in * fan_out).map(|_| draw(&mut rng)).collect();
        let biases = (0..fan_out).map(|_| draw(&mut rng)).collect();
        layers.push(Layer {
            fan_in,
            fan_out,
            weights,
            biases,
        });
    }
    layers
}

struct NetGraph {
    graph: Graph,
    x: NodeId,
    targets: NodeId,
    params: Vec<(NodeId, NodeId)>,
    logits: NodeId,
}

fn build_net_graph(layers: &[Layer], m: usize) -> NetGraph {
    let mut g = Graph::new();
    let x = g.leaf(&[m, layers[0].fan_in]);
    let k = layers.last().expect("non-empty").fan_out;
    let targets = g.leaf(&[m, k]);
    let mut params = Vec::with_capacity(layers.len());
    let mut h = x;
    for (li, layer) in layers.iter().enumerate() {
        let w = g.leaf(&[layer.fan_in, layer.fan_out]);
        let b = g.leaf(&[layer.fan_out]);
        let mm = g.matmul(h, w).expect("shapes chain");
        let zb = g.add(mm, b).expect("bias broadcast");
        h = if li + 1 < layers.len() { g.relu(zb) } else { zb };
        params.push((w, b));
    }
    let logits = h;
    g.softmax_cross_entropy(logits, targets).expect("loss shapes");
    NetGraph {
        graph: g,
        x,
        targets,
        params,
        logits,
    }
}

/// Per-example term the regularizer actually used, kept for gradient
/// checking: (example, rival class, frozen gradient norm, in-partition).
#[derive(Debug, Clone)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct RegTerm {
    pub example: usize,
    pub rival: usize,
    pub norm: f64,
    pub in_partition: bool,
}

pub(crate) struct StepEval {
    pub loss: f64,
    /// Gradient per layer: (weight gradient, bias gradient).
    pub grads: Vec<(Vec<f64>, Vec<f64>)>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub reg_terms: Vec<RegTerm>,
}

/// Forward/backward over one mini-batch, returning the objective value and
/// parameter gradients. The bias penalty's gradient treats each example's
/// margin-gradient norm as a constant (no second-order differentiation).
pub(crate) fn batch_step(
    layers: &[Layer],
    xs: &[f64],
    m: usize,
    labels: &[usize],
    in_mask: Option<&[bool]>,
    cfg: &TrainConfig,
) -> Result<StepEval> {
    let d = layers[0].fan_in;
    let k = layers.last().expect("non-empty").fan_out;
    let net = &mut build_net_graph(layers, m);

    let tx = Tensor::matrix(m, d, xs.to_vec())?;
    let mut onehot = vec![0.0; m * k];
    for (i, &y) in labels.iter().enumerate() {
        onehot[i * k + y] = 1.0;
    }
    let tt = Tensor::matrix(m, k, onehot)?;
    let mut storage = Vec::new();
    for layer in layers {
        storage.push(Tensor::from_raw(
            vec![layer.fan_in, layer.fan_out],
            layer.weights.clone(),
        ));
        storage.push(Tensor::from_raw(vec![layer.fan_out], layer.biases.clone()));
    }
    let mut bindings = vec![(net.x, &tx), (net.targets, &tt)];
    for (i, (w, b)) in net.params.iter().enumerate() {
        bindings.push((*w, &storage[2 * i]));
        bindings.push((*b, &storage[2 * i + 1]));
    }

    let loss_ce = net.graph.forward(&bindings)?.as_scalar().expect("scalar loss");
    net.graph.backward(&Tensor::scalar(1.0)?)?;
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = net
        .params
        .iter()
        .map(|(w, b)| {
            (
                net.graph.gradient(*w).expect("weight grad").data().to_vec(),
                net.graph.gradient(*b).expect("bias grad").data().to_vec(),
            )
        })
        .collect();

    let mut loss = loss_ce;
    let mut reg_terms = Vec::new();

    if cfg.objective == Objective::AdvErm {
        if let Some(mask) = in_mask {
            let alpha = cfg.regularizer_weight;
            let temp = cfg.relaxation_temperature;
            let logits_val = net.graph.value(net.logits).expect("logits").data().to_vec();

            let correct: Vec<bool> = (0..m)
                .map(|i| argmax(&logits_val[i * k..(i + 1) * k]) == labels[i])
                .collect();

            // Margin gradients per rival class, one backward pass each; row
            // independence of the network makes the per-example rows exact.
            let mut norms = vec![vec![0.0_f64; k]; m];
            for j in 0..k {
                let mut seed = vec![0.0; m * k];
                let mut any = false;
                for i in 0..m {
                    if correct[i] && labels[i] != j {
                        seed[i * k + labels[i]] = 1.0;
                        seed[i * k + j] = -1.0;
                        any = true;
                    }
                }
                if !any {
                    continue;
                }
                net.graph
                    .backward_from(net.logits, &Tensor::matrix(m, k, seed)?)?;
                let gx = net.graph.gradient(net.x).expect("input grad");
                for i in 0..m {
                    if correct[i] && labels[i] != j {
                        let row = &gx.data()[i * d..(i + 1) * d];
                        norms[i][j] = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    }
                }
            }

            // Linearized distance per included example.
            let mut detail: Vec<Option<(f64, usize)>> = vec![None; m];
            for i in 0..m {
                if !correct[i] {
                    continue;
                }
                let y = labels[i];
                let zi = &logits_val[i * k..(i + 1) * k];
                let mut best: Option<(f64, usize)> = None;
                for j in 0..k {
                    if j == y || norms[i][j] == 0.0 {
                        continue;
                    }
                    let dist = (zi[y] - zi[j]).abs() / norms[i][j];
                    if best.is_none_or(|(bd, _)| dist < bd) {
                        best = Some((dist, j));
                    }
                }
                detail[i] = best;
            }

            let included: Vec<usize> = (0..m).filter(|&i| detail[i].is_some()).collect();
            let c_in = included.iter().filter(|&&i| mask[i]).count();
            let c_out = included.len() - c_in;
            if c_in > 0 && c_out > 0 {
                let s: Vec<f64> = included
                    .iter()
                    .map(|&i| sigmoid((detail[i].unwrap().0 - cfg.threshold) / temp))
                    .collect();
                let mean_in = included
                    .iter()
                    .zip(&s)
                    .filter(|(&i, _)| mask[i])
                    .map(|(_, &v)| v)
                    .sum::<f64>()
                    / c_in as f64;
                let mean_out = included
                    .iter()
                    .zip(&s)
                    .filter(|(&i, _)| !mask[i])
                    .map(|(_, &v)| v)
                    .sum::<f64>()
                    / c_out as f64;
                let rb = (mean_out - mean_in).abs();
                loss += alpha * rb;

                let sgn = if mean_out > mean_in {
                    1.0
                } else if mean_out < mean_in {
                    -1.0
                } else {
                    0.0
                };
                if sgn != 0.0 {
                    let mut seed = vec![0.0; m * k];
                    for (&i, &si) in included.iter().zip(&s) {
                        let (_, rival) = detail[i].unwrap();
                        let norm = norms[i][rival];
                        let side = if mask[i] { -1.0 / c_in as f64 } else { 1.0 / c_out as f64 };
                        let coef = alpha * sgn * side * si * (1.0 - si) / (temp * norm);
                        seed[i * k + labels[i]] += coef;
                        seed[i * k + rival] -= coef;
                        reg_terms.push(RegTerm {
                            example: i,
                            rival,
                            norm,
                            in_partition: mask[i],
                        });
                    }
                    net.graph
                        .backward_from(net.logits, &Tensor::matrix(m, k, seed)?)?;
                    for (gi, (w, b)) in net.params.iter().enumerate() {
                        if let Some(gw) = net.graph.gradient(*w) {
                            for (acc, &v) in grads[gi].0.iter_mut().zip(gw.data()) {
                                *acc += v;
                            }
                        }
                        if let Some(gb) = net.graph.gradient(*b) {
                            for (acc, &v) in grads[gi].1.iter_mut().zip(gb.data()) {
                                *acc += v;
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(StepEval {
        loss,
        grads,
        reg_terms,
    })
}

/// Mini-batch SGD on the selected objective. Deterministic given the seed;
/// `epochs = 0` returns the freshly initialized model.
pub fn train(dataset: &Dataset, arch: &Arch, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = dataset.len();
    let d = dataset.dim();
    let k = dataset.num_classes();
    if k < 2 {
        return Err(Error::InvalidConfig("training needs at least 2 classes".to_string()));
    }
    let mut dims = vec![d];
    if let Arch::Mlp { hidden } = arch {
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::InvalidConfig("mlp hidden sizes must be positive".to_string()));
        }
        dims.extend(hidden.iter().copied());
    }
    dims.push(k);

    let in_mask: Option<Vec<bool>> = match (&cfg.objective, &cfg.protected_partition) {
        (Objective::AdvErm, Some(p)) => {
            let mask = p.mask(n);
            let members = mask.iter().filter(|&&b| b).count();
            if members == 0 || members == n {
                return Err(Error::InvalidConfig(
                    "protected partition must be a proper non-empty subset".to_string(),
                ));
            }
            Some(mask)
        }
        _ => None,
    };

    let mut layers = init_layers(&dims, cfg.seed);
    let mut rng = stream_rng(cfg.seed, 3);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let m = chunk.len();
            let mut xs = Vec::with_capacity(m * d);
            let mut labels = Vec::with_capacity(m);
            let mut mask = Vec::with_capacity(m);
            for &i in chunk {
                xs.extend_from_slice(dataset.feature_row(i));
                labels.push(dataset.label(i));
                if let Some(full) = &in_mask {
                    mask.push(full[i]);
                }
            }
            let eval = batch_step(
                &layers,
                &xs,
                m,
                &labels,
                in_mask.as_ref().map(|_| mask.as_slice()),
                cfg,
            )
            .map_err(|e| match e {
                Error::NonFinite { .. } => Error::NanLoss { epoch },
                other => other,
            })?;
            for (layer, (gw, gb)) in layers.iter_mut().zip(&eval.grads) {
                for (w, &g) in layer.weights.iter_mut().zip(gw) {
                    *w -= cfg.learning_rate * g;
                }
                for (b, &g) in layer.biases.iter_mut().zip(gb) {
                    *b -= cfg.learning_rate * g;
                }
            }
            epoch_loss += eval.loss * m as f64;
        }
        epoch_loss /= n as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::NanLoss { epoch });
        }
        trace.push(epoch_loss);
    }

    let model = if matches!(arch, Arch::Affine) {
        let layer = &layers[0];
        // Stored input-major during training; the affine model keeps one
        // row per class.
        let mut rows = vec![vec![0.0; d]; k];
        for (i, chunk) in layer.weights.chunks(k).enumerate() {
            for (j, &w) in chunk.iter().enumerate() {
                rows[j][i] = w;
            }
        }
        Model::Affine(AffineClassifier::from_rows(rows, layer.biases.clone())?)
    } else {
        Model::Mlp(MlpClassifier::new(layers)?)
    };
    Ok(TrainOutcome {
        model,
        loss_trace: trace,
    })
}

/// Objective value on one batch: mean cross-entropy plus alpha times the
/// relaxed bias gap. Skips the penalty when either side of the partition has
/// no correctly classified member, per its precondition.
pub fn adverm_loss<C: Classifier + ?Sized>(
    model: &C,
    xs: &[f64],
    labels: &[usize],
    in_partition: &[bool],
    cfg: &TrainConfig,
) -> Result<f64> {
    let d = model.input_dim();
    let k = model.num_classes();
    if xs.len() != labels.len() * d || labels.len() != in_partition.len() {
        return Err(Error::ShapeMismatch {
            context: "adverm_loss batch",
            expected: format!("{} examples", labels.len()),
            got: format!("{} features, {} mask", xs.len(), in_partition.len()),
        });
    }
    let m = labels.len();
    let logits = model.batch_logits(xs, m)?;
    let mut ce = 0.0;
    for i in 0..m {
        let zi = &logits[i * k..(i + 1) * k];
        let mx = zi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + zi.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        ce += lse - zi[labels[i]];
    }
    ce /= m as f64;

    if cfg.regularizer_weight == 0.0 {
        return Ok(ce);
    }

    let mut s_in = Vec::new();
    let mut s_out = Vec::new();
    for i in 0..m {
        let zi = &logits[i * k..(i + 1) * k];
        if argmax(zi) != labels[i] {
            continue;
        }
        let x = &xs[i * d..(i + 1) * d];
        let dist = match super::linearized_distance(model, x) {
            Ok(v) => v,
            Err(Error::DegenerateGradient) => continue,
            Err(e) => return Err(e),
        };
        let s = sigmoid((dist - cfg.threshold) / cfg.relaxation_temperature);
        if in_partition[i] {
            s_in.push(s);
        } else {
            s_out.push(s);
        }
    }
    if s_in.is_empty() || s_out.is_empty() {
        return Ok(ce);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(ce + cfg.regularizer_weight * (mean(&s_out) - mean(&s_in)).abs())
}

/// Fraction of examples the model labels correctly.
pub fn accuracy<C: Classifier + ?Sized>(model: &C, dataset: &Dataset) -> Result<f64> {
    let logits = model.batch_logits(dataset.features(), dataset.len())?;
    let k = model.num_classes();
    let hits = (0..dataset.len())
        .filter(|&i| argmax(&logits[i * k..(i + 1) * k]) == dataset.label(i))
        .count();
    Ok(hits as f64 / dataset.len() as f64)
}

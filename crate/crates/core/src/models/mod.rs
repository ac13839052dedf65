//! Affine and feed-forward classifiers, their gradients, and training.

mod train;

pub use train::{accuracy, adverm_loss, train, Arch, Objective, TrainConfig, TrainOutcome};

use crate::diffcore::{Graph, NodeId, Tensor};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Index of the largest value; ties break to the lowest index so that
/// boundary-sitting points have a deterministic prediction.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A classifier exposing logits and input-gradients of logit combinations.
pub trait Classifier: Send + Sync {
    fn input_dim(&self) -> usize;
    fn num_classes(&self) -> usize;

    /// Logits for `n` row-major examples, returned row-major `n x k`.
    fn batch_logits(&self, xs: &[f64], n: usize) -> Result<Vec<f64>>;

    /// For each seed vector `s`, the input gradient of `sum_j s_j z_j(x)`.
    fn input_grads(&self, x: &[f64], seeds: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.batch_logits(x, 1)
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }
}

/// Multinomial affine model: `logits(x) = W x + b` with `W` stored as one
/// row per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineClassifier {
    num_classes: usize,
    input_dim: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl AffineClassifier {
    pub fn new(num_classes: usize, input_dim: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if num_classes < 2 || input_dim == 0 {
            return Err(Error::InvalidConfig(
                "affine model needs >=2 classes and >=1 feature".to_string(),
            ));
        }
        if weights.len() != num_classes * input_dim || biases.len() != num_classes {
            return Err(Error::ShapeMismatch {
                context: "affine model",
                expected: format!("{num_classes}x{input_dim} weights"),
                got: format!("{} weights, {} biases", weights.len(), biases.len()),
            });
        }
        Ok(Self {
            num_classes,
            input_dim,
            weights,
            biases,
        })
    }

    /// Build from one weight row per class.
    pub fn from_rows(rows: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        let k = rows.len();
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::ShapeMismatch {
                context: "affine model rows",
                expected: format!("rows of length {d}"),
                got: "ragged rows".to_string(),
            });
        }
        Self::new(k, d, rows.into_iter().flatten().collect(), biases)
    }

    pub fn weight_row(&self, class: usize) -> &[f64] {
        &self.weights[class * self.input_dim..(class + 1) * self.input_dim]
    }

    pub fn bias(&self, class: usize) -> f64 {
        self.biases[class]
    }
}

impl Classifier for AffineClassifier {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn batch_logits(&self, xs: &[f64], n: usize) -> Result<Vec<f64>> {
        let d = self.input_dim;
        if xs.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: xs.len(),
            });
        }
        let k = self.num_classes;
        let mut out = vec![0.0; n * k];
        for i in 0..n {
            let x = &xs[i * d..(i + 1) * d];
            for j in 0..k {
                let w = self.weight_row(j);
                let mut z = self.biases[j];
                for (wv, xv) in w.iter().zip(x) {
                    z += wv * xv;
                }
                out[i * k + j] = z;
            }
        }
        Ok(out)
    }

    fn input_grads(&self, x: &[f64], seeds: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let d = self.input_dim;
        Ok(seeds
            .iter()
            .map(|s| {
                let mut g = vec![0.0; d];
                for (j, &sj) in s.iter().enumerate() {
                    if sj == 0.0 {
                        continue;
                    }
                    for (gv, wv) in g.iter_mut().zip(self.weight_row(j)) {
                        *gv += sj * wv;
                    }
                }
                g
            })
            .collect())
    }
}

/// One dense layer, weights stored `fan_in x fan_out` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Feed-forward network with ReLU between layers; the last layer emits
/// raw logits. Stands in for larger networks at desk scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    layers: Vec<Layer>,
}

impl MlpClassifier {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("MLP needs at least one layer".to_string()));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out != pair[1].fan_in {
                return Err(Error::ShapeMismatch {
                    context: "mlp layers",
                    expected: format!("fan_in {}", pair[0].fan_out),
                    got: format!("fan_in {}", pair[1].fan_in),
                });
            }
        }
        for l in &layers {
            if l.weights.len() != l.fan_in * l.fan_out || l.biases.len() != l.fan_out {
                return Err(Error::ShapeMismatch {
                    context: "mlp layer",
                    expected: format!("{}x{} weights", l.fan_in, l.fan_out),
                    got: format!("{} weights", l.weights.len()),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Record the forward pass on a fresh graph. Returns the input leaf, the
    /// per-layer parameter leaves, and the logits node.
    fn build_graph(&self, n: usize) -> (Graph, NodeId, Vec<(NodeId, NodeId)>, NodeId) {
        let mut g = Graph::new();
        let x = g.leaf(&[n, self.layers[0].fan_in]);
        let mut params = Vec::with_capacity(self.layers.len());
        let mut h = x;
        for (li, layer) in self.layers.iter().enumerate() {
            let w = g.leaf(&[layer.fan_in, layer.fan_out]);
            let b = g.leaf(&[layer.fan_out]);
            let mm = g.matmul(h, w).expect("shapes chain");
            let zb = g.add(mm, b).expect("bias broadcast");
            h = if li + 1 < self.layers.len() { g.relu(zb) } else { zb };
            params.push((w, b));
        }
        (g, x, params, h)
    }

    fn bind<'a>(
        &'a self,
        x_leaf: NodeId,
        params: &[(NodeId, NodeId)],
        x: &'a Tensor,
        storage: &'a mut Vec<Tensor>,
    ) -> Vec<(NodeId, &'a Tensor)> {
        storage.clear();
        for layer in &self.layers {
            storage.push(Tensor::from_raw(
                vec![layer.fan_in, layer.fan_out],
                layer.weights.clone(),
            ));
            storage.push(Tensor::from_raw(vec![layer.fan_out], layer.biases.clone()));
        }
        let mut bindings = vec![(x_leaf, x)];
        for (i, (w, b)) in params.iter().enumerate() {
            bindings.push((*w, &storage[2 * i]));
            bindings.push((*b, &storage[2 * i + 1]));
        }
        bindings
    }
}

impl Classifier for MlpClassifier {
    fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    fn num_classes(&self) -> usize {
        self.layers.last().expect("non-empty").fan_out
    }

    fn batch_logits(&self, xs: &[f64], n: usize) -> Result<Vec<f64>> {
        let d = self.input_dim();
        if xs.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: xs.len(),
            });
        }
        let (mut g, x_leaf, params, logits) = self.build_graph(n);
        let tx = Tensor::matrix(n, d, xs.to_vec())?;
        let mut storage = Vec::new();
        let bindings = self.bind(x_leaf, &params, &tx, &mut storage);
        g.forward(&bindings)?;
        Ok(g.value(logits).expect("forward ran").data().to_vec())
    }

    fn input_grads(&self, x: &[f64], seeds: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let d = self.input_dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        let k = self.num_classes();
        let (mut g, x_leaf, params, logits) = self.build_graph(1);
        let tx = Tensor::matrix(1, d, x.to_vec())?;
        let mut storage = Vec::new();
        let bindings = self.bind(x_leaf, &params, &tx, &mut storage);
        g.forward(&bindings)?;
        let mut out = Vec::with_capacity(seeds.len());
        for seed in seeds {
            let ts = Tensor::matrix(1, k, seed.clone())?;
            g.backward_from(logits, &ts)?;
            out.push(
                g.gradient(x_leaf)
                    .map(|t| t.data().to_vec())
                    .unwrap_or_else(|| vec![0.0; d]),
            );
        }
        Ok(out)
    }
}

/// Either supported model, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Affine(AffineClassifier),
    Mlp(MlpClassifier),
}

impl Model {
    pub fn as_affine(&self) -> Option<&AffineClassifier> {
        match self {
            Model::Affine(m) => Some(m),
            Model::Mlp(_) => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Affine(_) => "affine",
            Model::Mlp(_) => "mlp",
        }
    }
}

impl Classifier for Model {
    fn input_dim(&self) -> usize {
        match self {
            Model::Affine(m) => m.input_dim(),
            Model::Mlp(m) => m.input_dim(),
        }
    }

    fn num_classes(&self) -> usize {
        match self {
            Model::Affine(m) => m.num_classes(),
            Model::Mlp(m) => m.num_classes(),
        }
    }

    fn batch_logits(&self, xs: &[f64], n: usize) -> Result<Vec<f64>> {
        match self {
            Model::Affine(m) => m.batch_logits(xs, n),
            Model::Mlp(m) => m.batch_logits(xs, n),
        }
    }

    fn input_grads(&self, x: &[f64], seeds: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        match self {
            Model::Affine(m) => m.input_grads(x, seeds),
            Model::Mlp(m) => m.input_grads(x, seeds),
        }
    }
}

/// On-disk model format: parameters, provenance, and the training
/// configuration that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub model: Model,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_config: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest_id: Option<String>,
}

impl ModelFile {
    pub fn new(model: Model) -> Self {
        Self {
            version: 1,
            model,
            train_config: None,
            dataset_hash: None,
            manifest_id: None,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Distance to the nearest boundary under the DeepFool-style local
/// linearization: over rival classes j, the smallest `m_j / ||grad m_j||`
/// where `m_j` is the logit margin against j. For affine models this equals
/// the closed-form distance exactly; the binary case reduces to the
/// top-two-margin formula.
pub fn linearized_distance<C: Classifier + ?Sized>(model: &C, x: &[f64]) -> Result<f64> {
    linearized_distance_detail(model, x).map(|(d, _)| d)
}

/// As [`linearized_distance`], also reporting the minimizing rival class.
pub fn linearized_distance_detail<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
) -> Result<(f64, usize)> {
    let z = model.logits(x)?;
    let yhat = argmax(&z);
    let k = z.len();
    let seeds: Vec<Vec<f64>> = (0..k)
        .filter(|&j| j != yhat)
        .map(|j| {
            let mut s = vec![0.0; k];
            s[yhat] = 1.0;
            s[j] = -1.0;
            s
        })
        .collect();
    let rivals: Vec<usize> = (0..k).filter(|&j| j != yhat).collect();
    let grads = model.input_grads(x, &seeds)?;
    let mut best: Option<(f64, usize)> = None;
    for (j, g) in rivals.into_iter().zip(&grads) {
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let margin = (z[yhat] - z[j]).abs();
        let d = margin / norm;
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, j));
        }
    }
    best.ok_or(Error::DegenerateGradient)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_logits_and_prediction() {
        let m = AffineClassifier::from_rows(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
        )
        .unwrap();
        let z = m.logits(&[2.0, 1.0]).unwrap();
        assert_eq!(z, vec![2.0, 1.0]);
        assert_eq!(m.predict(&[2.0, 1.0]).unwrap(), 0);
    }

    #[test]
    fn tie_breaks_to_lowest_class() {
        let m = AffineClassifier::from_rows(
            vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![0.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(m.predict(&[3.0, -4.0]).unwrap(), 0);
    }

    #[test]
    fn mlp_matches_hand_computation() {
        // h = relu(x) with identity first layer; logits = h W2 + b2.
        let mlp = MlpClassifier::new(vec![
            Layer {
                fan_in: 2,
                fan_out: 2,
                weights: vec![1.0, 0.0, 0.0, 1.0],
                biases: vec![0.0, 0.0],
            },
            Layer {
                fan_in: 2,
                fan_out: 2,
                weights: vec![3.0, -1.0, 5.0, 2.0],
                biases: vec![0.5, -0.5],
            },
        ])
        .unwrap();
        // x = (1,-1): h = (1,0); z = (1*3+0*5+0.5, 1*-1+0*2-0.5) = (3.5, -1.5)
        let z = mlp.logits(&[1.0, -1.0]).unwrap();
        assert!((z[0] - 3.5).abs() < 1e-12);
        assert!((z[1] + 1.5).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = AffineClassifier::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0])
            .unwrap();
        assert!(matches!(
            m.logits(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn linearized_distance_on_margin_five() {
        // Two classes, weight difference (3,4): margin 5 at x -> distance 1.
        let m = AffineClassifier::from_rows(vec![vec![3.0, 4.0], vec![0.0, 0.0]], vec![0.0, 0.0])
            .unwrap();
        let d = linearized_distance(&m, &[1.0, 0.5]).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linearized_distance_zero_on_boundary() {
        let m = AffineClassifier::from_rows(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.0, 0.0])
            .unwrap();
        let d = linearized_distance(&m, &[0.0, 3.0]).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn zero_weight_model_has_degenerate_gradient() {
        let m = AffineClassifier::from_rows(vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![0.0, 0.0])
            .unwrap();
        assert!(matches!(
            linearized_distance(&m, &[1.0, 1.0]),
            Err(Error::DegenerateGradient)
        ));
    }

    #[test]
    fn prediction_invariant_under_logit_shift() {
        let m = AffineClassifier::from_rows(
            vec![vec![1.0, -2.0], vec![0.5, 0.5], vec![-1.0, 0.0]],
            vec![0.1, -0.2, 0.3],
        )
        .unwrap();
        let shifted = AffineClassifier::from_rows(
            vec![vec![1.0, -2.0], vec![0.5, 0.5], vec![-1.0, 0.0]],
            vec![0.1 + 7.0, -0.2 + 7.0, 0.3 + 7.0],
        )
        .unwrap();
        for x in [[0.3, -0.8], [1.5, 2.0], [-0.4, 0.9]] {
            assert_eq!(m.predict(&x).unwrap(), shifted.predict(&x).unwrap());
        }
    }

    #[test]
    fn mlp_input_grads_match_affine_region() {
        // With all ReLUs active the MLP is locally affine; the seed gradient
        // must equal the product of the layer matrices.
        let mlp = MlpClassifier::new(vec![
            Layer {
                fan_in: 2,
                fan_out: 2,
                weights: vec![1.0, 0.5, -0.25, 2.0],
                biases: vec![10.0, 10.0], // keeps activations positive near origin
            },
            Layer {
                fan_in: 2,
                fan_out: 2,
                weights: vec![0.5, -1.0, 1.5, 0.25],
                biases: vec![0.0, 0.0],
            },
        ])
        .unwrap();
        let g = mlp
            .input_grads(&[0.1, -0.2], &[vec![1.0, 0.0]])
            .unwrap();
        // d z0 / dx = W1 (col of W2): [1.0,0.5;-0.25,2.0] * [0.5,1.5]
        let expect = [1.0 * 0.5 + 0.5 * 1.5, -0.25 * 0.5 + 2.0 * 1.5];
        assert!((g[0][0] - expect[0]).abs() < 1e-12);
        assert!((g[0][1] - expect[1]).abs() < 1e-12);
    }

    #[test]
    fn model_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let model = Model::Affine(
            AffineClassifier::from_rows(
                vec![vec![0.1, -0.2, 1.0 / 3.0], vec![2.0f64.sqrt(), 0.0, -1e-9]],
                vec![0.5, -0.5],
            )
            .unwrap(),
        );
        let mut file = ModelFile::new(model.clone());
        file.dataset_hash = Some("abc".to_string());
        file.save(&path).unwrap();
        let loaded = ModelFile::load(&path).unwrap();
        assert_eq!(loaded.model, model);
        assert_eq!(loaded.dataset_hash.as_deref(), Some("abc"));
    }
}

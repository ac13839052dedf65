//! Synthetic datasets with controlled decision-boundary geometry.

use super::{Attribute, Dataset};
use crate::sampling::{stream_rng, NormalSource};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeMap;

/// Two-class, two-subgroup planar toy with hand-placed distances.
///
/// Classes "blue" and "green" occupy opposite quadrants, so both the
/// vertical separator ([`toy_boundary_a`]) and the horizontal separator
/// ([`toy_boundary_b`]) classify the data perfectly. Distances to each
/// separator are placed in bands so that, at budget `tau = separation`:
///
/// * boundary A attacks 70% of the "round" subgroup and 30% of "cross";
/// * boundary B attacks 30% of both subgroups.
///
/// `n_per_subgroup` is the point count of each class x subgroup cell
/// (so each subgroup has `2 * n_per_subgroup` members). Near points sit at
/// distance 0.3-0.7 tau from the separator, far points at 1.8-2.2 tau;
/// the attacked fractions are exact up to the rounding of `0.7 * n`.
pub fn make_two_subgroup_toy(
    n_per_subgroup: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_subgroup < 10 {
        return Err(Error::InvalidConfig(
            "n_per_subgroup must be at least 10".to_string(),
        ));
    }
    if separation.is_nan() || separation <= 0.0 || separation.is_infinite() {
        return Err(Error::InvalidConfig("separation must be positive".to_string()));
    }
    let tau = separation;
    let n = n_per_subgroup;
    let mut rng = stream_rng(seed, 0);

    let near = |rng: &mut rand_chacha::ChaCha12Rng| tau * (0.3 + 0.4 * rng.random::<f64>());
    let far = |rng: &mut rand_chacha::ChaCha12Rng| tau * (1.8 + 0.4 * rng.random::<f64>());

    let frac_round_a = (0.7 * n as f64).round() as usize;
    let frac_cross_a = (0.3 * n as f64).round() as usize;
    let frac_b = (0.3 * n as f64).round() as usize;

    let mut features = Vec::with_capacity(4 * n * 2);
    let mut labels = Vec::with_capacity(4 * n);
    let mut subgroup = Vec::with_capacity(4 * n);

    // Cell order: (blue, round), (blue, cross), (green, round), (green, cross).
    for (class, sign) in [(0usize, -1.0), (1usize, 1.0)] {
        for (sub, near_a_count) in [(0usize, frac_round_a), (1usize, frac_cross_a)] {
            let mut b_near: Vec<usize> = (0..n).collect();
            b_near.shuffle(&mut rng);
            let b_near_set: Vec<bool> = {
                let mut mask = vec![false; n];
                for &i in b_near.iter().take(frac_b) {
                    mask[i] = true;
                }
                mask
            };
            for (i, &near_b) in b_near_set.iter().enumerate() {
                let x1 = sign * if i < near_a_count { near(&mut rng) } else { far(&mut rng) };
                let x2 = sign * if near_b { near(&mut rng) } else { far(&mut rng) };
                features.push(x1);
                features.push(x2);
                labels.push(class);
                subgroup.push(sub);
            }
        }
    }

    let mut attributes = BTreeMap::new();
    attributes.insert(
        "subgroup".to_string(),
        Attribute {
            values: subgroup,
            value_names: vec!["round".to_string(), "cross".to_string()],
        },
    );
    Dataset::new(
        4 * n,
        2,
        features,
        labels,
        vec!["blue".to_string(), "green".to_string()],
        attributes,
        vec!["x1".to_string(), "x2".to_string()],
    )
}

/// Weights and biases of the vertical separator (boundary A): the signed
/// distance of a point to this model's decision boundary is |x1|.
pub fn toy_boundary_a() -> (Vec<Vec<f64>>, Vec<f64>) {
    (vec![vec![-1.0, 0.0], vec![1.0, 0.0]], vec![0.0, 0.0])
}

/// Weights and biases of the horizontal separator (boundary B): the signed
/// distance of a point to this model's decision boundary is |x2|.
pub fn toy_boundary_b() -> (Vec<Vec<f64>>, Vec<f64>) {
    (vec![vec![0.0, -1.0], vec![0.0, 1.0]], vec![0.0, 0.0])
}

/// Isotropic Gaussian blob per class, three classes, planar.
///
/// The means and spread are free parameters: any well-separated triangle
/// trains a multinomial regression to high accuracy, and no particular
/// generating distribution is canonical for this shape of toy problem.
pub fn make_three_class_gaussians(
    n_per_class: usize,
    means: [(f64, f64); 3],
    stddev: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::EmptyClass);
    }
    if stddev.is_nan() || stddev <= 0.0 || stddev.is_infinite() {
        return Err(Error::InvalidConfig("stddev must be positive".to_string()));
    }
    let mut normals = NormalSource::new(stream_rng(seed, 1));
    let mut features = Vec::with_capacity(3 * n_per_class * 2);
    let mut labels = Vec::with_capacity(3 * n_per_class);
    for (c, (mx, my)) in means.iter().enumerate() {
        for _ in 0..n_per_class {
            features.push(mx + stddev * normals.sample());
            features.push(my + stddev * normals.sample());
            labels.push(c);
        }
    }
    Dataset::new(
        3 * n_per_class,
        2,
        features,
        labels,
        vec!["c0".to_string(), "c1".to_string(), "c2".to_string()],
        BTreeMap::new(),
        vec!["x1".to_string(), "x2".to_string()],
    )
}

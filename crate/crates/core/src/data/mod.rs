//! Datasets, partitions, CSV ingestion, and synthetic generators.
//!
//! A dataset is an immutable N x d feature matrix with class labels and
//! optional categorical attribute columns. Partitions, by class label or by
//! attribute value, are the unit every bias metric compares against its
//! complement.

mod csv;
pub mod synth;

pub use csv::{load_csv, write_csv, write_manifest, CsvSchema, DatasetManifest};

use crate::{Error, Result};
use std::collections::BTreeMap;

/// One categorical attribute column, dense-coded with display names in
/// first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    pub values: Vec<usize>,
    pub value_names: Vec<String>,
}

/// Immutable classification dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    attributes: BTreeMap<String, Attribute>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        n: usize,
        d: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        attributes: BTreeMap<String, Attribute>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if d == 0 || features.len() != n * d || feature_names.len() != d {
            return Err(Error::ShapeMismatch {
                context: "dataset construction",
                expected: format!("{n}x{d} features"),
                got: format!("{} values, {} names", features.len(), feature_names.len()),
            });
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                op: "dataset features",
            });
        }
        let k = class_names.len();
        if labels.len() != n || labels.iter().any(|&l| l >= k) {
            return Err(Error::ShapeMismatch {
                context: "dataset labels",
                expected: format!("{n} labels below {k}"),
                got: format!("{} labels", labels.len()),
            });
        }
        for (name, attr) in &attributes {
            if attr.values.len() != n
                || attr.values.iter().any(|&v| v >= attr.value_names.len())
            {
                return Err(Error::ShapeMismatch {
                    context: "dataset attribute",
                    expected: format!("{n} coded values for {name:?}"),
                    got: format!("{}", attr.values.len()),
                });
            }
        }
        Ok(Self {
            n,
            d,
            features,
            labels,
            class_names,
            attributes,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn attributes(&self) -> &BTreeMap<String, Attribute> {
        &self.attributes
    }

    pub fn attribute(&self, name: &str) -> Result<&Attribute> {
        self.attributes
            .get(name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    /// Standardize features to zero mean, unit variance per column.
    /// Returns the transformed dataset with per-column (mean, std).
    /// Constant columns keep their values (std treated as 1).
    pub fn standardized(&self) -> (Dataset, Vec<(f64, f64)>) {
        let mut stats = Vec::with_capacity(self.d);
        let mut features = self.features.clone();
        for j in 0..self.d {
            let mean = (0..self.n).map(|i| self.features[i * self.d + j]).sum::<f64>()
                / self.n as f64;
            let var = (0..self.n)
                .map(|i| {
                    let v = self.features[i * self.d + j] - mean;
                    v * v
                })
                .sum::<f64>()
                / self.n as f64;
            let std = if var > 0.0 { var.sqrt() } else { 1.0 };
            stats.push((mean, std));
            for i in 0..self.n {
                features[i * self.d + j] = (features[i * self.d + j] - mean) / std;
            }
        }
        let ds = Dataset {
            features,
            ..self.clone()
        };
        (ds, stats)
    }
}

/// Named subset of dataset indices (sorted, unique, non-empty).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Partition {
    pub name: String,
    pub member_indices: Vec<usize>,
}

impl Partition {
    pub fn new(name: impl Into<String>, mut member_indices: Vec<usize>) -> Result<Self> {
        let name = name.into();
        member_indices.sort_unstable();
        member_indices.dedup();
        if member_indices.is_empty() {
            return Err(Error::EmptyPartition(name));
        }
        Ok(Self {
            name,
            member_indices,
        })
    }

    pub fn len(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_indices.is_empty()
    }

    /// Membership mask over a dataset of `n` examples.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.member_indices {
            if i < n {
                m[i] = true;
            }
        }
        m
    }
}

/// What to partition a dataset by.
#[derive(Debug, Clone, PartialEq)]
pub enum PartitionBy {
    Class,
    Attribute(String),
}

/// Parsed partition selector: every class, every value of an attribute, or
/// a single attribute value audited against the rest.
#[derive(Debug, Clone, PartialEq)]
pub enum PartitionSpec {
    Class,
    Attribute(String),
    AttributeValue(String, String),
}

/// Parse the partition grammar `class | attribute:<name> |
/// attribute:<name>=<value>` (with `attr:` accepted as shorthand).
pub fn parse_partition_spec(spec: &str) -> Result<PartitionSpec> {
    if spec == "class" {
        return Ok(PartitionSpec::Class);
    }
    let rest = spec
        .strip_prefix("attribute:")
        .or_else(|| spec.strip_prefix("attr:"))
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "bad partition spec {spec:?}; expected class, attribute:<name>, or attribute:<name>=<value>"
            ))
        })?;
    if rest.is_empty() {
        return Err(Error::InvalidConfig("attribute name is empty".to_string()));
    }
    match rest.split_once('=') {
        None => Ok(PartitionSpec::Attribute(rest.to_string())),
        Some((name, value)) if !name.is_empty() && !value.is_empty() => Ok(
            PartitionSpec::AttributeValue(name.to_string(), value.to_string()),
        ),
        Some(_) => Err(Error::InvalidConfig(format!(
            "bad attribute partition {rest:?}"
        ))),
    }
}

/// Resolve a parsed spec against a dataset. A single attribute value yields
/// one partition (audited against everything else); the other forms yield
/// one partition per distinct value.
pub fn resolve_partitions(dataset: &Dataset, spec: &PartitionSpec) -> Result<Vec<Partition>> {
    match spec {
        PartitionSpec::Class => partitions_of(dataset, &PartitionBy::Class),
        PartitionSpec::Attribute(name) => {
            partitions_of(dataset, &PartitionBy::Attribute(name.clone()))
        }
        PartitionSpec::AttributeValue(name, value) => {
            let attr = dataset.attribute(name)?;
            let code = attr
                .value_names
                .iter()
                .position(|v| v == value)
                .ok_or_else(|| {
                    Error::InvalidConfig(format!("attribute {name:?} has no value {value:?}"))
                })?;
            let members: Vec<usize> = (0..dataset.len())
                .filter(|&i| attr.values[i] == code)
                .collect();
            if members.is_empty() || members.len() == dataset.len() {
                return Err(Error::DegeneratePartition(format!(
                    "{name}={value} selects {} of {} examples",
                    members.len(),
                    dataset.len()
                )));
            }
            Ok(vec![Partition::new(value.clone(), members)?])
        }
    }
}

/// Split a dataset into one partition per distinct class label or attribute
/// value. The result is a partition in the mathematical sense: disjoint, and
/// the union covers every index. Fewer than two parts is an error since
/// every downstream metric needs a non-empty complement.
pub fn partitions_of(dataset: &Dataset, by: &PartitionBy) -> Result<Vec<Partition>> {
    let (codes, names): (&[usize], &[String]) = match by {
        PartitionBy::Class => (&dataset.labels, &dataset.class_names),
        PartitionBy::Attribute(name) => {
            let attr = dataset.attribute(name)?;
            (&attr.values, &attr.value_names)
        }
    };
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); names.len()];
    for (i, &c) in codes.iter().enumerate() {
        groups[c].push(i);
    }
    let parts: Vec<Partition> = groups
        .into_iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .map(|(c, g)| Partition {
            name: names[c].clone(),
            member_indices: g,
        })
        .collect();
    if parts.len() < 2 {
        return Err(Error::DegeneratePartition(format!(
            "{} distinct value(s); complement would be empty",
            parts.len()
        )));
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_class_dataset() -> Dataset {
        let mut attrs = BTreeMap::new();
        attrs.insert(
            "group".to_string(),
            Attribute {
                values: vec![0, 1, 0, 1, 0, 1],
                value_names: vec!["a".into(), "b".into()],
            },
        );
        Dataset::new(
            6,
            2,
            vec![0.0; 12],
            vec![0, 0, 1, 1, 2, 2],
            vec!["c0".into(), "c1".into(), "c2".into()],
            attrs,
            vec!["x1".into(), "x2".into()],
        )
        .unwrap()
    }

    #[test]
    fn class_partitions_are_disjoint_and_cover() {
        let ds = three_class_dataset();
        let parts = partitions_of(&ds, &PartitionBy::Class).unwrap();
        assert_eq!(parts.len(), 3);
        let mut seen = vec![false; ds.len()];
        for p in &parts {
            for &i in &p.member_indices {
                assert!(!seen[i], "index {i} in two partitions");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn attribute_partitions_by_value() {
        let ds = three_class_dataset();
        let parts = partitions_of(&ds, &PartitionBy::Attribute("group".into())).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].name, "a");
        assert_eq!(parts[0].member_indices, vec![0, 2, 4]);
    }

    #[test]
    fn five_value_attribute_yields_five_partitions() {
        let n = 20;
        let mut attrs = BTreeMap::new();
        attrs.insert(
            "race".to_string(),
            Attribute {
                values: (0..n).map(|i| i % 5).collect(),
                value_names: (0..5).map(|v| format!("group{v}")).collect(),
            },
        );
        let ds = Dataset::new(
            n,
            1,
            vec![0.0; n],
            (0..n).map(|i| i % 2).collect(),
            vec!["a".into(), "b".into()],
            attrs,
            vec!["x".into()],
        )
        .unwrap();
        let parts = partitions_of(&ds, &PartitionBy::Attribute("race".into())).unwrap();
        assert_eq!(parts.len(), 5);
        assert!(parts.iter().all(|p| p.len() == 4));
    }

    #[test]
    fn unknown_attribute_is_an_error() {
        let ds = three_class_dataset();
        let err = partitions_of(&ds, &PartitionBy::Attribute("race".into()));
        assert!(matches!(err, Err(Error::UnknownAttribute(_))));
    }

    #[test]
    fn single_class_partition_is_degenerate() {
        let ds = Dataset::new(
            3,
            1,
            vec![1.0, 2.0, 3.0],
            vec![0, 0, 0],
            vec!["only".into()],
            BTreeMap::new(),
            vec!["x".into()],
        )
        .unwrap();
        let err = partitions_of(&ds, &PartitionBy::Class);
        assert!(matches!(err, Err(Error::DegeneratePartition(_))));
    }

    #[test]
    fn standardize_centers_columns() {
        let ds = Dataset::new(
            4,
            1,
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0, 0, 1, 1],
            vec!["a".into(), "b".into()],
            BTreeMap::new(),
            vec!["x".into()],
        )
        .unwrap();
        let (std_ds, stats) = ds.standardized();
        let mean: f64 = std_ds.features().iter().sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((stats[0].0 - 2.5).abs() < 1e-12);
    }
}

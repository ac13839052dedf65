use super::{Attribute, Dataset};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Column roles for loading a dataset CSV.
///
/// Every column named here must exist; unnamed columns become features when
/// `features` is `None` (their file order is preserved).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label: String,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub features: Option<Vec<String>>,
}

impl CsvSchema {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            attributes: Vec::new(),
            features: None,
        }
    }

    pub fn with_attributes(mut self, attrs: Vec<String>) -> Self {
        self.attributes = attrs;
        self
    }
}

/// Sidecar JSON recording how a dataset file is to be interpreted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub feature_columns: Vec<String>,
    pub label_column: String,
    pub attribute_columns: Vec<String>,
    pub class_names: Vec<String>,
    pub attribute_values: BTreeMap<String, Vec<String>>,
    pub standardized: bool,
    pub seed: Option<u64>,
    pub n: usize,
    pub d: usize,
}

impl DatasetManifest {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            label: self.label_column.clone(),
            attributes: self.attribute_columns.clone(),
            features: Some(self.feature_columns.clone()),
        }
    }
}

fn dense_code(value: &str, names: &mut Vec<String>) -> usize {
    match names.iter().position(|n| n == value) {
        Some(i) => i,
        None => {
            names.push(value.to_string());
            names.len() - 1
        }
    }
}

/// Load a dataset from a header-row CSV. Lines starting with `#` are
/// comments. Categorical labels and attribute values are coded densely in
/// first-appearance order.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, schema)
}

pub(crate) fn parse_csv(text: &str, schema: &CsvSchema) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::EmptyFile)?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();

    let find = |name: &str| -> Result<usize> {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let label_idx = find(&schema.label)?;
    let mut attr_idx = Vec::new();
    for a in &schema.attributes {
        attr_idx.push((a.clone(), find(a)?));
    }
    let feature_cols: Vec<(String, usize)> = match &schema.features {
        Some(names) => {
            let mut cols = Vec::new();
            for f in names {
                cols.push((f.clone(), find(f)?));
            }
            cols
        }
        None => columns
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != label_idx && attr_idx.iter().all(|(_, ai)| ai != i))
            .map(|(i, c)| (c.to_string(), i))
            .collect(),
    };
    if feature_cols.is_empty() {
        return Err(Error::MissingColumn("(no feature columns)".to_string()));
    }

    let d = feature_cols.len();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut attr_values: Vec<Vec<usize>> = vec![Vec::new(); attr_idx.len()];
    let mut attr_names: Vec<Vec<String>> = vec![Vec::new(); attr_idx.len()];

    let mut row = 0usize;
    for (line_no, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != columns.len() {
            return Err(Error::CsvFormat {
                line: line_no + 1,
                msg: format!("expected {} cells, found {}", columns.len(), cells.len()),
            });
        }
        for (name, ci) in &feature_cols {
            let cell = cells[*ci];
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericFeature {
                row,
                col: name.clone(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumericFeature {
                    row,
                    col: name.clone(),
                });
            }
            features.push(v);
        }
        labels.push(dense_code(cells[label_idx], &mut class_names));
        for (ai, (_, ci)) in attr_idx.iter().enumerate() {
            attr_values[ai].push(dense_code(cells[*ci], &mut attr_names[ai]));
        }
        row += 1;
    }
    if row == 0 {
        return Err(Error::EmptyFile);
    }

    let mut attributes = BTreeMap::new();
    for (ai, (name, _)) in attr_idx.iter().enumerate() {
        attributes.insert(
            name.clone(),
            Attribute {
                values: std::mem::take(&mut attr_values[ai]),
                value_names: std::mem::take(&mut attr_names[ai]),
            },
        );
    }
    Dataset::new(
        row,
        d,
        features,
        labels,
        class_names,
        attributes,
        feature_cols.into_iter().map(|(n, _)| n).collect(),
    )
}

/// Write a dataset as CSV: feature columns, then the label column, then
/// attribute columns. Floats use the shortest decimal that reloads to the
/// identical bits. An optional `# manifest:` comment records provenance.
pub fn write_csv(
    dataset: &Dataset,
    path: impl AsRef<Path>,
    manifest_id: Option<&str>,
) -> Result<()> {
    let mut out = Vec::new();
    if let Some(id) = manifest_id {
        writeln!(out, "# manifest: {id}")?;
    }
    let mut header: Vec<String> = dataset.feature_names().to_vec();
    header.push("label".to_string());
    header.extend(dataset.attributes().keys().cloned());
    for h in &header {
        if h.contains(',') {
            return Err(Error::CsvFormat {
                line: 0,
                msg: format!("column name {h:?} contains a comma"),
            });
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for i in 0..dataset.len() {
        let mut cells: Vec<String> = dataset
            .feature_row(i)
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        cells.push(dataset.class_names()[dataset.label(i)].clone());
        for attr in dataset.attributes().values() {
            cells.push(attr.value_names[attr.values[i]].clone());
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write the dataset manifest sidecar.
pub fn write_manifest(
    dataset: &Dataset,
    path: impl AsRef<Path>,
    standardized: bool,
    seed: Option<u64>,
) -> Result<()> {
    let manifest = DatasetManifest {
        feature_columns: dataset.feature_names().to_vec(),
        label_column: "label".to_string(),
        attribute_columns: dataset.attributes().keys().cloned().collect(),
        class_names: dataset.class_names().to_vec(),
        attribute_values: dataset
            .attributes()
            .iter()
            .map(|(k, v)| (k.clone(), v.value_names.clone()))
            .collect(),
        standardized,
        seed,
        n: dataset.len(),
        d: dataset.dim(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

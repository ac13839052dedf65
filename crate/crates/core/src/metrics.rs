//! The robustness-bias metric family.
//!
//! Everything consumes a [`DistanceTable`]: one per-example distance (exact,
//! attack upper bound, or certified lower bound) with a correctness flag.
//! The survival curve of a partition is the fraction of its members that are
//! correctly classified and sit strictly further than tau from the boundary;
//! RB is the gap between a partition's conditional survival probability and
//! its complement's; sigma compares the areas under the two curves.

use crate::data::Partition;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// What kind of bound a distance estimate carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Exact,
    Upper,
    Lower,
}

impl BoundKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::Exact => "exact",
            BoundKind::Upper => "upper",
            BoundKind::Lower => "lower",
        }
    }
}

/// Per-example row of an estimation run, as written to the distances CSV.
/// A failed estimate carries `distance = +inf` ("robust at every budget"
/// from the estimator's view) and `success = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRecord {
    pub example_index: usize,
    pub true_label: usize,
    pub predicted_label: usize,
    pub distance: f64,
    pub success: bool,
    pub iterations: usize,
}

impl DistanceRecord {
    pub fn correct(&self) -> bool {
        self.true_label == self.predicted_label
    }
}

/// A method's distance estimates for a whole dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    method: String,
    bound: BoundKind,
    rows: Vec<DistanceRecord>,
}

impl DistanceTable {
    pub fn new(method: impl Into<String>, bound: BoundKind, rows: Vec<DistanceRecord>) -> Self {
        Self {
            method: method.into(),
            bound,
            rows,
        }
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn bound(&self) -> BoundKind {
        self.bound
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[DistanceRecord] {
        &self.rows
    }

    pub fn max_finite_distance(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.distance)
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max)
    }

    /// Fraction of rows whose estimate failed (infinite sentinel).
    pub fn failure_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| !r.success).count() as f64 / self.rows.len() as f64
    }

    /// Write the distances CSV (`inf` encodes the failure sentinel).
    pub fn write_csv(&self, path: impl AsRef<Path>, manifest_id: Option<&str>) -> Result<()> {
        let mut out = Vec::new();
        if let Some(id) = manifest_id {
            writeln!(out, "# manifest: {id}")?;
        }
        writeln!(
            out,
            "example_index,true_label,predicted_label,method,distance,success,iterations"
        )?;
        for r in &self.rows {
            let dist = if r.distance.is_finite() {
                format!("{}", r.distance)
            } else {
                "inf".to_string()
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.example_index, r.true_label, r.predicted_label, self.method, dist, r.success,
                r.iterations
            )?;
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>, bound: BoundKind) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text, bound)
    }

    pub fn parse_csv(text: &str, bound: BoundKind) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::EmptyFile)?;
        let expect = "example_index,true_label,predicted_label,method,distance,success,iterations";
        if header.trim() != expect {
            return Err(Error::CsvFormat {
                line: 1,
                msg: format!("unexpected header {header:?}"),
            });
        }
        let mut rows = Vec::new();
        let mut method = String::new();
        for (line_no, line) in lines {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 7 {
                return Err(Error::CsvFormat {
                    line: line_no + 1,
                    msg: format!("expected 7 cells, found {}", cells.len()),
                });
            }
            let bad = |msg: &str| Error::CsvFormat {
                line: line_no + 1,
                msg: msg.to_string(),
            };
            let distance = if cells[4] == "inf" {
                f64::INFINITY
            } else {
                cells[4].parse().map_err(|_| bad("bad distance"))?
            };
            if method.is_empty() {
                method = cells[3].to_string();
            }
            rows.push(DistanceRecord {
                example_index: cells[0].parse().map_err(|_| bad("bad index"))?,
                true_label: cells[1].parse().map_err(|_| bad("bad true label"))?,
                predicted_label: cells[2].parse().map_err(|_| bad("bad predicted label"))?,
                distance,
                success: cells[5].parse().map_err(|_| bad("bad success flag"))?,
                iterations: cells[6].parse().map_err(|_| bad("bad iterations"))?,
            });
        }
        if rows.is_empty() {
            return Err(Error::EmptyFile);
        }
        Ok(Self {
            method,
            bound,
            rows,
        })
    }
}

/// Survival curve of one partition: the fraction of members correctly
/// classified and strictly further than tau from the boundary, evaluated at
/// every breakpoint. Right-continuous and non-increasing by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessCurve {
    pub partition: String,
    /// Sorted grid starting at 0: the distinct finite member distances.
    pub grid: Vec<f64>,
    /// Curve value at each grid point, in [0, 1].
    pub values: Vec<f64>,
}

impl RobustnessCurve {
    /// Curve value at an arbitrary budget (step lookup).
    pub fn value_at(&self, tau: f64) -> f64 {
        match self.grid.iter().rposition(|&g| g <= tau) {
            Some(i) => self.values[i],
            None => self.values[0],
        }
    }

    /// Exact integral over [0, upper] of the right-continuous step function.
    pub fn auc(&self, upper: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.grid.len() {
            let lo = self.grid[i];
            if lo >= upper {
                break;
            }
            let hi = if i + 1 < self.grid.len() {
                self.grid[i + 1].min(upper)
            } else {
                upper
            };
            if hi > lo {
                total += self.values[i] * (hi - lo);
            }
        }
        total
    }
}

/// Bias scores of one partition against its complement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasScore {
    pub partition: String,
    pub sigma: f64,
    pub auc_in: f64,
    pub auc_out: f64,
    /// RB evaluated at selected budgets.
    pub rb_at: Vec<(f64, f64)>,
}

fn member_rows<'t>(
    table: &'t DistanceTable,
    partition: &Partition,
) -> Result<Vec<&'t DistanceRecord>> {
    if partition.member_indices.is_empty() {
        return Err(Error::EmptyPartition(partition.name.clone()));
    }
    partition
        .member_indices
        .iter()
        .map(|&i| {
            table.rows().get(i).ok_or_else(|| Error::ShapeMismatch {
                context: "partition indices",
                expected: format!("indices below {}", table.len()),
                got: format!("{i}"),
            })
        })
        .collect()
}

fn complement_partition(table: &DistanceTable, partition: &Partition) -> Result<Partition> {
    let mask = partition.mask(table.len());
    let rest: Vec<usize> = (0..table.len()).filter(|&i| !mask[i]).collect();
    if rest.is_empty() {
        return Err(Error::DegenerateComplement);
    }
    Ok(Partition {
        name: format!("not {}", partition.name),
        member_indices: rest,
    })
}

fn curve_from_rows(name: &str, rows: &[&DistanceRecord]) -> RobustnessCurve {
    let denom = rows.len() as f64;
    let mut grid: Vec<f64> = rows
        .iter()
        .filter(|r| r.distance.is_finite())
        .map(|r| r.distance)
        .collect();
    grid.push(0.0);
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    grid.dedup();
    let values = grid
        .iter()
        .map(|&tau| {
            rows.iter()
                .filter(|r| r.correct() && r.distance > tau)
                .count() as f64
                / denom
        })
        .collect();
    RobustnessCurve {
        partition: name.to_string(),
        grid,
        values,
    }
}

/// Survival curve of a partition (denominator is the full member count;
/// misclassified members only ever lower the curve).
pub fn curve(table: &DistanceTable, partition: &Partition) -> Result<RobustnessCurve> {
    let rows = member_rows(table, partition)?;
    Ok(curve_from_rows(&partition.name, &rows))
}

fn conditional_survival(rows: &[&DistanceRecord], tau: f64, side: &'static str) -> Result<f64> {
    let correct: Vec<_> = rows.iter().filter(|r| r.correct()).collect();
    if correct.is_empty() {
        return Err(Error::NoCorrectExamples { side });
    }
    Ok(correct.iter().filter(|r| r.distance > tau).count() as f64 / correct.len() as f64)
}

/// Absolute gap between the partition's and the complement's conditional
/// survival probabilities at budget tau. Symmetric in the two sides and
/// always within [0, 1].
pub fn rb(table: &DistanceTable, partition: &Partition, tau: f64) -> Result<f64> {
    let inside = member_rows(table, partition)?;
    let comp = complement_partition(table, partition)?;
    let outside = member_rows(table, &comp)?;
    let p_in = conditional_survival(&inside, tau, "partition")?;
    let p_out = conditional_survival(&outside, tau, "complement")?;
    Ok((p_in - p_out).abs())
}

/// Relative AUC gap between a partition's curve and its pooled complement's,
/// integrated over [0, max finite distance in the table]. Failed estimates
/// (+inf) survive every budget, which clamps their contribution at the top
/// of the grid. RB is evaluated at `rb_taus` along the way.
pub fn sigma(table: &DistanceTable, partition: &Partition, rb_taus: &[f64]) -> Result<BiasScore> {
    let inside = member_rows(table, partition)?;
    let comp = complement_partition(table, partition)?;
    let outside = member_rows(table, &comp)?;
    let upper = table.max_finite_distance();
    let auc_in = curve_from_rows(&partition.name, &inside).auc(upper);
    let auc_out = curve_from_rows(&comp.name, &outside).auc(upper);
    if auc_out == 0.0 {
        return Err(Error::DegenerateComplement);
    }
    let mut rb_at = Vec::with_capacity(rb_taus.len());
    for &tau in rb_taus {
        rb_at.push((tau, rb(table, partition, tau)?));
    }
    Ok(BiasScore {
        partition: partition.name.clone(),
        sigma: (auc_in - auc_out) / auc_out,
        auc_in,
        auc_out,
        rb_at,
    })
}

/// Sign-agreement statistics between two estimators' scores over the same
/// partitions. Zero only agrees with zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgreementStats {
    pub count_agree: usize,
    pub total: usize,
    pub mean_diff: f64,
    pub var_diff: f64,
}

pub fn sign_agreement(a: &[BiasScore], b: &[BiasScore]) -> Result<AgreementStats> {
    if a.len() != b.len()
        || a.iter()
            .zip(b)
            .any(|(x, y)| x.partition != y.partition)
    {
        return Err(Error::PartitionMismatch);
    }
    let sign = |v: f64| {
        if v > 0.0 {
            1i8
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let count_agree = a
        .iter()
        .zip(b)
        .filter(|(x, y)| sign(x.sigma) == sign(y.sigma))
        .count();
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.sigma - y.sigma).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / diffs.len() as f64;
    Ok(AgreementStats {
        count_agree,
        total: a.len(),
        mean_diff: mean,
        var_diff: var,
    })
}

/// True when the partition's worst-case RB over every budget stays within
/// `tolerance`: the no-bias condition with its implicit "approximately"
/// made explicit.
pub fn no_bias_check(
    table: &DistanceTable,
    partitions: &[Partition],
    tolerance: f64,
) -> Result<Vec<(String, bool)>> {
    let mut grid: Vec<f64> = table
        .rows()
        .iter()
        .map(|r| r.distance)
        .filter(|d| d.is_finite())
        .collect();
    grid.push(0.0);
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    grid.dedup();
    partitions
        .iter()
        .map(|p| {
            let mut worst = 0.0_f64;
            for &tau in &grid {
                worst = worst.max(rb(table, p, tau)?);
            }
            Ok((p.name.clone(), worst <= tolerance))
        })
        .collect()
}

/// Append one method's curves to a plot-ready CSV (partition, tau, value,
/// method).
pub fn write_curves_csv(
    curves: &[(String, RobustnessCurve)],
    path: impl AsRef<Path>,
    manifest_id: Option<&str>,
) -> Result<()> {
    let mut out = Vec::new();
    if let Some(id) = manifest_id {
        writeln!(out, "# manifest: {id}")?;
    }
    writeln!(out, "partition,tau,value,method")?;
    for (method, c) in curves {
        for (tau, v) in c.grid.iter().zip(&c.values) {
            writeln!(out, "{},{},{},{}", c.partition, tau, v, method)?;
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reload a curves CSV, grouped back into (method, curve) runs in file
/// order.
pub fn read_curves_csv(path: impl AsRef<Path>) -> Result<Vec<(String, RobustnessCurve)>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::EmptyFile)?;
    if header.trim() != "partition,tau,value,method" {
        return Err(Error::CsvFormat {
            line: 1,
            msg: format!("unexpected header {header:?}"),
        });
    }
    let mut out: Vec<(String, RobustnessCurve)> = Vec::new();
    for (line_no, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |msg: &str| Error::CsvFormat {
            line: line_no + 1,
            msg: msg.to_string(),
        };
        if cells.len() != 4 {
            return Err(bad("expected 4 cells"));
        }
        let tau: f64 = cells[1].parse().map_err(|_| bad("bad tau"))?;
        let value: f64 = cells[2].parse().map_err(|_| bad("bad value"))?;
        let same_run = out.last().is_some_and(|(m, c)| {
            m == cells[3] && c.partition == cells[0]
        });
        if !same_run {
            out.push((
                cells[3].to_string(),
                RobustnessCurve {
                    partition: cells[0].to_string(),
                    grid: Vec::new(),
                    values: Vec::new(),
                },
            ));
        }
        let (_, curve) = out.last_mut().expect("pushed above");
        curve.grid.push(tau);
        curve.values.push(value);
    }
    if out.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(out)
}

//! Time-indexed point sets and the shared `instance,time,x,y` CSV format.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One time step: a label and an N × d point matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub time_label: String,
    pub points: DMatrix<f64>,
}

/// Ordered, time-stamped point sets for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSetSeries {
    instance_label: String,
    steps: Vec<Step>,
}

impl VectorSetSeries {
    pub fn new(instance_label: impl Into<String>, steps: Vec<Step>) -> Result<Self> {
        let instance_label = instance_label.into();
        let first = steps
            .first()
            .ok_or_else(|| Error::invalid(format!("series '{instance_label}' has no steps")))?;
        let dim = first.points.ncols();
        if dim == 0 {
            return Err(Error::invalid(format!("series '{instance_label}' has zero-dimensional points")));
        }
        let mut seen = HashSet::new();
        for s in &steps {
            if s.points.ncols() != dim {
                return Err(Error::invalid(format!(
                    "series '{instance_label}': step '{}' has dimension {}, expected {dim}",
                    s.time_label,
                    s.points.ncols()
                )));
            }
            if !seen.insert(s.time_label.as_str()) {
                return Err(Error::invalid(format!(
                    "series '{instance_label}': duplicate time label '{}'",
                    s.time_label
                )));
            }
        }
        Ok(VectorSetSeries {
            instance_label,
            steps,
        })
    }

    pub fn instance_label(&self) -> &str {
        &self.instance_label
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.steps[0].points.ncols()
    }

    pub fn total_points(&self) -> usize {
        self.steps.iter().map(|s| s.points.nrows()).sum()
    }

    /// All points from all steps stacked in step order.
    pub fn pooled(&self) -> DMatrix<f64> {
        pool(std::slice::from_ref(self))
    }

    pub fn map_points(&self, mut f: impl FnMut(&DMatrix<f64>) -> DMatrix<f64>) -> Result<Self> {
        let steps = self
            .steps
            .iter()
            .map(|s| Step {
                time_label: s.time_label.clone(),
                points: f(&s.points),
            })
            .collect();
        VectorSetSeries::new(self.instance_label.clone(), steps)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.instance_label = label.into();
        self
    }
}

/// Stacks every point of every series.
pub fn pool(series: &[VectorSetSeries]) -> DMatrix<f64> {
    let dim = series.first().map_or(0, |s| s.dim());
    let n: usize = series.iter().map(|s| s.total_points()).sum();
    let mut out = DMatrix::zeros(n, dim);
    let mut r = 0;
    for step in series.iter().flat_map(|s| &s.steps) {
        out.rows_mut(r, step.points.nrows()).copy_from(&step.points);
        r += step.points.nrows();
    }
    out
}

/// Axis-aligned bounds of the pooled points, each side widened by
/// `margin` times the extent on that axis.
pub fn bounding_box(points: &DMatrix<f64>, margin: f64) -> Result<Vec<(f64, f64)>> {
    if points.nrows() == 0 {
        return Err(Error::insufficient("bounding box of an empty point set"));
    }
    Ok((0..points.ncols())
        .map(|c| {
            let col = points.column(c);
            let (lo, hi) = (col.min(), col.max());
            let mut pad = margin * (hi - lo);
            if pad == 0.0 {
                pad = margin.max(0.5);
            }
            (lo - pad, hi + pad)
        })
        .collect())
}

fn coordinate_headers(dim: usize) -> Vec<String> {
    if dim == 2 {
        vec!["x".into(), "y".into()]
    } else {
        (1..=dim).map(|i| format!("x{i}")).collect()
    }
}

/// Writes series as `instance,time,x,y` rows (`x1..xd` columns when d ≠ 2).
pub fn write_series_csv(path: &Path, series: &[VectorSetSeries]) -> Result<()> {
    let dim = series
        .first()
        .map(|s| s.dim())
        .ok_or_else(|| Error::invalid("no series to write"))?;
    if series.iter().any(|s| s.dim() != dim) {
        return Err(Error::invalid("series in one file must share dimensionality"));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut header = vec!["instance".to_string(), "time".to_string()];
    header.extend(coordinate_headers(dim));
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for s in series {
        for step in &s.steps {
            for r in 0..step.points.nrows() {
                write!(out, "{},{}", s.instance_label, step.time_label).map_err(io)?;
                for c in 0..dim {
                    write!(out, ",{}", step.points[(r, c)]).map_err(io)?;
                }
                writeln!(out).map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)
}

/// Reads a series CSV. Instances and time steps keep first-appearance order.
pub fn read_series_csv(path: &Path) -> Result<Vec<VectorSetSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| csv_err(path, source))?;
    let headers = reader.headers().map_err(|source| csv_err(path, source))?.clone();
    if headers.len() < 3 || &headers[0] != "instance" || &headers[1] != "time" {
        return Err(Error::format(path, "expected header 'instance,time,<coordinates...>'"));
    }
    let dim = headers.len() - 2;
    // (instance, [(time, flat coords)])
    let mut groups: Vec<(String, Vec<(String, Vec<f64>)>)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|source| csv_err(path, source))?;
        let (inst, time) = (&record[0], &record[1]);
        let coords = (2..record.len())
            .map(|i| {
                record[i].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::format(path, format!("row {}: bad coordinate '{}'", line + 2, &record[i]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let g = match groups.iter().position(|(name, _)| name == inst) {
            Some(i) => i,
            None => {
                groups.push((inst.to_string(), Vec::new()));
                groups.len() - 1
            }
        };
        let steps = &mut groups[g].1;
        let t = match steps.iter().position(|(name, _)| name == time) {
            Some(i) => i,
            None => {
                steps.push((time.to_string(), Vec::new()));
                steps.len() - 1
            }
        };
        steps[t].1.extend(coords);
    }
    if groups.is_empty() {
        return Err(Error::format(path, "no data rows"));
    }
    groups
        .into_iter()
        .map(|(inst, steps)| {
            let steps = steps
                .into_iter()
                .map(|(time_label, flat)| Step {
                    points: DMatrix::from_row_slice(flat.len() / dim, dim, &flat),
                    time_label,
                })
                .collect();
            VectorSetSeries::new(inst, steps)
        })
        .collect()
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

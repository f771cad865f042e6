//! Loading real-world point data: crime incident CSVs and precomputed
//! embedding matrices.

use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use nalgebra::DMatrix;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rff::{read_json, write_json};
use crate::series::{Step, VectorSetSeries};
use crate::trajectory::fit_pca_model;
use crate::{seeds, serial};

/// Column names of the crime CSV. Defaults follow the Chicago data portal export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrimeColumns {
    pub date: String,
    pub latitude: String,
    pub longitude: String,
    pub primary_type: String,
}

impl Default for CrimeColumns {
    fn default() -> Self {
        CrimeColumns {
            date: "Date".into(),
            latitude: "Latitude".into(),
            longitude: "Longitude".into(),
            primary_type: "Primary Type".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrimeRecord {
    pub timestamp: NaiveDateTime,
    pub latitude: f64,
    pub longitude: f64,
    pub primary_type: String,
}

#[derive(Debug, Clone, Default)]
pub struct CrimeLoad {
    pub records: Vec<CrimeRecord>,
    /// Matching rows dropped for a missing or out-of-range coordinate.
    pub skipped_coordinates: usize,
    /// Matching rows dropped for an unparseable date.
    pub skipped_dates: usize,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = [
        "%m/%d/%Y %I:%M:%S %p",
        "%m/%d/%Y %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S",
    ];
    let s = s.trim();
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
}

fn parse_coordinate(s: &str, limit: f64) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite() && v.abs() <= limit)
}

/// Rows whose primary type equals `type_filter` (case-insensitive).
pub fn load_crime_csv(path: &Path, type_filter: &str, columns: &CrimeColumns) -> Result<CrimeLoad> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
    }
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::format(path, format!("missing required column '{name}'")))
    };
    let (date_i, lat_i, lon_i, type_i) = (
        col(&columns.date)?,
        col(&columns.latitude)?,
        col(&columns.longitude)?,
        col(&columns.primary_type)?,
    );
    let wanted = type_filter.trim();
    let mut load = CrimeLoad::default();
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let kind = row.get(type_i).unwrap_or("").trim();
        if !kind.eq_ignore_ascii_case(wanted) {
            continue;
        }
        let lat = parse_coordinate(row.get(lat_i).unwrap_or(""), 90.0);
        let lon = parse_coordinate(row.get(lon_i).unwrap_or(""), 180.0);
        let (Some(latitude), Some(longitude)) = (lat, lon) else {
            load.skipped_coordinates += 1;
            continue;
        };
        let Some(timestamp) = parse_timestamp(row.get(date_i).unwrap_or("")) else {
            load.skipped_dates += 1;
            continue;
        };
        load.records.push(CrimeRecord {
            timestamp,
            latitude,
            longitude,
            primary_type: kind.to_string(),
        });
    }
    if load.records.is_empty() {
        return Err(Error::insufficient(format!(
            "no usable rows of type '{wanted}' in {}",
            path.display()
        )));
    }
    Ok(load)
}

/// Samples `per_year` distinct records from each year. Points are
/// `(longitude, latitude)`; steps are labeled by year.
pub fn sample_periods(
    label: &str,
    records: &[CrimeRecord],
    years: &[i32],
    per_year: usize,
    seed: u64,
) -> Result<VectorSetSeries> {
    if years.is_empty() {
        return Err(Error::invalid("no years requested"));
    }
    if per_year == 0 {
        return Err(Error::invalid("per_year must be at least 1"));
    }
    let steps = years
        .iter()
        .map(|&year| {
            let pool: Vec<&CrimeRecord> = records.iter().filter(|r| r.timestamp.year() == year).collect();
            if pool.len() < per_year {
                return Err(Error::insufficient(format!(
                    "year {year} has {} records of '{label}', {per_year} requested",
                    pool.len()
                )));
            }
            let mut rng = seeds::rng(seeds::derive(seed, &year.to_string()));
            let mut picked = index::sample(&mut rng, pool.len(), per_year).into_vec();
            picked.sort_unstable();
            let mut points = DMatrix::zeros(per_year, 2);
            for (r, &i) in picked.iter().enumerate() {
                points[(r, 0)] = pool[i].longitude;
                points[(r, 1)] = pool[i].latitude;
            }
            Ok(Step {
                time_label: year.to_string(),
                points,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    VectorSetSeries::new(label, steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormalizeMode {
    /// One scale for all axes: the mean of the per-axis standard deviations.
    #[default]
    CenterScaleIso,
    CenterScalePerAxis,
}

/// Pooled centering and scaling, kept for mapping results back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    #[serde(with = "serial::vec_f64_17")]
    pub center: Vec<f64>,
    #[serde(with = "serial::vec_f64_17")]
    pub scale: Vec<f64>,
}

impl NormalizationParams {
    pub fn apply(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(points.nrows(), points.ncols(), |r, c| {
            (points[(r, c)] - self.center[c]) / self.scale[c]
        })
    }

    pub fn invert(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(points.nrows(), points.ncols(), |r, c| {
            points[(r, c)] * self.scale[c] + self.center[c]
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// Result of [`normalize`]; `warnings` lists axes whose scale was forced to 1.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub series: VectorSetSeries,
    pub params: NormalizationParams,
    pub warnings: Vec<String>,
}

/// Centers on the pooled mean and divides by the pooled (population)
/// standard deviation.
pub fn normalize(series: &VectorSetSeries, mode: NormalizeMode) -> Result<Normalized> {
    let pooled = series.pooled();
    let n = pooled.nrows();
    if n < 2 {
        return Err(Error::insufficient("normalization needs at least 2 points"));
    }
    let d = pooled.ncols();
    let center: Vec<f64> = (0..d).map(|c| pooled.column(c).sum() / n as f64).collect();
    let stds: Vec<f64> = (0..d)
        .map(|c| {
            let var = pooled.column(c).iter().map(|x| (x - center[c]).powi(2)).sum::<f64>() / n as f64;
            var.sqrt()
        })
        .collect();
    if stds.iter().all(|&s| s == 0.0) {
        return Err(Error::insufficient(format!(
            "all points of '{}' are identical",
            series.instance_label()
        )));
    }
    let mut warnings = Vec::new();
    let scale = match mode {
        NormalizeMode::CenterScaleIso => vec![stds.iter().sum::<f64>() / d as f64; d],
        NormalizeMode::CenterScalePerAxis => stds
            .iter()
            .enumerate()
            .map(|(axis, &s)| {
                if s > 0.0 {
                    s
                } else {
                    let msg = format!("axis {axis} of '{}' has zero variance; scale set to 1", series.instance_label());
                    log::warn!("{msg}");
                    warnings.push(msg);
                    1.0
                }
            })
            .collect(),
    };
    let params = NormalizationParams { center, scale };
    Ok(Normalized {
        series: series.map_points(|p| params.apply(p))?,
        params,
        warnings,
    })
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let mut flat = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let parsed: Option<Vec<f64>> = rec.iter().map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite())).collect();
        let values = match parsed {
            Some(v) => v,
            // A non-numeric first line is a header.
            None if line == 0 => continue,
            None => return Err(Error::format(path, format!("line {}: non-numeric value", line + 1))),
        };
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(Error::format(
                    path,
                    format!("line {}: {} columns, expected {c}", line + 1, values.len()),
                ))
            }
            _ => {}
        }
        flat.extend(values);
        rows += 1;
    }
    let cols = cols.filter(|&c| c > 0 && rows > 0).ok_or_else(|| Error::format(path, "no data rows"))?;
    Ok(DMatrix::from_row_slice(rows, cols, &flat))
}

/// One step per file, labeled by file stem (or position when stems repeat).
pub fn load_embedding_sets(label: &str, paths: &[PathBuf]) -> Result<VectorSetSeries> {
    if paths.is_empty() {
        return Err(Error::invalid("no embedding files given"));
    }
    let mut steps: Vec<Step> = Vec::with_capacity(paths.len());
    let mut first: Option<(&Path, usize)> = None;
    for (i, path) in paths.iter().enumerate() {
        let points = read_matrix(path)?;
        match first {
            None => first = Some((path, points.ncols())),
            Some((p0, d0)) if d0 != points.ncols() => {
                return Err(Error::invalid(format!(
                    "embedding dimension mismatch: {} has {d0} columns, {} has {}",
                    p0.display(),
                    path.display(),
                    points.ncols()
                )))
            }
            _ => {}
        }
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| (i + 1).to_string());
        let time_label = if steps.iter().any(|s| s.time_label == stem) {
            format!("{stem}#{}", i + 1)
        } else {
            stem
        };
        steps.push(Step { time_label, points });
    }
    VectorSetSeries::new(label, steps)
}

/// Reduced series plus the explained-variance share of each kept axis.
#[derive(Debug, Clone)]
pub struct Reduced {
    pub series: VectorSetSeries,
    pub explained_variance: Vec<f64>,
}

/// PCA fitted on the pooled points of all periods, each point projected
/// onto the leading `target_dim` components.
pub fn reduce_embeddings(series: &VectorSetSeries, target_dim: usize) -> Result<Reduced> {
    let d = series.dim();
    let pooled = series.pooled();
    if target_dim == 0 || target_dim > d {
        return Err(Error::invalid(format!("target dimension {target_dim} not in 1..={d}")));
    }
    if pooled.nrows() < target_dim.max(2) {
        return Err(Error::insufficient(format!(
            "{} pooled points cannot span {target_dim} dimensions",
            pooled.nrows()
        )));
    }
    let rows: Vec<Vec<f64>> = pooled.row_iter().map(|r| r.iter().copied().collect()).collect();
    let model = fit_pca_model(&rows)?;
    let axes: Vec<usize> = (0..target_dim).collect();
    let mut projected = Ok(());
    let series = series.map_points(|p| {
        let mut out = DMatrix::zeros(p.nrows(), target_dim);
        for r in 0..p.nrows() {
            let row: Vec<f64> = p.row(r).iter().copied().collect();
            match model.project(&row, &axes) {
                Ok(c) => out.row_mut(r).copy_from_slice(&c),
                Err(e) => projected = Err(e),
            }
        }
        out
    })?;
    projected?;
    let ev = model.explained_variance();
    Ok(Reduced {
        series,
        explained_variance: if ev.is_empty() { vec![0.0; target_dim] } else { ev[..target_dim].to_vec() },
    })
}

/// Years `start, start+step, ...` up to and including `end`.
pub fn year_range(start: i32, end: i32, step: i32) -> Result<Vec<i32>> {
    if step <= 0 || end < start {
        return Err(Error::invalid(format!("bad year range {start}..={end} step {step}")));
    }
    Ok((start..=end).step_by(step as usize).collect())
}

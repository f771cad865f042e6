//! Subcommand implementations. Each is a pure function of its config, its
//! input files and the master seed.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use vecset_core::fitfile::{bounds_pairs, FitFile};
use vecset_core::ingest::{self, CrimeColumns, NormalizeMode};
use vecset_core::synthetic;
use vecset_core::trajectory::{fit_pca, TrajectoryProjection};
use vecset_core::{
    evaluate_grid, fit_series, rff, seeds, series, DensityFit, FeatureBasis, GridSpec, NoiseConfig,
    VectorSetSeries,
};

use crate::config::{ConfigError, PipelineConfig, Sigma, YearRange};

/// Rows used for the median-heuristic bandwidth.
const MEDIAN_SAMPLE: usize = 2000;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// File-name-safe form of a label.
pub fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[derive(Serialize)]
struct SyntheticEntry {
    label: String,
    movement: String,
    direction_angle: f64,
    seed: u64,
    file: String,
}

/// Writes the twelve synthetic series and a manifest of their seeds.
pub fn gen_synthetic(out: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    create_dir(out)?;
    let mut paths = Vec::new();
    let mut entries = Vec::new();
    for spec in synthetic::suite_specs(seed) {
        let s = synthetic::generate(&spec)?;
        let file = format!("{}.csv", file_stem(&spec.label));
        let path = out.join(&file);
        series::write_series_csv(&path, std::slice::from_ref(&s))?;
        entries.push(SyntheticEntry {
            label: spec.label.clone(),
            movement: spec.movement.name().to_string(),
            direction_angle: spec.direction_angle,
            seed: spec.seed,
            file,
        });
        paths.push(path);
    }
    #[derive(Serialize)]
    struct Manifest {
        suite_seed: u64,
        series: Vec<SyntheticEntry>,
    }
    write_json(
        &out.join("synthetic_manifest.json"),
        &Manifest {
            suite_seed: seed,
            series: entries,
        },
    )?;
    Ok(paths)
}

pub fn read_all_series(paths: &[PathBuf]) -> Result<Vec<VectorSetSeries>> {
    let mut all: Vec<VectorSetSeries> = Vec::new();
    for p in paths {
        if !p.exists() {
            return Err(vecset_core::Error::Io {
                path: p.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "series file not found"),
            }
            .into());
        }
        for s in series::read_series_csv(p)? {
            if all.iter().any(|o| o.instance_label() == s.instance_label()) {
                bail!(vecset_core::Error::InvalidArgument(format!(
                    "instance '{}' appears in more than one input",
                    s.instance_label()
                )));
            }
            all.push(s);
        }
    }
    if all.is_empty() {
        bail!(ConfigError("no series given".into()));
    }
    Ok(all)
}

pub struct FitOutput {
    pub basis_path: PathBuf,
    pub fit_paths: Vec<PathBuf>,
}

/// Shared basis over all inputs, then one fit file per series.
pub fn fit(cfg: &PipelineConfig, all: &[VectorSetSeries], out: &Path) -> Result<FitOutput> {
    create_dir(out)?;
    let dim = all[0].dim();
    if let Some(s) = all.iter().find(|s| s.dim() != dim) {
        bail!(vecset_core::Error::InvalidArgument(format!(
            "series '{}' is {}-D, expected {dim}-D",
            s.instance_label(),
            s.dim()
        )));
    }
    let pooled = series::pool(all);
    let sigma = match cfg.basis.sigma {
        Sigma::Fixed(s) => s,
        Sigma::Named(_) => rff::median_heuristic_sigma(&pooled, MEDIAN_SAMPLE)?,
    };
    let basis = FeatureBasis::sample(
        dim,
        cfg.basis.k,
        sigma,
        cfg.basis.phase_range,
        seeds::derive(cfg.seed, "basis"),
    )?;
    let basis_path = out.join("basis.json");
    basis.save(&basis_path)?;
    let common = NoiseConfig::pooled(all, cfg.noise.margin, cfg.noise.ratio, 0)?;
    let mut fit_paths = Vec::with_capacity(all.len());
    for s in all {
        let label = s.instance_label();
        let noise = NoiseConfig {
            seed: seeds::derive_path(cfg.seed, &["noise", label]),
            ..common.clone()
        };
        let mh = cfg.mh.with_seed(seeds::derive_path(cfg.seed, &["mh", label]));
        let fits = fit_series(s, &basis, &noise, &mh).with_context(|| format!("fitting '{label}'"))?;
        for (f, step) in fits.iter().zip(s.steps()) {
            log::info!(
                "{label} {}: acceptance {:.3}",
                step.time_label,
                f.diagnostics.acceptance_rate
            );
        }
        let file = FitFile::from_fits(s, &fits, &noise, &mh)?;
        let path = out.join(format!("{}.fit.json", file_stem(label)));
        file.save(&path)?;
        fit_paths.push(path);
    }
    Ok(FitOutput {
        basis_path,
        fit_paths,
    })
}

pub fn load_fits(paths: &[PathBuf]) -> Result<Vec<FitFile>> {
    let fits: Vec<FitFile> = paths
        .iter()
        .map(|p| FitFile::load(p).with_context(|| format!("loading fit {}", p.display())))
        .collect::<Result<_>>()?;
    if let Some(f) = fits.iter().find(|f| f.basis_id != fits[0].basis_id) {
        bail!(vecset_core::Error::InvalidArgument(format!(
            "fit '{}' uses a different basis than '{}'",
            f.instance, fits[0].instance
        )));
    }
    Ok(fits)
}

pub struct ProjectOutput {
    pub projection: TrajectoryProjection,
    pub trajectory_path: PathBuf,
    pub sweep_paths: Vec<PathBuf>,
}

fn write_trajectory(path: &Path, rows: &[(&str, &str, Vec<f64>)], axes: &[usize]) -> Result<()> {
    let mut text = String::from("instance,time");
    for a in axes {
        text.push_str(&format!(",pc{a}"));
    }
    text.push('\n');
    for (inst, time, coords) in rows {
        text.push_str(&format!("{inst},{time}"));
        for c in coords {
            text.push_str(&format!(",{c}"));
        }
        text.push('\n');
    }
    write_text(path, &text)
}

/// Joint PCA over every weight vector in `fits`; `axes` are 1-based.
pub fn project(
    cfg: &PipelineConfig,
    fits: &[FitFile],
    basis: Option<&FeatureBasis>,
    out: &Path,
) -> Result<ProjectOutput> {
    create_dir(out)?;
    let weights: Vec<Vec<f64>> = fits
        .iter()
        .flat_map(|f| f.steps.iter().map(|s| s.weights.clone()))
        .collect();
    let proj = fit_pca(&weights)?;
    let axes: Vec<usize> = cfg.projection.axes.iter().map(|a| a - 1).collect();
    if let Some(&a) = cfg.projection.axes.iter().find(|&&a| a > proj.components.len()) {
        bail!(ConfigError(format!(
            "axis {a} requested but only {} components exist",
            proj.components.len()
        )));
    }
    let mut rows = Vec::with_capacity(weights.len());
    let mut i = 0;
    for f in fits {
        for s in &f.steps {
            let coords = axes.iter().map(|&a| proj.coords[i][a]).collect();
            rows.push((f.instance.as_str(), s.time.as_str(), coords));
            i += 1;
        }
    }
    let trajectory_path = out.join("trajectory.csv");
    write_trajectory(&trajectory_path, &rows, &cfg.projection.axes)?;
    for f in fits {
        let mine: Vec<_> = rows.iter().filter(|r| r.0 == f.instance).cloned().collect();
        let path = out.join(format!("trajectory_{}.csv", file_stem(&f.instance)));
        write_trajectory(&path, &mine, &cfg.projection.axes)?;
    }
    proj.save(&out.join("projection.json"))?;
    let mut ev = String::from("component,eigenvalue,explained_variance\n");
    let shares = proj.explained_variance();
    for (j, l) in proj.eigenvalues.iter().enumerate() {
        ev.push_str(&format!("{},{l},{}\n", j + 1, shares.get(j).copied().unwrap_or(0.0)));
    }
    write_text(&out.join("explained_variance.csv"), &ev)?;

    let mut sweep_paths = Vec::new();
    if cfg.projection.axis_sweep {
        let basis = basis.ok_or_else(|| ConfigError("--axis-sweep needs the basis file".into()))?;
        let dir = out.join("sweep");
        create_dir(&dir)?;
        let bounds = bounds_pairs(&fits[0].noise_box)?;
        let spec = GridSpec::new(bounds, vec![cfg.grid.resolution; basis.dim()])?;
        let mut index = String::from("axis,index,coord,csv,pgm\n");
        for (&axis1, &axis0) in cfg.projection.axes.iter().zip(&axes) {
            for (n, pos) in proj.sweep_positions(axis0, cfg.projection.sweep_spacing)?.into_iter().enumerate() {
                let w = proj.inverse_map(&[pos], &[axis0])?;
                let grid = evaluate_grid(&DensityFit::from_weights(w, basis)?, basis, &spec)?;
                let stem = format!("pc{axis1}_{n:03}");
                let (csv, pgm) = (dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.pgm")));
                grid.write_csv(&csv)?;
                grid.write_pgm(&pgm)?;
                index.push_str(&format!("{axis1},{n},{pos},{stem}.csv,{stem}.pgm\n"));
                sweep_paths.push(csv);
                sweep_paths.push(pgm);
            }
        }
        let idx = dir.join("sweep_index.csv");
        write_text(&idx, &index)?;
        sweep_paths.push(idx);
    }
    Ok(ProjectOutput {
        projection: proj,
        trajectory_path,
        sweep_paths,
    })
}

pub struct HeatmapOutput {
    pub csv: PathBuf,
    pub pgm: PathBuf,
    pub modes: usize,
}

/// Grid over the step's data bounds widened by the grid margin.
pub fn heatmap(cfg: &PipelineConfig, fit: &FitFile, basis: &FeatureBasis, step: &str, out: &Path) -> Result<HeatmapOutput> {
    create_dir(out)?;
    let density = fit.density_fit(step, basis)?;
    let record = fit.step(step)?;
    let bounds = bounds_pairs(&record.data_bounds)?
        .into_iter()
        .map(|(lo, hi)| {
            let pad = if hi > lo { cfg.grid.margin * (hi - lo) } else { cfg.grid.margin.max(0.5) };
            (lo - pad, hi + pad)
        })
        .collect();
    let spec = GridSpec::new(bounds, vec![cfg.grid.resolution; basis.dim()])?;
    let grid = evaluate_grid(&density, basis, &spec)?;
    let stem = format!("{}_{}", file_stem(&fit.instance), file_stem(step));
    let (csv, pgm) = (out.join(format!("{stem}.csv")), out.join(format!("{stem}.pgm")));
    grid.write_csv(&csv)?;
    grid.write_pgm(&pgm)?;
    Ok(HeatmapOutput {
        csv,
        pgm,
        modes: grid.count_modes(cfg.grid.mode_threshold)?,
    })
}

pub fn parse_years(s: &str) -> Result<YearRange> {
    let parts: Vec<i32> = s
        .split(':')
        .map(|p| p.trim().parse::<i32>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| ConfigError(format!("years must look like 2001:2019:3, got '{s}'")))?;
    match parts.as_slice() {
        [start, end, step] => Ok(YearRange { start: *start, end: *end, step: *step }),
        [start, end] => Ok(YearRange { start: *start, end: *end, step: 1 }),
        _ => bail!(ConfigError(format!("years must look like 2001:2019:3, got '{s}'"))),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn ingest_crime(
    input: &Path,
    types: &[String],
    years: &YearRange,
    per_year: usize,
    columns: &CrimeColumns,
    mode: NormalizeMode,
    seed: u64,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    create_dir(out)?;
    let years = ingest::year_range(years.start, years.end, years.step)?;
    let mut paths = Vec::new();
    for t in types {
        let load = ingest::load_crime_csv(input, t, columns).with_context(|| format!("loading '{t}'"))?;
        if load.skipped_coordinates + load.skipped_dates > 0 {
            log::warn!(
                "{t}: skipped {} rows without coordinates and {} with bad dates",
                load.skipped_coordinates,
                load.skipped_dates
            );
        }
        let sampled = ingest::sample_periods(t, &load.records, &years, per_year, seeds::derive_path(seed, &["ingest", t]))?;
        let norm = ingest::normalize(&sampled, mode)?;
        let stem = file_stem(t);
        let path = out.join(format!("{stem}.csv"));
        series::write_series_csv(&path, std::slice::from_ref(&norm.series))?;
        norm.params.save(&out.join(format!("{stem}.norm.json")))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Reduces one word's period embeddings jointly, then centers and scales them.
pub fn ingest_embeddings(word: &str, files: &[PathBuf], target_dim: usize, out: &Path) -> Result<PathBuf> {
    create_dir(out)?;
    let raw = ingest::load_embedding_sets(word, files)?;
    let reduced = ingest::reduce_embeddings(&raw, target_dim)?;
    let norm = ingest::normalize(&reduced.series, NormalizeMode::CenterScaleIso)?;
    let stem = file_stem(word);
    let path = out.join(format!("{stem}.csv"));
    series::write_series_csv(&path, std::slice::from_ref(&norm.series))?;
    #[derive(Serialize)]
    struct Sidecar<'a> {
        word: &'a str,
        explained_variance: &'a [f64],
        normalization: &'a ingest::NormalizationParams,
    }
    write_json(
        &out.join(format!("{stem}.reduce.json")),
        &Sidecar {
            word,
            explained_variance: &reduced.explained_variance,
            normalization: &norm.params,
        },
    )?;
    Ok(path)
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn walk(dir: &Path, acc: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, acc)?;
        } else {
            acc.push(p);
        }
    }
    Ok(())
}

/// Runs source → fit → project → heatmaps and writes `manifest.json`.
pub fn pipeline(cfg: &PipelineConfig) -> Result<PathBuf> {
    use crate::config::Source;
    cfg.validate()?;
    let out = &cfg.out;
    create_dir(out)?;
    let series_dir = out.join("series");
    let series_paths = match &cfg.source {
        Source::Synthetic => gen_synthetic(&series_dir, seeds::derive(cfg.seed, "synthetic")).context("stage gen-synthetic")?,
        Source::Crime {
            path,
            types,
            years,
            per_year,
            columns,
            normalize,
        } => ingest_crime(path, types, years, *per_year, columns, *normalize, cfg.seed, &series_dir).context("stage ingest-crime")?,
        Source::Embeddings { words, target_dim } => words
            .iter()
            .map(|(w, files)| ingest_embeddings(w, files, *target_dim, &series_dir))
            .collect::<Result<Vec<_>>>()
            .context("stage ingest-embeddings")?,
        Source::Series { paths } => paths.clone(),
    };
    let all = read_all_series(&series_paths).context("stage read-series")?;
    let fitted = fit(cfg, &all, &out.join("fits")).context("stage fit")?;
    let basis = FeatureBasis::load(&fitted.basis_path)?;
    let fits = load_fits(&fitted.fit_paths)?;
    project(cfg, &fits, Some(&basis), &out.join("projection")).context("stage project")?;

    let heat_dir = out.join("heatmaps");
    let mut modes = String::from("instance,time,modes\n");
    if basis.dim() == 2 {
        for f in &fits {
            for s in &f.steps {
                let h = heatmap(cfg, f, &basis, &s.time, &heat_dir).context("stage heatmap")?;
                modes.push_str(&format!("{},{},{}\n", f.instance, s.time, h.modes));
            }
        }
        write_text(&out.join("modes.csv"), &modes)?;
    }

    let manifest_path = out.join("manifest.json");
    let mut files = Vec::new();
    walk(out, &mut files)?;
    let mut artifacts = Vec::new();
    for p in files.iter().filter(|p| **p != manifest_path) {
        let rel = p.strip_prefix(out).unwrap_or(p).to_string_lossy().replace('\\', "/");
        artifacts.push(Artifact {
            bytes: std::fs::metadata(p)?.len(),
            sha256: sha256_hex(p)?,
            path: rel,
        });
    }
    let mut seeds_used = BTreeMap::new();
    seeds_used.insert("master".to_string(), cfg.seed);
    seeds_used.insert("basis".to_string(), seeds::derive(cfg.seed, "basis"));
    for s in &all {
        let l = s.instance_label();
        seeds_used.insert(format!("noise/{l}"), seeds::derive_path(cfg.seed, &["noise", l]));
        seeds_used.insert(format!("mh/{l}"), seeds::derive_path(cfg.seed, &["mh", l]));
    }
    let mut echoed = cfg.clone();
    echoed.out = PathBuf::from(".");
    let manifest = Manifest {
        tool: "vecset",
        version: env!("CARGO_PKG_VERSION"),
        config: &echoed,
        seeds: seeds_used,
        artifacts,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    let mut f = std::fs::File::create(&manifest_path)?;
    f.write_all(text.as_bytes())?;
    Ok(manifest_path)
}

#[derive(Serialize)]
struct Artifact {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a PipelineConfig,
    seeds: BTreeMap<String, u64>,
    artifacts: Vec<Artifact>,
}

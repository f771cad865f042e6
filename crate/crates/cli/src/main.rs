//! `vecset`: fit, project and render densities of evolving vector sets.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use vecset_core::fitfile::FitFile;
use vecset_core::ingest::{CrimeColumns, NormalizeMode};
use vecset_core::{ErrorKind, FeatureBasis};

use crate::config::{parse_axes, ConfigError, PipelineConfig, Sigma, Source};

#[derive(Parser, Debug)]
#[command(name = "vecset", version, about = "Densities and trajectories of evolving vector sets")]
struct Cli {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true, env = "VECSET_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, env = "VECSET_SEED")]
    seed: Option<u64>,
    /// Number of random Fourier features.
    #[arg(long, global = true, env = "VECSET_K")]
    k: Option<usize>,
    /// Frequency scale: a positive number or "median".
    #[arg(long, global = true, env = "VECSET_SIGMA")]
    sigma: Option<String>,
    /// 1-based principal axes, e.g. "1,2" or "3,5".
    #[arg(long, global = true, env = "VECSET_AXES")]
    axes: Option<String>,
    /// Render inverse-mapped heatmaps along each requested axis.
    #[arg(long, global = true, env = "VECSET_AXIS_SWEEP")]
    axis_sweep: bool,
    /// Grid cells per axis.
    #[arg(long, global = true, env = "VECSET_GRID_RES")]
    grid_res: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "VECSET_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the Shift/Converge/Diverge suite as series CSV files.
    GenSynthetic,
    /// Fit one density per time step for every series.
    Fit {
        #[arg(required = true)]
        series: Vec<PathBuf>,
    },
    /// Joint PCA over the weight vectors of the given fit files.
    Project {
        #[arg(required = true)]
        fits: Vec<PathBuf>,
        /// Basis file; defaults to basis.json beside the first fit.
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    /// Render one fitted step as CSV and PGM.
    Heatmap {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        step: String,
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    /// Run source, fit, project and heatmap stages end to end.
    Pipeline,
    /// Sample and normalize crime records into series CSV files.
    IngestCrime {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated crime types.
        #[arg(long, value_delimiter = ',', required = true)]
        types: Vec<String>,
        /// start:end:step, inclusive.
        #[arg(long, default_value = "2001:2019:3")]
        years: String,
        #[arg(long, default_value_t = 200)]
        per_year: usize,
        /// "iso" or "per-axis".
        #[arg(long, default_value = "iso")]
        normalize: String,
    },
    /// Reduce one word's per-period embedding matrices to a series CSV.
    IngestEmbeddings {
        #[arg(long)]
        word: String,
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 2)]
        target_dim: usize,
    },
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(k) = cli.k {
        cfg.basis.k = k;
    }
    if let Some(s) = &cli.sigma {
        cfg.basis.sigma = Sigma::parse(s)?;
    }
    if let Some(a) = &cli.axes {
        cfg.projection.axes = parse_axes(a)?;
    }
    if cli.axis_sweep {
        cfg.projection.axis_sweep = true;
    }
    if let Some(r) = cli.grid_res {
        cfg.grid.resolution = r;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_basis(fit: &std::path::Path) -> PathBuf {
    fit.parent().unwrap_or(std::path::Path::new(".")).join("basis.json")
}

fn run(cli: Cli) -> Result<()> {
    let cfg = build_config(&cli)?;
    let out = cfg.out.clone();
    match cli.command {
        Command::GenSynthetic => {
            let paths = commands::gen_synthetic(&out, vecset_core::seeds::derive(cfg.seed, "synthetic"))?;
            println!("wrote {} series to {}", paths.len(), out.display());
        }
        Command::Fit { series } => {
            let all = commands::read_all_series(&series)?;
            let res = commands::fit(&cfg, &all, &out)?;
            println!("wrote {} and {} fit files", res.basis_path.display(), res.fit_paths.len());
        }
        Command::Project { fits, basis } => {
            let files = commands::load_fits(&fits)?;
            let basis_path = basis.unwrap_or_else(|| default_basis(&fits[0]));
            let basis = if cfg.projection.axis_sweep {
                Some(FeatureBasis::load(&basis_path).with_context(|| format!("loading {}", basis_path.display()))?)
            } else {
                None
            };
            let res = commands::project(&cfg, &files, basis.as_ref(), &out)?;
            println!(
                "wrote {} ({} components, {} sweep files)",
                res.trajectory_path.display(),
                res.projection.components.len(),
                res.sweep_paths.len()
            );
        }
        Command::Heatmap { fit, step, basis } => {
            let file = FitFile::load(&fit)?;
            let basis_path = basis.unwrap_or_else(|| default_basis(&fit));
            let basis = FeatureBasis::load(&basis_path)?;
            let res = commands::heatmap(&cfg, &file, &basis, &step, &out)?;
            println!("wrote {} and {} ({} modes)", res.csv.display(), res.pgm.display(), res.modes);
        }
        Command::Pipeline => {
            let manifest = commands::pipeline(&cfg)?;
            println!("wrote {}", manifest.display());
        }
        Command::IngestCrime {
            input,
            types,
            years,
            per_year,
            normalize,
        } => {
            let mode = match normalize.as_str() {
                "iso" => NormalizeMode::CenterScaleIso,
                "per-axis" => NormalizeMode::CenterScalePerAxis,
                other => return Err(ConfigError(format!("normalize must be 'iso' or 'per-axis', got '{other}'")).into()),
            };
            let columns = match &cfg.source {
                Source::Crime { columns, .. } => columns.clone(),
                _ => CrimeColumns::default(),
            };
            let years = commands::parse_years(&years)?;
            let paths = commands::ingest_crime(&input, &types, &years, per_year, &columns, mode, cfg.seed, &out)?;
            println!("wrote {} series to {}", paths.len(), out.display());
        }
        Command::IngestEmbeddings { word, files, target_dim } => {
            let path = commands::ingest_embeddings(&word, &files, target_dim, &out)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

/// 2 config, 3 data, 4 numeric, 5 I/O, 1 anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<vecset_core::Error>() {
            return match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
                ErrorKind::Io => 5,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 5;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

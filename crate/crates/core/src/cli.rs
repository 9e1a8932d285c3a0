//! Command-line surface: configuration resolution and the pipeline stages.
//!
//! A run is described by a JSON config file; any flag given on the command
//! line overrides the file. Relative paths in the file resolve against the
//! file's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{queen_adjacency, MultiPolygon, Projection};
use crate::ingest::{
    assemble_variable_table, load_demographics, load_providers, load_road_edges, load_road_nodes,
    load_tracts, variable_names, AssemblyConfig, ProviderRadii, TractGeometry, VariableTable,
    VARIABLES,
};
use crate::network::{build_network, default_road_classes, OriginSampling, DEFAULT_MAX_SNAP_M};
use crate::report::{
    emit_geojson, emit_moran, emit_svg_choropleth, emit_tables, emit_variables, MappedScores,
    ReportBundle, DEFAULT_HINGE,
};
use crate::stats::{morans_i, pca, ContributorThresholds, MoranResult, MIN_PERMUTATIONS};

pub const SEED_ENV: &str = "ACCESS_ATLAS_SEED";
pub const DEFAULT_PERMUTATIONS: usize = 999;
pub const DEFAULT_COMPONENTS_MAPPED: usize = 4;

#[derive(Debug, Parser)]
#[command(
    name = "access-atlas",
    version,
    about = "Multidimensional food-access analysis over census tracts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Build the ten-variable table (variables.csv, dropped.csv)
    Variables,
    /// Principal components, contributors, and correlation tables
    Pca,
    /// Global Moran's I of every variable (moran.csv)
    Moran,
    /// Box-map GeoJSON and SVG choropleths of the mapped components
    Boxmap,
    /// Run every stage
    Report,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Tract polygons (GeoJSON FeatureCollection)
    #[arg(long, global = true, value_name = "PATH")]
    pub tracts: Option<PathBuf>,
    /// Food providers CSV
    #[arg(long, global = true, value_name = "PATH")]
    pub providers: Option<PathBuf>,
    /// Road nodes CSV
    #[arg(long, global = true, value_name = "PATH")]
    pub roads_nodes: Option<PathBuf>,
    /// Road edges CSV
    #[arg(long, global = true, value_name = "PATH")]
    pub roads_edges: Option<PathBuf>,
    /// Demographics CSV
    #[arg(long, global = true, value_name = "PATH")]
    pub demographics: Option<PathBuf>,
    /// Permutation seed (falls back to ACCESS_ATLAS_SEED)
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Moran's I permutations, at least 99
    #[arg(long, global = true, value_name = "N")]
    pub permutations: Option<usize>,
    /// Box-map fence multiplier
    #[arg(long, global = true, value_name = "X")]
    pub hinge: Option<f64>,
    /// Absolute loading for a significant contributor
    #[arg(long, global = true, value_name = "X")]
    pub sig_threshold: Option<f64>,
    /// Absolute loading for a secondary contributor
    #[arg(long, global = true, value_name = "X")]
    pub sec_threshold: Option<f64>,
    /// Network-distance origins: centroid or grid-K
    #[arg(long, global = true, value_name = "MODE")]
    pub ace_net_mode: Option<String>,
    /// Projection reference longitude
    #[arg(long, global = true, value_name = "X", allow_negative_numbers = true)]
    pub ref_lon: Option<f64>,
    /// Projection reference latitude
    #[arg(long, global = true, value_name = "Y", allow_negative_numbers = true)]
    pub ref_lat: Option<f64>,
    /// Farthest a point may snap to a road node, in meters
    #[arg(long, global = true, value_name = "M")]
    pub snap_max_m: Option<f64>,
    /// Components to map
    #[arg(long, global = true, value_name = "K")]
    pub components_mapped: Option<usize>,
}

/// Config file contents; every field optional so flags can fill gaps.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub tracts: Option<PathBuf>,
    pub providers: Option<PathBuf>,
    pub roads_nodes: Option<PathBuf>,
    pub roads_edges: Option<PathBuf>,
    pub demographics: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub ref_lon: Option<f64>,
    pub ref_lat: Option<f64>,
    pub road_classes: Option<BTreeSet<String>>,
    pub snap_max_m: Option<f64>,
    pub ace_net_mode: Option<OriginSampling>,
    pub hinge: Option<f64>,
    pub thresholds: Option<ContributorThresholds>,
    pub moran_permutations: Option<usize>,
    pub seed: Option<u64>,
    pub components_mapped: Option<usize>,
    pub provider_radii: Option<ProviderRadii>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ConfigFile = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.tracts,
            &mut cfg.providers,
            &mut cfg.roads_nodes,
            &mut cfg.roads_edges,
            &mut cfg.demographics,
            &mut cfg.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tracts: PathBuf,
    pub providers: PathBuf,
    pub roads_nodes: PathBuf,
    pub roads_edges: PathBuf,
    pub demographics: PathBuf,
    pub out_dir: PathBuf,
    pub ref_lon: f64,
    pub ref_lat: f64,
    pub road_classes: BTreeSet<String>,
    pub snap_max_m: f64,
    pub ace_net_mode: OriginSampling,
    pub hinge: f64,
    pub thresholds: ContributorThresholds,
    pub moran_permutations: usize,
    pub seed: u64,
    pub components_mapped: usize,
    pub provider_radii: ProviderRadii,
}

fn required(value: Option<PathBuf>, name: &str) -> Result<PathBuf> {
    value
        .filter(|p| !p.as_os_str().is_empty())
        .ok_or_else(|| Error::Config(format!("no path given for {name}")))
}

impl RunConfig {
    /// Merges flags over the config file; `env_seed` is the fallback seed.
    pub fn resolve(file: ConfigFile, flags: &Overrides, env_seed: Option<&str>) -> Result<Self> {
        let seed = match (flags.seed, file.seed, env_seed) {
            (Some(s), _, _) | (None, Some(s), _) => s,
            (None, None, Some(raw)) => raw.trim().parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV}=`{raw}` is not an unsigned integer"))
            })?,
            (None, None, None) => 0,
        };
        let ace_net_mode = match &flags.ace_net_mode {
            Some(m) => m.parse()?,
            None => file.ace_net_mode.unwrap_or_default(),
        };
        let mut thresholds = file.thresholds.unwrap_or_default();
        if let Some(s) = flags.sig_threshold {
            thresholds.significant = s;
        }
        if let Some(s) = flags.sec_threshold {
            thresholds.secondary = s;
        }
        let cfg = RunConfig {
            tracts: required(flags.tracts.clone().or(file.tracts), "tracts")?,
            providers: required(flags.providers.clone().or(file.providers), "providers")?,
            roads_nodes: required(
                flags.roads_nodes.clone().or(file.roads_nodes),
                "roads_nodes",
            )?,
            roads_edges: required(
                flags.roads_edges.clone().or(file.roads_edges),
                "roads_edges",
            )?,
            demographics: required(
                flags.demographics.clone().or(file.demographics),
                "demographics",
            )?,
            out_dir: required(flags.out.clone().or(file.out_dir), "out_dir")?,
            ref_lon: flags
                .ref_lon
                .or(file.ref_lon)
                .ok_or_else(|| Error::Config("no reference longitude (ref_lon)".into()))?,
            ref_lat: flags
                .ref_lat
                .or(file.ref_lat)
                .ok_or_else(|| Error::Config("no reference latitude (ref_lat)".into()))?,
            road_classes: file.road_classes.unwrap_or_else(default_road_classes),
            snap_max_m: flags
                .snap_max_m
                .or(file.snap_max_m)
                .unwrap_or(DEFAULT_MAX_SNAP_M),
            ace_net_mode,
            hinge: flags.hinge.or(file.hinge).unwrap_or(DEFAULT_HINGE),
            thresholds,
            moran_permutations: flags
                .permutations
                .or(file.moran_permutations)
                .unwrap_or(DEFAULT_PERMUTATIONS),
            seed,
            components_mapped: flags
                .components_mapped
                .or(file.components_mapped)
                .unwrap_or(DEFAULT_COMPONENTS_MAPPED),
            provider_radii: file.provider_radii.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_cli(flags: &Overrides) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let env_seed = std::env::var(SEED_ENV).ok();
        Self::resolve(file, flags, env_seed.as_deref())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hinge.is_finite() && self.hinge > 0.0) {
            return Err(Error::Config(format!(
                "hinge {} must be positive",
                self.hinge
            )));
        }
        if self.moran_permutations < MIN_PERMUTATIONS {
            return Err(Error::Config(format!(
                "moran_permutations {} is below the minimum of {MIN_PERMUTATIONS}",
                self.moran_permutations
            )));
        }
        if !(self.snap_max_m.is_finite() && self.snap_max_m > 0.0) {
            return Err(Error::Config(format!(
                "snap_max_m {} must be positive",
                self.snap_max_m
            )));
        }
        if self.components_mapped == 0 || self.components_mapped > VARIABLES.len() {
            return Err(Error::Config(format!(
                "components_mapped {} must be between 1 and {}",
                self.components_mapped,
                VARIABLES.len()
            )));
        }
        if self.road_classes.is_empty() {
            return Err(Error::Config("road_classes is empty".into()));
        }
        Projection::new(self.ref_lon, self.ref_lat).map_err(|e| Error::Config(e.to_string()))?;
        self.thresholds.validate()?;
        self.provider_radii.validate()
    }

    pub fn projection(&self) -> Projection {
        Projection::new(self.ref_lon, self.ref_lat).expect("validated")
    }
}

/// Loaded tracts plus the assembled variable table.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub tracts: Vec<TractGeometry>,
    pub table: VariableTable,
}

pub fn load_analysis(cfg: &RunConfig) -> Result<Analysis> {
    let projection = cfg.projection();
    let tracts = load_tracts(&cfg.tracts, &projection)?;
    let providers = load_providers(&cfg.providers, &projection, &cfg.provider_radii)?;
    let nodes = load_road_nodes(&cfg.roads_nodes, &projection)?;
    let edges = load_road_edges(&cfg.roads_edges)?;
    let demographics = load_demographics(&cfg.demographics)?;
    let net = build_network(&edges, &nodes, &cfg.road_classes)?;
    let assembly = AssemblyConfig {
        sampling: cfg.ace_net_mode,
        max_snap_m: cfg.snap_max_m,
    };
    let table = assemble_variable_table(&tracts, &providers, &net, &demographics, &assembly)?;
    Ok(Analysis { tracts, table })
}

pub fn build_bundle(cfg: &RunConfig, table: &VariableTable) -> Result<ReportBundle> {
    let result = pca(&table.values, &variable_names())?;
    ReportBundle::new(
        table,
        result,
        cfg.thresholds,
        cfg.hinge,
        cfg.components_mapped,
    )
}

/// Moran's I of every variable over queen contiguity of the retained tracts.
pub fn moran_table(cfg: &RunConfig, analysis: &Analysis) -> Result<Vec<(String, MoranResult)>> {
    let shapes: Vec<MultiPolygon> = analysis
        .table
        .tract_ids
        .iter()
        .map(|id| {
            analysis
                .tracts
                .iter()
                .find(|t| &t.tract_id == id)
                .map(|t| t.shape.clone())
                .expect("table rows come from loaded tracts")
        })
        .collect();
    let adjacency = queen_adjacency(&shapes);
    VARIABLES
        .iter()
        .map(|name| {
            let values = analysis.table.column(name).expect("known variable");
            morans_i(&values, &adjacency, cfg.moran_permutations, cfg.seed)
                .map(|m| (name.to_string(), m))
                .map_err(|e| match e {
                    Error::ConstantColumn(_) => Error::ConstantColumn(name.to_string()),
                    other => other,
                })
        })
        .collect()
}

pub fn cmd_variables(cfg: &RunConfig) -> Result<VariableTable> {
    let analysis = load_analysis(cfg)?;
    emit_variables(&analysis.table, &cfg.out_dir)?;
    Ok(analysis.table)
}

pub fn cmd_pca(cfg: &RunConfig) -> Result<ReportBundle> {
    let analysis = load_analysis(cfg)?;
    let bundle = build_bundle(cfg, &analysis.table)?;
    emit_tables(&bundle, &cfg.out_dir)?;
    Ok(bundle)
}

pub fn cmd_moran(cfg: &RunConfig) -> Result<Vec<(String, MoranResult)>> {
    let analysis = load_analysis(cfg)?;
    let moran = moran_table(cfg, &analysis)?;
    emit_moran(&moran, &cfg.out_dir)?;
    Ok(moran)
}

fn emit_maps(cfg: &RunConfig, analysis: &Analysis, bundle: &ReportBundle) -> Result<Vec<PathBuf>> {
    let mapped = MappedScores::new(bundle, &analysis.table.dropped)?;
    let mut files = vec![emit_geojson(
        &analysis.tracts,
        &mapped,
        &cfg.out_dir.join("scores.geojson"),
    )?];
    for k in 0..bundle.components_mapped() {
        let path = cfg.out_dir.join(format!("pc{}_boxmap.svg", k + 1));
        files.push(emit_svg_choropleth(&analysis.tracts, &mapped, k, &path)?);
    }
    Ok(files)
}

pub fn cmd_boxmap(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let analysis = load_analysis(cfg)?;
    let bundle = build_bundle(cfg, &analysis.table)?;
    emit_maps(cfg, &analysis, &bundle)
}

pub fn cmd_report(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let analysis = load_analysis(cfg)?;
    let mut files = emit_variables(&analysis.table, &cfg.out_dir)?;
    let moran = moran_table(cfg, &analysis)?;
    let bundle = build_bundle(cfg, &analysis.table)?.with_moran(moran);
    files.extend(emit_tables(&bundle, &cfg.out_dir)?);
    files.extend(emit_maps(cfg, &analysis, &bundle)?);
    Ok(files)
}

/// Runs one subcommand; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = RunConfig::from_cli(&cli.overrides).and_then(|cfg| match cli.command {
        Command::Variables => cmd_variables(&cfg).map(|t| {
            println!("{} tracts retained, {} dropped", t.len(), t.dropped.len());
        }),
        Command::Pca => cmd_pca(&cfg).map(|b| {
            let cum = b.pca.cumulative_proportions();
            let k = b.components_mapped().min(cum.len());
            println!(
                "first {k} components explain {:.1}% of the variance",
                100.0 * cum[k - 1]
            );
        }),
        Command::Moran => cmd_moran(&cfg).map(|m| {
            for (name, r) in m {
                println!("{name:<10} I = {:>8.4}  p = {:.4}", r.i, r.pseudo_p);
            }
        }),
        Command::Boxmap => cmd_boxmap(&cfg).map(|f| println!("{} files written", f.len())),
        Command::Report => cmd_report(&cfg)
            .map(|f| println!("{} files written to {}", f.len(), cfg.out_dir.display())),
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

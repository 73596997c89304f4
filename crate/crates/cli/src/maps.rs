use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use polsim_core::engine::ConfigError;
use polsim_core::geomap::synth::{parse_grid, synth_layers, SynthConfig};
use polsim_core::geomap::{ingest_map, validate_map, IngestConfig, MapError, WorldMap};
use polsim_core::kv::KvDoc;

use crate::{require_file, usage, write_atomic};

pub const BUILDINGS_FILE: &str = "buildings.geojson";
pub const UNITS_FILE: &str = "buildingUnits.geojson";
pub const WALKWAYS_FILE: &str = "walkways.geojson";

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Building footprints (GeoJSON polygons with `id` and `kind`).
    #[arg(long)]
    buildings: PathBuf,
    /// Building units (GeoJSON points); generated from footprints if absent.
    #[arg(long)]
    units: Option<PathBuf>,
    /// Walkway lines (GeoJSON line strings).
    #[arg(long)]
    walkways: PathBuf,
    /// Ingest settings: `seed` and `ingest.*` keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Map file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Map file to check.
    #[arg(long)]
    map: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Blocks as columns x rows.
    #[arg(long, default_value = "10x10")]
    grid: String,
    /// Block pitch in meters.
    #[arg(long, default_value_t = 100.0)]
    spacing: f64,
    /// Buildings per block side.
    #[arg(long, default_value_t = 2)]
    lots: u32,
    /// Floor area per generated unit, square meters.
    #[arg(long, default_value_t = 100.0)]
    unit_area: f64,
    /// Directory for the three layer files.
    #[arg(long)]
    out: PathBuf,
    /// Also ingest the layers and write this map file.
    #[arg(long)]
    map: Option<PathBuf>,
}

fn ingest_config(path: Option<&Path>, seed: Option<u64>) -> Result<IngestConfig> {
    let mut cfg = IngestConfig::default();
    if let Some(path) = path {
        require_file("--config", path)?;
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let doc = KvDoc::parse(&text).map_err(|e| ConfigError { line: Some(e.line), message: e.message })?;
        if let Some(s) = doc.sections.first() {
            return Err(ConfigError { line: Some(s.line), message: format!("sections are not allowed here: [{}]", s.header) }.into());
        }
        for e in &doc.preamble {
            cfg.set(&e.key, &e.value).map_err(|message| ConfigError { line: Some(e.line), message })?;
        }
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.check().map_err(ConfigError::new)?;
    Ok(cfg)
}

pub fn ingest(a: IngestArgs, seed: Option<u64>) -> Result<()> {
    require_file("--buildings", &a.buildings)?;
    require_file("--walkways", &a.walkways)?;
    if let Some(u) = &a.units {
        require_file("--units", u)?;
    }
    let cfg = ingest_config(a.config.as_deref(), seed)?;
    let map = ingest_map(&a.buildings, a.units.as_deref(), &a.walkways, &cfg)?;
    let report = validate_map(&map);
    for w in &report.warnings {
        log::warn!("{w}");
    }
    write_atomic(&a.out, &map.to_polmap())?;
    log::info!(
        "wrote {}: {} buildings, {} units, {} walkway nodes",
        a.out.display(),
        map.buildings().len(),
        map.units().len(),
        map.graph().node_count()
    );
    Ok(())
}

pub fn validate(a: ValidateArgs) -> Result<()> {
    require_file("--map", &a.map)?;
    let map = WorldMap::load(&a.map)?;
    let report = validate_map(&map);
    print!("{report}");
    if report.is_valid() {
        Ok(())
    } else {
        Err(MapError::Validation(report.errors).into())
    }
}

pub fn synth(a: SynthArgs, seed: Option<u64>) -> Result<()> {
    let (cols, rows) = parse_grid(&a.grid)?;
    let cfg = SynthConfig { cols, rows, spacing: a.spacing, lots: a.lots, unit_area: a.unit_area, seed: seed.unwrap_or(0), ..SynthConfig::default() };
    let layers = synth_layers(&cfg)?;
    let files = [(BUILDINGS_FILE, &layers.buildings), (UNITS_FILE, &layers.units), (WALKWAYS_FILE, &layers.walkways)];
    for (name, layer) in files {
        write_atomic(&a.out.join(name), &format!("{layer}\n"))?;
    }
    log::info!("wrote {} buildings to {}", cfg.building_count(), a.out.display());
    if let Some(path) = a.map {
        if path.starts_with(&a.out) && path.extension().is_some_and(|e| e == "geojson") {
            return Err(usage("--map must not overwrite a layer file"));
        }
        let ingest = IngestConfig { seed: cfg.seed, unit_area: a.unit_area, ..IngestConfig::default() };
        let map = ingest_map(&a.out.join(BUILDINGS_FILE), Some(&a.out.join(UNITS_FILE)), &a.out.join(WALKWAYS_FILE), &ingest)?;
        write_atomic(&path, &map.to_polmap())?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

//! Synthetic grid cities for tests and benchmarks.
//!
//! A `cols x rows` grid of square blocks separated by streets. Each block
//! holds `lots x lots` rectangular buildings with seed-jittered sizes; kinds
//! are dealt round-robin over the whole building sequence. Streets are the
//! block boundaries, subdivided every `spacing / segments_per_block` meters
//! so units have nearby anchor nodes.

use serde_json::{json, Value};

use super::geometry::{Point, Projection};
use super::ingest::{ingest_geojson, IngestConfig};
use super::{subdivide_building, Building, MapError, UnitKind, WorldMap};
use crate::rng::derive_stream;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub cols: u32,
    pub rows: u32,
    /// Block pitch, meters.
    pub spacing: f64,
    /// Buildings per block side.
    pub lots: u32,
    pub segments_per_block: u32,
    pub seed: u64,
    /// Floor area per unit in the generated units layer, square meters.
    pub unit_area: f64,
    pub origin_lon: f64,
    pub origin_lat: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { cols: 10, rows: 10, spacing: 100.0, lots: 2, segments_per_block: 4, seed: 0, unit_area: 100.0, origin_lon: 24.94, origin_lat: 60.17 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("grid must be at least 2x2, got {0}x{1}")]
    GridTooSmall(u32, u32),
    #[error("{0}")]
    Invalid(String),
}

/// The three GeoJSON layers of a synthetic city.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthLayers {
    pub buildings: Value,
    pub units: Value,
    pub walkways: Value,
}

impl SynthConfig {
    pub fn check(&self) -> Result<(), SynthError> {
        if self.cols < 2 || self.rows < 2 {
            return Err(SynthError::GridTooSmall(self.cols, self.rows));
        }
        if !(self.spacing >= 20.0 && self.spacing.is_finite()) {
            return Err(SynthError::Invalid(format!("spacing must be at least 20 m, got {}", self.spacing)));
        }
        if !(self.unit_area > 0.0 && self.unit_area.is_finite()) {
            return Err(SynthError::Invalid(format!("unit_area must be positive, got {}", self.unit_area)));
        }
        if self.lots == 0 || self.segments_per_block == 0 {
            return Err(SynthError::Invalid("lots and segments_per_block must be positive".into()));
        }
        Ok(())
    }

    pub fn building_count(&self) -> usize {
        (self.cols * self.rows * self.lots * self.lots) as usize
    }
}

/// Parses `NxM` (columns by rows).
pub fn parse_grid(s: &str) -> Result<(u32, u32), SynthError> {
    let bad = || SynthError::Invalid(format!("grid must look like 10x10, got `{s}`"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

pub fn synth_layers(cfg: &SynthConfig) -> Result<SynthLayers, SynthError> {
    cfg.check()?;
    let proj = Projection::new(cfg.origin_lon, cfg.origin_lat);
    let ll = |p: Point| {
        let (lon, lat) = proj.unproject(p);
        json!([lon, lat])
    };
    let mut rng = derive_stream(cfg.seed, "synth");
    let s = cfg.spacing;
    let setback = (s * 0.05).max(2.0);
    let lot = (s - 2.0 * setback) / cfg.lots as f64;

    let mut buildings = Vec::with_capacity(cfg.building_count());
    let mut units = Vec::new();
    for row in 0..cfg.rows {
        for col in 0..cfg.cols {
            for j in 0..cfg.lots {
                for i in 0..cfg.lots {
                    let idx = buildings.len();
                    let kind = UnitKind::ALL[idx % 4];
                    let x0 = col as f64 * s + setback + i as f64 * lot;
                    let y0 = row as f64 * s + setback + j as f64 * lot;
                    // Footprint covers 60-90 % of the lot side, placed with a random inset.
                    let w = lot * (0.6 + 0.3 * rng.unit_f64());
                    let h = lot * (0.6 + 0.3 * rng.unit_f64());
                    let x = x0 + (lot - w) * rng.unit_f64();
                    let y = y0 + (lot - h) * rng.unit_f64();
                    let ring = [Point::new(x, y), Point::new(x + w, y), Point::new(x + w, y + h), Point::new(x, y + h), Point::new(x, y)];
                    let coords: Vec<Value> = ring.iter().map(|&p| ll(p)).collect();
                    let b = Building { id: idx as i64 + 1, footprint: ring[..4].to_vec(), kind, source_tags: Default::default() };
                    for u in subdivide_building(&b, cfg.unit_area) {
                        units.push(json!({
                            "type": "Feature",
                            "geometry": {"type": "Point", "coordinates": ll(u.location)},
                            "properties": {"id": units.len() as i64 + 1, "building_id": b.id},
                        }));
                    }
                    buildings.push(json!({
                        "type": "Feature",
                        "geometry": {"type": "Polygon", "coordinates": [coords]},
                        "properties": {"id": idx as i64 + 1, "kind": kind.as_str(), "block": format!("{col},{row}")},
                    }));
                }
            }
        }
    }

    let seg = cfg.segments_per_block;
    let mut walkways = Vec::new();
    for col in 0..=cfg.cols {
        let x = col as f64 * s;
        let line: Vec<Value> = (0..=cfg.rows * seg).map(|k| ll(Point::new(x, k as f64 * s / seg as f64))).collect();
        walkways.push(json!({"type": "Feature", "geometry": {"type": "LineString", "coordinates": line}, "properties": {"street": format!("v{col}")}}));
    }
    for row in 0..=cfg.rows {
        let y = row as f64 * s;
        let line: Vec<Value> = (0..=cfg.cols * seg).map(|k| ll(Point::new(k as f64 * s / seg as f64, y))).collect();
        walkways.push(json!({"type": "Feature", "geometry": {"type": "LineString", "coordinates": line}, "properties": {"street": format!("h{row}")}}));
    }

    Ok(SynthLayers {
        buildings: json!({"type": "FeatureCollection", "features": buildings}),
        units: json!({"type": "FeatureCollection", "features": units}),
        walkways: json!({"type": "FeatureCollection", "features": walkways}),
    })
}

/// Generates a synthetic city and ingests its three layers.
pub fn synth_world(cfg: &SynthConfig, ingest: &IngestConfig) -> Result<WorldMap, MapError> {
    let layers = synth_layers(cfg).map_err(|e| MapError::Parse { layer: "synth", feature: 0, message: e.to_string() })?;
    ingest_geojson(&layers.buildings.to_string(), Some(&layers.units.to_string()), &layers.walkways.to_string(), ingest)
}

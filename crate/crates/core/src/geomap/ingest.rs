//! GeoJSON layer ingestion.
//!
//! Three FeatureCollections mirror the classic buildings / building units /
//! walkways layers:
//!
//! * buildings: `Polygon` (or `MultiPolygon`, largest part kept) with
//!   properties `id` (integer) and `kind` (`residential`, `workplace`,
//!   `restaurant`, `recreation` or `commercial`). Other scalar properties are
//!   kept as source tags.
//! * building units (optional): `Point` with properties `id`, `building_id`.
//! * walkways: `LineString` / `MultiLineString`; consecutive vertices become
//!   edges.
//!
//! Buildings tagged `commercial` are dealt round-robin to workplace,
//! restaurant and recreation in feature order.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde_json::Value;

use super::geometry::{self, Point, Projection};
use super::graph::GraphBuilder;
use super::{subdivide_building, Building, BuildingUnit, Cents, Economy, MapError, UnitId, UnitKind, WorldMap};
use crate::rng::{derive_stream, INIT};

#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub seed: u64,
    /// Floor area per generated unit, square meters.
    pub unit_area: f64,
    /// Walkway vertices closer than this are merged, meters.
    pub snap_tolerance: f64,
    pub rent_cents: (Cents, Cents),
    pub wage_cents: (Cents, Cents),
    pub meal_cents: (Cents, Cents),
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            unit_area: 100.0,
            snap_tolerance: 0.5,
            rent_cents: (1_000, 2_000),
            wage_cents: (40, 80),
            meal_cents: (300, 900),
        }
    }
}

impl IngestConfig {
    /// Applies one `ingest.*` key from a config document.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let num = |v: &str| v.parse::<i64>().map_err(|e| format!("{key}: {e}"));
        let float = |v: &str| v.parse::<f64>().map_err(|e| format!("{key}: {e}"));
        match key {
            "seed" => self.seed = value.parse().map_err(|e| format!("{key}: {e}"))?,
            "ingest.unit_area" => self.unit_area = float(value)?,
            "ingest.snap_tolerance" => self.snap_tolerance = float(value)?,
            "ingest.rent_min_cents" => self.rent_cents.0 = num(value)?,
            "ingest.rent_max_cents" => self.rent_cents.1 = num(value)?,
            "ingest.wage_min_cents" => self.wage_cents.0 = num(value)?,
            "ingest.wage_max_cents" => self.wage_cents.1 = num(value)?,
            "ingest.meal_min_cents" => self.meal_cents.0 = num(value)?,
            "ingest.meal_max_cents" => self.meal_cents.1 = num(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.unit_area > 0.0 && self.unit_area.is_finite()) {
            return Err("ingest.unit_area must be positive".into());
        }
        if !(self.snap_tolerance >= 0.0) {
            return Err("ingest.snap_tolerance must be non-negative".into());
        }
        for (name, (lo, hi)) in [("rent", self.rent_cents), ("wage", self.wage_cents), ("meal", self.meal_cents)] {
            if lo < 0 || lo > hi {
                return Err(format!("ingest.{name} range {lo}..{hi} is invalid"));
            }
        }
        Ok(())
    }
}

/// Raw building as read from the layer, still in lon/lat.
struct RawBuilding {
    id: i64,
    ring: Vec<(f64, f64)>,
    kind: KindTag,
    tags: BTreeMap<String, String>,
}

#[derive(Clone, Copy)]
enum KindTag {
    Exact(UnitKind),
    Commercial,
}

struct RawUnit {
    id: i64,
    building_id: i64,
    lonlat: (f64, f64),
}

fn read_layer(path: &Path, layer: &'static str) -> Result<Value, MapError> {
    let text = std::fs::read_to_string(path).map_err(|source| MapError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| MapError::Parse { layer, feature: 0, message: e.to_string() })
}

fn features<'a>(doc: &'a Value, layer: &'static str) -> Result<&'a [Value], MapError> {
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(MapError::Parse { layer, feature: 0, message: "document is not a FeatureCollection".into() });
    }
    doc.get("features")
        .and_then(Value::as_array)
        .map(Vec::as_slice)
        .ok_or(MapError::Parse { layer, feature: 0, message: "missing `features` array".into() })
}

fn position(v: &Value) -> Option<(f64, f64)> {
    let arr = v.as_array()?;
    let lon = arr.first()?.as_f64()?;
    let lat = arr.get(1)?.as_f64()?;
    (lon.is_finite() && lat.is_finite()).then_some((lon, lat))
}

fn positions(v: &Value) -> Option<Vec<(f64, f64)>> {
    v.as_array()?.iter().map(position).collect()
}

fn int_property(props: &Value, key: &str) -> Option<i64> {
    let v = props.get(key)?;
    v.as_i64().or_else(|| v.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64))
}

fn clean_ring(mut ring: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    ring.dedup();
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring
}

fn parse_buildings(doc: &Value) -> Result<Vec<RawBuilding>, MapError> {
    const LAYER: &str = "buildings";
    let mut out = Vec::new();
    for (i, f) in features(doc, LAYER)?.iter().enumerate() {
        let err = |message: String| MapError::Parse { layer: LAYER, feature: i, message };
        let geom = f.get("geometry").ok_or_else(|| err("missing geometry".into()))?;
        let coords = geom.get("coordinates").ok_or_else(|| err("missing coordinates".into()))?;
        let outer = match geom.get("type").and_then(Value::as_str) {
            Some("Polygon") => coords.get(0).and_then(positions),
            Some("MultiPolygon") => coords
                .as_array()
                .and_then(|parts| parts.iter().map(|p| p.get(0).and_then(positions)).collect::<Option<Vec<_>>>())
                .and_then(|rings| {
                    rings.into_iter().max_by(|a, b| lonlat_area(a).total_cmp(&lonlat_area(b)))
                }),
            other => return Err(err(format!("expected Polygon geometry, got {other:?}"))),
        }
        .ok_or_else(|| err("malformed polygon coordinates".into()))?;
        let ring = clean_ring(outer);
        if ring.len() < 3 {
            return Err(err(format!("polygon has {} distinct vertices, need at least 3", ring.len())));
        }
        let props = f.get("properties").unwrap_or(&Value::Null);
        let id = int_property(props, "id").ok_or_else(|| err("missing integer `id` property".into()))?;
        let kind = match props.get("kind").and_then(Value::as_str) {
            Some("commercial") => KindTag::Commercial,
            Some(s) => KindTag::Exact(s.parse().map_err(err)?),
            None => return Err(err("missing `kind` property".into())),
        };
        let mut tags = BTreeMap::new();
        if let Some(obj) = props.as_object() {
            for (k, v) in obj {
                if k == "id" || k == "kind" {
                    continue;
                }
                let text = match v {
                    Value::String(s) => s.clone(),
                    Value::Number(n) => n.to_string(),
                    Value::Bool(b) => b.to_string(),
                    _ => continue,
                };
                tags.insert(k.clone(), text);
            }
        }
        out.push(RawBuilding { id, ring, kind, tags });
    }
    Ok(out)
}

fn lonlat_area(ring: &[(f64, f64)]) -> f64 {
    let pts: Vec<Point> = ring.iter().map(|&(x, y)| Point::new(x, y)).collect();
    geometry::area(&pts)
}

fn parse_units(doc: &Value) -> Result<Vec<RawUnit>, MapError> {
    const LAYER: &str = "buildingUnits";
    let mut out = Vec::new();
    for (i, f) in features(doc, LAYER)?.iter().enumerate() {
        let err = |message: &str| MapError::Parse { layer: LAYER, feature: i, message: message.to_string() };
        let geom = f.get("geometry").ok_or_else(|| err("missing geometry"))?;
        if geom.get("type").and_then(Value::as_str) != Some("Point") {
            return Err(err("expected Point geometry"));
        }
        let lonlat = geom.get("coordinates").and_then(position).ok_or_else(|| err("malformed point coordinates"))?;
        let props = f.get("properties").unwrap_or(&Value::Null);
        let id = int_property(props, "id").ok_or_else(|| err("missing integer `id` property"))?;
        let building_id = int_property(props, "building_id").ok_or_else(|| err("missing integer `building_id` property"))?;
        out.push(RawUnit { id, building_id, lonlat });
    }
    Ok(out)
}

fn parse_walkways(doc: &Value) -> Result<Vec<Vec<(f64, f64)>>, MapError> {
    const LAYER: &str = "walkways";
    let mut out = Vec::new();
    for (i, f) in features(doc, LAYER)?.iter().enumerate() {
        let err = |message: String| MapError::Parse { layer: LAYER, feature: i, message };
        let geom = f.get("geometry").ok_or_else(|| err("missing geometry".into()))?;
        let coords = geom.get("coordinates").ok_or_else(|| err("missing coordinates".into()))?;
        match geom.get("type").and_then(Value::as_str) {
            Some("LineString") => out.push(positions(coords).ok_or_else(|| err("malformed line coordinates".into()))?),
            Some("MultiLineString") => {
                let parts = coords.as_array().ok_or_else(|| err("malformed line coordinates".into()))?;
                for part in parts {
                    out.push(positions(part).ok_or_else(|| err("malformed line coordinates".into()))?);
                }
            }
            other => return Err(err(format!("expected LineString geometry, got {other:?}"))),
        }
    }
    Ok(out)
}

/// Reads, projects, and validates the three layers into a [`WorldMap`].
pub fn ingest_map(
    buildings_path: &Path,
    units_path: Option<&Path>,
    walkways_path: &Path,
    cfg: &IngestConfig,
) -> Result<WorldMap, MapError> {
    let buildings = parse_buildings(&read_layer(buildings_path, "buildings")?)?;
    let units = units_path.map(|p| read_layer(p, "buildingUnits").and_then(|doc| parse_units(&doc))).transpose()?;
    let walkways = parse_walkways(&read_layer(walkways_path, "walkways")?)?;
    build_world(buildings, units, walkways, cfg)
}

/// Ingests layers already held in memory as GeoJSON text.
pub fn ingest_geojson(buildings: &str, units: Option<&str>, walkways: &str, cfg: &IngestConfig) -> Result<WorldMap, MapError> {
    let parse = |text: &str, layer: &'static str| {
        serde_json::from_str::<Value>(text).map_err(|e| MapError::Parse { layer, feature: 0, message: e.to_string() })
    };
    let b = parse_buildings(&parse(buildings, "buildings")?)?;
    let u = units.map(|t| parse(t, "buildingUnits").and_then(|d| parse_units(&d))).transpose()?;
    let w = parse_walkways(&parse(walkways, "walkways")?)?;
    build_world(b, u, w, cfg)
}

fn build_world(
    raw_buildings: Vec<RawBuilding>,
    raw_units: Option<Vec<RawUnit>>,
    walkways: Vec<Vec<(f64, f64)>>,
    cfg: &IngestConfig,
) -> Result<WorldMap, MapError> {
    cfg.check().map_err(|message| MapError::Parse { layer: "config", feature: 0, message })?;
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for &(x, y) in raw_buildings.iter().flat_map(|b| b.ring.iter()).chain(walkways.iter().flatten()) {
        lo = (lo.0.min(x), lo.1.min(y));
        hi = (hi.0.max(x), hi.1.max(y));
    }
    let projection = if lo.0.is_finite() {
        Projection::new((lo.0 + hi.0) * 0.5, (lo.1 + hi.1) * 0.5)
    } else {
        Projection::new(0.0, 0.0)
    };

    let commercial_cycle = [UnitKind::Workplace, UnitKind::Restaurant, UnitKind::Recreation];
    let mut commercial_seen = 0usize;
    let mut seen_ids = HashMap::new();
    let mut buildings = Vec::with_capacity(raw_buildings.len());
    for (i, raw) in raw_buildings.into_iter().enumerate() {
        let err = |message: String| MapError::Parse { layer: "buildings", feature: i, message };
        if seen_ids.insert(raw.id, i).is_some() {
            return Err(err(format!("duplicate building id {}", raw.id)));
        }
        let footprint: Vec<Point> = raw.ring.iter().map(|&(lon, lat)| projection.project(lon, lat)).collect();
        if !(geometry::area(&footprint) > 0.0) {
            return Err(err("polygon has zero area".into()));
        }
        if !geometry::is_simple(&footprint) {
            return Err(err("polygon is self-intersecting".into()));
        }
        let kind = match raw.kind {
            KindTag::Exact(k) => k,
            KindTag::Commercial => {
                commercial_seen += 1;
                commercial_cycle[(commercial_seen - 1) % commercial_cycle.len()]
            }
        };
        buildings.push(Building { id: raw.id, footprint, kind, source_tags: raw.tags });
    }

    let mut units: Vec<BuildingUnit> = match raw_units {
        Some(mut raw) => {
            let mut unit_ids = HashMap::new();
            for (i, u) in raw.iter().enumerate() {
                if unit_ids.insert(u.id, i).is_some() {
                    return Err(MapError::Parse { layer: "buildingUnits", feature: i, message: format!("duplicate unit id {}", u.id) });
                }
                if !seen_ids.contains_key(&u.building_id) {
                    return Err(MapError::Parse {
                        layer: "buildingUnits",
                        feature: i,
                        message: format!("unknown building_id {}", u.building_id),
                    });
                }
            }
            raw.sort_by_key(|u| u.id);
            raw.iter()
                .enumerate()
                .map(|(i, u)| {
                    let b = seen_ids[&u.building_id];
                    let kind = buildings[b].kind;
                    BuildingUnit {
                        id: i as UnitId,
                        building: b as u32,
                        location: projection.project(u.lonlat.0, u.lonlat.1),
                        kind,
                        economy: Economy::placeholder(kind),
                    }
                })
                .collect()
        }
        None => {
            let mut all = Vec::new();
            for (b, building) in buildings.iter().enumerate() {
                for mut u in subdivide_building(building, cfg.unit_area) {
                    u.id = all.len() as UnitId;
                    u.building = b as u32;
                    all.push(u);
                }
            }
            all
        }
    };
    assign_prices(&mut units, cfg);

    let mut builder = GraphBuilder::new(cfg.snap_tolerance);
    for line in &walkways {
        let pts: Vec<Point> = line.iter().map(|&(lon, lat)| projection.project(lon, lat)).collect();
        builder.add_polyline(&pts);
    }
    let (graph, notes) = builder.finish()?;
    WorldMap::new(projection, buildings, units, graph, notes)
}

/// Draws one price per unit, in id order, from the `init` stream.
fn assign_prices(units: &mut [BuildingUnit], cfg: &IngestConfig) {
    let mut rng = derive_stream(cfg.seed, INIT);
    for u in units {
        u.economy = match u.kind {
            UnitKind::Residential => Economy::Rent { per_day: rng.range_inclusive(cfg.rent_cents.0, cfg.rent_cents.1) },
            UnitKind::Workplace => Economy::Wage { per_tick: rng.range_inclusive(cfg.wage_cents.0, cfg.wage_cents.1) },
            UnitKind::Restaurant => Economy::Meal { price: rng.range_inclusive(cfg.meal_cents.0, cfg.meal_cents.1) },
            UnitKind::Recreation => Economy::Free,
        };
    }
}

#![allow(dead_code)]

use std::collections::BTreeMap;

use polsim_core::geomap::synth::{synth_world, SynthConfig};
use polsim_core::geomap::{Building, BuildingUnit, Cents, Economy, GraphBuilder, IngestConfig, Point, Projection, UnitKind, WorldMap};

/// A street along y = 0 from x = 0 to x = 1000 with one single-unit building
/// per entry of `units`, spaced 20 m apart just north of the street.
pub fn strip_map(units: &[(UnitKind, Economy)]) -> WorldMap {
    let mut buildings = Vec::new();
    let mut out = Vec::new();
    for (i, &(kind, economy)) in units.iter().enumerate() {
        let x = 10.0 + 20.0 * i as f64;
        let footprint = vec![Point::new(x, 5.0), Point::new(x + 10.0, 5.0), Point::new(x + 10.0, 15.0), Point::new(x, 15.0)];
        buildings.push(Building { id: i as i64 + 1, footprint, kind, source_tags: BTreeMap::new() });
        out.push(BuildingUnit { id: i as u32, building: i as u32, location: Point::new(x + 5.0, 10.0), kind, economy });
    }
    let width = (20.0 * units.len() as f64 + 20.0).max(100.0);
    let mut b = GraphBuilder::new(0.5);
    let street: Vec<Point> = (0..=(width / 10.0) as usize).map(|k| Point::new(k as f64 * 10.0, 0.0)).collect();
    b.add_polyline(&street);
    let (graph, notes) = b.finish().unwrap();
    WorldMap::new(Projection::new(24.94, 60.17), buildings, out, graph, notes).unwrap()
}

pub fn rent(c: Cents) -> (UnitKind, Economy) {
    (UnitKind::Residential, Economy::Rent { per_day: c })
}

pub fn wage(c: Cents) -> (UnitKind, Economy) {
    (UnitKind::Workplace, Economy::Wage { per_tick: c })
}

pub fn meal(c: Cents) -> (UnitKind, Economy) {
    (UnitKind::Restaurant, Economy::Meal { price: c })
}

pub fn recreation() -> (UnitKind, Economy) {
    (UnitKind::Recreation, Economy::Free)
}

pub fn synth(cols: u32, rows: u32, seed: u64) -> WorldMap {
    synth_world(&SynthConfig { cols, rows, seed, ..Default::default() }, &IngestConfig { seed, ..Default::default() }).unwrap()
}

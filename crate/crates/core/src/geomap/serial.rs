//! `polmap/1`: the serialized [`WorldMap`].
//!
//! Line-oriented, tab-separated, LF endings. Floats use Rust's shortest
//! round-trip formatting, so load(save(m)) reproduces every coordinate
//! bit-for-bit and save is byte-deterministic. Layout, in order:
//!
//! ```text
//! polmap/1
//! origin    <lon0> <lat0>
//! buildings <count>
//! b         <id> <kind> <tags-json> <n> <x1> <y1> ... <xn> <yn>
//! units     <count>
//! u         <id> <building-index> <x> <y> <price-cents|->
//! nodes     <count>
//! n         <x> <y>
//! edges     <count>
//! e         <u> <v> <length>
//! notes     <isolated> <duplicates> <self-loops>
//! end
//! ```
//!
//! Unit and node ids are implicit (line order). A unit's kind is its
//! building's kind; the price column is the rent, wage, or meal price that
//! matches it, `-` for recreation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::graph::{BuildNotes, Edge, WalkwayGraph};
use super::{Building, BuildingUnit, Economy, MapError, Point, Projection, UnitId, UnitKind, WorldMap};

pub const FORMAT_TAG: &str = "polmap/1";

impl WorldMap {
    pub fn to_polmap(&self) -> String {
        let mut s = String::new();
        s.push_str(FORMAT_TAG);
        s.push('\n');
        let proj = self.projection();
        let _ = writeln!(s, "origin\t{}\t{}", proj.lon0, proj.lat0);
        let _ = writeln!(s, "buildings\t{}", self.buildings().len());
        for b in self.buildings() {
            let tags = serde_json::to_string(&b.source_tags).expect("string map serializes");
            let _ = write!(s, "b\t{}\t{}\t{}\t{}", b.id, b.kind, tags, b.footprint.len());
            for p in &b.footprint {
                let _ = write!(s, "\t{}\t{}", p.x, p.y);
            }
            s.push('\n');
        }
        let _ = writeln!(s, "units\t{}", self.units().len());
        for u in self.units() {
            let price = match u.economy {
                Economy::Rent { per_day: v } | Economy::Wage { per_tick: v } | Economy::Meal { price: v } => v.to_string(),
                Economy::Free => "-".to_string(),
            };
            let _ = writeln!(s, "u\t{}\t{}\t{}\t{}\t{}", u.id, u.building, u.location.x, u.location.y, price);
        }
        let graph = self.graph();
        let _ = writeln!(s, "nodes\t{}", graph.node_count());
        for p in graph.nodes() {
            let _ = writeln!(s, "n\t{}\t{}", p.x, p.y);
        }
        let _ = writeln!(s, "edges\t{}", graph.edge_count());
        for e in graph.edges() {
            let _ = writeln!(s, "e\t{}\t{}\t{}", e.u, e.v, e.length);
        }
        let n = self.build_notes();
        let _ = writeln!(s, "notes\t{}\t{}\t{}", n.isolated_nodes_removed, n.duplicate_edges_merged, n.self_loops_dropped);
        s.push_str("end\n");
        s
    }

    pub fn from_polmap(text: &str) -> Result<WorldMap, MapError> {
        let mut reader = Reader { lines: text.lines().enumerate(), last: 0 };
        let tag = reader.next_fields()?;
        if tag != [FORMAT_TAG] {
            return Err(reader.err(format!("expected format tag `{FORMAT_TAG}`, found `{}`", tag.join("\t"))));
        }
        let origin = reader.record("origin", 2)?;
        let projection = Projection::new(reader.float(origin[0])?, reader.float(origin[1])?);

        let count = reader.count("buildings")?;
        let mut buildings = Vec::with_capacity(count);
        for _ in 0..count {
            let f = reader.next_fields()?;
            if f.len() < 5 || f[0] != "b" {
                return Err(reader.err("expected building record".into()));
            }
            let n: usize = reader.int(f[4])?;
            if f.len() != 5 + 2 * n {
                return Err(reader.err(format!("building has {} coordinate fields, expected {}", f.len() - 5, 2 * n)));
            }
            let footprint =
                (0..n).map(|i| Ok(Point::new(reader.float(f[5 + 2 * i])?, reader.float(f[6 + 2 * i])?))).collect::<Result<_, MapError>>()?;
            let source_tags: BTreeMap<String, String> =
                serde_json::from_str(f[3]).map_err(|e| reader.err(format!("bad tags: {e}")))?;
            buildings.push(Building { id: reader.int(f[1])?, kind: reader.kind(f[2])?, footprint, source_tags });
        }

        let count = reader.count("units")?;
        let mut units = Vec::with_capacity(count);
        for i in 0..count {
            let f = reader.record("u", 5)?;
            let id: UnitId = reader.int(f[0])?;
            if id as usize != i {
                return Err(reader.err(format!("unit id {id} out of sequence")));
            }
            let building: u32 = reader.int(f[1])?;
            let kind = buildings.get(building as usize).map(|b: &Building| b.kind).ok_or_else(|| reader.err("unknown building".into()))?;
            let economy = match (kind, f[4]) {
                (UnitKind::Recreation, "-") => Economy::Free,
                (UnitKind::Residential, v) => Economy::Rent { per_day: reader.int(v)? },
                (UnitKind::Workplace, v) => Economy::Wage { per_tick: reader.int(v)? },
                (UnitKind::Restaurant, v) => Economy::Meal { price: reader.int(v)? },
                (UnitKind::Recreation, v) => return Err(reader.err(format!("recreation unit with price `{v}`"))),
            };
            let location = Point::new(reader.float(f[2])?, reader.float(f[3])?);
            units.push(BuildingUnit { id, building, location, kind, economy });
        }

        let count = reader.count("nodes")?;
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let f = reader.record("n", 2)?;
            nodes.push(Point::new(reader.float(f[0])?, reader.float(f[1])?));
        }
        let count = reader.count("edges")?;
        let mut edges = Vec::with_capacity(count);
        for _ in 0..count {
            let f = reader.record("e", 3)?;
            edges.push(Edge { u: reader.int(f[0])?, v: reader.int(f[1])?, length: reader.float(f[2])? });
        }
        let f = reader.record("notes", 3)?;
        let notes = BuildNotes {
            isolated_nodes_removed: reader.int(f[0])?,
            duplicate_edges_merged: reader.int(f[1])?,
            self_loops_dropped: reader.int(f[2])?,
        };
        if reader.next_fields()? != ["end"] {
            return Err(reader.err("expected `end`".into()));
        }
        let (graph, _) = WalkwayGraph::from_parts(nodes, edges)?;
        WorldMap::new(projection, buildings, units, graph, notes)
    }

    pub fn save(&self, path: &Path) -> Result<(), MapError> {
        std::fs::write(path, self.to_polmap()).map_err(|source| MapError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<WorldMap, MapError> {
        let text = std::fs::read_to_string(path).map_err(|source| MapError::Io { path: path.display().to_string(), source })?;
        Self::from_polmap(&text)
    }
}

struct Reader<'a, I: Iterator<Item = (usize, &'a str)>> {
    lines: I,
    last: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Reader<'a, I> {
    fn err(&self, message: String) -> MapError {
        MapError::Format { line: self.last, message }
    }

    fn next_fields(&mut self) -> Result<Vec<&'a str>, MapError> {
        let (i, line) = self.lines.next().ok_or_else(|| MapError::Format { line: self.last + 1, message: "unexpected end".into() })?;
        self.last = i + 1;
        Ok(line.split('\t').collect())
    }

    fn record(&mut self, tag: &str, arity: usize) -> Result<Vec<&'a str>, MapError> {
        let f = self.next_fields()?;
        if f.len() != arity + 1 || f[0] != tag {
            return Err(self.err(format!("expected `{tag}` record with {arity} fields")));
        }
        Ok(f[1..].to_vec())
    }

    fn count(&mut self, tag: &str) -> Result<usize, MapError> {
        let f = self.record(tag, 1)?;
        self.int(f[0])
    }

    fn int<T: std::str::FromStr>(&self, s: &str) -> Result<T, MapError> {
        s.parse().map_err(|_| self.err(format!("bad integer `{s}`")))
    }

    fn float(&self, s: &str) -> Result<f64, MapError> {
        s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| self.err(format!("bad number `{s}`")))
    }

    fn kind(&self, s: &str) -> Result<UnitKind, MapError> {
        s.parse().map_err(|e: String| self.err(e))
    }
}

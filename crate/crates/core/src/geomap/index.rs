//! Uniform-grid spatial index for exact k-nearest queries.

use super::geometry::{BBox, Point};

/// Smallest allowed cell edge, meters.
pub const MIN_CELL_M: f64 = 50.0;
/// Cells per bounding-box diagonal.
pub const CELLS_PER_DIAGONAL: f64 = 256.0;

#[derive(Debug, Clone)]
pub struct GridIndex {
    origin: Point,
    cell: f64,
    nx: i64,
    ny: i64,
    /// Row-major cells; each holds `(id, location)` in ascending id order.
    cells: Vec<Vec<(u32, Point)>>,
    len: usize,
}

impl GridIndex {
    /// Cell size is `max(50 m, bbox_diagonal / 256)` over the given bounding box.
    pub fn cell_size_for(bbox: &BBox) -> f64 {
        MIN_CELL_M.max(bbox.diagonal() / CELLS_PER_DIAGONAL)
    }

    /// Builds the index over `items`, sized to `extent` (which must cover them).
    pub fn build(extent: BBox, items: impl IntoIterator<Item = (u32, Point)>) -> Self {
        let cell = Self::cell_size_for(&extent);
        let nx = ((extent.width() / cell).floor() as i64 + 1).max(1);
        let ny = ((extent.height() / cell).floor() as i64 + 1).max(1);
        let mut index = GridIndex { origin: extent.min, cell, nx, ny, cells: vec![Vec::new(); (nx * ny) as usize], len: 0 };
        let mut items: Vec<(u32, Point)> = items.into_iter().collect();
        items.sort_by_key(|(id, _)| *id);
        for (id, p) in items {
            let (cx, cy) = index.cell_of(p);
            let (cx, cy) = (cx.clamp(0, nx - 1), cy.clamp(0, ny - 1));
            index.cells[(cy * nx + cx) as usize].push((id, p));
            index.len += 1;
        }
        index
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn cell_of(&self, p: Point) -> (i64, i64) {
        (((p.x - self.origin.x) / self.cell).floor() as i64, ((p.y - self.origin.y) / self.cell).floor() as i64)
    }

    /// The `k` nearest items to `p` as `(squared distance, id)`, ascending by
    /// distance then id. Returns fewer when the index holds fewer.
    pub fn nearest(&self, p: Point, k: usize) -> Vec<(f64, u32)> {
        if k == 0 || self.len == 0 {
            return Vec::new();
        }
        if k >= self.len {
            let mut all: Vec<(f64, u32)> =
                self.cells.iter().flatten().map(|&(id, q)| (p.dist2(q), id)).collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            return all;
        }
        let (cx, cy) = self.cell_of(p);
        // Rings beyond this cannot contain any cell of the grid.
        let max_ring = [cx, self.nx - 1 - cx, cy, self.ny - 1 - cy].iter().map(|d| d.abs()).max().unwrap_or(0)
            + self.nx.max(self.ny);
        let mut found: Vec<(f64, u32)> = Vec::new();
        for ring in 0..=max_ring {
            self.visit_ring(cx, cy, ring, |id, q| found.push((p.dist2(q), id)));
            if found.len() >= k {
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                found.truncate(k);
                // Cells in ring r + 1 are at least r cells away along one axis.
                let reach = ring as f64 * self.cell;
                if found[k - 1].0 < reach * reach {
                    return found;
                }
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.truncate(k);
        found
    }

    fn visit_ring(&self, cx: i64, cy: i64, ring: i64, mut f: impl FnMut(u32, Point)) {
        let mut visit = |x: i64, y: i64| {
            if x >= 0 && y >= 0 && x < self.nx && y < self.ny {
                for &(id, q) in &self.cells[(y * self.nx + x) as usize] {
                    f(id, q);
                }
            }
        };
        if ring == 0 {
            visit(cx, cy);
            return;
        }
        for x in (cx - ring)..=(cx + ring) {
            visit(x, cy - ring);
            visit(x, cy + ring);
        }
        for y in (cy - ring + 1)..=(cy + ring - 1) {
            visit(cx - ring, y);
            visit(cx + ring, y);
        }
    }
}

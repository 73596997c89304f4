//! Planar geometry in local meters and the lon/lat projection.

/// Mean Earth radius in meters (IUGG).
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist2(other).sqrt()
    }

    /// Linear interpolation; `t = 0` is `self`, `t = 1` is `other`.
    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn of(points: impl IntoIterator<Item = Point>) -> Option<BBox> {
        let mut it = points.into_iter();
        let first = it.next()?;
        Some(it.fold(BBox { min: first, max: first }, |b, p| BBox {
            min: Point::new(b.min.x.min(p.x), b.min.y.min(p.y)),
            max: Point::new(b.max.x.max(p.x), b.max.y.max(p.y)),
        }))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        self.min.dist(self.max)
    }

    pub fn center(&self) -> Point {
        self.min.lerp(self.max, 0.5)
    }
}

/// Signed shoelace area; positive for counter-clockwise rings.
pub fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc * 0.5
}

pub fn area(ring: &[Point]) -> f64 {
    signed_area(ring).abs()
}

/// Area centroid of a simple polygon; falls back to the vertex mean for
/// zero-area rings.
pub fn centroid(ring: &[Point]) -> Point {
    let n = ring.len();
    let a = signed_area(ring);
    if a.abs() < 1e-12 {
        let (sx, sy) = ring.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        return Point::new(sx / n as f64, sy / n as f64);
    }
    // Shift to the first vertex to limit cancellation for far-from-origin rings.
    let o = ring[0];
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = Point::new(ring[i].x - o.x, ring[i].y - o.y);
        let q = Point::new(ring[(i + 1) % n].x - o.x, ring[(i + 1) % n].y - o.y);
        let cross = p.x * q.y - q.x * p.y;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    Point::new(o.x + cx / (6.0 * a), o.y + cy / (6.0 * a))
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    let scale = a.dist(b).max(1.0);
    if cross.abs() > 1e-9 * scale {
        return false;
    }
    p.x >= a.x.min(b.x) - 1e-9 && p.x <= a.x.max(b.x) + 1e-9 && p.y >= a.y.min(b.y) - 1e-9 && p.y <= a.y.max(b.y) + 1e-9
}

/// Point-in-polygon by ray casting; points on the boundary count as inside.
pub fn contains(ring: &[Point], p: Point) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if on_segment(p, a, b) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

/// True when no two non-adjacent edges of the ring touch.
pub fn is_simple(ring: &[Point]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a1, a2) = (ring[i], ring[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (b1, b2) = (ring[j], ring[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

/// A point guaranteed to lie inside (or on) the ring: the centroid when it is
/// inside, else the midpoint of the widest horizontal interior span through
/// the bounding-box middle.
pub fn interior_point(ring: &[Point]) -> Point {
    let c = centroid(ring);
    if contains(ring, c) {
        return c;
    }
    let bbox = BBox::of(ring.iter().copied()).expect("non-empty ring");
    for frac in [0.5, 0.25, 0.75, 0.125, 0.375, 0.625, 0.875] {
        let y = bbox.min.y + bbox.height() * frac;
        let mut xs: Vec<f64> = Vec::new();
        let n = ring.len();
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            if (a.y > y) != (b.y > y) {
                xs.push((b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x);
            }
        }
        xs.sort_by(f64::total_cmp);
        let best = xs.chunks_exact(2).max_by(|l, r| (l[1] - l[0]).total_cmp(&(r[1] - r[0])));
        if let Some(span) = best {
            let p = Point::new((span[0] + span[1]) * 0.5, y);
            if contains(ring, p) {
                return p;
            }
        }
    }
    ring[0]
}

/// Equirectangular projection about a fixed origin, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub lon0: f64,
    pub lat0: f64,
    cos_lat0: f64,
}

impl Projection {
    pub fn new(lon0: f64, lat0: f64) -> Self {
        Self { lon0, lat0, cos_lat0: lat0.to_radians().cos() }
    }

    pub fn project(&self, lon: f64, lat: f64) -> Point {
        Point::new(
            EARTH_RADIUS_M * (lon - self.lon0).to_radians() * self.cos_lat0,
            EARTH_RADIUS_M * (lat - self.lat0).to_radians(),
        )
    }

    /// Returns `(lon, lat)` in degrees.
    pub fn unproject(&self, p: Point) -> (f64, f64) {
        let lon = self.lon0 + (p.x / (EARTH_RADIUS_M * self.cos_lat0)).to_degrees();
        let lat = self.lat0 + (p.y / EARTH_RADIUS_M).to_degrees();
        (lon, lat)
    }
}

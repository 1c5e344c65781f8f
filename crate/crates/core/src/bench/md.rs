//! Area of the symmetric difference of two planar regions bounded by
//! polygons (an open curve is closed by its endpoint chord).

use crate::error::{Error, Result};
use crate::mesh::{Point, SimplicialSurface};

pub const DEFAULT_MD_RESOLUTION: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManifoldDistance {
    pub value: f64,
    /// either polygon crosses itself, so the even–odd region may differ
    /// from the intended enclosed region
    pub self_intersecting: bool,
}

/// Vertices of a curve mesh in traversal order. Open curves start at the
/// vertex with no incoming segment; the polygon is closed implicitly.
pub fn curve_polygon(mesh: &SimplicialSurface) -> Result<Vec<Point>> {
    if mesh.ambient_dim() != 2 {
        return Err(Error::InvalidMesh("manifold distance needs a planar curve".into()));
    }
    let k = mesh.num_vertices();
    let mut next = vec![usize::MAX; k];
    let mut has_prev = vec![false; k];
    for s in mesh.simplices() {
        next[s[0]] = s[1];
        has_prev[s[1]] = true;
    }
    let used: Vec<usize> = (0..k).filter(|&q| next[q] != usize::MAX || has_prev[q]).collect();
    let starts: Vec<usize> = used.iter().copied().filter(|&q| !has_prev[q]).collect();
    if starts.len() > 1 {
        return Err(Error::InvalidMesh("curve has more than one component".into()));
    }
    let start = starts.first().copied().unwrap_or(used[0]);
    let mut order = vec![start];
    let mut q = start;
    while next[q] != usize::MAX && next[q] != start {
        q = next[q];
        order.push(q);
        if order.len() > k {
            return Err(Error::InvalidMesh("curve traversal does not terminate".into()));
        }
    }
    if order.len() != used.len() {
        return Err(Error::InvalidMesh("curve has more than one component".into()));
    }
    Ok(order.into_iter().map(|q| *mesh.vertex(q)).collect())
}

/// Symmetric-difference area on `resolution` horizontal scanlines across
/// the joint bounding box. Each scanline is intersected exactly with both
/// polygons (even–odd rule), so the only discretization is the midpoint
/// rule in y.
pub fn manifold_distance(a: &[Point], b: &[Point], resolution: usize) -> ManifoldDistance {
    let resolution = resolution.max(1);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in a.iter().chain(b) {
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let self_intersecting = is_self_intersecting(a) || is_self_intersecting(b);
    if !(y1 > y0) {
        return ManifoldDistance {
            value: 0.0,
            self_intersecting,
        };
    }
    let dy = (y1 - y0) / resolution as f64;
    let mut rows: Vec<Vec<(f64, u8)>> = vec![Vec::new(); resolution];
    scan(a, 0, y0, dy, &mut rows);
    scan(b, 1, y0, dy, &mut rows);
    let mut area = 0.0;
    for row in &mut rows {
        row.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut inside = [false, false];
        let mut last = 0.0;
        let mut len = 0.0;
        for &(x, tag) in row.iter() {
            if inside[0] != inside[1] {
                len += x - last;
            }
            inside[tag as usize] = !inside[tag as usize];
            last = x;
        }
        area += len;
    }
    ManifoldDistance {
        value: area * dy,
        self_intersecting,
    }
}

fn scan(poly: &[Point], tag: u8, y0: f64, dy: f64, rows: &mut [Vec<(f64, u8)>]) {
    let n = poly.len();
    let nrows = rows.len();
    for e in 0..n {
        let p = poly[e];
        let q = poly[(e + 1) % n];
        let (lo, hi) = if p.y < q.y { (p.y, q.y) } else { (q.y, p.y) };
        // candidate rows with centre in [lo, hi], then the exact half-open test
        let first = (((lo - y0) / dy - 0.5).floor().max(0.0)) as usize;
        let last = ((((hi - y0) / dy - 0.5).ceil()) as usize).min(nrows - 1);
        for (i, row) in rows.iter_mut().enumerate().take(last + 1).skip(first) {
            let y = y0 + (i as f64 + 0.5) * dy;
            if (p.y > y) != (q.y > y) {
                let x = p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y);
                row.push((x, tag));
            }
        }
    }
}

fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Proper crossings between non-adjacent edges of the closed polygon.
pub fn is_self_intersecting(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 4 {
        return false;
    }
    let edge = |i: usize| (poly[i], poly[(i + 1) % n]);
    // sweep over edges sorted by min x to prune pairs
    let mut order: Vec<usize> = (0..n).collect();
    let minx = |i: usize| poly[i].x.min(poly[(i + 1) % n].x);
    let maxx = |i: usize| poly[i].x.max(poly[(i + 1) % n].x);
    order.sort_by(|&i, &j| minx(i).total_cmp(&minx(j)));
    for (oi, &i) in order.iter().enumerate() {
        let (a, b) = edge(i);
        for &j in &order[oi + 1..] {
            if minx(j) > maxx(i) {
                break;
            }
            if (i + 1) % n == j || (j + 1) % n == i {
                continue;
            }
            let (c, d) = edge(j);
            let d1 = orient(&a, &b, &c);
            let d2 = orient(&a, &b, &d);
            let d3 = orient(&c, &d, &a);
            let d4 = orient(&c, &d, &b);
            if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                return true;
            }
        }
    }
    false
}

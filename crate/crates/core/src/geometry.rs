//! Point-in-polygon, density clustering and k-nearest-neighbour concave hulls.
//!
//! Contours are computed per (quadrant, color) group of a cell: points are
//! clustered with DBSCAN, and each cluster is wrapped in a concave hull.
//! Clusters never cross a quadrant or color boundary.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::InstanceId;
use crate::error::{Error, Result};
use crate::slicing::{CellPoint, PointColor, Quadrant};

/// Axis span of a classification cell (coordinates live in [-1, 1]).
pub const CLASSIFICATION_SPAN: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn dist2(self, o: Point) -> f64 {
        let d = self.sub(o);
        d.x * d.x + d.y * d.y
    }

    fn total_cmp(&self, o: &Point) -> Ordering {
        self.x.total_cmp(&o.x).then(self.y.total_cmp(&o.y))
    }
}

fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    cross(b.sub(a), c.sub(a))
}

fn dist_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return p.dist2(a).sqrt();
    }
    let ap = p.sub(a);
    let t = ((ap.x * ab.x + ap.y * ab.y) / len2).clamp(0.0, 1.0);
    p.dist2(Point::new(a.x + t * ab.x, a.y + t * ab.y)).sqrt()
}

fn edge_tolerance(poly: &[Point]) -> f64 {
    let extent = poly
        .iter()
        .fold(0.0f64, |m, p| m.max(p.x.abs()).max(p.y.abs()));
    1e-12 * extent.max(1.0)
}

/// Even-odd containment; points on an edge (within rounding) are inside.
///
/// Works for polylines too: a two-vertex "polygon" contains the points of
/// its segment.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    if n == 0 {
        return false;
    }
    let tol = edge_tolerance(poly);
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if dist_to_segment(p, a, b) <= tol {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Absolute shoelace area.
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n).map(|i| cross(poly[i], poly[(i + 1) % n])).sum();
    twice.abs() / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    /// Neighbourhood radius as a fraction of the axis span.
    pub eps: f64,
    /// Minimum neighbourhood size (the point itself included) of a core point.
    pub min_pts: usize,
    /// Initial neighbour count of the concave hull walk.
    pub hull_k: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            eps: 0.05,
            min_pts: 5,
            hull_k: 3,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.min_pts < 3 {
            return Err(Error::InvalidArgument(format!(
                "min_pts must be >= 3, got {}",
                self.min_pts
            )));
        }
        if self.hull_k < 3 {
            return Err(Error::InvalidArgument(format!(
                "hull_k must be >= 3, got {}",
                self.hull_k
            )));
        }
        Ok(())
    }
}

/// Largest coordinate range of `points`, or 1 when they are all identical.
pub fn axis_span(points: &[CellPoint]) -> f64 {
    let range = |f: fn(&CellPoint) -> f64| {
        let (lo, hi) = points
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi - lo
    };
    let span = range(|p| p.x).max(range(|p| p.y));
    if span.is_finite() && span > 0.0 {
        span
    } else {
        1.0
    }
}

/// Indices into the clustered slice.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Clustering {
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
}

/// DBSCAN over `points` with radius `cfg.eps * span`.
///
/// Points are visited in ascending instance-id order, so border points
/// reachable from two clusters go to the one discovered first.
pub fn cluster_points(points: &[CellPoint], cfg: &GeometryConfig, span: f64) -> Clustering {
    let radius = cfg.eps * span;
    let r2 = radius * radius;
    let cell_of = |p: &CellPoint| ((p.x / radius).floor() as i64, (p.y / radius).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell_of(p)).or_default().push(i);
    }
    let neighbours = |i: usize| -> Vec<usize> {
        let p = &points[i];
        let (cx, cy) = cell_of(p);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(cx + dx, cy + dy)) {
                    out.extend(
                        bucket
                            .iter()
                            .copied()
                            .filter(|&j| p.position().dist2(points[j].position()) <= r2),
                    );
                }
            }
        }
        out.sort_unstable_by_key(|&j| (points[j].instance, j));
        out
    };

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| (points[i].instance, i));

    const UNSEEN: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let mut label = vec![UNSEEN; points.len()];
    let mut clusters: Vec<Vec<usize>> = Vec::new();

    for &i in &order {
        if label[i] != UNSEEN {
            continue;
        }
        let seeds = neighbours(i);
        if seeds.len() < cfg.min_pts {
            label[i] = NOISE;
            continue;
        }
        let id = clusters.len();
        let mut members = vec![i];
        label[i] = id;
        let mut queue: std::collections::VecDeque<usize> = seeds.into_iter().collect();
        while let Some(q) = queue.pop_front() {
            if label[q] == NOISE {
                label[q] = id;
                members.push(q);
                continue;
            }
            if label[q] != UNSEEN {
                continue;
            }
            label[q] = id;
            members.push(q);
            let nb = neighbours(q);
            if nb.len() >= cfg.min_pts {
                queue.extend(nb.into_iter().filter(|&j| label[j] == UNSEEN || label[j] == NOISE));
            }
        }
        members.sort_unstable_by_key(|&j| (points[j].instance, j));
        clusters.push(members);
    }

    let noise = order.into_iter().filter(|&i| label[i] == NOISE).collect();
    Clustering { clusters, noise }
}

/// A cluster whose points are collinear (or fewer than three distinct).
#[derive(Clone, Debug, PartialEq)]
pub struct DegenerateHull {
    /// Extreme points of the segment (one point when all coincide).
    pub polyline: Vec<Point>,
}

impl fmt::Display for DegenerateHull {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "collinear cluster, hull is a {}-point polyline", self.polyline.len())
    }
}

impl std::error::Error for DegenerateHull {}

fn distinct(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(Point::total_cmp);
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    pts
}

/// k-nearest-neighbour concave hull, counter-clockwise from the lowest point.
///
/// Retries with a larger neighbour count while the walk gets stuck or leaves
/// a point outside; falls back to the convex hull once `k` reaches the
/// number of distinct points.
pub fn concave_hull(points: &[Point], hull_k: usize) -> std::result::Result<Vec<Point>, DegenerateHull> {
    let pts = distinct(points);
    if pts.len() < 3 {
        return Err(DegenerateHull { polyline: pts });
    }
    let hull = convex_hull(&pts);
    if hull.len() < 3 {
        return Err(DegenerateHull { polyline: hull });
    }
    for k in hull_k.max(3)..pts.len() {
        if let Some(h) = knn_walk(&pts, k) {
            return Ok(h);
        }
    }
    Ok(hull)
}

/// Andrew's monotone chain, collinear points dropped, rotated to start at
/// the lowest (then leftmost) vertex. Returns the extreme points for
/// collinear input.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let pts = distinct(points);
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && orient(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && orient(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return lower;
    }
    let start = lowest(&lower);
    lower.rotate_left(start);
    lower
}

fn lowest(pts: &[Point]) -> usize {
    (0..pts.len())
        .min_by(|&a, &b| {
            pts[a]
                .y
                .total_cmp(&pts[b].y)
                .then(pts[a].x.total_cmp(&pts[b].x))
        })
        .expect("non-empty")
}

/// Clockwise angle in [0, 2π) from direction `from` to direction `to`.
fn clockwise_angle(from: Point, to: Point) -> f64 {
    let ccw = cross(from, to).atan2(from.x * to.x + from.y * to.y);
    let cw = -ccw;
    if cw < 0.0 {
        cw + std::f64::consts::TAU
    } else {
        cw
    }
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    orient(a, b, p) == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

fn segments_intersect(p1: Point, p2: Point, p3: Point, p4: Point) -> bool {
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(p1, p3, p4) || on_segment(p2, p3, p4) || on_segment(p3, p1, p2) || on_segment(p4, p1, p2)
}

/// Does the new edge `a -> b` (point indices) cross any existing edge of `hull`?
fn crosses_hull(pts: &[Point], hull: &[usize], a: usize, b: usize) -> bool {
    for w in hull.windows(2) {
        let (c, d) = (w[0], w[1]);
        let shared = [c, d].iter().filter(|&&e| e == a || e == b).count();
        match shared {
            0 => {
                if segments_intersect(pts[a], pts[b], pts[c], pts[d]) {
                    return true;
                }
            }
            1 => {
                // adjacent edges may only touch at the shared vertex
                let old_end = if c == a || c == b { d } else { c };
                let new_end = if a == c || a == d { b } else { a };
                if on_segment(pts[old_end], pts[a], pts[b]) || on_segment(pts[new_end], pts[c], pts[d]) {
                    return true;
                }
            }
            _ => return true,
        }
    }
    false
}

fn knn_walk(pts: &[Point], k: usize) -> Option<Vec<Point>> {
    let n = pts.len();
    let first = lowest(pts);
    let mut available = vec![true; n];
    available[first] = false;
    let mut left = n - 1;
    let mut hull = vec![first];
    let mut current = first;
    let mut back = Point::new(-1.0, 0.0);

    loop {
        let allow_close = hull.len() >= 4 || left == 0;
        let mut cands: Vec<usize> = (0..n)
            .filter(|&i| available[i] || (allow_close && i == first))
            .collect();
        if cands.is_empty() {
            return None;
        }
        let here = pts[current];
        cands.sort_by(|&a, &b| {
            here.dist2(pts[a])
                .total_cmp(&here.dist2(pts[b]))
                .then(a.cmp(&b))
        });
        cands.truncate(k);
        let angles: Vec<f64> = cands
            .iter()
            .map(|&c| clockwise_angle(back, pts[c].sub(here)))
            .collect();
        let mut ranked: Vec<usize> = (0..cands.len()).collect();
        ranked.sort_by(|&a, &b| {
            angles[b]
                .total_cmp(&angles[a])
                .then(here.dist2(pts[cands[a]]).total_cmp(&here.dist2(pts[cands[b]])))
                .then(cands[a].cmp(&cands[b]))
        });

        let next = ranked
            .iter()
            .map(|&r| cands[r])
            .find(|&c| !crosses_hull(pts, &hull, current, c))?;

        if next == first {
            break;
        }
        hull.push(next);
        available[next] = false;
        left -= 1;
        back = here.sub(pts[next]);
        current = next;
    }

    let polygon: Vec<Point> = hull.iter().map(|&i| pts[i]).collect();
    if polygon.len() < 3 || polygon_area(&polygon) == 0.0 {
        return None;
    }
    if pts.iter().all(|&p| point_in_polygon(p, &polygon)) {
        Some(polygon)
    } else {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub color: PointColor,
    pub quadrant: Quadrant,
    /// Closed implicitly; a two-vertex polyline when `degenerate`.
    pub polygon: Vec<[f64; 2]>,
    pub member_count: usize,
    pub members: Vec<InstanceId>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

impl Contour {
    pub fn vertices(&self) -> Vec<Point> {
        self.polygon.iter().map(|v| Point::new(v[0], v[1])).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellContours {
    pub contours: Vec<Contour>,
    pub noise: Vec<CellPoint>,
}

/// Contours for every (quadrant, color) cluster; unclustered points come
/// back as noise. Groups are emitted in (Q1..Q4) x (blue, red, over, under) order.
pub fn cell_contours(points: &[CellPoint], cfg: &GeometryConfig, span: f64) -> Result<CellContours> {
    cfg.validate()?;
    let mut out = CellContours::default();
    let mut noise_idx = Vec::new();
    for q in Quadrant::ALL {
        for color in PointColor::ALL {
            let group: Vec<CellPoint> = points
                .iter()
                .filter(|p| p.quadrant == q && p.color == color)
                .copied()
                .collect();
            if group.is_empty() {
                continue;
            }
            let clustering = cluster_points(&group, cfg, span);
            noise_idx.extend(clustering.noise.iter().map(|&i| group[i].instance));
            for members in clustering.clusters {
                if members.len() < cfg.min_pts {
                    noise_idx.extend(members.iter().map(|&i| group[i].instance));
                    continue;
                }
                let positions: Vec<Point> = members.iter().map(|&i| group[i].position()).collect();
                let (polygon, degenerate) = match concave_hull(&positions, cfg.hull_k) {
                    Ok(p) => (p, false),
                    Err(d) => (d.polyline, true),
                };
                out.contours.push(Contour {
                    color,
                    quadrant: q,
                    polygon: polygon.iter().map(|p| [p.x, p.y]).collect(),
                    member_count: members.len(),
                    members: members.iter().map(|&i| group[i].instance).collect(),
                    degenerate,
                });
            }
        }
    }
    noise_idx.sort_unstable();
    out.noise = points
        .iter()
        .filter(|p| noise_idx.binary_search(&p.instance).is_ok())
        .copied()
        .collect();
    Ok(out)
}

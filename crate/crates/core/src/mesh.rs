//! Graded Delaunay triangulation of polygonal domains.
//!
//! Point placement: multi-level hexagonal lattices filtered by a per-point
//! predicate (level match + clearance from the boundary + separation from
//! coarser levels). Every predicate is a function of the point alone, so the
//! construction is order-independent, deterministic, and preserves the
//! domain's mirror symmetries — meshes of symmetric domains are symmetric,
//! which the concentration-point solver relies on. The constrained Delaunay
//! kernel guarantees the boundary polyline appears edge-for-edge, so the kept
//! triangles tile the polygon exactly.

use crate::domain::{point_in_polygon, segment_distance, DomainSpec};
use crate::error::{Error, Result};
use crate::geom::Point;
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};
use std::collections::HashMap;
use std::io::{BufRead, Write};

/// Lattice spacing as a fraction of the local target size.
const SPACING: f64 = 0.66;
/// Minimum separation (in units of local spacing) from boundary points and
/// coarser-level points.
const CLEARANCE: f64 = 0.45;

#[derive(Clone, Debug)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    /// Largest element diameter (longest edge).
    pub h_max: f64,
}

/// Grading request: element size shrinks to `ratio * h_target` at each
/// center, relaxing linearly back to `h_target` at distance
/// `4 sqrt(ratio) * diameter`.
#[derive(Clone, Debug)]
pub struct Grading {
    pub centers: Vec<Point>,
    pub ratio: f64,
}

struct Sizing {
    h: f64,
    centers: Vec<Point>,
    ratio: f64,
    radius: f64,
}

impl Sizing {
    fn new(h: f64, grading: Option<&Grading>, diameter: f64) -> Result<Self> {
        match grading {
            None => Ok(Sizing {
                h,
                centers: Vec::new(),
                ratio: 1.0,
                radius: 1.0,
            }),
            Some(g) => {
                if !(g.ratio > 0.0 && g.ratio <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "grading ratio must lie in (0, 1], got {}",
                        g.ratio
                    )));
                }
                Ok(Sizing {
                    h,
                    centers: g.centers.clone(),
                    ratio: g.ratio,
                    radius: 4.0 * g.ratio.sqrt() * diameter,
                })
            }
        }
    }

    fn size(&self, x: Point) -> f64 {
        let mut g: f64 = 1.0;
        for &c in &self.centers {
            let d = x.dist(c);
            g = g.min((self.ratio + (1.0 - self.ratio) * d / self.radius).min(1.0));
        }
        self.h * g.max(self.ratio)
    }
}

/// Delaunay triangulation of the domain polygon with element size bounded by
/// `h_target`, optionally graded toward the given centers.
pub fn generate_mesh(
    domain: &DomainSpec,
    h_target: f64,
    grading: Option<&Grading>,
) -> Result<Mesh> {
    if !(h_target > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "h_target must be positive, got {h_target}"
        )));
    }
    let poly = domain.polygon()?;
    let diameter = domain.diameter()?;
    let sizing = Sizing::new(h_target, grading, diameter)?;

    let boundary_pts = resample_boundary(&poly, &sizing);
    let interior_pts = lattice_points(&poly, &sizing, &boundary_pts, diameter);

    triangulate(&poly, &boundary_pts, &interior_pts)
}

/// Subdivide each polygon edge so every boundary segment respects the local
/// size.
fn resample_boundary(poly: &[Point], sizing: &Sizing) -> Vec<Point> {
    let mut out = Vec::new();
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let len = a.dist(b);
        let s = sizing
            .size(a)
            .min(sizing.size(b))
            .min(sizing.size((a + b) * 0.5));
        let k = (len / (0.8 * s)).ceil().max(1.0) as usize;
        for j in 0..k {
            out.push(a + (b - a) * (j as f64 / k as f64));
        }
    }
    out
}

/// Hash grid for neighbor queries during point filtering.
struct HashGrid {
    cell: f64,
    map: HashMap<(i64, i64), Vec<Point>>,
}

impl HashGrid {
    fn new(cell: f64) -> Self {
        HashGrid {
            cell,
            map: HashMap::new(),
        }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: Point) {
        let k = self.key(p);
        self.map.entry(k).or_default().push(p);
    }

    fn min_dist(&self, p: Point, radius: f64) -> f64 {
        let r = (radius / self.cell).ceil() as i64;
        let (kx, ky) = self.key(p);
        let mut d = f64::INFINITY;
        for ix in kx - r..=kx + r {
            for iy in ky - r..=ky + r {
                if let Some(v) = self.map.get(&(ix, iy)) {
                    for q in v {
                        d = d.min(p.dist(*q));
                    }
                }
            }
        }
        d
    }
}

fn lattice_points(
    poly: &[Point],
    sizing: &Sizing,
    boundary_pts: &[Point],
    diameter: f64,
) -> Vec<Point> {
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in poly {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }

    let s0 = SPACING * sizing.h;
    let n_levels = if sizing.ratio < 1.0 {
        (1.0 / sizing.ratio).log2().ceil() as usize
    } else {
        0
    };

    let mut grid = HashGrid::new(s0.max(1e-6 * diameter));
    for &b in boundary_pts {
        grid.insert(b);
    }

    let mut kept = Vec::new();
    for level in 0..=n_levels {
        let s = s0 / (1u64 << level) as f64;
        let dy = s * 3.0f64.sqrt() * 0.5;
        // symmetric hex lattice: rows k*dy, stagger by row parity
        let kmax = (ymax.max(-ymin) / dy).ceil() as i64;
        let mut level_pts = Vec::new();
        for k in -kmax..=kmax {
            let y = k as f64 * dy;
            if y < ymin - dy || y > ymax + dy {
                continue;
            }
            let off = if k.rem_euclid(2) == 1 { 0.5 * s } else { 0.0 };
            let mmax = ((xmax.max(-xmin) + s) / s).ceil() as i64;
            for m in -mmax..=mmax {
                let x = m as f64 * s + off;
                if x < xmin || x > xmax {
                    continue;
                }
                let p = Point::new(x, y);
                let tau = SPACING * sizing.size(p);
                // level assignment: nearest power-of-two spacing for tau
                let want = (s0 / tau).log2().round().max(0.0) as usize;
                if want.min(n_levels) != level {
                    continue;
                }
                if !point_in_polygon(p, poly) {
                    continue;
                }
                // clearance from the boundary polyline
                let bd = boundary_clearance(p, poly);
                if bd < CLEARANCE * tau {
                    continue;
                }
                // separation from boundary points and coarser levels
                if grid.min_dist(p, CLEARANCE * tau) < CLEARANCE * tau {
                    continue;
                }
                level_pts.push(p);
            }
        }
        for &p in &level_pts {
            grid.insert(p);
        }
        kept.extend(level_pts);
    }
    kept
}

fn boundary_clearance(p: Point, poly: &[Point]) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..poly.len() {
        d = d.min(segment_distance(p, poly[i], poly[(i + 1) % poly.len()]));
    }
    d
}

fn triangulate(poly: &[Point], boundary_pts: &[Point], interior_pts: &[Point]) -> Result<Mesh> {
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::new();

    let mut bhandles = Vec::with_capacity(boundary_pts.len());
    for &p in boundary_pts {
        let h = cdt
            .insert(Point2::new(p.x, p.y))
            .map_err(|e| Error::MeshFailure(format!("boundary insertion: {e:?}")))?;
        bhandles.push(h);
    }
    for i in 0..bhandles.len() {
        let a = bhandles[i];
        let b = bhandles[(i + 1) % bhandles.len()];
        if a != b {
            cdt.add_constraint(a, b);
        }
    }
    for &p in interior_pts {
        cdt.insert(Point2::new(p.x, p.y))
            .map_err(|e| Error::MeshFailure(format!("interior insertion: {e:?}")))?;
    }

    let mut nodes = vec![Point::ORIGIN; cdt.num_vertices()];
    for v in cdt.vertices() {
        let pos = v.position();
        nodes[v.fix().index()] = Point::new(pos.x, pos.y);
    }
    let mut boundary = vec![false; nodes.len()];
    for h in &bhandles {
        boundary[h.index()] = true;
    }

    let mut triangles = Vec::new();
    let mut h_max: f64 = 0.0;
    for face in cdt.inner_faces() {
        let vs = face.vertices();
        let idx = [vs[0].fix().index(), vs[1].fix().index(), vs[2].fix().index()];
        let [a, b, c] = [nodes[idx[0]], nodes[idx[1]], nodes[idx[2]]];
        let centroid = (a + b + c) * (1.0 / 3.0);
        if !point_in_polygon(centroid, poly) {
            continue;
        }
        let area = 0.5 * (b - a).cross(c - a);
        let edge = a.dist(b).max(b.dist(c)).max(c.dist(a));
        // collinear boundary triples (midpoints of polygonized edges) produce
        // rounding-area caps; drop them rather than feed them to the FEM
        if area <= 1e-10 * edge * edge {
            continue;
        }
        h_max = h_max.max(edge);
        triangles.push(idx);
    }
    if triangles.is_empty() {
        return Err(Error::MeshFailure("no interior triangles".into()));
    }
    Ok(Mesh {
        nodes,
        triangles,
        boundary,
        h_max,
    })
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn total_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]];
                0.5 * (b - a).cross(c - a)
            })
            .sum()
    }

    /// Smallest element diameter among triangles touching `x` within `radius`.
    pub fn min_diameter_near(&self, x: Point, radius: f64) -> f64 {
        let mut d = f64::INFINITY;
        for t in &self.triangles {
            let [a, b, c] = [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]];
            let centroid = (a + b + c) * (1.0 / 3.0);
            if centroid.dist(x) <= radius {
                d = d.min(a.dist(b).max(b.dist(c)).max(c.dist(a)));
            }
        }
        d
    }

    /// Index of the node closest to `x`.
    pub fn nearest_node(&self, x: Point) -> usize {
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = n.dist(x);
            if d < bd {
                bd = d;
                best = i;
            }
        }
        best
    }

    /// Plain-text export: `N_nodes N_tris`, then `x y boundary_flag` lines,
    /// then 0-based `i j k` lines.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{} {}", self.nodes.len(), self.triangles.len())?;
        for (n, &b) in self.nodes.iter().zip(&self.boundary) {
            writeln!(w, "{} {} {}", n.x, n.y, u8::from(b))?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl BufRead) -> Result<Mesh> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty mesh file".into()))??;
        let mut it = header.split_whitespace();
        let nn: usize = parse_field(it.next(), "node count")?;
        let nt: usize = parse_field(it.next(), "triangle count")?;
        let mut nodes = Vec::with_capacity(nn);
        let mut boundary = Vec::with_capacity(nn);
        for _ in 0..nn {
            let line = lines
                .next()
                .ok_or_else(|| Error::InvalidInput("truncated node list".into()))??;
            let mut it = line.split_whitespace();
            let x: f64 = parse_field(it.next(), "node x")?;
            let y: f64 = parse_field(it.next(), "node y")?;
            let b: u8 = parse_field(it.next(), "boundary flag")?;
            nodes.push(Point::new(x, y));
            boundary.push(b != 0);
        }
        let mut triangles = Vec::with_capacity(nt);
        let mut h_max: f64 = 0.0;
        for _ in 0..nt {
            let line = lines
                .next()
                .ok_or_else(|| Error::InvalidInput("truncated triangle list".into()))??;
            let mut it = line.split_whitespace();
            let t = [
                parse_field::<usize>(it.next(), "triangle index")?,
                parse_field::<usize>(it.next(), "triangle index")?,
                parse_field::<usize>(it.next(), "triangle index")?,
            ];
            if t.iter().any(|&i| i >= nn) {
                return Err(Error::InvalidInput(format!("triangle index out of range: {t:?}")));
            }
            let [a, b, c] = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
            h_max = h_max.max(a.dist(b)).max(b.dist(c)).max(c.dist(a));
            triangles.push(t);
        }
        Ok(Mesh {
            nodes,
            triangles,
            boundary,
            h_max,
        })
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, name: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::InvalidInput(format!("missing {name}")))?
        .parse()
        .map_err(|_| Error::InvalidInput(format!("unparseable {name}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn disk() -> DomainSpec {
        DomainSpec::UnitDisk {}
    }

    #[test]
    fn disk_sizing_contract() {
        let m = generate_mesh(&disk(), 0.1, None).unwrap();
        assert!(m.h_max <= 0.1, "h_max = {}", m.h_max);
        assert!(m.num_nodes() >= 300, "nodes = {}", m.num_nodes());
        // triangulation tiles the 256-gon exactly
        let poly_area = disk().area().unwrap();
        assert!((m.total_area() - poly_area).abs() < 1e-9);
        assert!((m.total_area() - PI).abs() < 1e-3);
    }

    #[test]
    fn graded_mesh_fine_at_center() {
        let g = Grading {
            centers: vec![Point::ORIGIN],
            ratio: 0.1,
        };
        let m = generate_mesh(&disk(), 0.1, Some(&g)).unwrap();
        let dmin = m.min_diameter_near(Point::ORIGIN, 0.02);
        assert!(dmin <= 0.01, "min diameter near origin = {dmin}");
        assert!(m.h_max <= 0.1);
    }

    #[test]
    fn mesh_is_conforming() {
        let m = generate_mesh(&disk(), 0.15, None).unwrap();
        // every edge is shared by exactly 2 triangles, or 1 on the boundary
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &m.triangles {
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let k = (e.0.min(e.1), e.0.max(e.1));
                *edges.entry(k).or_insert(0) += 1;
            }
        }
        for ((a, b), count) in &edges {
            assert!(*count == 1 || *count == 2);
            if *count == 1 {
                assert!(
                    m.boundary[*a] && m.boundary[*b],
                    "open edge ({a}, {b}) off the boundary"
                );
            }
        }
    }

    #[test]
    fn mesh_mirror_symmetric() {
        let m = generate_mesh(&disk(), 0.2, None).unwrap();
        for (i, n) in m.nodes.iter().enumerate() {
            let mx = m
                .nodes
                .iter()
                .any(|q| (q.x + n.x).abs() < 1e-9 && (q.y - n.y).abs() < 1e-9);
            let my = m
                .nodes
                .iter()
                .any(|q| (q.x - n.x).abs() < 1e-9 && (q.y + n.y).abs() < 1e-9);
            assert!(mx && my, "node {i} at {n:?} lacks a mirror image");
        }
    }

    #[test]
    fn dumbbell_meshes() {
        let d = DomainSpec::Dumbbell {
            rho: 1.0,
            neck_width: 0.3,
            neck_length: 2.0,
        };
        let m = generate_mesh(&d, 0.1, None).unwrap();
        assert!((m.total_area() - d.area().unwrap()).abs() < 1e-9);
        // no triangle crosses the void between the lobes
        for t in &m.triangles {
            let [a, b, c] = [m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]];
            let centroid = (a + b + c) * (1.0 / 3.0);
            assert!(d.contains(centroid).unwrap());
        }
    }

    #[test]
    fn file_roundtrip() {
        let m = generate_mesh(&disk(), 0.25, None).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = Mesh::read_from(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(m.nodes.len(), back.nodes.len());
        assert_eq!(m.triangles, back.triangles);
        assert_eq!(m.boundary, back.boundary);
        for (a, b) in m.nodes.iter().zip(&back.nodes) {
            assert_eq!(a, b, "nodes must round-trip bit-exactly");
        }
    }

    #[test]
    fn degenerate_polygon_fails() {
        let bad = DomainSpec::Polygon {
            vertices: vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(2.0, 0.0),
            ],
        };
        assert!(generate_mesh(&bad, 0.1, None).is_err());
    }
}

//! Planar domain descriptions and their polygonal boundaries.
//!
//! Every domain is handled as a simple counterclockwise polygon: the unit
//! disk as a regular 256-gon, the dumbbell as two polygonized disks joined by
//! a straight neck. Curved boundaries are out of scope; the polygon IS the
//! computational domain.

use crate::error::{Error, Result};
use crate::geom::Point;
use serde::{Deserialize, Serialize};

/// Number of segments used to polygonize the unit disk.
pub const DISK_SEGMENTS: usize = 256;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    UnitDisk {},
    Rectangle {
        width: f64,
        height: f64,
    },
    Polygon {
        vertices: Vec<Point>,
    },
    /// Two disks of radius `rho` centered on the x-axis, joined by a straight
    /// neck of width `neck_width` and length `neck_length`, symmetric about
    /// both axes.
    Dumbbell {
        rho: f64,
        neck_width: f64,
        neck_length: f64,
    },
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::UnitDisk {} => Ok(()),
            DomainSpec::Rectangle { width, height } => {
                if *width > 0.0 && *height > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "rectangle sides must be positive, got {width} x {height}"
                    )))
                }
            }
            DomainSpec::Polygon { vertices } => {
                validate_polygon(vertices)?;
                Ok(())
            }
            DomainSpec::Dumbbell {
                rho,
                neck_width,
                neck_length,
            } => {
                if !(*rho > 0.0) {
                    return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
                }
                if !(*neck_width > 0.0 && *neck_width < 2.0 * rho) {
                    return Err(Error::InvalidParameter(format!(
                        "need 0 < neck width < 2 rho, got w = {neck_width}, rho = {rho}"
                    )));
                }
                if !(*neck_length > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "neck length must be positive, got {neck_length}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Counterclockwise boundary polygon.
    pub fn polygon(&self) -> Result<Vec<Point>> {
        self.validate()?;
        Ok(match self {
            DomainSpec::UnitDisk {} => regular_polygon(DISK_SEGMENTS, 1.0),
            DomainSpec::Rectangle { width, height } => {
                let (w, h) = (0.5 * width, 0.5 * height);
                vec![
                    Point::new(-w, -h),
                    Point::new(w, -h),
                    Point::new(w, h),
                    Point::new(-w, h),
                ]
            }
            DomainSpec::Polygon { vertices } => vertices.clone(),
            DomainSpec::Dumbbell {
                rho,
                neck_width,
                neck_length,
            } => dumbbell_polygon(*rho, *neck_width, *neck_length),
        })
    }

    /// Largest distance between two boundary vertices.
    pub fn diameter(&self) -> Result<f64> {
        let poly = self.polygon()?;
        let mut d: f64 = 0.0;
        for i in 0..poly.len() {
            for j in i + 1..poly.len() {
                d = d.max(poly[i].dist(poly[j]));
            }
        }
        Ok(d)
    }

    pub fn area(&self) -> Result<f64> {
        Ok(polygon_area(&self.polygon()?))
    }

    pub fn contains(&self, x: Point) -> Result<bool> {
        Ok(point_in_polygon(x, &self.polygon()?))
    }

    /// Distance from `x` to the boundary polygon (positive inside or out).
    pub fn boundary_distance(&self, x: Point) -> Result<f64> {
        let poly = self.polygon()?;
        let mut d = f64::INFINITY;
        for i in 0..poly.len() {
            d = d.min(segment_distance(x, poly[i], poly[(i + 1) % poly.len()]));
        }
        Ok(d)
    }

    /// Centers of the dumbbell lobes (used to seed multi-peak searches).
    pub fn lobe_centers(&self) -> Option<(Point, Point)> {
        match self {
            DomainSpec::Dumbbell {
                rho,
                neck_width,
                neck_length,
            } => {
                let c = 0.5 * neck_length + (rho * rho - 0.25 * neck_width * neck_width).sqrt();
                Some((Point::new(-c, 0.0), Point::new(c, 0.0)))
            }
            _ => None,
        }
    }
}

fn regular_polygon(n: usize, r: f64) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            Point::new(r * t.cos(), r * t.sin())
        })
        .collect()
}

/// Dumbbell boundary: right lobe arc, neck top, left lobe arc, neck bottom.
/// The lobe circles pass through the neck corners (±L/2, ±w/2), centered at
/// (±c, 0) with c = L/2 + sqrt(ρ² - w²/4).
fn dumbbell_polygon(rho: f64, w: f64, len: f64) -> Vec<Point> {
    let half_l = 0.5 * len;
    let half_w = 0.5 * w;
    let c = half_l + (rho * rho - half_w * half_w).sqrt();
    // angle of the neck corner seen from the right lobe center
    let alpha = (half_w / rho).asin();
    let opening = std::f64::consts::PI - alpha; // arc spans [-(π-α), π-α]
    let n_arc = 128;
    let mut poly = Vec::new();
    // right lobe, from lower neck corner counterclockwise to upper neck corner
    for k in 0..=n_arc {
        let t = -opening + 2.0 * opening * k as f64 / n_arc as f64;
        poly.push(Point::new(c + rho * t.cos(), rho * t.sin()));
    }
    // upper neck edge, right to left (interior points only; corners are arc ends)
    let n_neck = 16;
    for k in 1..n_neck {
        let x = half_l - len * k as f64 / n_neck as f64;
        poly.push(Point::new(x, half_w));
    }
    // left lobe, counterclockwise from its upper neck corner around the far side
    for k in 0..=n_arc {
        let t = alpha + 2.0 * opening * k as f64 / n_arc as f64;
        poly.push(Point::new(-c + rho * t.cos(), rho * t.sin()));
    }
    // lower neck edge, left to right
    for k in 1..n_neck {
        let x = -half_l + len * k as f64 / n_neck as f64;
        poly.push(Point::new(x, -half_w));
    }
    poly
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    let mut s = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        s += a.cross(b);
    }
    0.5 * s
}

/// Crossing-number point-in-polygon test.
pub fn point_in_polygon(x: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (poly[i], poly[j]);
        if (pi.y > x.y) != (pj.y > x.y) {
            let t = (x.y - pi.y) / (pj.y - pi.y);
            if x.x < pi.x + t * (pj.x - pi.x) {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn segment_distance(x: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let t = ((x - a).dot(ab) / ab.norm2()).clamp(0.0, 1.0);
    x.dist(a + ab * t)
}

fn validate_polygon(poly: &[Point]) -> Result<()> {
    if poly.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "polygon needs at least 3 vertices, got {}",
            poly.len()
        )));
    }
    let area = polygon_area(poly);
    if !(area > 0.0) {
        return Err(Error::InvalidInput(format!(
            "polygon must be counterclockwise with positive area, signed area {area}"
        )));
    }
    // simplicity: no two non-adjacent edges may intersect
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return Err(Error::InvalidInput(format!(
                    "polygon self-intersects: edges {i} and {j}"
                )));
            }
        }
    }
    Ok(())
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

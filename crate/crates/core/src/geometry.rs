//! Quadrilateral and rotated-rectangle geometry for text boxes.
//!
//! All coordinates are continuous sub-pixel values; rasterization happens
//! only in the localization module. Quads are normalized to a convex,
//! consistently-wound vertex order on construction so that downstream
//! clipping and rectangle fitting stay exact.

use crate::error::{Error, Result};

/// A 2D point in pixel coordinates (x right, y down).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull of a point set (Andrew monotone chain), strictly convex:
/// collinear points are dropped. Vertices come back in a consistent
/// winding order starting from the lexicographically smallest point.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .unwrap()
            .then(a.y.partial_cmp(&b.y).unwrap())
    });
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    let n = pts.len();
    if n < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * n);
    for &p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn polygon_area(points: &[Point]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        acc += points[i].x * points[j].y - points[j].x * points[i].y;
    }
    acc.abs() / 2.0
}

/// Footprint of a text instance: four vertices in consistent winding order.
///
/// Construction normalizes the winding via the convex hull, so the stored
/// polygon is always simple and convex with positive area.
#[derive(Debug, Clone, PartialEq)]
pub struct Quad {
    vertices: [Point; 4],
}

impl Quad {
    /// Build a quad from four vertices in any order.
    ///
    /// Fails with a degenerate-geometry error when the points do not span a
    /// convex quadrilateral of positive area (duplicates, collinear points,
    /// or one vertex inside the triangle of the others).
    pub fn new(vertices: [Point; 4]) -> Result<Self> {
        let hull = convex_hull(&vertices);
        if hull.len() != 4 {
            return Err(Error::DegenerateGeometry(format!(
                "quad hull has {} vertices, need 4",
                hull.len()
            )));
        }
        let v = [hull[0], hull[1], hull[2], hull[3]];
        let quad = Quad { vertices: v };
        if quad.area() <= 0.0 {
            return Err(Error::DegenerateGeometry("quad has zero area".into()));
        }
        Ok(quad)
    }

    /// Axis-aligned rectangle shortcut: corners (x0,y0) and (x1,y1).
    pub fn axis_aligned(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Quad::new([
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point; 4] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point {
        let mut x = 0.0;
        let mut y = 0.0;
        for v in &self.vertices {
            x += v.x;
            y += v.y;
        }
        Point::new(x / 4.0, y / 4.0)
    }

    /// Axis-aligned bounding box as (min_x, min_y, max_x, max_y).
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let mut min_x = f64::INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for v in &self.vertices {
            min_x = min_x.min(v.x);
            min_y = min_y.min(v.y);
            max_x = max_x.max(v.x);
            max_y = max_y.max(v.y);
        }
        (min_x, min_y, max_x, max_y)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Quad {
        let v = self
            .vertices
            .map(|p| Point::new(p.x + dx, p.y + dy));
        Quad { vertices: v }
    }

    /// True when `p` lies inside or on the boundary.
    pub fn contains(&self, p: Point) -> bool {
        let mut sign = 0.0f64;
        for i in 0..4 {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % 4];
            let c = cross(a, b, p);
            if c.abs() < 1e-12 {
                continue;
            }
            if sign == 0.0 {
                sign = c.signum();
            } else if c.signum() != sign {
                return false;
            }
        }
        true
    }
}

/// Oriented rectangle (cx, cy, w, h, theta) with theta in [-pi/2, pi/2),
/// measured from the x-axis to the side designated `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedRect {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

fn fold_angle(theta: f64, period: f64) -> f64 {
    let half = period / 2.0;
    let mut t = theta % period;
    if t < -half {
        t += period;
    } else if t >= half {
        t -= period;
    }
    t
}

impl RotatedRect {
    /// Build a rotated rectangle; theta is folded into [-pi/2, pi/2).
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) {
            return Err(Error::DegenerateGeometry(format!(
                "rotated rect sides must be positive, got w={w} h={h}"
            )));
        }
        Ok(RotatedRect {
            cx,
            cy,
            w,
            h,
            theta: fold_angle(theta, std::f64::consts::PI),
        })
    }

    /// Canonical representative under the w/h-theta symmetry: w >= h with
    /// theta in [-pi/2, pi/2); exact squares fold theta into [-pi/4, pi/4).
    pub fn canonical(&self) -> RotatedRect {
        let (mut w, mut h, mut theta) = (self.w, self.h, self.theta);
        if w < h {
            std::mem::swap(&mut w, &mut h);
            theta += std::f64::consts::FRAC_PI_2;
        }
        theta = fold_angle(theta, std::f64::consts::PI);
        if (w - h).abs() <= 1e-9 * w.max(1.0) {
            theta = fold_angle(theta, std::f64::consts::FRAC_PI_2);
        }
        RotatedRect {
            cx: self.cx,
            cy: self.cy,
            w,
            h,
            theta,
        }
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.w / self.h
    }

    pub fn to_quad(&self) -> Quad {
        let (s, c) = self.theta.sin_cos();
        let hw = self.w / 2.0;
        let hh = self.h / 2.0;
        let corners = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)];
        let vertices = corners.map(|(lx, ly)| {
            Point::new(self.cx + lx * c - ly * s, self.cy + lx * s + ly * c)
        });
        // Corners of a valid rect always form a convex quad.
        Quad::new(vertices).expect("rect corners form a valid quad")
    }
}

/// Minimum-area enclosing rectangle of a point set.
///
/// Works over the convex hull: the optimum has one side collinear with a
/// hull edge, so every edge direction is tried and the smallest kept. The
/// result is returned in canonical form (w >= h).
pub fn min_area_rect(points: &[Point]) -> Result<RotatedRect> {
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return Err(Error::DegenerateGeometry(
            "cannot fit rectangle: points are collinear or coincident".into(),
        ));
    }
    let mut best: Option<(f64, RotatedRect)> = None;
    let n = hull.len();
    for i in 0..n {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        let ex = b.x - a.x;
        let ey = b.y - a.y;
        let len = (ex * ex + ey * ey).sqrt();
        if len == 0.0 {
            continue;
        }
        let (ux, uy) = (ex / len, ey / len);
        // Perpendicular axis.
        let (vx, vy) = (-uy, ux);
        let mut min_u = f64::INFINITY;
        let mut max_u = f64::NEG_INFINITY;
        let mut min_v = f64::INFINITY;
        let mut max_v = f64::NEG_INFINITY;
        for p in &hull {
            let pu = p.x * ux + p.y * uy;
            let pv = p.x * vx + p.y * vy;
            min_u = min_u.min(pu);
            max_u = max_u.max(pu);
            min_v = min_v.min(pv);
            max_v = max_v.max(pv);
        }
        let w = max_u - min_u;
        let h = max_v - min_v;
        let area = w * h;
        if best.as_ref().map_or(true, |(ba, _)| area < *ba) {
            let cu = (min_u + max_u) / 2.0;
            let cv = (min_v + max_v) / 2.0;
            let cx = cu * ux + cv * vx;
            let cy = cu * uy + cv * vy;
            let theta = ey.atan2(ex);
            let rect = RotatedRect::new(cx, cy, w, h, theta)?;
            best = Some((area, rect));
        }
    }
    let (_, rect) = best.ok_or_else(|| {
        Error::DegenerateGeometry("no enclosing rectangle candidates".into())
    })?;
    Ok(rect.canonical())
}

/// Minimum-area rotated rectangle enclosing a quad.
pub fn quad_to_rotated_rect(q: &Quad) -> Result<RotatedRect> {
    min_area_rect(q.vertices())
}

/// Area of the intersection of two quads via Sutherland-Hodgman clipping.
/// Disjoint quads yield 0.
pub fn intersection_area(a: &Quad, b: &Quad) -> f64 {
    let mut subject: Vec<Point> = a.vertices().to_vec();
    let clip = b.vertices();
    for i in 0..4 {
        if subject.is_empty() {
            return 0.0;
        }
        let ca = clip[i];
        let cb = clip[(i + 1) % 4];
        let mut output: Vec<Point> = Vec::with_capacity(subject.len() + 4);
        for j in 0..subject.len() {
            let cur = subject[j];
            let next = subject[(j + 1) % subject.len()];
            let cur_in = cross(ca, cb, cur) >= 0.0;
            let next_in = cross(ca, cb, next) >= 0.0;
            if cur_in {
                output.push(cur);
            }
            if cur_in != next_in {
                // Segment crosses the clip edge; add the intersection point.
                let dcur = cross(ca, cb, cur);
                let dnext = cross(ca, cb, next);
                let t = dcur / (dcur - dnext);
                output.push(Point::new(
                    cur.x + t * (next.x - cur.x),
                    cur.y + t * (next.y - cur.y),
                ));
            }
        }
        subject = output;
    }
    polygon_area(&subject)
}

/// Intersection over union of two quads.
///
/// Errors when both areas are zero (cannot normally happen for constructed
/// quads, which reject zero area).
pub fn iou(a: &Quad, b: &Quad) -> Result<f64> {
    let area_a = a.area();
    let area_b = b.area();
    if area_a <= 0.0 && area_b <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "iou undefined: both quads have zero area".into(),
        ));
    }
    let inter = intersection_area(a, b);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "iou undefined: zero union area".into(),
        ));
    }
    Ok(inter / union)
}

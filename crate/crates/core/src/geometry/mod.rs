//! Convex-polygon kernel over exact rationals or `f64`.
//!
//! Polygons are immutable once built: vertices are deduplicated, oriented
//! counterclockwise, and collinear runs are collapsed at construction time, so
//! every `ConvexPolygon` in circulation is strictly convex with at least three
//! vertices. Float predicates use the absolute tolerance [`TAU_GEOM`]; exact
//! predicates use none.

mod map;
pub mod kite;

pub use map::{LinearBranch, Mat2, PiecewiseLinearMap};

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::{Rational, Scalar, MIN_POLYGON_AREA, TAU_GEOM};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("polygon needs at least three distinct, non-collinear vertices (got {0})")]
    TooFewVertices(usize),
    #[error("vertex list is not convex")]
    NotConvex,
    #[error("half-plane normal must be nonzero")]
    ZeroNormal,
    #[error("branch matrix is singular")]
    SingularBranch,
    #[error("point ({0}, {1}) lies outside every branch region")]
    OutsideDomain(f64, f64),
    #[error("branches disagree at boundary point ({0}, {1})")]
    BranchDisagreement(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point2<S> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Point2<S> {
    pub fn new(x: S, y: S) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self::new(S::zero(), S::zero())
    }

    pub fn dot(&self, o: &Self) -> S {
        self.x.clone() * o.x.clone() + self.y.clone() * o.y.clone()
    }

    /// z-component of the 2-D cross product.
    pub fn cross(&self, o: &Self) -> S {
        self.x.clone() * o.y.clone() - self.y.clone() * o.x.clone()
    }

    pub fn norm_sq(&self) -> S {
        self.dot(self)
    }

    pub fn scale(&self, s: &S) -> Self {
        Self::new(self.x.clone() * s.clone(), self.y.clone() * s.clone())
    }

    pub fn to_f64(&self) -> Point2<f64> {
        Point2::new(self.x.to_f64(), self.y.to_f64())
    }

    fn approx_eq(&self, o: &Self) -> bool {
        if S::is_exact() {
            self == o
        } else {
            let d = self.clone() - o.clone();
            d.x.abs() <= S::tolerance() && d.y.abs() <= S::tolerance()
        }
    }
}

impl Point2<f64> {
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, o: &Self) -> f64 {
        (*self - *o).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn to_rational(&self) -> Point2<Rational> {
        Point2::new(Rational::from_f64(self.x), Rational::from_f64(self.y))
    }
}

impl Copy for Point2<f64> {}

impl<S: Scalar> Add for Point2<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<S: Scalar> Sub for Point2<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<S: Scalar> Neg for Point2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Point2<f64> {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

/// Closed half-plane `{p : <normal, p> <= offset}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfPlane<S> {
    normal: Point2<S>,
    offset: S,
}

impl<S: Scalar> HalfPlane<S> {
    pub fn new(normal: Point2<S>, offset: S) -> Result<Self, GeometryError> {
        if normal.x.is_zero() && normal.y.is_zero() {
            return Err(GeometryError::ZeroNormal);
        }
        Ok(Self { normal, offset })
    }

    pub fn normal(&self) -> &Point2<S> {
        &self.normal
    }

    pub fn offset(&self) -> &S {
        &self.offset
    }

    /// `<normal, p> - offset`; nonpositive inside.
    pub fn excess(&self, p: &Point2<S>) -> S {
        self.normal.dot(p) - self.offset.clone()
    }

    pub fn contains(&self, p: &Point2<S>) -> bool {
        let e = self.excess(p);
        if S::is_exact() {
            e <= S::zero()
        } else {
            e.to_f64() <= TAU_GEOM * self.normal.to_f64().norm()
        }
    }

    /// Strict interior test (used for the `y > x` style region predicates).
    pub fn contains_strictly(&self, p: &Point2<S>) -> bool {
        let e = self.excess(p);
        if S::is_exact() {
            e < S::zero()
        } else {
            e.to_f64() < -TAU_GEOM * self.normal.to_f64().norm()
        }
    }

    /// The closed complementary half-plane `{<normal, p> >= offset}`.
    pub fn complement(&self) -> Self {
        Self {
            normal: -self.normal.clone(),
            offset: -self.offset.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon<S> {
    vertices: Vec<Point2<S>>,
}

impl<S: Scalar> ConvexPolygon<S> {
    /// Validates and normalizes a vertex loop given in either orientation.
    pub fn new(vertices: Vec<Point2<S>>) -> Result<Self, GeometryError> {
        let mut v = dedup_cyclic(vertices);
        if v.len() < 3 {
            return Err(GeometryError::TooFewVertices(v.len()));
        }
        if signed_area2(&v) < S::zero() {
            v.reverse();
        }
        let v = drop_collinear(v);
        if v.len() < 3 {
            return Err(GeometryError::TooFewVertices(v.len()));
        }
        let n = v.len();
        for i in 0..n {
            let a = &v[i];
            let b = &v[(i + 1) % n];
            let c = &v[(i + 2) % n];
            let turn = (b.clone() - a.clone()).cross(&(c.clone() - b.clone()));
            if turn <= S::zero() {
                return Err(GeometryError::NotConvex);
            }
        }
        Ok(Self { vertices: v })
    }

    /// Wraps a loop already known to be strictly convex and counterclockwise.
    pub(crate) fn from_ccw_unchecked(vertices: Vec<Point2<S>>) -> Self {
        debug_assert!(vertices.len() >= 3);
        Self { vertices }
    }

    /// Convex hull of an arbitrary point set (monotone chain).
    pub fn hull(points: &[Point2<S>]) -> Result<Self, GeometryError> {
        let mut pts: Vec<Point2<S>> = points.to_vec();
        pts.sort_by(|a, b| {
            a.x.partial_cmp(&b.x)
                .unwrap()
                .then(a.y.partial_cmp(&b.y).unwrap())
        });
        pts.dedup_by(|a, b| a.approx_eq(b));
        if pts.len() < 3 {
            return Err(GeometryError::TooFewVertices(pts.len()));
        }
        let turn = |o: &Point2<S>, a: &Point2<S>, b: &Point2<S>| {
            (a.clone() - o.clone()).cross(&(b.clone() - o.clone()))
        };
        let mut lower: Vec<Point2<S>> = Vec::new();
        for p in &pts {
            while lower.len() >= 2 && turn(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= S::zero() {
                lower.pop();
            }
            lower.push(p.clone());
        }
        let mut upper: Vec<Point2<S>> = Vec::new();
        for p in pts.iter().rev() {
            while upper.len() >= 2 && turn(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= S::zero() {
                upper.pop();
            }
            upper.push(p.clone());
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Self::new(lower)
    }

    pub fn vertices(&self) -> &[Point2<S>] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Iterates directed edges `(v_i, v_{i+1})`.
    pub fn edges(&self) -> impl Iterator<Item = (&Point2<S>, &Point2<S>)> {
        let n = self.vertices.len();
        (0..n).map(move |i| (&self.vertices[i], &self.vertices[(i + 1) % n]))
    }

    /// Shoelace area.
    pub fn area(&self) -> S {
        signed_area2(&self.vertices) * S::half()
    }

    pub fn centroid(&self) -> Point2<S> {
        let mut cx = S::zero();
        let mut cy = S::zero();
        let mut a2 = S::zero();
        for (p, q) in self.edges() {
            let c = p.cross(q);
            cx = cx + (p.x.clone() + q.x.clone()) * c.clone();
            cy = cy + (p.y.clone() + q.y.clone()) * c.clone();
            a2 = a2 + c;
        }
        let d = a2 * S::int(3);
        Point2::new(cx / d.clone(), cy / d)
    }

    /// Inside-or-on-boundary test; exact for rationals, `TAU_GEOM` slack for floats.
    pub fn contains(&self, p: &Point2<S>) -> bool {
        self.edges().all(|(a, b)| {
            let e = b.clone() - a.clone();
            let c = e.cross(&(p.clone() - a.clone()));
            if S::is_exact() {
                c >= S::zero()
            } else {
                c.to_f64() >= -TAU_GEOM * e.to_f64().norm()
            }
        })
    }

    /// Supporting half-planes of the edges, one per edge, in vertex order.
    pub fn halfplanes(&self) -> Vec<HalfPlane<S>> {
        self.edges()
            .map(|(a, b)| {
                // Outward normal of a CCW edge is (dy, -dx).
                let e = b.clone() - a.clone();
                let n = Point2::new(e.y.clone(), -e.x.clone());
                let off = n.dot(a);
                HalfPlane::new(n, off).expect("edges of a valid polygon are nondegenerate")
            })
            .collect()
    }

    /// Intersection with a closed half-plane, or `None` when the result has
    /// (near-)zero area.
    pub fn clip(&self, h: &HalfPlane<S>) -> Option<Self> {
        let n = self.vertices.len();
        let scale = h.normal.to_f64().norm();
        let inside = |s: &S| -> bool {
            if S::is_exact() {
                *s <= S::zero()
            } else {
                s.to_f64() <= TAU_GEOM * scale
            }
        };
        let values: Vec<S> = self.vertices.iter().map(|p| h.excess(p)).collect();
        if values.iter().all(&inside) {
            return Some(self.clone());
        }
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let j = (i + 1) % n;
            let (p, q) = (&self.vertices[i], &self.vertices[j]);
            let (sp, sq) = (&values[i], &values[j]);
            let (ip, iq) = (inside(sp), inside(sq));
            if ip {
                out.push(p.clone());
            }
            if ip != iq {
                // Skip intersections that would duplicate an on-line endpoint.
                let strictly = |s: &S| if S::is_exact() { !s.is_zero() } else { s.to_f64().abs() > TAU_GEOM * scale };
                if strictly(sp) && strictly(sq) {
                    let t = sp.clone() / (sp.clone() - sq.clone());
                    out.push(p.clone() + (q.clone() - p.clone()).scale(&t));
                }
            }
        }
        let poly = Self::new(out).ok()?;
        if poly.area().to_f64() < MIN_POLYGON_AREA {
            return None;
        }
        Some(poly)
    }

    /// Clips against every half-plane in turn.
    pub fn clip_all<'a, I>(&self, planes: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a HalfPlane<S>>,
    {
        let mut cur = self.clone();
        for h in planes {
            cur = cur.clip(h)?;
        }
        Some(cur)
    }

    pub fn map_vertices<F>(&self, f: F) -> Result<Self, GeometryError>
    where
        F: Fn(&Point2<S>) -> Point2<S>,
    {
        Self::new(self.vertices.iter().map(f).collect())
    }

    pub fn to_f64(&self) -> ConvexPolygon<f64> {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|p| p.to_f64()).collect(),
        }
    }
}

impl ConvexPolygon<f64> {
    /// Euclidean distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: &Point2<f64>) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bbox(&self) -> (Point2<f64>, Point2<f64>) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// `∫_P |x - y|^2 dx` for a fixed point `y`.
    pub fn second_moment_about(&self, y: &Point2<f64>) -> f64 {
        // Fan triangulation from the first vertex; the quadratic is integrated
        // exactly on each triangle by the edge-midpoint rule.
        let v0 = self.vertices[0];
        let mut total = 0.0;
        for i in 1..self.vertices.len() - 1 {
            let (a, b, c) = (v0, self.vertices[i], self.vertices[i + 1]);
            let area = 0.5 * (b - a).cross(&(c - a));
            let f = |p: Point2<f64>| (p - *y).norm_sq();
            let mids = [(a + b) * 0.5, (b + c) * 0.5, (c + a) * 0.5];
            total += area * (f(mids[0]) + f(mids[1]) + f(mids[2])) / 3.0;
        }
        total
    }

    /// Uniform affine image check helper: all vertices finite.
    pub fn is_finite(&self) -> bool {
        self.vertices.iter().all(|v| v.is_finite())
    }
}

impl ConvexPolygon<Rational> {
    pub fn from_ratios(pts: &[(i64, i64, i64, i64)]) -> Result<Self, GeometryError> {
        Self::new(
            pts.iter()
                .map(|&(a, b, c, d)| Point2::new(Rational::ratio(a, b), Rational::ratio(c, d)))
                .collect(),
        )
    }
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn segment_distance(p: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let ab = *b - *a;
    let len2 = ab.norm_sq();
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((*p - *a).dot(&ab) / len2).clamp(0.0, 1.0);
    p.dist(&(*a + ab * t))
}

fn signed_area2<S: Scalar>(v: &[Point2<S>]) -> S {
    let n = v.len();
    let mut s = S::zero();
    for i in 0..n {
        s = s + v[i].cross(&v[(i + 1) % n]);
    }
    s
}

fn dedup_cyclic<S: Scalar>(mut v: Vec<Point2<S>>) -> Vec<Point2<S>> {
    v.dedup_by(|a, b| a.approx_eq(b));
    while v.len() > 1 && v[0].approx_eq(&v[v.len() - 1]) {
        v.pop();
    }
    v
}

fn drop_collinear<S: Scalar>(mut v: Vec<Point2<S>>) -> Vec<Point2<S>> {
    loop {
        let n = v.len();
        if n < 3 {
            return v;
        }
        let mut removed = false;
        for i in 0..n {
            let a = &v[(i + n - 1) % n];
            let b = &v[i];
            let c = &v[(i + 1) % n];
            let e1 = b.clone() - a.clone();
            let e2 = c.clone() - b.clone();
            let turn = e1.cross(&e2);
            let flat = if S::is_exact() {
                turn.is_zero()
            } else {
                let (l1, l2) = (e1.to_f64().norm(), e2.to_f64().norm());
                turn.to_f64().abs() <= TAU_GEOM * l1.max(l2)
                    || l1 <= TAU_GEOM
                    || l2 <= TAU_GEOM
            };
            if flat {
                v.remove(i);
                removed = true;
                break;
            }
        }
        if !removed {
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    fn unit_square() -> ConvexPolygon<f64> {
        ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    fn hp(nx: f64, ny: f64, c: f64) -> HalfPlane<f64> {
        HalfPlane::new(Point2::new(nx, ny), c).unwrap()
    }

    #[test]
    fn unit_square_area() {
        assert_eq!(unit_square().area(), 1.0);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let p = ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
        ])
        .unwrap();
        assert_eq!(p.area(), 1.0);
    }

    #[test]
    fn collinear_and_duplicate_vertices_are_removed() {
        let p = ConvexPolygon::new(vec![
            Point2::new(q(0, 1), q(0, 1)),
            Point2::new(q(1, 2), q(0, 1)),
            Point2::new(q(1, 1), q(0, 1)),
            Point2::new(q(1, 1), q(0, 1)),
            Point2::new(q(1, 1), q(1, 1)),
            Point2::new(q(0, 1), q(1, 1)),
        ])
        .unwrap();
        assert_eq!(p.len(), 4);
    }

    #[test]
    fn rejects_degenerate_and_nonconvex() {
        assert_eq!(
            ConvexPolygon::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)]),
            Err(GeometryError::TooFewVertices(2))
        );
        let dart = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(0.0, 2.0),
        ];
        assert_eq!(ConvexPolygon::new(dart), Err(GeometryError::NotConvex));
        assert_eq!(HalfPlane::new(Point2::new(0.0, 0.0), 1.0), Err(GeometryError::ZeroNormal));
    }

    #[test]
    fn clip_keeps_left_half() {
        let c = unit_square().clip(&hp(1.0, 0.0, 0.5)).unwrap();
        assert!((c.area() - 0.5).abs() < 1e-15);
        let (lo, hi) = c.bbox();
        assert_eq!((lo.x, hi.x, lo.y, hi.y), (0.0, 0.5, 0.0, 1.0));
    }

    #[test]
    fn clip_to_nothing() {
        assert!(unit_square().clip(&hp(1.0, 0.0, -1.0)).is_none());
        // Touching along an edge only: zero area.
        assert!(unit_square().clip(&hp(1.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn clip_through_vertex_does_not_duplicate() {
        let c = unit_square().clip(&hp(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(c.len(), 3);
        assert!((c.area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_clip_and_complement_sum() {
        let sq = ConvexPolygon::<Rational>::from_ratios(&[(0, 1, 0, 1), (1, 1, 0, 1), (1, 1, 1, 1), (0, 1, 1, 1)]).unwrap();
        let h = HalfPlane::new(Point2::new(q(2, 1), q(1, 1)), q(4, 3)).unwrap();
        let a = sq.clip(&h).unwrap().area();
        let b = sq.clip(&h.complement()).unwrap().area();
        assert_eq!(a + b, q(1, 1));
    }

    #[test]
    fn hull_of_scattered_points() {
        let pts = vec![
            Point2::new(q(0, 1), q(0, 1)),
            Point2::new(q(1, 3), q(0, 1)),
            Point2::new(q(1, 4), q(1, 4)),
            Point2::new(q(1, 1), q(1, 1)),
            Point2::new(q(0, 1), q(1, 3)),
        ];
        let h = ConvexPolygon::hull(&pts).unwrap();
        assert_eq!(h.len(), 4);
        assert_eq!(h.area(), q(1, 3));
    }

    #[test]
    fn centroid_and_moment_of_square() {
        let s = unit_square();
        let c = s.centroid();
        assert!((c.x - 0.5).abs() < 1e-15 && (c.y - 0.5).abs() < 1e-15);
        // ∫ |x - c|^2 over the unit square = 1/6.
        assert!((s.second_moment_about(&c) - 1.0 / 6.0).abs() < 1e-15);
        assert!((s.boundary_distance(&c) - 0.5).abs() < 1e-15);
    }
}

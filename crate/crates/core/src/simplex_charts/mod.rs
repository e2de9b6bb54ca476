//! Singular affine charts on the boundary `A` of the simplex `Δ` and the
//! boundary `B` of its dual `Δ^∨`.
//!
//! Points of `ℝ³` are handled through barycentric coordinates. For `n ∈ B`
//! the weight of vertex `n_r` is `(1 - <m_r, n>) / 4`, and dually for `m ∈ A`
//! the weight of `m_r` is `(1 - <m, n_r>) / 4`; this follows from
//! `<m_i, n_j> = 1` for `i ≠ j` and `-3` for `i = j`. In these coordinates
//! both chart families have closed-form inverses.

mod function;
mod reduction;

pub use function::{
    boundary_grid, c_subgradient, c_transform, BoundaryGrid, DiscreteFunction, VertexPermutation, TAU_ARG,
};
pub use reduction::{
    pairing_matrix, verify_reduction, AssembledPotential, ChainRuleReport, PairingReport, ReductionOptions,
    ReductionReport, SubgradientReport, TriangleImageReport,
};

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::geometry::{Mat2, Point2};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChartError {
    #[error("chart indices ({0}, {1}) must be distinct and below 4")]
    InvalidIndices(usize, usize),
    #[error("point does not lie on the boundary surface")]
    OffBoundary,
    #[error("point lies outside the chart domain")]
    OutsideDomain,
    #[error("charts live on different sides")]
    SideMismatch,
    #[error("region is not covered by both charts")]
    ChartsDoNotOverlap,
    #[error("transition is not affine on the region")]
    NotAffine,
    #[error("region has fewer than three affinely independent vertices")]
    DegenerateRegion,
    #[error("no planar solution supplied")]
    MissingPlan,
}

/// Point of `ℝ³` (or its dual).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vec3<S>(pub [S; 3]);

impl<S: Scalar> Vec3<S> {
    pub fn new(a: S, b: S, c: S) -> Self {
        Self([a, b, c])
    }

    pub fn from_ints(v: [i64; 3]) -> Self {
        Self::new(S::int(v[0]), S::int(v[1]), S::int(v[2]))
    }

    pub fn zero() -> Self {
        Self::from_ints([0, 0, 0])
    }

    pub fn dot(&self, o: &Self) -> S {
        self.0[0].clone() * o.0[0].clone() + self.0[1].clone() * o.0[1].clone() + self.0[2].clone() * o.0[2].clone()
    }

    pub fn scale(&self, s: &S) -> Self {
        Self::new(self.0[0].clone() * s.clone(), self.0[1].clone() * s.clone(), self.0[2].clone() * s.clone())
    }

    pub fn to_f64(&self) -> Vec3<f64> {
        Vec3([self.0[0].to_f64(), self.0[1].to_f64(), self.0[2].to_f64()])
    }

    /// Mean of a nonempty list of points.
    pub fn mean(points: &[Self]) -> Self {
        let sum = points.iter().fold(Self::zero(), |acc, p| acc + p.clone());
        sum.scale(&S::ratio(1, points.len() as i64))
    }
}

impl Vec3<f64> {
    pub fn dist(&self, o: &Self) -> f64 {
        let d = self.clone() - o.clone();
        d.dot(&d).sqrt()
    }
}

impl<S: Scalar> Add for Vec3<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let [a, b, c] = self.0;
        let [x, y, z] = o.0;
        Self([a + x, b + y, c + z])
    }
}

impl<S: Scalar> Sub for Vec3<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let [a, b, c] = self.0;
        let [x, y, z] = o.0;
        Self([a - x, b - y, c - z])
    }
}

const M_VERTICES: [[i64; 3]; 4] = [[1, 1, 1], [-3, 1, 1], [1, -3, 1], [1, 1, -3]];
const N_VERTICES: [[i64; 3]; 4] = [[-1, -1, -1], [1, 0, 0], [0, 1, 0], [0, 0, 1]];

/// Which boundary surface a point or chart belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// `A = ∂Δ`, vertices `m_i`.
    A,
    /// `B = ∂Δ^∨`, vertices `n_i`.
    B,
}

impl Side {
    pub fn other(self) -> Self {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    /// Vertex `i` of this side.
    pub fn vertex<S: Scalar>(self, i: usize) -> Vec3<S> {
        match self {
            Side::A => Vec3::from_ints(M_VERTICES[i]),
            Side::B => Vec3::from_ints(N_VERTICES[i]),
        }
    }

    /// Barycentric weights of `p` with respect to this side's vertices.
    pub fn barycentric<S: Scalar>(self, p: &Vec3<S>) -> [S; 4] {
        let other = self.other();
        std::array::from_fn(|r| (S::one() - other.vertex::<S>(r).dot(p)) * S::ratio(1, 4))
    }

    pub fn from_barycentric<S: Scalar>(self, w: &[S; 4]) -> Vec3<S> {
        (0..4).fold(Vec3::zero(), |acc, r| acc + self.vertex::<S>(r).scale(&w[r]))
    }

    /// Whether `p` lies on the boundary surface: all weights nonnegative and
    /// the smallest one zero, exactly for rationals.
    pub fn on_boundary<S: Scalar>(self, p: &Vec3<S>) -> bool {
        let w = self.barycentric(p);
        let tol = S::tolerance();
        let min = w.iter().cloned().fold(w[0].clone(), S::min_of);
        min.abs() <= tol
    }

    /// Barycenter of the listed vertices: `m_{ij}`, `m_{ijk}` and so on.
    pub fn barycenter<S: Scalar>(self, idx: &[usize]) -> Vec3<S> {
        let pts: Vec<Vec3<S>> = idx.iter().map(|&i| self.vertex(i)).collect();
        Vec3::mean(&pts)
    }
}

/// The fixed vertex data of `Δ` and `Δ^∨`.
pub struct SimplexVertexSet;

impl SimplexVertexSet {
    pub fn m<S: Scalar>(i: usize) -> Vec3<S> {
        Side::A.vertex(i)
    }

    pub fn n<S: Scalar>(i: usize) -> Vec3<S> {
        Side::B.vertex(i)
    }

    pub fn m_mid<S: Scalar>(idx: &[usize]) -> Vec3<S> {
        Side::A.barycenter(idx)
    }

    pub fn n_mid<S: Scalar>(idx: &[usize]) -> Vec3<S> {
        Side::B.barycenter(idx)
    }

    /// Singular points of `A` (side `A`) or `B` (side `B`): the six edge midpoints.
    pub fn singular_points<S: Scalar>(side: Side) -> Vec<Vec3<S>> {
        let mut out = Vec::with_capacity(6);
        for i in 0..4 {
            for j in i + 1..4 {
                out.push(side.barycenter(&[i, j]));
            }
        }
        out
    }
}

/// A vertex chart: `p_{i,j}` on `A` or `q_{i,j}` on `B`.
///
/// The chart's domain is the closed star of vertex `i`, that is the surface
/// minus the open opposite face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chart {
    pub side: Side,
    pub i: usize,
    pub j: usize,
}

impl Chart {
    pub fn new(side: Side, i: usize, j: usize) -> Result<Self, ChartError> {
        if i == j || i > 3 || j > 3 {
            return Err(ChartError::InvalidIndices(i, j));
        }
        Ok(Self { side, i, j })
    }

    pub fn p(i: usize, j: usize) -> Result<Self, ChartError> {
        Self::new(Side::A, i, j)
    }

    pub fn q(i: usize, j: usize) -> Result<Self, ChartError> {
        Self::new(Side::B, i, j)
    }

    /// The remaining indices `k < l`.
    pub fn rest(&self) -> (usize, usize) {
        let mut r = (0..4).filter(|&r| r != self.i && r != self.j);
        (r.next().unwrap(), r.next().unwrap())
    }

    fn check_domain<S: Scalar>(&self, w: &[S; 4]) -> Result<(), ChartError> {
        let tol = S::tolerance();
        if w[self.i] > tol {
            return Ok(());
        }
        // On the opposite face: only its boundary belongs to the closed star.
        let others_min = (0..4)
            .filter(|&r| r != self.i)
            .map(|r| w[r].clone())
            .fold(S::one(), S::min_of);
        if others_min.abs() <= tol {
            Ok(())
        } else {
            Err(ChartError::OutsideDomain)
        }
    }

    /// Surface point to plane. For `q_{i,j}` this is
    /// `¼ (<m_k - m_j, n>, <m_l - m_j, n>)`, for `p_{i,j}` it is
    /// `(<m, n_j - n_k>, <m, n_j - n_l>)`.
    pub fn inverse<S: Scalar>(&self, p: &Vec3<S>) -> Result<Point2<S>, ChartError> {
        if !self.side.on_boundary(p) {
            return Err(ChartError::OffBoundary);
        }
        let w = self.side.barycentric(p);
        self.check_domain(&w)?;
        let (k, l) = self.rest();
        Ok(match self.side {
            Side::B => Point2::new(w[self.j].clone() - w[k].clone(), w[self.j].clone() - w[l].clone()),
            Side::A => {
                let four = S::int(4);
                Point2::new(
                    (w[k].clone() - w[self.j].clone()) * four.clone(),
                    (w[l].clone() - w[self.j].clone()) * four,
                )
            }
        })
    }

    /// Plane to surface. Piecewise affine, with one piece per face of the
    /// closed star.
    pub fn forward<S: Scalar>(&self, x: &Point2<S>) -> Result<Vec3<S>, ChartError> {
        let (k, l) = self.rest();
        let zero = S::zero();
        let mut w: [S; 4] = std::array::from_fn(|_| S::zero());
        // Weights of j, k, l are t, t - a, t - b with t the least value that
        // keeps all three nonnegative; the weight of i takes up the rest.
        let (a, b) = match self.side {
            Side::B => (x.x.clone(), x.y.clone()),
            Side::A => {
                let quarter = S::ratio(1, 4);
                (-(x.x.clone() * quarter.clone()), -(x.y.clone() * quarter))
            }
        };
        let t = S::max_of(S::max_of(zero, a.clone()), b.clone());
        w[self.j] = t.clone();
        w[k] = t.clone() - a.clone();
        w[l] = t.clone() - b.clone();
        w[self.i] = S::one() - t * S::int(3) + a + b;
        if w[self.i] < -S::tolerance() {
            return Err(ChartError::OutsideDomain);
        }
        Ok(self.side.from_barycentric(&w))
    }
}

/// `x ↦ matrix x + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap<S> {
    pub matrix: Mat2<S>,
    pub offset: Point2<S>,
}

impl<S: Scalar> AffineMap<S> {
    pub fn apply(&self, p: &Point2<S>) -> Point2<S> {
        self.matrix.apply(p) + self.offset.clone()
    }

    pub fn is_linear(&self) -> bool {
        self.offset.x.is_zero() && self.offset.y.is_zero()
    }
}

/// Points of a small barycentric grid on the triangle `a, b, c`, used to
/// confirm that a fitted affine map agrees everywhere on a region.
fn probe_points<S: Scalar>(region: &[Point2<S>]) -> Vec<Point2<S>> {
    let mut out = region.to_vec();
    let k = 4i64;
    for t in 1..region.len() - 1 {
        let (a, b, c) = (&region[0], &region[t], &region[t + 1]);
        for i in 0..=k {
            for j in 0..=k - i {
                let (wa, wb, wc) = (S::ratio(i, k), S::ratio(j, k), S::ratio(k - i - j, k));
                out.push(a.scale(&wa) + b.scale(&wb) + c.scale(&wc));
            }
        }
    }
    out
}

/// Solves for the affine map sending `src[r]` to `dst[r]` for the first
/// affinely independent triple.
fn fit_affine<S: Scalar>(src: &[Point2<S>], dst: &[Point2<S>]) -> Result<AffineMap<S>, ChartError> {
    for b in 1..src.len() {
        for c in b + 1..src.len() {
            let e1 = src[b].clone() - src[0].clone();
            let e2 = src[c].clone() - src[0].clone();
            let det = e1.cross(&e2);
            if det.abs() <= S::tolerance() {
                continue;
            }
            let f1 = dst[b].clone() - dst[0].clone();
            let f2 = dst[c].clone() - dst[0].clone();
            // M [e1 e2] = [f1 f2]  =>  M = [f1 f2] [e1 e2]^{-1}.
            let inv = Mat2::new(e2.y.clone() / det.clone(), -(e2.x.clone() / det.clone()), -(e1.y.clone() / det.clone()), e1.x.clone() / det);
            let fm = Mat2::new(f1.x.clone(), f2.x.clone(), f1.y.clone(), f2.y.clone());
            let matrix = fm.mul(&inv);
            let offset = dst[0].clone() - matrix.apply(&src[0]);
            return Ok(AffineMap { matrix, offset });
        }
    }
    Err(ChartError::DegenerateRegion)
}

fn close<S: Scalar>(a: &Point2<S>, b: &Point2<S>) -> bool {
    let tol = S::tolerance() * S::int(100);
    (a.x.clone() - b.x.clone()).abs() <= tol && (a.y.clone() - b.y.clone()).abs() <= tol
}

/// The affine map agreeing with `to⁻¹ ∘ from` on the convex region with the
/// given vertices (in `from` coordinates).
pub fn transition_matrix<S: Scalar>(from: &Chart, to: &Chart, region: &[Point2<S>]) -> Result<AffineMap<S>, ChartError> {
    if from.side != to.side {
        return Err(ChartError::SideMismatch);
    }
    if region.len() < 3 {
        return Err(ChartError::DegenerateRegion);
    }
    let map = |p: &Point2<S>| -> Result<Point2<S>, ChartError> {
        let s = from.forward(p).map_err(|_| ChartError::ChartsDoNotOverlap)?;
        to.inverse(&s).map_err(|_| ChartError::ChartsDoNotOverlap)
    };
    let images = region.iter().map(map).collect::<Result<Vec<_>, _>>()?;
    let fit = fit_affine(region, &images)?;
    for p in probe_points(region) {
        if !close(&fit.apply(&p), &map(&p)?) {
            return Err(ChartError::NotAffine);
        }
    }
    Ok(fit)
}

/// The affine function `x ↦ <w, chart(x)>` on a region, as
/// `(gradient, constant)`. `w` lives on the side dual to the chart.
pub fn pairing_functional<S: Scalar>(
    chart: &Chart,
    w: &Vec3<S>,
    region: &[Point2<S>],
) -> Result<(Point2<S>, S), ChartError> {
    if region.len() < 3 {
        return Err(ChartError::DegenerateRegion);
    }
    let value = |p: &Point2<S>| -> Result<S, ChartError> { Ok(w.dot(&chart.forward(p)?)) };
    let vals = region.iter().map(value).collect::<Result<Vec<_>, _>>()?;
    // Fit through the values as the first coordinate of an affine map.
    let src: Vec<Point2<S>> = region.to_vec();
    let dst: Vec<Point2<S>> = vals.iter().map(|v| Point2::new(v.clone(), S::zero())).collect();
    let fit = fit_affine(&src, &dst)?;
    let grad = Point2::new(fit.matrix.rows[0][0].clone(), fit.matrix.rows[0][1].clone());
    let c = fit.offset.x.clone();
    for p in probe_points(region) {
        let lhs = grad.dot(&p) + c.clone();
        if (lhs - value(&p)?).abs() > S::tolerance() * S::int(100) {
            return Err(ChartError::NotAffine);
        }
    }
    Ok((grad, c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    /// `p_ij` for charts on `A`, `q_ij` for charts on `B`.
    pub chart: String,
    pub points: usize,
    /// Points with `chart⁻¹(chart(x)) = x` and `chart(chart⁻¹(s)) = s` exactly.
    pub exact: usize,
}

/// Exact round trips on `count` rational points of the chart domain. Points
/// are drawn with numerators in `[-24, 24]` and denominators in `[1, 12]`
/// and kept when the chart accepts them.
pub fn round_trips(chart: &Chart, count: usize, seed: u64) -> RoundTripReport {
    use crate::scalar::{q, Rational};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || q(rng.gen_range(-24..=24), rng.gen_range(1..=12));
    let (mut points, mut exact) = (0, 0);
    for _ in 0..count * 1000 {
        if points == count {
            break;
        }
        let x: Point2<Rational> = Point2::new(draw(), draw());
        let Ok(s) = chart.forward(&x) else { continue };
        points += 1;
        let back = chart.inverse(&s);
        if back.as_ref() == Ok(&x) && chart.forward(&x).as_ref() == Ok(&s) && chart.side.on_boundary(&s) {
            exact += 1;
        }
    }
    let family = if chart.side == Side::A { 'p' } else { 'q' };
    RoundTripReport { chart: format!("{family}_{}{}", chart.i, chart.j), points, exact }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, Rational};
    use num_traits::Signed;
    use proptest::prelude::*;

    fn pt(x: Rational, y: Rational) -> Point2<Rational> {
        Point2::new(x, y)
    }

    #[test]
    fn every_chart_round_trips_on_a_hundred_points() {
        for side in [Side::A, Side::B] {
            for i in 0..4 {
                for j in (0..4).filter(|&j| j != i) {
                    let rep = round_trips(&Chart::new(side, i, j).unwrap(), 100, 3);
                    assert_eq!((rep.points, rep.exact), (100, 100), "{rep:?}");
                }
            }
        }
    }

    #[test]
    fn vertex_pairings() {
        for i in 0..4 {
            for j in 0..4 {
                let v = SimplexVertexSet::m::<Rational>(i).dot(&SimplexVertexSet::n(j));
                assert_eq!(v, q(if i == j { -3 } else { 1 }, 1));
            }
        }
        assert_eq!(SimplexVertexSet::m_mid::<Rational>(&[2, 3]), Vec3::from_ints([1, -1, -1]));
        assert_eq!(SimplexVertexSet::singular_points::<Rational>(Side::B).len(), 6);
    }

    #[test]
    fn barycentric_round_trip_on_vertices() {
        for side in [Side::A, Side::B] {
            for i in 0..4 {
                let w = side.barycentric::<Rational>(&side.vertex(i));
                for (r, wr) in w.iter().enumerate() {
                    assert_eq!(*wr, q(i64::from(r == i), 1));
                }
            }
        }
    }

    #[test]
    fn singular_point_and_kite_vertices() {
        let c = Chart::q(0, 1).unwrap();
        let inv = |idx: &[usize]| c.inverse(&SimplexVertexSet::n_mid::<Rational>(idx)).unwrap();
        assert_eq!(inv(&[0, 1]), pt(q(1, 2), q(1, 2)));
        assert_eq!(inv(&[0]), pt(q(0, 1), q(0, 1)));
        assert_eq!(inv(&[0, 1, 3]), pt(q(1, 3), q(0, 1)));
        assert_eq!(inv(&[1]), pt(q(1, 1), q(1, 1)));
        assert_eq!(inv(&[0, 1, 2]), pt(q(0, 1), q(1, 3)));
    }

    #[test]
    fn p_chart_sends_m23_to_two_two() {
        let c = Chart::p(1, 0).unwrap();
        assert_eq!(c.inverse(&SimplexVertexSet::m_mid::<Rational>(&[2, 3])).unwrap(), pt(q(2, 1), q(2, 1)));
    }

    #[test]
    fn q02_after_q01_on_k() {
        let k = [pt(q(1, 3), q(0, 1)), pt(q(1, 1), q(1, 1)), pt(q(1, 2), q(1, 2))];
        let t = transition_matrix(&Chart::q(0, 1).unwrap(), &Chart::q(0, 2).unwrap(), &k).unwrap();
        assert_eq!(t.matrix, Mat2::from_ints(-1, 0, -1, 1));
        assert!(t.is_linear());
    }

    #[test]
    fn self_transition_is_identity() {
        let c = Chart::q(0, 1).unwrap();
        let region = [pt(q(0, 1), q(0, 1)), pt(q(1, 3), q(0, 1)), pt(q(0, 1), q(1, 3))];
        let t = transition_matrix(&c, &c, &region).unwrap();
        assert_eq!(t.matrix, Mat2::identity());
        assert!(t.is_linear());
    }

    #[test]
    fn pairing_functional_on_k_is_minus_four_x() {
        let k = [pt(q(1, 3), q(0, 1)), pt(q(1, 1), q(1, 1)), pt(q(1, 2), q(1, 2))];
        let w = SimplexVertexSet::m::<Rational>(1) - SimplexVertexSet::m(2);
        let (g, c) = pairing_functional(&Chart::q(0, 1).unwrap(), &w, &k).unwrap();
        assert_eq!(g, pt(q(-4, 1), q(0, 1)));
        assert_eq!(c, q(0, 1));
    }

    #[test]
    fn transition_across_a_kink_is_rejected() {
        // This triangle straddles the line x = y where q_{0,1} changes face.
        let region = [pt(q(1, 2), q(0, 1)), pt(q(0, 1), q(1, 2)), pt(q(1, 2), q(1, 2))];
        let c = Chart::q(0, 1).unwrap();
        let d = Chart::q(1, 0).unwrap();
        assert_eq!(transition_matrix(&c, &d, &region), Err(ChartError::NotAffine));
    }

    #[test]
    fn errors() {
        assert!(Chart::q(1, 1).is_err());
        let c = Chart::q(0, 1).unwrap();
        assert_eq!(c.inverse(&Vec3::<Rational>::zero()), Err(ChartError::OffBoundary));
        // Barycenter of the face opposite n_0 is interior to that face.
        assert_eq!(c.inverse(&SimplexVertexSet::n_mid::<Rational>(&[1, 2, 3])), Err(ChartError::OutsideDomain));
        assert_eq!(c.forward(&pt(q(5, 1), q(5, 1))), Err(ChartError::OutsideDomain));
        assert_eq!(
            transition_matrix(&c, &Chart::p(0, 1).unwrap(), &[pt(q(0, 1), q(0, 1)), pt(q(0, 1), q(0, 1)), pt(q(0, 1), q(0, 1))]),
            Err(ChartError::SideMismatch)
        );
    }

    fn small_rational() -> impl Strategy<Value = Rational> {
        (-24i64..=24, 1i64..=12).prop_map(|(n, d)| q(n, d))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn charts_round_trip(i in 0usize..4, dj in 1usize..4, x in small_rational(), y in small_rational(), side_a in any::<bool>()) {
            let j = (i + dj) % 4;
            let side = if side_a { Side::A } else { Side::B };
            let c = Chart::new(side, i, j).unwrap();
            let p = pt(x, y);
            if let Ok(s) = c.forward(&p) {
                prop_assert!(side.on_boundary(&s));
                prop_assert_eq!(c.inverse(&s).unwrap(), p);
            }
        }

        #[test]
        fn transitions_are_integral(i in 0usize..4, dj in 1usize..4, dk in 1usize..3) {
            // Two charts centred at the same vertex agree up to a unimodular
            // linear map on the whole star.
            let j = (i + dj) % 4;
            let k = (0..4).filter(|&r| r != i).nth(dk % 3).unwrap();
            let from = Chart::q(i, j).unwrap();
            let to = Chart::q(i, k).unwrap();
            let region = [pt(q(0, 1), q(0, 1)), pt(q(1, 4), q(0, 1)), pt(q(0, 1), q(1, 4))];
            let t = transition_matrix(&from, &to, &region).unwrap();
            prop_assert_eq!(t.matrix.det().abs(), q(1, 1));
        }
    }
}

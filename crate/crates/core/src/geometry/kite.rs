//! The kite source domain Ω, the two-quad target Θ, and their symmetry maps.
//!
//! "Shifted" coordinates put the singular point at the origin and rescale Θ by
//! 1/4 so both domains have area 1/3. "Unshifted" coordinates are the chart
//! coordinates of the simplex boundary near `n_01`, where Ω has its corner at
//! the origin and Θ has 16 times the area of Ω.

use serde::{Deserialize, Serialize};

use crate::scalar::{format_rational, Rational, Scalar};

use super::{ConvexPolygon, HalfPlane, LinearBranch, Mat2, PiecewiseLinearMap, Point2};

fn pt<S: Scalar>(a: i64, b: i64, c: i64, d: i64) -> Point2<S> {
    Point2::new(S::ratio(a, b), S::ratio(c, d))
}

fn poly<S: Scalar>(pts: &[(i64, i64, i64, i64)]) -> ConvexPolygon<S> {
    ConvexPolygon::new(pts.iter().map(|&(a, b, c, d)| pt(a, b, c, d)).collect())
        .expect("kite constants are valid convex polygons")
}

/// Ω in shifted coordinates: Hull{(-1/2,-1/2), (-1/6,-1/2), (1/2,1/2), (-1/2,-1/6)}.
pub fn omega<S: Scalar>() -> ConvexPolygon<S> {
    poly(&[(-1, 2, -1, 2), (-1, 6, -1, 2), (1, 2, 1, 2), (-1, 2, -1, 6)])
}

/// Ω in chart coordinates: Hull{(0,0), (1/3,0), (1,1), (0,1/3)}.
pub fn omega_unshifted<S: Scalar>() -> ConvexPolygon<S> {
    poly(&[(0, 1, 0, 1), (1, 3, 0, 1), (1, 1, 1, 1), (0, 1, 1, 3)])
}

/// Θ (scaled by 1/4, shifted) as its two convex quads: `[Θ⁻, Θ⁺]`, where Θ⁻
/// lies below the diagonal.
pub fn theta<S: Scalar>() -> [ConvexPolygon<S>; 2] {
    [
        poly(&[(-1, 6, -1, 6), (1, 2, -1, 2), (5, 6, -1, 2), (0, 1, 0, 1)]),
        poly(&[(-1, 6, -1, 6), (-1, 2, 1, 2), (-1, 2, 5, 6), (0, 1, 0, 1)]),
    ]
}

/// Θ in chart coordinates, `[Θ⁻, Θ⁺]`.
pub fn theta_unshifted<S: Scalar>() -> [ConvexPolygon<S>; 2] {
    [
        poly(&[(4, 3, 4, 3), (4, 1, 0, 1), (16, 3, 0, 1), (2, 1, 2, 1)]),
        poly(&[(4, 3, 4, 3), (0, 1, 4, 1), (0, 1, 16, 3), (2, 1, 2, 1)]),
    ]
}

/// Total area of a union of interior-disjoint convex pieces.
pub fn union_area<S: Scalar>(pieces: &[ConvexPolygon<S>]) -> S {
    pieces.iter().fold(S::zero(), |acc, p| acc + p.area())
}

/// Shifted source point to chart coordinates.
pub fn source_to_chart<S: Scalar>(p: &Point2<S>) -> Point2<S> {
    p.clone() + Point2::new(S::half(), S::half())
}

/// Chart source point to shifted coordinates.
pub fn source_from_chart<S: Scalar>(p: &Point2<S>) -> Point2<S> {
    p.clone() - Point2::new(S::half(), S::half())
}

/// Shifted target point to chart coordinates (undo the 1/4 scaling).
pub fn target_to_chart<S: Scalar>(y: &Point2<S>) -> Point2<S> {
    (y.clone() + Point2::new(S::half(), S::half())).scale(&S::int(4))
}

/// Shifted-coordinate endpoints of the slit `{y = x >= 0}` in Ω.
pub fn slit<S: Scalar>() -> (Point2<S>, Point2<S>) {
    (Point2::origin(), pt(1, 2, 1, 2))
}

fn diagonal_halves<S: Scalar>() -> (HalfPlane<S>, HalfPlane<S>) {
    // y >= x  <=>  x - y <= 0
    let upper = HalfPlane::new(Point2::new(S::one(), -S::one()), S::zero()).unwrap();
    (upper.clone(), upper.complement())
}

/// The reflection R exchanging x and y.
pub fn r_map<S: Scalar>() -> PiecewiseLinearMap<S> {
    PiecewiseLinearMap::linear(Mat2::from_ints(0, 1, 1, 0)).unwrap()
}

/// The piecewise-linear involution A of Ω.
pub fn a_map<S: Scalar>() -> PiecewiseLinearMap<S> {
    let (upper, lower) = diagonal_halves();
    PiecewiseLinearMap::new(vec![
        LinearBranch {
            region: vec![upper],
            matrix: Mat2::from_ints(2, -3, 1, -2),
            offset: Point2::origin(),
        },
        LinearBranch {
            region: vec![lower],
            matrix: Mat2::from_ints(-2, 1, -3, 2),
            offset: Point2::origin(),
        },
    ])
    .unwrap()
}

/// Aᵀ, the matching symmetry of Θ. Its two branches disagree on the diagonal,
/// which is the interior edge shared by the two quads of Θ; it is a symmetry
/// of each quad separately.
pub fn a_transpose_map<S: Scalar>() -> PiecewiseLinearMap<S> {
    a_map().transpose()
}

/// G = diag(-1, 1), the image of R under the isothermal embedding.
pub fn g_map<S: Scalar>() -> PiecewiseLinearMap<S> {
    PiecewiseLinearMap::linear(Mat2::from_ints(-1, 0, 0, 1)).unwrap()
}

/// H = diag(1, -1), the image of A under the isothermal embedding.
pub fn h_map<S: Scalar>() -> PiecewiseLinearMap<S> {
    PiecewiseLinearMap::linear(Mat2::from_ints(1, 0, 0, -1)).unwrap()
}

/// Labels of the four subdomains Ω^{±±} / Θ^{±±}; the first sign is the side
/// of the diagonal, the second the side of the secondary split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    PlusPlus,
    PlusMinus,
    MinusPlus,
    MinusMinus,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [
        Quadrant::PlusPlus,
        Quadrant::PlusMinus,
        Quadrant::MinusPlus,
        Quadrant::MinusMinus,
    ];

    fn from_signs(first: bool, second: bool) -> Self {
        match (first, second) {
            (true, true) => Quadrant::PlusPlus,
            (true, false) => Quadrant::PlusMinus,
            (false, true) => Quadrant::MinusPlus,
            (false, false) => Quadrant::MinusMinus,
        }
    }

    pub fn upper(self) -> bool {
        matches!(self, Quadrant::PlusPlus | Quadrant::PlusMinus)
    }

    pub fn second_positive(self) -> bool {
        matches!(self, Quadrant::PlusPlus | Quadrant::MinusPlus)
    }

    pub fn label(self) -> &'static str {
        match self {
            Quadrant::PlusPlus => "++",
            Quadrant::PlusMinus => "+-",
            Quadrant::MinusPlus => "-+",
            Quadrant::MinusMinus => "--",
        }
    }
}

/// Subdomain of a shifted source point; `None` on the dividing lines.
/// Ω⁺ is `y > x`, split by `3y = x`; Ω⁻ is `y < x`, split by `3x = y`.
pub fn omega_quadrant<S: Scalar>(p: &Point2<S>) -> Option<Quadrant> {
    let (x, y) = (p.x.clone(), p.y.clone());
    if y > x {
        let t = y * S::int(3);
        if t == x {
            None
        } else {
            Some(Quadrant::from_signs(true, t > x))
        }
    } else if y < x {
        let t = x * S::int(3);
        if t == y {
            None
        } else {
            Some(Quadrant::from_signs(false, t > y))
        }
    } else {
        None
    }
}

/// Subdomain of a shifted target point: diagonal first, then `y = -x`.
pub fn theta_quadrant<S: Scalar>(p: &Point2<S>) -> Option<Quadrant> {
    let (x, y) = (p.x.clone(), p.y.clone());
    let s = x.clone() + y.clone();
    if y == x || s.is_zero() {
        return None;
    }
    Some(Quadrant::from_signs(y > x, s > S::zero()))
}

/// Closed triangle Ω^{q} in shifted coordinates.
pub fn omega_piece<S: Scalar>(q: Quadrant) -> ConvexPolygon<S> {
    match q {
        Quadrant::PlusPlus => poly(&[(0, 1, 0, 1), (1, 2, 1, 2), (-1, 2, -1, 6)]),
        Quadrant::PlusMinus => poly(&[(0, 1, 0, 1), (-1, 2, -1, 6), (-1, 2, -1, 2)]),
        Quadrant::MinusPlus => poly(&[(0, 1, 0, 1), (-1, 6, -1, 2), (1, 2, 1, 2)]),
        Quadrant::MinusMinus => poly(&[(0, 1, 0, 1), (-1, 2, -1, 2), (-1, 6, -1, 2)]),
    }
}

/// Closed triangle Θ^{q} in shifted coordinates.
pub fn theta_piece<S: Scalar>(q: Quadrant) -> ConvexPolygon<S> {
    match q {
        Quadrant::PlusPlus => poly(&[(0, 1, 0, 1), (-1, 2, 5, 6), (-1, 2, 1, 2)]),
        Quadrant::PlusMinus => poly(&[(0, 1, 0, 1), (-1, 2, 1, 2), (-1, 6, -1, 6)]),
        Quadrant::MinusPlus => poly(&[(0, 1, 0, 1), (1, 2, -1, 2), (5, 6, -1, 2)]),
        Quadrant::MinusMinus => poly(&[(0, 1, 0, 1), (-1, 6, -1, 6), (1, 2, -1, 2)]),
    }
}

/// Machine-readable export of every domain constant, rationals as `"p/q"`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DomainConstants {
    pub omega_shifted: Vec<[String; 2]>,
    pub omega_unshifted: Vec<[String; 2]>,
    pub theta_shifted: Vec<Vec<[String; 2]>>,
    pub theta_unshifted: Vec<Vec<[String; 2]>>,
    pub omega_subdomains: Vec<NamedPolygon>,
    pub theta_subdomains: Vec<NamedPolygon>,
    pub slit_shifted: [[String; 2]; 2],
    pub maps: Vec<NamedMap>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NamedPolygon {
    pub name: String,
    pub vertices: Vec<[String; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NamedMap {
    pub name: String,
    pub branches: Vec<BranchExport>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BranchExport {
    /// Half-planes `[nx, ny, c]` meaning `nx*x + ny*y <= c`.
    pub region: Vec<[String; 3]>,
    pub matrix: [[String; 2]; 2],
    pub offset: [String; 2],
}

fn export_point(p: &Point2<Rational>) -> [String; 2] {
    [format_rational(&p.x), format_rational(&p.y)]
}

fn export_poly(p: &ConvexPolygon<Rational>) -> Vec<[String; 2]> {
    p.vertices().iter().map(export_point).collect()
}

fn export_map(name: &str, m: &PiecewiseLinearMap<Rational>) -> NamedMap {
    NamedMap {
        name: name.to_string(),
        branches: m
            .branches()
            .iter()
            .map(|b| BranchExport {
                region: b
                    .region
                    .iter()
                    .map(|h| {
                        [
                            format_rational(&h.normal().x),
                            format_rational(&h.normal().y),
                            format_rational(h.offset()),
                        ]
                    })
                    .collect(),
                matrix: [
                    [format_rational(&b.matrix.rows[0][0]), format_rational(&b.matrix.rows[0][1])],
                    [format_rational(&b.matrix.rows[1][0]), format_rational(&b.matrix.rows[1][1])],
                ],
                offset: export_point(&b.offset),
            })
            .collect(),
    }
}

impl DomainConstants {
    pub fn collect() -> Self {
        let (s0, s1) = slit::<Rational>();
        Self {
            omega_shifted: export_poly(&omega()),
            omega_unshifted: export_poly(&omega_unshifted()),
            theta_shifted: theta().iter().map(export_poly).collect(),
            theta_unshifted: theta_unshifted().iter().map(export_poly).collect(),
            omega_subdomains: Quadrant::ALL
                .iter()
                .map(|&q| NamedPolygon {
                    name: format!("omega{}", q.label()),
                    vertices: export_poly(&omega_piece(q)),
                })
                .collect(),
            theta_subdomains: Quadrant::ALL
                .iter()
                .map(|&q| NamedPolygon {
                    name: format!("theta{}", q.label()),
                    vertices: export_poly(&theta_piece(q)),
                })
                .collect(),
            slit_shifted: [export_point(&s0), export_point(&s1)],
            maps: vec![
                export_map("R", &r_map()),
                export_map("A", &a_map()),
                export_map("A_transpose", &a_transpose_map()),
                export_map("G", &g_map()),
                export_map("H", &h_map()),
            ],
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("domain constants serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{parse_rational, q};

    type P = Point2<Rational>;

    fn p(a: i64, b: i64, c: i64, d: i64) -> P {
        pt(a, b, c, d)
    }

    #[test]
    fn omega_area_is_one_third() {
        assert_eq!(omega::<Rational>().area(), q(1, 3));
        assert_eq!(omega_unshifted::<Rational>().area(), q(1, 3));
    }

    #[test]
    fn unscaled_theta_has_sixteen_times_the_area() {
        let a = union_area(&theta_unshifted::<Rational>());
        assert_eq!(a, q(16, 3));
        assert_eq!(a, omega_unshifted::<Rational>().area() * q(16, 1));
        assert_eq!(union_area(&theta::<Rational>()), q(1, 3));
    }

    #[test]
    fn shifted_theta_is_scaled_chart_theta() {
        for (s, u) in theta::<Rational>().iter().zip(theta_unshifted::<Rational>().iter()) {
            let mapped = s.map_vertices(target_to_chart).unwrap();
            assert_eq!(&mapped, u);
        }
        let mapped = omega::<Rational>().map_vertices(source_to_chart).unwrap();
        assert_eq!(mapped, omega_unshifted());
    }

    #[test]
    fn shifted_omega_split_by_diagonal() {
        let below = HalfPlane::new(p(-1, 1, 1, 1), q(0, 1)).unwrap(); // y <= x
        let half = omega::<Rational>().clip(&below).unwrap();
        assert_eq!(half.area(), q(1, 6));
    }

    #[test]
    fn containment_examples() {
        let om = omega::<Rational>();
        assert!(om.contains(&om.centroid()));
        assert!(!om.contains(&p(10, 1, 10, 1)));
        assert!(om.contains(&p(-1, 2, -1, 2)));
    }

    #[test]
    fn r_and_a_examples() {
        let r = r_map::<Rational>();
        assert_eq!(r.apply(&p(1, 10, 3, 10)).unwrap(), p(3, 10, 1, 10));
        let a = a_map::<Rational>();
        assert_eq!(a.apply(&p(1, 5, 1, 5)).unwrap(), p(-1, 5, -1, 5));
        let x = p(-3, 10, -1, 10);
        assert_eq!(a.apply(&a.apply(&x).unwrap()).unwrap(), x);
    }

    #[test]
    fn a_transpose_fixes_antidiagonal_of_upper_quad() {
        let at = a_transpose_map::<Rational>();
        assert_eq!(at.apply(&p(-1, 2, 1, 2)).unwrap(), p(-1, 2, 1, 2));
        assert_eq!(at.apply(&p(-1, 2, 5, 6)).unwrap(), p(-1, 6, -1, 6));
        // Two-valued on the shared diagonal edge of the quads.
        assert!(at.apply(&p(-1, 6, -1, 6)).is_err());
    }

    #[test]
    fn pieces_have_equal_area_and_match_labels() {
        for qd in Quadrant::ALL {
            let o = omega_piece::<Rational>(qd);
            let t = theta_piece::<Rational>(qd);
            assert_eq!(o.area(), q(1, 12));
            assert_eq!(t.area(), q(1, 12));
            assert_eq!(omega_quadrant(&o.centroid()), Some(qd));
            assert_eq!(theta_quadrant(&t.centroid()), Some(qd));
        }
        assert_eq!(omega_quadrant(&P::origin()), None);
    }

    #[test]
    fn symmetries_permute_pieces() {
        let r = r_map::<Rational>();
        let a = a_map::<Rational>();
        let at = a_transpose_map::<Rational>();
        let swap_first = |q: Quadrant| Quadrant::from_signs(!q.upper(), q.second_positive());
        let swap_second = |q: Quadrant| Quadrant::from_signs(q.upper(), !q.second_positive());
        for qd in Quadrant::ALL {
            let c = omega_piece::<Rational>(qd).centroid();
            assert_eq!(omega_quadrant(&r.apply(&c).unwrap()), Some(swap_first(qd)));
            assert_eq!(omega_quadrant(&a.apply(&c).unwrap()), Some(swap_second(qd)));
            let t = theta_piece::<Rational>(qd).centroid();
            assert_eq!(theta_quadrant(&r.apply(&t).unwrap()), Some(swap_first(qd)));
            assert_eq!(theta_quadrant(&at.apply(&t).unwrap()), Some(swap_second(qd)));
        }
    }

    #[test]
    fn export_parses_back() {
        let doc = DomainConstants::collect();
        let json = doc.to_json();
        let back: DomainConstants = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
        assert_eq!(doc.omega_shifted[0], ["-1/2".to_string(), "-1/2".to_string()]);
        let verts: Vec<P> = doc
            .omega_unshifted
            .iter()
            .map(|[x, y]| Point2::new(parse_rational(x).unwrap(), parse_rational(y).unwrap()))
            .collect();
        assert_eq!(ConvexPolygon::new(verts).unwrap(), omega_unshifted());
        assert_eq!(doc.maps.len(), 5);
    }
}

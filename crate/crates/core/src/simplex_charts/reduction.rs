//! Checks that a planar transport solution on the kite reproduces the
//! c-subgradient structure of `ψ` near the singular point `n_{01}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::function::{boundary_grid, c_subgradient, DiscreteFunction, VertexPermutation};
use super::{pairing_functional, transition_matrix, Chart, ChartError, Side, SimplexVertexSet, Vec3};
use crate::geometry::{ConvexPolygon, Mat2, Point2};
use crate::ot_semidiscrete::stratified_points;
use crate::potential_analysis::PotentialField;
use crate::scalar::{format_rational, q, Rational, Scalar};

/// The four triangles of `Q` around `n_{01}`, as vertex index sets of the
/// barycenters spanning them. The second and fourth lie in `τ_3`, the others
/// in `τ_2`.
const Q_PIECES: [[&[usize]; 3]; 4] = [
    [&[0], &[0, 1, 3], &[0, 1]],
    [&[0], &[0, 1], &[0, 1, 2]],
    [&[1], &[0, 1, 3], &[0, 1]],
    [&[1], &[0, 1], &[0, 1, 2]],
];

/// The four triangles of `P` around `m_{23}`, listed so that piece `a` of
/// `Q` is sent to piece `a` of `P`.
const P_PIECES: [[&[usize]; 3]; 4] = [
    [&[1, 2, 3], &[2], &[2, 3]],
    [&[1, 2, 3], &[2, 3], &[3]],
    [&[0, 2, 3], &[2], &[2, 3]],
    [&[0, 2, 3], &[2, 3], &[3]],
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionOptions {
    /// Barycentric resolution of the rational grids on each subregion.
    pub pairing_resolution: u32,
    /// Samples per source triangle for the image checks.
    pub image_samples: usize,
    /// Grid resolution on `A` and `B` for the discrete c-subgradient.
    pub subgradient_resolution: u32,
    /// Image tolerance in units of the target site spacing (unshifted).
    pub tolerance_spacings: f64,
    pub seed: u64,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            pairing_resolution: 6,
            image_samples: 2000,
            subgradient_resolution: 24,
            tolerance_spacings: 3.0,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    /// Mean pairing `<m, n>` over grid samples of `Q_a` (row) and `P_b` (column).
    pub matrix: Vec<Vec<String>>,
    /// Optimal assignment of `P` pieces to `Q` pieces.
    pub assignment: Vec<usize>,
    pub unique_optimum: bool,
    /// Every row has a strict maximum on the diagonal.
    pub rows_strict: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleImageReport {
    pub name: String,
    pub source: Vec<[f64; 2]>,
    pub target: Vec<[f64; 2]>,
    pub samples: usize,
    pub inside_fraction: f64,
    pub max_outside_distance: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRuleReport {
    /// `Mᵀ` with `M = q_{02}⁻¹ ∘ q_{01}` on `K`.
    pub matrix: [[String; 2]; 2],
    /// Offset from the gradient of `<m_2 - m_1, q_{01}(·)>` on `K`.
    pub offset: [String; 2],
    pub cells: usize,
    pub max_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgradientReport {
    pub resolution: u32,
    pub argmax_size: usize,
    /// Distance from `m_{23}` to the nearest argmax sample.
    pub distance_to_m23: f64,
    pub spacing: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularImage {
    pub image: [f64; 2],
    pub distance: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub pairing: PairingReport,
    pub singular_image: SingularImage,
    pub triangles: Vec<TriangleImageReport>,
    pub chain_rule: ChainRuleReport,
    pub subgradient: SubgradientReport,
    /// Target site spacing in unshifted coordinates.
    pub spacing: f64,
    pub passed: bool,
}

fn piece_grid(side: Side, piece: &[&[usize]; 3], k: u32) -> Vec<Vec3<Rational>> {
    let corners: Vec<Vec3<Rational>> = piece.iter().map(|idx| side.barycenter(idx)).collect();
    let k = k as i64;
    let mut out = Vec::new();
    for a in 0..=k {
        for b in 0..=k - a {
            let w = [q(a, k), q(b, k), q(k - a - b, k)];
            out.push((0..3).fold(Vec3::zero(), |acc, r| acc + corners[r].scale(&w[r])));
        }
    }
    out
}

/// Mean pairing between grid samples of the pieces of `Q` and `P`.
pub fn pairing_matrix(k: u32) -> [[Rational; 4]; 4] {
    let qs: Vec<Vec<Vec3<Rational>>> = Q_PIECES.iter().map(|p| piece_grid(Side::B, p, k)).collect();
    let ps: Vec<Vec<Vec3<Rational>>> = P_PIECES.iter().map(|p| piece_grid(Side::A, p, k)).collect();
    std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            let total: Rational = qs[a].iter().flat_map(|n| ps[b].iter().map(move |m| m.dot(n))).sum();
            total / q((qs[a].len() * ps[b].len()) as i64, 1)
        })
    })
}

fn pairing_report(k: u32) -> PairingReport {
    let m = pairing_matrix(k);
    let mut scored: Vec<(Rational, [usize; 4])> = VertexPermutation::all()
        .into_iter()
        .map(|p| ((0..4).map(|a| m[a][p.0[a]].clone()).sum(), p.0))
        .collect();
    scored.sort_by(|x, y| y.0.cmp(&x.0));
    let unique_optimum = scored[0].0 > scored[1].0;
    let assignment = scored[0].1.to_vec();
    let rows_strict = (0..4).all(|a| (0..4).all(|b| b == a || m[a][a] > m[a][b]));
    PairingReport {
        matrix: m.iter().map(|row| row.iter().map(format_rational).collect()).collect(),
        passed: unique_optimum && rows_strict && assignment == vec![0, 1, 2, 3],
        assignment,
        unique_optimum,
        rows_strict,
    }
}

/// `ψ` on `B`, assembled from a planar potential `φ` on the shifted kite.
///
/// In the unshifted chart `ψ_{0,1}(x) = 4 φ(x - ½) + 2 (x_1 + x_2)`, so that
/// `∇ψ_{0,1}` takes values in the unshifted target. On `Q` the potential is
/// `ψ = ψ_{0,1} ∘ q_{0,1}⁻¹ + m_1`; elsewhere it is extended by the vertex
/// permutations.
pub struct AssembledPotential<'a, 'b> {
    field: &'b PotentialField<'a>,
    q01: Chart,
    q02: Chart,
}

impl<'a, 'b> AssembledPotential<'a, 'b> {
    pub fn new(field: &'b PotentialField<'a>) -> Self {
        Self { field, q01: Chart::q(0, 1).unwrap(), q02: Chart::q(0, 2).unwrap() }
    }

    pub fn psi01(&self, x: &Point2<f64>) -> f64 {
        let s = Point2::new(x.x - 0.5, x.y - 0.5);
        4.0 * self.field.potential_unchecked(&s) + 2.0 * (x.x + x.y)
    }

    /// `∇ψ_{0,1}` at `x`, or `None` outside the kite.
    pub fn grad_psi01(&self, x: &Point2<f64>) -> Option<Point2<f64>> {
        let s = Point2::new(x.x - 0.5, x.y - 0.5);
        let g = self.field.eval_gradient(&s).ok()?;
        Some(Point2::new(4.0 * g.x + 2.0, 4.0 * g.y + 2.0))
    }

    /// A permutation `σ` with `σ⁻¹ n ∈ Q`, and that preimage. The two
    /// largest weights go to labels 0 and 1; the identity is used on `Q`.
    pub fn fold(n: &Vec3<f64>) -> (VertexPermutation, Vec3<f64>) {
        let w = Side::B.barycentric(n);
        let mut order = [0usize, 1, 2, 3];
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
        let (mut big, mut small) = ([order[0], order[1]], [order[2], order[3]]);
        big.sort_unstable();
        small.sort_unstable();
        let sigma = VertexPermutation([big[0], big[1], small[0], small[1]]);
        let back = sigma.inverse().apply(Side::B, n);
        (sigma, back)
    }

    pub fn psi(&self, n: &Vec3<f64>) -> f64 {
        let (_, n0) = Self::fold(n);
        let x = self.q01.inverse(&n0).expect("folded point lies in Q");
        self.psi01(&x) + SimplexVertexSet::m::<f64>(1).dot(&n0)
    }

    /// `ψ_{0,2}(z) = ψ(q_{0,2}(z)) - <m_2, q_{0,2}(z)>`.
    pub fn psi02(&self, z: &Point2<f64>) -> Option<f64> {
        let n = self.q02.forward(z).ok()?;
        Some(self.psi(&n) - SimplexVertexSet::m::<f64>(2).dot(&n))
    }

    pub fn discrete(&self, points: Vec<Vec3<f64>>) -> DiscreteFunction<f64> {
        DiscreteFunction::from_fn(Side::B, points, |n| self.psi(n)).expect("grid points lie on B")
    }
}

fn unshifted(poly: &[(i64, i64)]) -> Vec<Point2<f64>> {
    poly.iter().map(|&(a, b)| Point2::new(a as f64 / 6.0, b as f64 / 6.0)).collect()
}

fn scaled(poly: &[(i64, i64)]) -> Vec<Point2<f64>> {
    poly.iter().map(|&(a, b)| Point2::new(a as f64 / 3.0, b as f64 / 3.0)).collect()
}

fn outside_distance(poly: &ConvexPolygon<f64>, p: &Point2<f64>) -> f64 {
    if poly.contains(p) {
        0.0
    } else {
        poly.boundary_distance(p)
    }
}

fn triangle_image(
    psi: &AssembledPotential<'_, '_>,
    name: &str,
    source: Vec<Point2<f64>>,
    target: Vec<Point2<f64>>,
    opts: &ReductionOptions,
    tol: f64,
) -> TriangleImageReport {
    let src = ConvexPolygon::new(source.clone()).expect("source triangle");
    let tgt = ConvexPolygon::new(target.clone()).expect("target triangle");
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut inside = 0usize;
    let mut count = 0usize;
    let mut worst = 0.0f64;
    for x in stratified_points(&src, opts.image_samples, &mut rng) {
        let Some(g) = psi.grad_psi01(&x) else { continue };
        count += 1;
        let d = outside_distance(&tgt, &g);
        if d == 0.0 {
            inside += 1;
        }
        worst = worst.max(d);
    }
    TriangleImageReport {
        name: name.to_string(),
        source: source.iter().map(|p| [p.x, p.y]).collect(),
        target: target.iter().map(|p| [p.x, p.y]).collect(),
        samples: count,
        inside_fraction: if count == 0 { 0.0 } else { inside as f64 / count as f64 },
        max_outside_distance: worst,
        tolerance: tol,
        passed: count > 0 && worst <= tol,
    }
}

fn mat_strings(m: &Mat2<Rational>) -> [[String; 2]; 2] {
    std::array::from_fn(|i| std::array::from_fn(|j| format_rational(&m.rows[i][j])))
}

/// Checks `∂ψ_{0,1} = Mᵀ ∂ψ_{0,2} + offset` on `K`, cell by cell: inside a
/// Laguerre cell both potentials are affine, so `∂ψ_{0,2}` is recovered
/// exactly from three values of `ψ_{0,2}`.
fn chain_rule(psi: &AssembledPotential<'_, '_>) -> Result<ChainRuleReport, ChartError> {
    let k_exact = [
        Point2::new(q(1, 3), q(0, 1)),
        Point2::new(q(1, 1), q(1, 1)),
        Point2::new(q(1, 2), q(1, 2)),
    ];
    let q01 = Chart::q(0, 1)?;
    let m = transition_matrix(&q01, &Chart::q(0, 2)?, &k_exact)?.matrix;
    let w = SimplexVertexSet::m::<Rational>(2) - SimplexVertexSet::m(1);
    let (off, _) = pairing_functional(&q01, &w, &k_exact)?;
    let mt = m.transpose();
    let mt_f = mt.to_f64();
    let m_f = m.to_f64();
    let off_f = off.to_f64();

    let k_shifted = ConvexPolygon::new(k_exact.iter().map(|p| Point2::new(Scalar::to_f64(&p.x) - 0.5, Scalar::to_f64(&p.y) - 0.5)).collect())
        .expect("K is a triangle");
    let plan = psi.field.plan();
    let mut cells = 0usize;
    let mut worst = 0.0f64;
    for (j, cell) in plan.cells.iter().enumerate() {
        let Some(cell) = cell else { continue };
        let Some(piece) = k_shifted.clip_all(cell.halfplanes().iter()) else { continue };
        if piece.area() < 1e-12 {
            continue;
        }
        let c = piece.centroid();
        let pts: Vec<Point2<f64>> = std::iter::once(c)
            .chain(piece.vertices().iter().take(2).map(|v| c + (*v - c) * 0.25))
            .map(|p| Point2::new(p.x + 0.5, p.y + 0.5))
            .collect();
        let vals: Option<Vec<f64>> = pts.iter().map(|p| psi.psi02(&m_f.apply(p))).collect();
        let Some(vals) = vals else { continue };
        let zs: Vec<Point2<f64>> = pts.iter().map(|p| m_f.apply(p)).collect();
        let (e1, e2) = (zs[1] - zs[0], zs[2] - zs[0]);
        let det = e1.cross(&e2);
        if det.abs() < 1e-14 {
            continue;
        }
        let (d1, d2) = (vals[1] - vals[0], vals[2] - vals[0]);
        let g02 = Point2::new((d1 * e2.y - d2 * e1.y) / det, (e1.x * d2 - e2.x * d1) / det);
        let site = plan.sites()[j];
        let g01 = Point2::new(4.0 * site.x + 2.0, 4.0 * site.y + 2.0);
        let pred = mt_f.apply(&g02) + off_f;
        worst = worst.max(pred.dist(&g01));
        cells += 1;
    }
    Ok(ChainRuleReport {
        matrix: mat_strings(&mt),
        offset: [format_rational(&off.x), format_rational(&off.y)],
        cells,
        max_residual: worst,
        passed: cells > 0 && worst <= 1e-8,
    })
}

fn subgradient_at_n01(psi: &AssembledPotential<'_, '_>, k: u32) -> SubgradientReport {
    let b = boundary_grid::<f64>(Side::B, k);
    let a = boundary_grid::<f64>(Side::A, k);
    let f = psi.discrete(b.points);
    let n01 = SimplexVertexSet::n_mid::<f64>(&[0, 1]);
    let set = c_subgradient(&f, &n01, &a.points);
    let m23 = SimplexVertexSet::m_mid::<f64>(&[2, 3]);
    let dist = set.iter().map(|&i| a.points[i].dist(&m23)).fold(f64::INFINITY, f64::min);
    SubgradientReport {
        resolution: k,
        argmax_size: set.len(),
        distance_to_m23: dist,
        spacing: a.spacing(),
        passed: dist <= a.spacing(),
    }
}

/// Runs the reduction checks against a solved kite plan.
pub fn verify_reduction(field: Option<&PotentialField<'_>>, opts: &ReductionOptions) -> Result<ReductionReport, ChartError> {
    let field = field.ok_or(ChartError::MissingPlan)?;
    let psi = AssembledPotential::new(field);
    let spacing = 4.0 * field.spacing();
    let tol = opts.tolerance_spacings * spacing;

    let pairing = pairing_report(opts.pairing_resolution);

    let sing = psi.grad_psi01(&Point2::new(0.5, 0.5)).ok_or(ChartError::MissingPlan)?;
    let d = sing.dist(&Point2::new(2.0, 2.0));
    let singular_image = SingularImage { image: [sing.x, sing.y], distance: d, tolerance: tol, passed: d <= tol };

    let triangles = vec![
        triangle_image(
            &psi,
            "T0 side of Q",
            unshifted(&[(0, 0), (2, 0), (3, 3), (0, 2)]),
            scaled(&[(4, 4), (12, 0), (0, 12)]),
            opts,
            tol,
        ),
        triangle_image(&psi, "K", unshifted(&[(2, 0), (6, 6), (3, 3)]), scaled(&[(12, 0), (16, 0), (6, 6)]), opts, tol),
        triangle_image(
            &psi,
            "mirror of K",
            unshifted(&[(0, 2), (3, 3), (6, 6)]),
            scaled(&[(0, 12), (6, 6), (0, 16)]),
            opts,
            tol,
        ),
    ];
    let chain_rule = chain_rule(&psi)?;
    let subgradient = subgradient_at_n01(&psi, opts.subgradient_resolution);
    let passed = pairing.passed
        && singular_image.passed
        && triangles.iter().all(|t| t.passed)
        && chain_rule.passed
        && subgradient.passed;
    Ok(ReductionReport { pairing, singular_image, triangles, chain_rule, subgradient, spacing, passed })
}

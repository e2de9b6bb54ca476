use rayon::prelude::*;

use super::{ChartError, Side, Vec3};
use crate::scalar::Scalar;

/// Relative tolerance for discrete argmax sets, as a fraction of the value range.
pub const TAU_ARG: f64 = 1e-9;

/// Uniform barycentric grid of resolution `k` on every face of one side,
/// with shared edge points listed once.
#[derive(Debug, Clone)]
pub struct BoundaryGrid<S> {
    pub side: Side,
    pub resolution: u32,
    pub points: Vec<Vec3<S>>,
    /// Integer barycentric weights summing to `resolution`, one of them zero.
    pub weights: Vec<[u32; 4]>,
}

pub fn boundary_grid<S: Scalar>(side: Side, k: u32) -> BoundaryGrid<S> {
    let mut weights = Vec::new();
    for a in 0..=k {
        for b in 0..=k - a {
            for c in 0..=k - a - b {
                let d = k - a - b - c;
                let w = [a, b, c, d];
                if w.contains(&0) {
                    weights.push(w);
                }
            }
        }
    }
    let points = weights
        .iter()
        .map(|w| {
            let bary: [S; 4] = std::array::from_fn(|r| S::ratio(w[r] as i64, k as i64));
            side.from_barycentric(&bary)
        })
        .collect();
    BoundaryGrid { side, resolution: k, points, weights }
}

impl<S: Scalar> BoundaryGrid<S> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Euclidean distance between neighbouring grid points along an edge.
    pub fn spacing(&self) -> f64 {
        let e = self.side.vertex::<f64>(0).dist(&self.side.vertex(1));
        e / self.resolution as f64
    }
}

/// Values attached to sample points of `A` or `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunction<S> {
    pub side: Side,
    pub points: Vec<Vec3<S>>,
    pub values: Vec<S>,
}

impl<S: Scalar> DiscreteFunction<S> {
    pub fn new(side: Side, points: Vec<Vec3<S>>, values: Vec<S>) -> Result<Self, ChartError> {
        if points.len() != values.len() || points.is_empty() {
            return Err(ChartError::DegenerateRegion);
        }
        if points.iter().any(|p| !side.on_boundary(p)) {
            return Err(ChartError::OffBoundary);
        }
        Ok(Self { side, points, values })
    }

    pub fn from_fn(side: Side, points: Vec<Vec3<S>>, f: impl Fn(&Vec3<S>) -> S) -> Result<Self, ChartError> {
        let values = points.iter().map(&f).collect();
        Self::new(side, points, values)
    }

    pub fn constant(side: Side, points: Vec<Vec3<S>>, c: S) -> Result<Self, ChartError> {
        Self::from_fn(side, points, |_| c.clone())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `f^c(p) = max_s <s, p> - f(s)` over the samples `s` of `f`, evaluated at
/// `targets` on the opposite side.
pub fn c_transform<S: Scalar>(f: &DiscreteFunction<S>, targets: &[Vec3<S>]) -> DiscreteFunction<S> {
    let values = targets
        .par_iter()
        .map(|t| {
            f.points
                .iter()
                .zip(&f.values)
                .map(|(s, v)| s.dot(t) - v.clone())
                .reduce(S::max_of)
                .expect("nonempty samples")
        })
        .collect();
    DiscreteFunction { side: f.side.other(), points: targets.to_vec(), values }
}

/// Indices of the samples `m` (opposite side) in the discrete c-subgradient
/// of `ψ` at `n`: those maximizing `<m, n> - ψ^c(m)` up to `TAU_ARG` times
/// the range of that quantity. Ties are exact for rationals.
pub fn c_subgradient<S: Scalar>(psi: &DiscreteFunction<S>, n: &Vec3<S>, opposite: &[Vec3<S>]) -> Vec<usize> {
    let conj = c_transform(psi, opposite);
    let g: Vec<S> = conj.points.iter().zip(&conj.values).map(|(m, c)| m.dot(n) - c.clone()).collect();
    let hi = g.iter().cloned().reduce(S::max_of).expect("nonempty samples");
    let lo = g.iter().cloned().reduce(S::min_of).expect("nonempty samples");
    let tol = if S::is_exact() { S::zero() } else { (hi.clone() - lo) * S::from_f64(TAU_ARG) };
    g.iter()
        .enumerate()
        .filter(|(_, v)| hi.clone() - (*v).clone() <= tol)
        .map(|(i, _)| i)
        .collect()
}

/// Permutation `σ` of the four vertex labels, acting on either side by
/// `Σ w_r v_r ↦ Σ w_r v_{σ(r)}`. It preserves the pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VertexPermutation(pub [usize; 4]);

impl VertexPermutation {
    pub fn identity() -> Self {
        Self([0, 1, 2, 3])
    }

    /// All 24 permutations, identity first.
    pub fn all() -> Vec<Self> {
        let mut out = Vec::with_capacity(24);
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let p = [a, b, c, d];
                        let mut seen = [false; 4];
                        p.iter().for_each(|&i| seen[i] = true);
                        if seen.iter().all(|&s| s) {
                            out.push(Self(p));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn inverse(&self) -> Self {
        let mut inv = [0; 4];
        for (r, &s) in self.0.iter().enumerate() {
            inv[s] = r;
        }
        Self(inv)
    }

    pub fn apply<S: Scalar>(&self, side: Side, p: &Vec3<S>) -> Vec3<S> {
        let w = side.barycentric(p);
        let mut out: [S; 4] = std::array::from_fn(|_| S::zero());
        for r in 0..4 {
            out[self.0[r]] = w[r].clone();
        }
        side.from_barycentric(&out)
    }
}

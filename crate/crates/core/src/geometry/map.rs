use crate::scalar::Scalar;

use super::{GeometryError, HalfPlane, Point2};

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat2<S> {
    pub rows: [[S; 2]; 2],
}

impl<S: Scalar> Mat2<S> {
    pub fn new(a: S, b: S, c: S, d: S) -> Self {
        Self { rows: [[a, b], [c, d]] }
    }

    pub fn from_ints(a: i64, b: i64, c: i64, d: i64) -> Self {
        Self::new(S::int(a), S::int(b), S::int(c), S::int(d))
    }

    pub fn identity() -> Self {
        Self::from_ints(1, 0, 0, 1)
    }

    pub fn apply(&self, p: &Point2<S>) -> Point2<S> {
        let [[a, b], [c, d]] = &self.rows;
        Point2::new(
            a.clone() * p.x.clone() + b.clone() * p.y.clone(),
            c.clone() * p.x.clone() + d.clone() * p.y.clone(),
        )
    }

    pub fn det(&self) -> S {
        let [[a, b], [c, d]] = &self.rows;
        a.clone() * d.clone() - b.clone() * c.clone()
    }

    pub fn transpose(&self) -> Self {
        let [[a, b], [c, d]] = self.rows.clone();
        Self::new(a, c, b, d)
    }

    pub fn mul(&self, o: &Self) -> Self {
        let r = |i: usize, j: usize| {
            self.rows[i][0].clone() * o.rows[0][j].clone() + self.rows[i][1].clone() * o.rows[1][j].clone()
        };
        Self::new(r(0, 0), r(0, 1), r(1, 0), r(1, 1))
    }

    pub fn to_f64(&self) -> Mat2<f64> {
        let [[a, b], [c, d]] = &self.rows;
        Mat2::new(a.to_f64(), b.to_f64(), c.to_f64(), d.to_f64())
    }
}

/// One affine piece: applies `matrix * p + offset` where every half-plane of
/// `region` contains `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBranch<S> {
    pub region: Vec<HalfPlane<S>>,
    pub matrix: Mat2<S>,
    pub offset: Point2<S>,
}

impl<S: Scalar> LinearBranch<S> {
    pub fn contains(&self, p: &Point2<S>) -> bool {
        self.region.iter().all(|h| h.contains(p))
    }

    pub fn apply(&self, p: &Point2<S>) -> Point2<S> {
        self.matrix.apply(p) + self.offset.clone()
    }
}

/// Piecewise-affine map given by a list of branches over closed regions.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearMap<S> {
    branches: Vec<LinearBranch<S>>,
}

impl<S: Scalar> PiecewiseLinearMap<S> {
    pub fn new(branches: Vec<LinearBranch<S>>) -> Result<Self, GeometryError> {
        if branches.iter().any(|b| b.matrix.det().is_zero()) {
            return Err(GeometryError::SingularBranch);
        }
        Ok(Self { branches })
    }

    /// A single linear map on the whole plane.
    pub fn linear(matrix: Mat2<S>) -> Result<Self, GeometryError> {
        Self::new(vec![LinearBranch {
            region: Vec::new(),
            matrix,
            offset: Point2::origin(),
        }])
    }

    pub fn branches(&self) -> &[LinearBranch<S>] {
        &self.branches
    }

    /// Applies the branch whose region holds `p`. On shared boundaries every
    /// applicable branch must give the same image.
    pub fn apply(&self, p: &Point2<S>) -> Result<Point2<S>, GeometryError> {
        let mut image: Option<Point2<S>> = None;
        for b in self.branches.iter().filter(|b| b.contains(p)) {
            let q = b.apply(p);
            match &image {
                None => image = Some(q),
                Some(prev) => {
                    if !agree(prev, &q) {
                        let f = p.to_f64();
                        return Err(GeometryError::BranchDisagreement(f.x, f.y));
                    }
                }
            }
        }
        image.ok_or_else(|| {
            let f = p.to_f64();
            GeometryError::OutsideDomain(f.x, f.y)
        })
    }

    /// Same regions, transposed matrices. Offsets are dropped, so this is only
    /// meaningful for piecewise-linear maps.
    pub fn transpose(&self) -> Self {
        Self {
            branches: self
                .branches
                .iter()
                .map(|b| LinearBranch {
                    region: b.region.clone(),
                    matrix: b.matrix.transpose(),
                    offset: Point2::origin(),
                })
                .collect(),
        }
    }

    pub fn to_f64(&self) -> PiecewiseLinearMap<f64> {
        PiecewiseLinearMap {
            branches: self
                .branches
                .iter()
                .map(|b| LinearBranch {
                    region: b
                        .region
                        .iter()
                        .map(|h| HalfPlane::new(h.normal().to_f64(), h.offset().to_f64()).unwrap())
                        .collect(),
                    matrix: b.matrix.to_f64(),
                    offset: b.offset.to_f64(),
                })
                .collect(),
        }
    }
}

fn agree<S: Scalar>(a: &Point2<S>, b: &Point2<S>) -> bool {
    if S::is_exact() {
        a == b
    } else {
        let d = a.to_f64().dist(&b.to_f64());
        d <= crate::scalar::TAU_GEOM * (1.0 + a.to_f64().norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, Rational};

    #[test]
    fn singular_branch_rejected() {
        let m = Mat2::<f64>::from_ints(1, 2, 2, 4);
        assert_eq!(PiecewiseLinearMap::linear(m), Err(GeometryError::SingularBranch));
    }

    #[test]
    fn restricted_domain_reports_outside() {
        let h = HalfPlane::new(Point2::new(q(1, 1), q(0, 1)), q(0, 1)).unwrap();
        let m = PiecewiseLinearMap::new(vec![LinearBranch {
            region: vec![h],
            matrix: Mat2::<Rational>::identity(),
            offset: Point2::origin(),
        }])
        .unwrap();
        assert!(m.apply(&Point2::new(q(-1, 1), q(0, 1))).is_ok());
        assert!(matches!(
            m.apply(&Point2::new(q(1, 1), q(0, 1))),
            Err(GeometryError::OutsideDomain(..))
        ));
    }

    #[test]
    fn disagreeing_branches_detected() {
        let up = HalfPlane::new(Point2::new(q(1, 1), q(-1, 1)), q(0, 1)).unwrap();
        let m = PiecewiseLinearMap::new(vec![
            LinearBranch {
                region: vec![up.clone()],
                matrix: Mat2::<Rational>::identity(),
                offset: Point2::origin(),
            },
            LinearBranch {
                region: vec![up.complement()],
                matrix: Mat2::from_ints(2, 0, 0, 1),
                offset: Point2::origin(),
            },
        ])
        .unwrap();
        assert!(matches!(
            m.apply(&Point2::new(q(1, 1), q(1, 1))),
            Err(GeometryError::BranchDisagreement(..))
        ));
        assert!(m.apply(&Point2::origin()).is_ok());
    }
}

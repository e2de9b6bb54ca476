use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::AnalysisError;
use crate::geometry::Point2;

/// Minimum number of cells in a regression stencil.
pub const MIN_STENCIL: usize = 6;
/// Largest accepted condition number of the scaled normal matrix.
pub const MAX_CONDITION: f64 = 1e6;

/// Cells used for one local fit: `(site index, centroid, area)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionStencil {
    pub center: Point2<f64>,
    pub radius: f64,
    pub members: Vec<(usize, Point2<f64>, f64)>,
}

/// Local estimate of `D²φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianEstimate {
    /// Raw Jacobian `J[k][l] = ∂T_k / ∂x_l` of the fitted affine map.
    pub jacobian: [[f64; 2]; 2],
    /// `(J + Jᵀ) / 2`.
    pub matrix: [[f64; 2]; 2],
    /// Fitted value of the map at the stencil center, a smoothed `∇φ`.
    pub gradient: [f64; 2],
    pub stencil_size: usize,
    pub condition: f64,
    /// Heteroskedasticity-robust standard error of `ρ = ∂_x v + ∂_y v`.
    pub rho_std_err: f64,
}

impl HessianEstimate {
    pub fn h11(&self) -> f64 {
        self.matrix[0][0]
    }

    pub fn h12(&self) -> f64 {
        self.matrix[0][1]
    }

    pub fn h22(&self) -> f64 {
        self.matrix[1][1]
    }

    pub fn det(&self) -> f64 {
        self.h11() * self.h22() - self.h12() * self.h12()
    }

    pub fn trace(&self) -> f64 {
        self.h11() + self.h22()
    }

    /// `ρ = φ_xx + 2 φ_xy + φ_yy`.
    pub fn rho(&self) -> f64 {
        self.h11() + 2.0 * self.h12() + self.h22()
    }

    pub fn from_matrix(m: [[f64; 2]; 2]) -> Self {
        Self {
            jacobian: m,
            matrix: [[m[0][0], 0.5 * (m[0][1] + m[1][0])], [0.5 * (m[0][1] + m[1][0]), m[1][1]]],
            gradient: [0.0, 0.0],
            stencil_size: 0,
            condition: 1.0,
            rho_std_err: 0.0,
        }
    }
}

impl RegressionStencil {
    pub fn new(center: Point2<f64>, radius: f64, members: Vec<(usize, Point2<f64>, f64)>) -> Self {
        Self { center, radius, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Weighted least-squares affine fit of `centroid -> site`, weights
    /// `area * (1 - (d / r)^2)`, in coordinates scaled by the radius.
    pub fn fit(&self, sites: &[Point2<f64>]) -> Result<HessianEstimate, AnalysisError> {
        if self.members.len() < MIN_STENCIL {
            return Err(AnalysisError::InsufficientStencil(self.members.len()));
        }
        let r = self.radius;
        let rows: Vec<(Vector3<f64>, f64, Point2<f64>)> = self
            .members
            .iter()
            .map(|&(j, c, a)| {
                let d = (c - self.center) * (1.0 / r);
                let w = a * (1.0 - d.norm_sq()).max(0.0);
                (Vector3::new(1.0, d.x, d.y), w, sites[j])
            })
            .collect();
        let mut m = Matrix3::zeros();
        let mut bx = Vector3::zeros();
        let mut by = Vector3::zeros();
        for (z, w, y) in &rows {
            m += z * z.transpose() * *w;
            bx += z * (w * y.x);
            by += z * (w * y.y);
        }
        // Normalize so the condition number is scale free.
        let total: f64 = rows.iter().map(|r| r.1).sum();
        if total <= 0.0 {
            return Err(AnalysisError::InsufficientStencil(0));
        }
        let eig = SymmetricEigen::new(m / total);
        let (lo, hi) = eig
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), &e| (l.min(e), h.max(e.abs())));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            return Err(AnalysisError::IllConditioned(condition));
        }
        let inv = m.try_inverse().ok_or(AnalysisError::IllConditioned(f64::INFINITY))?;
        let beta_x = inv * bx;
        let beta_y = inv * by;
        let jacobian = [[beta_x[1] / r, beta_x[2] / r], [beta_y[1] / r, beta_y[2] / r]];
        // Sandwich covariance of the fit of v = T_1 + T_2.
        let beta_v = beta_x + beta_y;
        let mut meat = Matrix3::zeros();
        for (z, w, y) in &rows {
            let e = (y.x + y.y) - beta_v.dot(z);
            meat += z * z.transpose() * (w * w * e * e);
        }
        let cov = inv * meat * inv;
        let a = Vector3::new(0.0, 1.0 / r, 1.0 / r);
        let rho_var = (a.transpose() * cov * a)[(0, 0)];
        let mut est = HessianEstimate::from_matrix(jacobian);
        est.gradient = [beta_x[0], beta_y[0]];
        est.stencil_size = self.members.len();
        est.condition = condition;
        est.rho_std_err = rho_var.max(0.0).sqrt();
        Ok(est)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_affine_data_is_recovered() {
        // site = A c + b with symmetric A.
        let a = [[2.0, 0.3], [0.3, 0.5]];
        let mut members = Vec::new();
        let mut sites = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                let c = Point2::new(0.02 * i as f64 - 0.04, 0.02 * j as f64 - 0.04);
                sites.push(Point2::new(a[0][0] * c.x + a[0][1] * c.y + 1.0, a[1][0] * c.x + a[1][1] * c.y - 2.0));
                members.push((sites.len() - 1, c, 1.0));
            }
        }
        let st = RegressionStencil::new(Point2::origin(), 0.1, members);
        let h = st.fit(&sites).unwrap();
        for k in 0..2 {
            for l in 0..2 {
                assert!((h.matrix[k][l] - a[k][l]).abs() < 1e-10);
            }
        }
        assert!(h.rho_std_err < 1e-8);
        assert!((h.rho() - (2.0 + 0.6 + 0.5)).abs() < 1e-10);
    }

    #[test]
    fn collinear_centroids_are_ill_conditioned() {
        let members: Vec<_> = (0..8).map(|i| (i, Point2::new(0.01 * i as f64 - 0.04, 0.0), 1.0)).collect();
        let sites: Vec<_> = (0..8).map(|i| Point2::new(i as f64, 0.0)).collect();
        let st = RegressionStencil::new(Point2::origin(), 0.1, members);
        assert!(matches!(st.fit(&sites), Err(AnalysisError::IllConditioned(_))));
    }

    #[test]
    fn algebra_of_a_known_matrix() {
        let h = HessianEstimate::from_matrix([[2.0, 0.0], [0.0, 0.5]]);
        assert_eq!(h.det(), 1.0);
        assert_eq!(h.rho(), 2.5);
        assert_eq!(h.trace(), 2.5);
    }
}

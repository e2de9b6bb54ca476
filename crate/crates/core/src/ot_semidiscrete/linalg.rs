/// Sparse symmetric matrix stored as a diagonal plus off-diagonal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSparse {
    diag: Vec<f64>,
    /// Off-diagonal entries of each row, sorted by column.
    rows: Vec<Vec<(usize, f64)>>,
}

impl SymmetricSparse {
    /// `-L` for the graph Laplacian `L` with the given edge weights. Each edge
    /// must be listed in both rows; repeated entries are summed.
    pub fn negated_laplacian(mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut diag = vec![0.0; rows.len()];
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(j, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            diag[i] = -merged.iter().map(|e| e.1).sum::<f64>();
            *row = merged;
        }
        Self { diag, rows }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map_or(0.0, |k| self.rows[i][k].1)
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.diag[i] + self.rows[i].iter().map(|e| e.1).sum::<f64>())
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.diag[i] * x[i] + self.rows[i].iter().map(|&(j, v)| v * x[j]).sum::<f64>())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Solves `(-self) x = rhs` with `x[pin] = 0`, dropping row and column
    /// `pin`. `-self` must be a connected graph Laplacian.
    pub fn solve_pinned_laplacian(&self, rhs: &[f64], pin: usize, rel_tol: f64, max_iter: usize) -> Option<Vec<f64>> {
        let n = self.dim();
        if n == 1 {
            return Some(vec![0.0]);
        }
        let apply = |x: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    if i == pin {
                        return 0.0;
                    }
                    let mut s = -self.diag[i] * x[i];
                    for &(j, v) in &self.rows[i] {
                        if j != pin {
                            s -= v * x[j];
                        }
                    }
                    s
                })
                .collect()
        };
        let precond: Vec<f64> = (0..n)
            .map(|i| if i == pin || self.diag[i] == 0.0 { 0.0 } else { -1.0 / self.diag[i] })
            .collect();
        let mut b = rhs.to_vec();
        b[pin] = 0.0;
        conjugate_gradient(apply, &b, &precond, rel_tol, max_iter)
    }
}

/// Jacobi-preconditioned conjugate gradients for an SPD operator. Returns
/// `None` if the relative residual does not reach `rel_tol`.
pub fn conjugate_gradient<F>(apply: F, b: &[f64], precond: &[f64], rel_tol: f64, max_iter: usize) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Some(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(precond).map(|(a, m)| a * m).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return None;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= rel_tol * bnorm {
            return Some(x);
        }
        z = r.iter().zip(precond).map(|(a, m)| a * m).collect();
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph_pinned_solve() {
        // Path 0-1-2 with unit weights; pin 0, demand (−2, 1, 1).
        let rows = vec![vec![(1, 1.0)], vec![(0, 1.0), (2, 1.0)], vec![(1, 1.0)]];
        let h = SymmetricSparse::negated_laplacian(rows);
        let x = h.solve_pinned_laplacian(&[-2.0, 1.0, 1.0], 0, 1e-14, 100).unwrap();
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 2.0).abs() < 1e-12);
        assert!((x[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_entries_merge() {
        let rows = vec![vec![(1, 0.5), (1, 0.25)], vec![(0, 0.75)]];
        let h = SymmetricSparse::negated_laplacian(rows);
        assert_eq!(h.get(0, 1), 0.75);
        assert_eq!(h.get(0, 0), -0.75);
        assert_eq!(h.row_sums(), vec![0.0, 0.0]);
        assert_eq!(h.mul_vec(&[1.0, 1.0]), vec![0.0, 0.0]);
    }
}

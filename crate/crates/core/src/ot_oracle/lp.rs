//! Transportation simplex on a dense cost matrix.

use std::collections::VecDeque;

use crate::scalar::Scalar;

/// Consecutive degenerate pivots after which entering and leaving choices
/// switch to Bland's rule until the next nondegenerate pivot.
const DEGENERATE_STREAK: usize = 30;

/// Basic cells `(row, col, flow)` of an optimal basis for supplies `a`,
/// demands `b` (equal totals) and row-major costs.
pub(crate) fn transport_simplex<S: Scalar>(a: &[S], b: &[S], cost: &[S]) -> Vec<(usize, usize, S)> {
    let (m, n) = (a.len(), b.len());
    debug_assert_eq!(cost.len(), m * n);
    let mut flow: Vec<S> = vec![S::zero(); m * n];
    let mut basic = vec![false; m * n];
    let mut basis: Vec<usize> = Vec::with_capacity(m + n - 1);

    // North-west corner start; on simultaneous exhaustion step down only so
    // the basis keeps m + n - 1 cells forming a spanning tree.
    let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
    let (mut i, mut j) = (0, 0);
    while i < m && j < n {
        let q = S::min_of(ra[i].clone(), rb[j].clone());
        let c = i * n + j;
        flow[c] = q.clone();
        basic[c] = true;
        basis.push(c);
        ra[i] = ra[i].clone() - q.clone();
        rb[j] = rb[j].clone() - q;
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || ra[i] <= S::zero() {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(basis.len(), m + n - 1);

    let tol = S::tolerance();
    let mut degenerate = 0usize;
    let mut pot: Vec<S> = vec![S::zero(); m + n];
    loop {
        let adj = adjacency(&basis, m, n);
        potentials(&adj, cost, &mut pot);

        let bland = degenerate >= DEGENERATE_STREAK;
        let mut entering: Option<(usize, S)> = None;
        for c in 0..m * n {
            if basic[c] {
                continue;
            }
            let (ci, cj) = (c / n, c % n);
            let r = cost[c].clone() - pot[ci].clone() - pot[m + cj].clone();
            if r < -tol.clone() {
                match &entering {
                    None => {
                        entering = Some((c, r));
                        if bland {
                            break;
                        }
                    }
                    Some((_, best)) if r < *best => entering = Some((c, r)),
                    _ => {}
                }
            }
        }
        let Some((e, _)) = entering else { break };
        let (ei, ej) = (e / n, e % n);

        // Tree path from column ej back to row ei; its edges alternate -, +.
        let path = tree_path(&adj, m + ej, ei, m + n);
        let minus: Vec<usize> = path.iter().step_by(2).copied().collect();
        let plus: Vec<usize> = path.iter().skip(1).step_by(2).copied().collect();
        let leave = *minus
            .iter()
            .min_by(|&&x, &&y| flow[x].partial_cmp(&flow[y]).expect("finite flows").then(x.cmp(&y)))
            .expect("cycle has a decreasing edge");
        let theta = flow[leave].clone();
        if theta <= tol {
            degenerate += 1;
        } else {
            degenerate = 0;
        }
        for &c in &minus {
            flow[c] = flow[c].clone() - theta.clone();
        }
        for &c in &plus {
            flow[c] = flow[c].clone() + theta.clone();
        }
        flow[e] = theta;
        flow[leave] = S::zero();
        basic[leave] = false;
        basic[e] = true;
        let pos = basis.iter().position(|&c| c == leave).expect("leaving cell is basic");
        basis[pos] = e;
    }
    basis.into_iter().map(|c| (c / n, c % n, flow[c].clone())).collect()
}

/// Adjacency of the basis tree on `m` row nodes followed by `n` column nodes;
/// each entry is `(neighbour, cell)`.
fn adjacency(basis: &[usize], m: usize, n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); m + n];
    for &c in basis {
        let (i, j) = (c / n, c % n);
        adj[i].push((m + j, c));
        adj[m + j].push((i, c));
    }
    adj
}

/// Duals with `u_0 = 0` and `u_i + v_j = c_ij` on basic cells.
fn potentials<S: Scalar>(adj: &[Vec<(usize, usize)>], cost: &[S], pot: &mut [S]) {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    pot[0] = S::zero();
    while let Some(u) = queue.pop_front() {
        for &(v, c) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                pot[v] = cost[c].clone() - pot[u].clone();
                queue.push_back(v);
            }
        }
    }
}

/// Cells on the tree path from `from` to `to`, in order.
fn tree_path(adj: &[Vec<(usize, usize)>], from: usize, to: usize, nodes: usize) -> Vec<usize> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nodes];
    let mut seen = vec![false; nodes];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for &(v, c) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some((u, c));
                queue.push_back(v);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = to;
    while cur != from {
        let (p, c) = parent[cur].expect("basis is a spanning tree");
        path.push(c);
        cur = p;
    }
    path.reverse();
    path
}

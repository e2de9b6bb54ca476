//! Static 2-d tree over a point cloud.
//!
//! Besides nearest-neighbour and radius queries the tree answers
//! `argmax_k <p, y_k> + b_k` for per-point offsets `b`, which is how a point
//! is located in a Laguerre diagram.

use crate::geometry::Point2;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
struct Node {
    lo: Point2<f64>,
    hi: Point2<f64>,
    start: usize,
    end: usize,
    /// Child node indices; `None` for leaves.
    children: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point2<f64>>,
    /// Point indices permuted so each node covers a contiguous range.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Per-node maxima of an offset vector, reusable across many queries.
#[derive(Debug, Clone)]
pub struct OffsetBounds {
    node_max: Vec<f64>,
}

impl KdTree {
    pub fn new(points: &[Point2<f64>]) -> Self {
        let mut tree = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        if !points.is_empty() {
            tree.build(0, points.len(), 0);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point2<f64>] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let (mut lo, mut hi) = (
            Point2::new(f64::INFINITY, f64::INFINITY),
            Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for &i in &self.order[start..end] {
            let p = self.points[i];
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let id = self.nodes.len();
        self.nodes.push(Node { lo, hi, start, end, children: None });
        if end - start > LEAF_SIZE {
            let axis_x = if hi.x - lo.x == hi.y - lo.y { depth.is_multiple_of(2) } else { hi.x - lo.x > hi.y - lo.y };
            let mid = (start + end) / 2;
            let pts = &self.points;
            let key = |i: &usize| if axis_x { pts[*i].x } else { pts[*i].y };
            self.order[start..end].select_nth_unstable_by(mid - start, |a, b| {
                key(a).total_cmp(&key(b)).then(a.cmp(b))
            });
            let l = self.build(start, mid, depth + 1);
            let r = self.build(mid, end, depth + 1);
            self.nodes[id].children = Some((l, r));
        }
        id
    }

    fn box_dist_sq(node: &Node, p: &Point2<f64>) -> f64 {
        let dx = (node.lo.x - p.x).max(0.0).max(p.x - node.hi.x);
        let dy = (node.lo.y - p.y).max(0.0).max(p.y - node.hi.y);
        dx * dx + dy * dy
    }

    /// The `k` nearest points to `p`, closest first (ties by index).
    pub fn knn(&self, p: &Point2<f64>, k: usize) -> Vec<usize> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        // Sorted buffer of (dist², index); k is small.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if best.len() == k && Self::box_dist_sq(node, p) > best[k - 1].0 {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    let (dl, dr) = (Self::box_dist_sq(&self.nodes[l], p), Self::box_dist_sq(&self.nodes[r], p));
                    if dl <= dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
                None => {
                    for &i in &self.order[node.start..node.end] {
                        let d = (self.points[i] - *p).norm_sq();
                        if best.len() < k || (d, i) < best[k - 1] {
                            let pos = best.partition_point(|e| *e < (d, i));
                            best.insert(pos, (d, i));
                            best.truncate(k);
                        }
                    }
                }
            }
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    pub fn nearest(&self, p: &Point2<f64>) -> Option<usize> {
        self.knn(p, 1).first().copied()
    }

    /// All indices within distance `r` of `p`, in increasing index order.
    pub fn within_radius(&self, p: &Point2<f64>, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.points.is_empty() {
            return out;
        }
        let r2 = r * r;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if Self::box_dist_sq(node, p) > r2 {
                continue;
            }
            match node.children {
                Some((l, rr)) => {
                    stack.push(l);
                    stack.push(rr);
                }
                None => out.extend(
                    self.order[node.start..node.end]
                        .iter()
                        .copied()
                        .filter(|&i| (self.points[i] - *p).norm_sq() <= r2),
                ),
            }
        }
        out.sort_unstable();
        out
    }

    /// Precomputes node maxima of `offsets` (indexed like the input points).
    pub fn offset_bounds(&self, offsets: &[f64]) -> OffsetBounds {
        assert_eq!(offsets.len(), self.points.len());
        let mut node_max = vec![f64::NEG_INFINITY; self.nodes.len()];
        // Children are always created after their parent.
        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            node_max[id] = match node.children {
                Some((l, r)) => node_max[l].max(node_max[r]),
                None => self.order[node.start..node.end]
                    .iter()
                    .map(|&i| offsets[i])
                    .fold(f64::NEG_INFINITY, f64::max),
            };
        }
        OffsetBounds { node_max }
    }

    /// `argmax_k <p, y_k> + offsets[k]` with its value; ties go to the lowest
    /// index. `bounds` must come from the same `offsets`.
    pub fn argmax_affine(&self, p: &Point2<f64>, offsets: &[f64], bounds: &OffsetBounds) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let upper = |node: &Node, id: usize| {
            let bx = if p.x >= 0.0 { node.hi.x } else { node.lo.x };
            let by = if p.y >= 0.0 { node.hi.y } else { node.lo.y };
            p.x * bx + p.y * by + bounds.node_max[id]
        };
        let mut best: Option<(usize, f64)> = None;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if let Some((_, bv)) = best {
                if upper(node, id) < bv {
                    continue;
                }
            }
            match node.children {
                Some((l, r)) => {
                    let (ul, ur) = (upper(&self.nodes[l], l), upper(&self.nodes[r], r));
                    if ul >= ur {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
                None => {
                    for &i in &self.order[node.start..node.end] {
                        let v = p.dot(&self.points[i]) + offsets[i];
                        best = match best {
                            Some((bi, bv)) if bv > v || (bv == v && bi < i) => Some((bi, bv)),
                            _ => Some((i, v)),
                        };
                    }
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<Point2<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn knn_matches_brute_force() {
        let pts = cloud(500, 1);
        let tree = KdTree::new(&pts);
        let q = Point2::new(0.1, -0.3);
        let mut brute: Vec<usize> = (0..pts.len()).collect();
        brute.sort_by(|&a, &b| (pts[a] - q).norm_sq().total_cmp(&(pts[b] - q).norm_sq()));
        assert_eq!(tree.knn(&q, 12), brute[..12].to_vec());
    }

    #[test]
    fn radius_query_matches_brute_force() {
        let pts = cloud(400, 2);
        let tree = KdTree::new(&pts);
        let q = Point2::new(-0.2, 0.4);
        let brute: Vec<usize> = (0..pts.len()).filter(|&i| pts[i].dist(&q) <= 0.3).collect();
        assert_eq!(tree.within_radius(&q, 0.3), brute);
    }

    #[test]
    fn argmax_matches_brute_force() {
        let pts = cloud(1000, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let offsets: Vec<f64> = (0..pts.len()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let tree = KdTree::new(&pts);
        let bounds = tree.offset_bounds(&offsets);
        for q in cloud(200, 5) {
            let brute = (0..pts.len())
                .map(|i| (i, q.dot(&pts[i]) + offsets[i]))
                .fold((usize::MAX, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
            let got = tree.argmax_affine(&q, &offsets, &bounds).unwrap();
            assert_eq!(got.0, brute.0);
            assert_eq!(got.1, brute.1);
        }
    }

    #[test]
    fn empty_tree_answers_nothing() {
        let tree = KdTree::new(&[]);
        assert!(tree.knn(&Point2::origin(), 3).is_empty());
        assert!(tree.nearest(&Point2::origin()).is_none());
    }
}

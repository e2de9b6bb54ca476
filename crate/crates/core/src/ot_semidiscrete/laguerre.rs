//! Laguerre (power) cells of a weighted site set restricted to a convex domain.
//!
//! Cell `j` is `{x : |x - y_j|^2 - w_j <= |x - y_k|^2 - w_k for all k}`, which
//! is `{x : <x, y_j> - c_j / 2 >= <x, y_k> - c_k / 2}` with `c = |y|^2 - w`.
//! Each cell is built by clipping the domain against a candidate set and then
//! certified: every vertex is located with an exact max-affine query and any
//! site that beats `j` there is added as a constraint, until no vertex is
//! claimed by another site. By convexity the certified polygon is the cell.

use rayon::prelude::*;

use crate::geometry::{ConvexPolygon, Point2};
use crate::scalar::MIN_POLYGON_AREA;
use crate::spatial::{KdTree, OffsetBounds};

/// Candidate neighbours seeded from the site cloud when no hint is given.
const SEED_NEIGHBOURS: usize = 12;
/// Relative slack in the clip and certification predicates.
const CLIP_EPS: f64 = 1e-14;
const CERTIFY_EPS: f64 = 1e-13;
const CERTIFY_ROUNDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EdgeLabel {
    Boundary,
    Site(usize),
}

/// Vertex loop where `labels[i]` names the constraint supporting edge `i -> i+1`.
#[derive(Debug, Clone)]
struct LabeledLoop {
    pts: Vec<Point2<f64>>,
    labels: Vec<EdgeLabel>,
}

impl LabeledLoop {
    fn from_polygon(poly: &ConvexPolygon<f64>) -> Self {
        Self {
            pts: poly.vertices().to_vec(),
            labels: vec![EdgeLabel::Boundary; poly.len()],
        }
    }

    fn area(&self) -> f64 {
        let n = self.pts.len();
        let mut s = 0.0;
        for i in 0..n {
            s += self.pts[i].cross(&self.pts[(i + 1) % n]);
        }
        0.5 * s
    }

    /// Clips by `<normal, x> <= offset`, labelling the new edge `label`.
    /// Returns `false` when nothing of positive area remains.
    fn clip(&mut self, normal: Point2<f64>, offset: f64, label: EdgeLabel) -> bool {
        let n = self.pts.len();
        let tol = CLIP_EPS * (normal.norm() + offset.abs());
        let exc: Vec<f64> = self.pts.iter().map(|p| p.dot(&normal) - offset).collect();
        if exc.iter().all(|&e| e <= tol) {
            return true;
        }
        if exc.iter().all(|&e| e >= -tol) {
            return false;
        }
        // -1 inside, 0 on the line, 1 outside.
        let state = |e: f64| if e > tol { 1 } else if e < -tol { -1 } else { 0 };
        let mut pts = Vec::with_capacity(n + 2);
        let mut labels = Vec::with_capacity(n + 2);
        for i in 0..n {
            let j = (i + 1) % n;
            let (si, sj) = (state(exc[i]), state(exc[j]));
            if si <= 0 {
                pts.push(self.pts[i]);
                labels.push(if sj == 1 && si == 0 { label } else { self.labels[i] });
                if si == -1 && sj == 1 {
                    pts.push(intersect(self.pts[i], self.pts[j], exc[i], exc[j]));
                    labels.push(label);
                }
            } else if sj == -1 {
                pts.push(intersect(self.pts[i], self.pts[j], exc[i], exc[j]));
                labels.push(self.labels[i]);
            }
        }
        self.pts = pts;
        self.labels = labels;
        self.drop_short_edges();
        self.pts.len() >= 3 && self.area() >= MIN_POLYGON_AREA
    }

    fn drop_short_edges(&mut self) {
        let mut i = 0;
        while self.pts.len() >= 3 && i < self.pts.len() {
            let j = (i + 1) % self.pts.len();
            if self.pts[i].dist(&self.pts[j]) <= 1e-15 {
                // Zero-length edge i -> j: keep j and its outgoing label.
                self.pts.remove(i);
                self.labels.remove(i);
            } else {
                i += 1;
            }
        }
    }
}

fn intersect(p: Point2<f64>, q: Point2<f64>, ep: f64, eq: f64) -> Point2<f64> {
    let t = ep / (ep - eq);
    p + (q - p) * t
}

/// Edge shared with another site's cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Facet {
    pub site: usize,
    pub length: f64,
}

/// Geometry of one cell; `polygon` is `None` for an empty cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub polygon: Option<ConvexPolygon<f64>>,
    pub area: f64,
    pub facets: Vec<Facet>,
}

impl CellGeometry {
    fn empty() -> Self {
        Self { polygon: None, area: 0.0, facets: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.polygon.is_none()
    }
}

/// Reusable cell builder for a fixed domain and site set.
#[derive(Debug, Clone)]
pub struct LaguerreBuilder {
    domain: ConvexPolygon<f64>,
    tree: KdTree,
}

impl LaguerreBuilder {
    pub fn new(domain: ConvexPolygon<f64>, sites: &[Point2<f64>]) -> Self {
        Self { domain, tree: KdTree::new(sites) }
    }

    pub fn domain(&self) -> &ConvexPolygon<f64> {
        &self.domain
    }

    pub fn sites(&self) -> &[Point2<f64>] {
        self.tree.points()
    }

    pub fn tree(&self) -> &KdTree {
        &self.tree
    }

    /// Offsets `-c_j / 2` of the max-affine form of the diagram.
    pub fn offsets(&self, weights: &[f64]) -> Vec<f64> {
        self.sites()
            .iter()
            .zip(weights)
            .map(|(y, w)| -0.5 * (y.norm_sq() - w))
            .collect()
    }

    /// All cells, optionally seeding candidates with each cell's previous
    /// neighbours.
    pub fn cells(&self, weights: &[f64], hints: Option<&[CellGeometry]>) -> Vec<CellGeometry> {
        assert_eq!(weights.len(), self.sites().len());
        let offsets = self.offsets(weights);
        let bounds = self.tree.offset_bounds(&offsets);
        (0..self.sites().len())
            .into_par_iter()
            .map(|j| {
                let hint = hints.map(|h| h[j].facets.iter().map(|f| f.site).collect::<Vec<_>>());
                self.cell(j, &offsets, &bounds, hint)
            })
            .collect()
    }

    fn cell(&self, j: usize, offsets: &[f64], bounds: &OffsetBounds, hint: Option<Vec<usize>>) -> CellGeometry {
        let sites = self.sites();
        if sites.len() == 1 {
            let poly = self.domain.clone();
            return CellGeometry { area: poly.area(), polygon: Some(poly), facets: Vec::new() };
        }
        let yj = sites[j];
        let mut candidates = match hint {
            Some(h) if !h.is_empty() => h,
            _ => self.tree.knn(&yj, SEED_NEIGHBOURS + 1),
        };
        candidates.retain(|&k| k != j);
        let mut shape = LabeledLoop::from_polygon(&self.domain);
        let mut applied: Vec<usize> = Vec::new();
        for _ in 0..CERTIFY_ROUNDS {
            for &k in &candidates {
                if applied.contains(&k) {
                    continue;
                }
                applied.push(k);
                let normal = sites[k] - yj;
                let offset = offsets[j] - offsets[k];
                if !shape.clip(normal, offset, EdgeLabel::Site(k)) {
                    return CellGeometry::empty();
                }
            }
            candidates.clear();
            for v in &shape.pts {
                let own = v.dot(&yj) + offsets[j];
                if let Some((k, val)) = self.tree.argmax_affine(v, offsets, bounds) {
                    if k != j && val > own + CERTIFY_EPS * (1.0 + own.abs()) && !applied.contains(&k)
                        && !candidates.contains(&k) {
                            candidates.push(k);
                        }
                }
            }
            if candidates.is_empty() {
                break;
            }
        }
        let area = shape.area();
        let mut facets: Vec<Facet> = Vec::new();
        let n = shape.pts.len();
        for i in 0..n {
            if let EdgeLabel::Site(k) = shape.labels[i] {
                let len = shape.pts[i].dist(&shape.pts[(i + 1) % n]);
                match facets.iter_mut().find(|f| f.site == k) {
                    Some(f) => f.length += len,
                    None => facets.push(Facet { site: k, length: len }),
                }
            }
        }
        facets.sort_by_key(|f| f.site);
        CellGeometry {
            polygon: Some(ConvexPolygon::from_ccw_unchecked(shape.pts)),
            area,
            facets,
        }
    }
}

/// Laguerre cells of `sites` with `weights`, intersected with `domain`.
pub fn laguerre_cells(
    domain: &ConvexPolygon<f64>,
    sites: &[Point2<f64>],
    weights: &[f64],
) -> Vec<Option<ConvexPolygon<f64>>> {
    LaguerreBuilder::new(domain.clone(), sites)
        .cells(weights, None)
        .into_iter()
        .map(|c| c.polygon)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::kite;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> ConvexPolygon<f64> {
        ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    /// Power-cell membership by brute force over all sites.
    fn owner(x: &Point2<f64>, sites: &[Point2<f64>], w: &[f64]) -> usize {
        (0..sites.len())
            .min_by(|&a, &b| {
                let pa = (*x - sites[a]).norm_sq() - w[a];
                let pb = (*x - sites[b]).norm_sq() - w[b];
                pa.total_cmp(&pb)
            })
            .unwrap()
    }

    #[test]
    fn equal_weights_split_by_bisector() {
        let sites = [Point2::new(0.25, 0.5), Point2::new(0.75, 0.5)];
        let b = LaguerreBuilder::new(unit_square(), &sites);
        let cells = b.cells(&[0.0, 0.0], None);
        assert!((cells[0].area - 0.5).abs() < 1e-15);
        assert!((cells[1].area - 0.5).abs() < 1e-15);
        assert_eq!(cells[0].facets, vec![Facet { site: 1, length: 1.0 }]);
        for v in cells[0].polygon.as_ref().unwrap().vertices() {
            assert!(v.x <= 0.5 + 1e-15);
        }
    }

    #[test]
    fn raising_a_weight_grows_that_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sites: Vec<_> = (0..40).map(|_| Point2::new(rng.gen(), rng.gen())).collect();
        let w = vec![0.0; 40];
        let b = LaguerreBuilder::new(unit_square(), &sites);
        let before = b.cells(&w, None);
        let mut w2 = w.clone();
        w2[7] += 0.01;
        let after = b.cells(&w2, None);
        assert!(after[7].area > before[7].area);
        for k in 0..40 {
            if k != 7 {
                assert!(after[k].area <= before[k].area + 1e-15);
            }
        }
    }

    #[test]
    fn cells_agree_with_brute_force_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let omega = kite::omega::<f64>();
        let sites: Vec<_> = (0..200).map(|_| Point2::new(rng.gen_range(-0.5..0.8), rng.gen_range(-0.5..0.8))).collect();
        let w: Vec<f64> = (0..200).map(|_| rng.gen_range(-0.05..0.05)).collect();
        let cells = LaguerreBuilder::new(omega.clone(), &sites).cells(&w, None);
        let total: f64 = cells.iter().map(|c| c.area).sum();
        assert!((total - 1.0 / 3.0).abs() < 1e-12);
        for (j, c) in cells.iter().enumerate() {
            if let Some(p) = &c.polygon {
                let cen = p.centroid();
                assert_eq!(owner(&cen, &sites, &w), j);
            }
        }
        // Facet lengths agree from both sides.
        for (j, c) in cells.iter().enumerate() {
            for f in &c.facets {
                let back = cells[f.site].facets.iter().find(|g| g.site == j).map_or(0.0, |g| g.length);
                assert!((back - f.length).abs() < 1e-10, "{j} {} {} {}", f.site, f.length, back);
            }
        }
    }

    #[test]
    fn hints_do_not_change_the_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let sites: Vec<_> = (0..100).map(|_| Point2::new(rng.gen(), rng.gen())).collect();
        let b = LaguerreBuilder::new(unit_square(), &sites);
        let w0 = vec![0.0; 100];
        let first = b.cells(&w0, None);
        let w1: Vec<f64> = (0..100).map(|_| rng.gen_range(-0.01..0.01)).collect();
        let cold = b.cells(&w1, None);
        let warm = b.cells(&w1, Some(&first));
        for (a, c) in cold.iter().zip(&warm) {
            assert!((a.area - c.area).abs() < 1e-14);
        }
    }

    #[test]
    fn dominated_site_has_empty_cell() {
        let sites = [Point2::new(0.5, 0.5), Point2::new(0.6, 0.5)];
        let cells = LaguerreBuilder::new(unit_square(), &sites).cells(&[10.0, 0.0], None);
        assert!(cells[1].is_empty());
        assert!((cells[0].area - 1.0).abs() < 1e-15);
    }
}

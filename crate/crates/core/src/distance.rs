//! Curve lengths, geodesics, and graph distance fields `d(x₀, ·)`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::domain::{normalize3, sub, BoxGrid, DiscreteDomain, DomainKind, IcoMesh};
use crate::error::{Error, Result};
use crate::metric::FinslerMetric;

/// Neighborhood used to build the shortest-path graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// Primitive lattice offsets with max-norm ≤ 2 (16 neighbors in 2D).
    Box16,
    /// Triangle edges plus the opposite-vertex diagonal across each edge.
    MeshOneRing,
}

/// Forward distances from one source node.
#[derive(Debug, Clone)]
pub struct DistanceField {
    domain: Arc<DiscreteDomain>,
    pub source: usize,
    pub values: Vec<f64>,
    pub stencil: Stencil,
    /// Nodes with no path from the source (their value is `+∞`).
    pub unreachable: Vec<usize>,
}

impl DistanceField {
    pub fn domain(&self) -> &Arc<DiscreteDomain> {
        &self.domain
    }

    pub fn max_finite(&self) -> f64 {
        self.values.iter().cloned().filter(|v| v.is_finite()).fold(0.0, f64::max)
    }
}

/// Midpoint-rule length `Σ F(midpoint, Δx)` of a polyline.
pub fn curve_length(metric: &FinslerMetric, polyline: &[Vec<f64>]) -> Result<f64> {
    if polyline.len() < 2 {
        return Err(Error::InvalidInput("a polyline needs at least two points".into()));
    }
    let n = metric.dim();
    let mut total = 0.0;
    for w in polyline.windows(2) {
        if w[0].len() != n || w[1].len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: w[0].len().min(w[1].len()) });
        }
        let mid: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect();
        let d: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| b - a).collect();
        if d.iter().all(|v| *v == 0.0) {
            continue;
        }
        total += metric.eval(&mid, &d)?;
    }
    Ok(total)
}

/// Spray coefficients `G^i = ¼ g^{il}([F²]_{x^k y^l} y^k − [F²]_{x^l})`, with
/// x-derivatives by central differences.
pub fn geodesic_spray(metric: &FinslerMetric, x: &[f64], y: &[f64]) -> Result<DVector<f64>> {
    let n = metric.dim();
    if x.len() != n || y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len().min(y.len()) });
    }
    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidInput("spray needs a nonzero vector".into()));
    }
    if metric.is_translation_invariant() {
        return Ok(DVector::zeros(n));
    }
    let yv = DVector::from_column_slice(y);
    let g = metric.fundamental_matrix(x, y);
    let g_inv =
        g.try_inverse().ok_or_else(|| Error::InvalidMetric(format!("singular fundamental tensor at x = {x:?}")))?;
    let h = 1e-5 * x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut xp = x.to_vec();
    // mixed[l][k] = ∂_{x^k} [F²]_{y^l}, with [F²]_y = 2 g y
    let mut mixed = DMatrix::zeros(n, n);
    let mut grad = DVector::zeros(n);
    for k in 0..n {
        xp[k] = x[k] + h;
        let fy_plus = metric.fundamental_matrix(&xp, y) * &yv * 2.0;
        let f2_plus = metric.value(&xp, y).powi(2);
        xp[k] = x[k] - h;
        let fy_minus = metric.fundamental_matrix(&xp, y) * &yv * 2.0;
        let f2_minus = metric.value(&xp, y).powi(2);
        xp[k] = x[k];
        mixed.set_column(k, &((fy_plus - fy_minus) / (2.0 * h)));
        grad[k] = (f2_plus - f2_minus) / (2.0 * h);
    }
    Ok(g_inv * (mixed * yv - grad) * 0.25)
}

/// Sampled solution of `ẍ + 2G(x, ẋ) = 0`.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub dt: f64,
    /// Set when integration stopped before `T` (left the bounds or hit a
    /// degenerate tensor).
    pub truncated: bool,
}

/// Classical RK4 on the spray equation over `[0, T]`.
pub fn integrate_geodesic(metric: &FinslerMetric, x0: &[f64], v0: &[f64], t: f64, dt: f64) -> Result<GeodesicPath> {
    integrate_geodesic_within(metric, x0, v0, t, dt, None)
}

/// As [`integrate_geodesic`], stopping (flagged) when the path leaves `grid`.
pub fn integrate_geodesic_within(
    metric: &FinslerMetric,
    x0: &[f64],
    v0: &[f64],
    t: f64,
    dt: f64,
    grid: Option<&BoxGrid>,
) -> Result<GeodesicPath> {
    if !(t > 0.0) || !(dt > 0.0) || dt > t / 100.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("need 0 < dt <= T/100, got dt = {dt}, T = {t}")));
    }
    let n = metric.dim();
    if x0.len() != n || v0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.len().min(v0.len()) });
    }
    let inside = |x: &[f64]| match grid {
        Some(g) => x.iter().enumerate().all(|(k, v)| *v >= g.lower[k] && *v <= g.upper[k]),
        None => x.iter().all(|v| v.is_finite()),
    };
    let accel = |x: &[f64], v: &[f64]| -> Result<Vec<f64>> {
        Ok(geodesic_spray(metric, x, v)?.iter().map(|g| -2.0 * g).collect())
    };
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };

    let steps = (t / dt).round() as usize;
    let mut points = vec![x0.to_vec()];
    let mut velocities = vec![v0.to_vec()];
    let mut truncated = !inside(x0);
    let (mut x, mut v) = (x0.to_vec(), v0.to_vec());
    for _ in 0..steps {
        if truncated {
            break;
        }
        let step = (|| -> Result<(Vec<f64>, Vec<f64>)> {
            let k1x = v.clone();
            let k1v = accel(&x, &v)?;
            let x2 = axpy(&x, 0.5 * dt, &k1x);
            let v2 = axpy(&v, 0.5 * dt, &k1v);
            let k2v = accel(&x2, &v2)?;
            let x3 = axpy(&x, 0.5 * dt, &v2);
            let v3 = axpy(&v, 0.5 * dt, &k2v);
            let k3v = accel(&x3, &v3)?;
            let x4 = axpy(&x, dt, &v3);
            let v4 = axpy(&v, dt, &k3v);
            let k4v = accel(&x4, &v4)?;
            let nx = (0..n).map(|i| x[i] + dt / 6.0 * (k1x[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i])).collect();
            let nv = (0..n).map(|i| v[i] + dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])).collect();
            Ok((nx, nv))
        })();
        match step {
            Ok((nx, nv)) if inside(&nx) => {
                x = nx;
                v = nv;
                points.push(x.clone());
                velocities.push(v.clone());
            }
            Ok(_) | Err(Error::InvalidMetric(_)) => truncated = true,
            Err(e) => return Err(e),
        }
    }
    Ok(GeodesicPath { points, velocities, dt, truncated })
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Primitive integer offsets with max-norm ≤ 2 (nearest neighbours only in 1D).
pub fn box_stencil(dim: usize) -> Vec<Vec<i64>> {
    let reach: i64 = if dim == 1 { 1 } else { 2 };
    let side = (2 * reach + 1) as usize;
    let mut out = Vec::new();
    for code in 0..side.pow(dim as u32) {
        let mut c = code;
        let off: Vec<i64> = (0..dim)
            .map(|_| {
                let v = (c % side) as i64 - reach;
                c /= side;
                v
            })
            .collect();
        let g = off.iter().fold(0, |acc, v| gcd(acc, *v));
        if g == 1 {
            out.push(off);
        }
    }
    out
}

fn box_adjacency(metric: &FinslerMetric, grid: &BoxGrid) -> Vec<Vec<(usize, f64)>> {
    let stencil = box_stencil(grid.dim());
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let multi = grid.multi_index(idx);
            let p = grid.coord(idx);
            let mut out = Vec::with_capacity(stencil.len());
            'offsets: for off in &stencil {
                let mut target = multi.clone();
                for k in 0..off.len() {
                    let t = multi[k] as i64 + off[k];
                    if t < 0 || t >= grid.nodes[k] as i64 {
                        continue 'offsets;
                    }
                    target[k] = t as usize;
                }
                let j = grid.index(&target);
                let q = grid.coord(j);
                let mid: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
                let d: Vec<f64> = p.iter().zip(&q).map(|(a, b)| b - a).collect();
                out.push((j, metric.value(&mid, &d)));
            }
            out
        })
        .collect()
}

fn mesh_adjacency(metric: &FinslerMetric, mesh: &IcoMesh) -> Vec<Vec<(usize, f64)>> {
    let mut opposite: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for tri in &mesh.triangles {
        for k in 0..3 {
            let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            opposite.entry((a.min(b), a.max(b))).or_default().push(c);
        }
    }
    let mut neighbors = vec![Vec::new(); mesh.vertices.len()];
    for ((a, b), opp) in &opposite {
        neighbors[*a].push(*b);
        neighbors[*b].push(*a);
        if let [c, d] = opp[..] {
            neighbors[c].push(d);
            neighbors[d].push(c);
        }
    }
    neighbors
        .into_par_iter()
        .enumerate()
        .map(|(i, mut nb)| {
            nb.sort_unstable();
            nb.dedup();
            let p = mesh.vertices[i];
            nb.into_iter()
                .map(|j| {
                    let q = mesh.vertices[j];
                    let mid = normalize3([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])]);
                    (j, metric.value(&mid, &sub(q, p)))
                })
                .collect()
        })
        .collect()
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over the directed graph with edge weights `F(midpoint, q − p)`.
pub fn distance_field(metric: &FinslerMetric, domain: Arc<DiscreteDomain>, source: usize) -> Result<DistanceField> {
    if metric.dim() != domain.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: domain.ambient_dim(), got: metric.dim() });
    }
    let n = domain.node_count();
    if source >= n {
        return Err(Error::InvalidInput(format!("source node {source} out of range (n = {n})")));
    }
    let (adjacency, stencil) = match domain.kind() {
        DomainKind::BoxChart(g) => (box_adjacency(metric, g), Stencil::Box16),
        DomainKind::IcoSphere(m) => (mesh_adjacency(metric, m), Stencil::MeshOneRing),
    };
    if let Some((i, _)) =
        adjacency.iter().enumerate().find(|(_, nb)| nb.iter().any(|(_, w)| !(*w >= 0.0) || !w.is_finite()))
    {
        return Err(Error::InvalidMetric(format!("non-finite or negative edge weight at node {i}")));
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, i)) = heap.pop() {
        if done[i] {
            continue;
        }
        done[i] = true;
        for &(j, w) in &adjacency[i] {
            let nd = d + w;
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Entry(nd, j));
            }
        }
    }
    let unreachable = (0..n).filter(|&i| !dist[i].is_finite()).collect();
    Ok(DistanceField { domain, source, values: dist, stencil, unreachable })
}

/// Forward ball `{x : d(x₀, x) < r}`.
pub fn forward_ball_mask(dist: &DistanceField, r: f64) -> Vec<bool> {
    dist.values.iter().map(|d| *d < r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_box_chart, build_icosphere};
    use nalgebra::{DMatrix, DVector};
    use std::f64::consts::PI;

    fn randers(b: f64) -> FinslerMetric {
        FinslerMetric::randers_constant(DMatrix::identity(2, 2), DVector::from_vec(vec![b, 0.0])).unwrap()
    }

    #[test]
    fn segment_lengths() {
        let e = FinslerMetric::euclidean(2).unwrap();
        let l = curve_length(&e, &[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert!((l - 5.0).abs() < 1e-12);
        let refined = curve_length(&e, &[vec![0.0, 0.0], vec![1.5, 2.0], vec![1.5, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!((refined - 5.0).abs() < 1e-12);
        let r = randers(0.3);
        assert!((curve_length(&r, &[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap() - 1.3).abs() < 1e-12);
        assert!((curve_length(&r, &[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap() - 0.7).abs() < 1e-12);
        assert!(curve_length(&e, &[vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn stencil_sizes() {
        assert_eq!(box_stencil(1).len(), 2);
        assert_eq!(box_stencil(2).len(), 16);
    }

    #[test]
    fn spray_vanishes_for_minkowski() {
        let r = randers(0.4);
        assert_eq!(geodesic_spray(&r, &[0.3, 0.1], &[1.0, 2.0]).unwrap().norm(), 0.0);
    }

    #[test]
    fn euclidean_geodesic_is_straight() {
        let e = FinslerMetric::euclidean(2).unwrap();
        let path = integrate_geodesic(&e, &[0.0, 0.0], &[1.0, 0.0], 1.0, 0.01).unwrap();
        let last = path.points.last().unwrap();
        assert!((last[0] - 1.0).abs() < 1e-12 && last[1].abs() < 1e-12);
        assert!(!path.truncated);
    }

    fn stereographic() -> FinslerMetric {
        FinslerMetric::riemannian(2, |x: &[f64]| {
            let s = 4.0 / (1.0 + x[0] * x[0] + x[1] * x[1]).powi(2);
            DMatrix::identity(2, 2) * s
        })
        .unwrap()
    }

    #[test]
    fn sphere_geodesic_closes_with_constant_speed() {
        let g = stereographic();
        let path = integrate_geodesic(&g, &[1.0, 0.0], &[0.0, 1.0], 2.0 * PI, 2.0 * PI / 2000.0).unwrap();
        let last = path.points.last().unwrap();
        assert!(((last[0] - 1.0).powi(2) + last[1].powi(2)).sqrt() < 1e-3);
        let speeds: Vec<f64> = path.points.iter().zip(&path.velocities).map(|(x, v)| g.value(x, v)).collect();
        let drift = speeds.iter().map(|s| (s - speeds[0]).abs()).fold(0.0, f64::max) / speeds[0];
        assert!(drift < 1e-6, "drift {drift}");
        // every sample stays on the image of the equator
        assert!(path.points.iter().all(|p| ((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 1e-3));
    }

    #[test]
    fn oblique_great_circle_returns() {
        let g = stereographic();
        let path = integrate_geodesic(&g, &[0.5, 0.0], &[0.0, 1.0], 2.0 * PI / 1.6, 2.0 * PI / 1.6 / 2000.0).unwrap();
        let last = path.points.last().unwrap();
        assert!(((last[0] - 0.5).powi(2) + last[1].powi(2)).sqrt() < 1e-3, "{last:?}");
    }

    #[test]
    fn truncation_is_flagged() {
        let e = FinslerMetric::euclidean(2).unwrap();
        let d = build_box_chart(&[0.0, 0.0], &[1.0, 1.0], &[3, 3]).unwrap();
        let path = integrate_geodesic_within(&e, &[0.5, 0.5], &[1.0, 0.0], 2.0, 0.01, d.as_box()).unwrap();
        assert!(path.truncated);
        assert!(path.points.iter().all(|p| p[0] <= 1.0));
        assert!(integrate_geodesic(&e, &[0.0, 0.0], &[1.0, 0.0], 1.0, 0.5).is_err());
    }

    #[test]
    fn euclidean_distance_and_balls() {
        let d = Arc::new(build_box_chart(&[0.0, 0.0], &[1.0, 1.0], &[51, 51]).unwrap());
        let e = FinslerMetric::euclidean(2).unwrap();
        let field = distance_field(&e, d.clone(), 0).unwrap();
        let target = d.as_box().unwrap().nearest(&[0.6, 0.8]).unwrap();
        assert!((field.values[target] - 1.0).abs() < 0.03);
        assert!(field.unreachable.is_empty());
        assert!(forward_ball_mask(&field, 0.0).iter().all(|m| !m));
        assert!(forward_ball_mask(&field, 10.0).iter().all(|m| *m));
        let ball = forward_ball_mask(&field, 0.5);
        for i in 0..d.node_count() {
            let p = d.point(i);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if (r - 0.5).abs() > 0.03 {
                assert_eq!(ball[i], r < 0.5);
            }
        }
    }

    #[test]
    fn sphere_distances_are_close_to_great_circle() {
        let d = Arc::new(build_icosphere(4).unwrap());
        let e = FinslerMetric::euclidean(3).unwrap();
        let field = distance_field(&e, d.clone(), 0).unwrap();
        let p0 = d.point(0);
        let mut worst: f64 = 0.0;
        for i in 0..d.node_count() {
            let p = d.point(i);
            let angle = (p0[0] * p[0] + p0[1] * p[1] + p0[2] * p[2]).clamp(-1.0, 1.0).acos();
            if angle > 0.5 {
                worst = worst.max((field.values[i] - angle).abs() / angle);
            }
        }
        assert!(worst < 0.1, "{worst}");
    }
}

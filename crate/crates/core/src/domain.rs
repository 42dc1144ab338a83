//! Discrete domains: uniform box charts in `R^n` and icospheres discretizing `S²`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

pub const MAX_ICOSPHERE_LEVEL: usize = 7;

/// Uniform tensor-product grid. Node `(i_0, …, i_{n-1})` has linear index
/// `Σ i_k · stride_k` with axis 0 fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGrid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nodes: Vec<usize>,
    pub spacing: Vec<f64>,
    strides: Vec<usize>,
}

impl BoxGrid {
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for (k, n) in self.nodes.iter().enumerate() {
            out[k] = idx % n;
            idx /= n;
        }
        out
    }

    pub fn coord_along(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.nodes[axis] {
            self.upper[axis]
        } else {
            self.lower[axis] + i as f64 * self.spacing[axis]
        }
    }

    pub fn coord(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).iter().enumerate().map(|(k, &i)| self.coord_along(k, i)).collect()
    }

    /// Index of the node nearest to `x` (clamped to the grid).
    pub fn nearest(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let multi: Vec<usize> = (0..self.dim())
            .map(|k| {
                let t = ((x[k] - self.lower[k]) / self.spacing[k]).round();
                t.clamp(0.0, (self.nodes[k] - 1) as f64) as usize
            })
            .collect();
        Ok(self.index(&multi))
    }

    /// Second-order first derivative along `axis`: central in the interior,
    /// three-point one-sided at the faces.
    pub fn derivative(&self, values: &[f64], axis: usize) -> Vec<f64> {
        let n = self.nodes[axis];
        let s = self.strides[axis];
        let h = self.spacing[axis];
        let mut out = vec![0.0; values.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let i = (idx / s) % n;
            *o = if i == 0 {
                (-3.0 * values[idx] + 4.0 * values[idx + s] - values[idx + 2 * s]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * values[idx] - 4.0 * values[idx - s] + values[idx - 2 * s]) / (2.0 * h)
            } else {
                (values[idx + s] - values[idx - s]) / (2.0 * h)
            };
        }
        out
    }

    /// Product trapezoid weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                self.multi_index(idx)
                    .iter()
                    .enumerate()
                    .map(
                        |(k, &i)| {
                            if i == 0 || i + 1 == self.nodes[k] {
                                0.5 * self.spacing[k]
                            } else {
                                self.spacing[k]
                            }
                        },
                    )
                    .product()
            })
            .collect()
    }

    pub fn cell_measure(&self) -> f64 {
        self.spacing.iter().product()
    }
}

/// Triangulated unit sphere with per-vertex orthonormal tangent frames.
#[derive(Debug, Clone, PartialEq)]
pub struct IcoMesh {
    pub level: usize,
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    /// `frames[v] = [e1, e2]` with `e1 × e2 = vertices[v]`.
    pub frames: Vec<[[f64; 3]; 2]>,
}

impl IcoMesh {
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * norm3(cross(sub(b, a), sub(c, a)))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn mean_edge_length(&self) -> f64 {
        let mut total = 0.0;
        for tri in &self.triangles {
            for k in 0..3 {
                total += norm3(sub(self.vertices[tri[k]], self.vertices[tri[(k + 1) % 3]]));
            }
        }
        total / (3 * self.triangles.len()) as f64
    }

    /// Undirected edges `(a, b)` with `a < b`, in first-seen order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if seen.insert(key, ()).is_none() {
                    out.push(key);
                }
            }
        }
        out
    }

    fn lumped_areas(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.vertices.len()];
        for t in 0..self.triangles.len() {
            let a = self.triangle_area(t) / 3.0;
            for &v in &self.triangles[t] {
                w[v] += a;
            }
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    BoxChart(BoxGrid),
    IcoSphere(IcoMesh),
}

#[derive(Debug, Clone)]
pub struct DiscreteDomain {
    id: u64,
    kind: DomainKind,
    boundary: Vec<bool>,
    weights: Vec<f64>,
}

impl DiscreteDomain {
    /// Identity used to detect fields from different domains. Clones share it.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn as_box(&self) -> Option<&BoxGrid> {
        match &self.kind {
            DomainKind::BoxChart(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_sphere(&self) -> Option<&IcoMesh> {
        match &self.kind {
            DomainKind::IcoSphere(m) => Some(m),
            _ => None,
        }
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    /// Intrinsic (chart) dimension.
    pub fn chart_dim(&self) -> usize {
        match &self.kind {
            DomainKind::BoxChart(g) => g.dim(),
            DomainKind::IcoSphere(_) => 2,
        }
    }

    /// Dimension of the coordinates returned by [`DiscreteDomain::point`].
    pub fn ambient_dim(&self) -> usize {
        match &self.kind {
            DomainKind::BoxChart(g) => g.dim(),
            DomainKind::IcoSphere(_) => 3,
        }
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        match &self.kind {
            DomainKind::BoxChart(g) => g.coord(node),
            DomainKind::IcoSphere(m) => m.vertices[node].to_vec(),
        }
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    /// True for domains without boundary.
    pub fn is_closed(&self) -> bool {
        matches!(self.kind, DomainKind::IcoSphere(_))
    }

    /// Per-node Euclidean cell measure (trapezoid on boxes, lumped area on spheres).
    pub fn quadrature_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Characteristic node spacing: the largest grid step, or the mean edge length.
    pub fn spacing_scale(&self) -> f64 {
        match &self.kind {
            DomainKind::BoxChart(g) => g.spacing.iter().cloned().fold(0.0, f64::max),
            DomainKind::IcoSphere(m) => m.mean_edge_length(),
        }
    }
}

pub fn build_box_chart(lower: &[f64], upper: &[f64], nodes: &[usize]) -> Result<DiscreteDomain> {
    let n = lower.len();
    if n == 0 || upper.len() != n || nodes.len() != n {
        return Err(Error::InvalidInput(format!(
            "box chart dimensions disagree: lower {}, upper {}, nodes {}",
            lower.len(),
            upper.len(),
            nodes.len()
        )));
    }
    for k in 0..n {
        if !(upper[k] > lower[k]) || !lower[k].is_finite() || !upper[k].is_finite() {
            return Err(Error::InvalidInput(format!("degenerate box along axis {k}")));
        }
        if nodes[k] < 3 {
            return Err(Error::InvalidInput(format!("axis {k} has {} < 3 nodes", nodes[k])));
        }
    }
    let spacing: Vec<f64> = (0..n).map(|k| (upper[k] - lower[k]) / (nodes[k] - 1) as f64).collect();
    let mut strides = vec![1; n];
    for k in 1..n {
        strides[k] = strides[k - 1] * nodes[k - 1];
    }
    let grid = BoxGrid { lower: lower.to_vec(), upper: upper.to_vec(), nodes: nodes.to_vec(), spacing, strides };
    let boundary = (0..grid.len())
        .map(|idx| grid.multi_index(idx).iter().zip(&grid.nodes).any(|(&i, &m)| i == 0 || i + 1 == m))
        .collect();
    let weights = grid.trapezoid_weights();
    Ok(DiscreteDomain {
        id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
        kind: DomainKind::BoxChart(grid),
        boundary,
        weights,
    })
}

/// Fixed rotation applied to the base icosahedron. It keeps every vertex (at
/// all supported levels) off the plane `x₃ = 0` while preserving the mesh's
/// central symmetry.
fn base_rotation() -> [[f64; 3]; 3] {
    let axis = [1.0 / 14f64.sqrt(), 2.0 / 14f64.sqrt(), 3.0 / 14f64.sqrt()];
    let (s, c) = 0.3f64.sin_cos();
    let [x, y, z] = axis;
    let t = 1.0 - c;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

/// The 12 vertex directions of the (rotated) base icosahedron.
pub fn icosahedron_directions() -> Vec<[f64; 3]> {
    base_icosahedron().0
}

fn base_icosahedron() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let rot = base_rotation();
    let vertices = raw
        .iter()
        .map(|v| {
            let u = normalize3(*v);
            let r = [dot3(rot[0], u), dot3(rot[1], u), dot3(rot[2], u)];
            normalize3(r)
        })
        .collect();
    let triangles = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (vertices, triangles)
}

pub fn build_icosphere(level: usize) -> Result<DiscreteDomain> {
    if level > MAX_ICOSPHERE_LEVEL {
        return Err(Error::InvalidInput(format!("icosphere level {level} > {MAX_ICOSPHERE_LEVEL}")));
    }
    let (mut vertices, mut triangles) = base_icosahedron();
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(normalize3([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0]));
                verts.len() - 1
            })
        };
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    for tri in triangles.iter_mut() {
        let [a, b, c] = tri.map(|v| vertices[v]);
        if dot3(cross(sub(b, a), sub(c, a)), a) < 0.0 {
            tri.swap(1, 2);
        }
    }
    let frames = vertices.iter().map(|&p| tangent_frame(p)).collect();
    let mesh = IcoMesh { level, vertices, triangles, frames };
    let weights = mesh.lumped_areas();
    let boundary = vec![false; mesh.vertices.len()];
    Ok(DiscreteDomain {
        id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
        kind: DomainKind::IcoSphere(mesh),
        boundary,
        weights,
    })
}

/// Gram–Schmidt of a fixed reference axis against the position vector.
pub fn tangent_frame(p: [f64; 3]) -> [[f64; 3]; 2] {
    let reference = if p[2].abs() > 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
    let d = dot3(reference, p);
    let e1 = normalize3([reference[0] - d * p[0], reference[1] - d * p[1], reference[2] - d * p[2]]);
    let e2 = cross(p, e1);
    [e1, e2]
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

pub(crate) fn normalize3(a: [f64; 3]) -> [f64; 3] {
    let n = norm3(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

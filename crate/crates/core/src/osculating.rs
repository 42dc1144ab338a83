//! Per-node osculating data (Busemann density, `K^{ij}`, its inverse, and the
//! Christoffel symbols of `K_ij`) and `dv_F`-weighted integration.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::domain::{DiscreteDomain, DomainKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::indicatrix::{frame_moments, indicatrix_moments_with, MomentResult};
use crate::metric::FinslerMetric;
use crate::quadrature::{SphereQuadrature, SphereRule};

/// `Γ^k_{ij}` at one node, stored as `data[k·n² + i·n + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim * dim] }
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let n = self.dim;
        self.data[(k * n + i) * n + j] = v;
    }
}

/// Osculating data at every node of a domain. On icospheres, matrices are in the
/// per-vertex tangent-frame coordinates.
#[derive(Debug, Clone)]
pub struct OsculatingField {
    domain: Arc<DiscreteDomain>,
    pub sigma: Vec<f64>,
    pub k_upper: Vec<DMatrix<f64>>,
    pub k_lower: Vec<DMatrix<f64>>,
    pub christoffels: Option<Vec<Christoffel>>,
}

impl OsculatingField {
    pub fn domain(&self) -> &Arc<DiscreteDomain> {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    fn from_moments(domain: Arc<DiscreteDomain>, moments: Vec<MomentResult>) -> Result<Self> {
        let mut sigma = Vec::with_capacity(moments.len());
        let mut k_upper = Vec::with_capacity(moments.len());
        let mut k_lower = Vec::with_capacity(moments.len());
        for (i, m) in moments.into_iter().enumerate() {
            let k = m.osculating();
            let inv = k
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::InvalidMetric(format!("singular osculating metric at node {i}")))?;
            sigma.push(m.density());
            k_upper.push(k);
            k_lower.push(inv);
        }
        Ok(Self { domain, sigma, k_upper, k_lower, christoffels: None })
    }

    /// Exact data for a Riemannian metric `g`: `K^{ij} = g^{-1}`, `σ = sqrt(det g)`.
    /// On icospheres `g` is an ambient 3×3 field restricted to the tangent frames.
    pub fn from_riemannian<G>(domain: Arc<DiscreteDomain>, g: G) -> Result<Self>
    where
        G: Fn(&[f64]) -> DMatrix<f64>,
    {
        let n = domain.node_count();
        let mut sigma = Vec::with_capacity(n);
        let mut k_upper = Vec::with_capacity(n);
        let mut k_lower = Vec::with_capacity(n);
        for i in 0..n {
            let p = domain.point(i);
            let gm = g(&p);
            let local = match domain.kind() {
                DomainKind::BoxChart(_) => gm,
                DomainKind::IcoSphere(mesh) => {
                    let e = frame_matrix(&mesh.frames[i]);
                    e.transpose() * gm * e
                }
            };
            let inv =
                local.clone().try_inverse().ok_or_else(|| Error::InvalidMetric(format!("singular g at node {i}")))?;
            sigma.push(local.determinant().sqrt());
            k_upper.push(inv);
            k_lower.push(local);
        }
        Ok(Self { domain, sigma, k_upper, k_lower, christoffels: None })
    }

    /// Computes and stores the Christoffel symbols.
    pub fn with_christoffels(mut self) -> Result<Self> {
        self.christoffels = Some(christoffels_of_k(&self)?);
        Ok(self)
    }

    /// `vol_F(M)`.
    pub fn total_volume(&self) -> f64 {
        self.sigma.iter().zip(self.domain.quadrature_weights()).map(|(s, w)| s * w).sum()
    }

    /// Per-node `σ_F · cell measure`.
    pub fn measure(&self) -> Vec<f64> {
        self.sigma.iter().zip(self.domain.quadrature_weights()).map(|(s, w)| s * w).collect()
    }
}

/// `[e1 e2]` as a 3×2 matrix.
pub(crate) fn frame_matrix(frame: &[[f64; 3]; 2]) -> DMatrix<f64> {
    DMatrix::from_fn(3, 2, |r, c| frame[c][r])
}

/// Runs the indicatrix quadrature at every node. Minkowski metrics on box charts
/// are evaluated once and replicated.
pub fn osculating_field(
    metric: &FinslerMetric,
    domain: Arc<DiscreteDomain>,
    sphere_nodes: usize,
) -> Result<OsculatingField> {
    if sphere_nodes < crate::indicatrix::MIN_SPHERE_NODES {
        return Err(Error::InvalidInput(format!("sphere_nodes = {sphere_nodes} too small")));
    }
    if metric.dim() != domain.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: domain.ambient_dim(), got: metric.dim() });
    }
    let n = domain.node_count();
    let moments: Vec<MomentResult> = match domain.kind() {
        DomainKind::BoxChart(grid) => {
            let quad = SphereQuadrature::new(grid.dim(), sphere_nodes, SphereRule::Product)?;
            if metric.is_translation_invariant() {
                let m = indicatrix_moments_with(metric, &grid.coord(0), &quad)?;
                vec![m; n]
            } else {
                (0..n)
                    .into_par_iter()
                    .map(|i| indicatrix_moments_with(metric, &grid.coord(i), &quad))
                    .collect::<Result<_>>()?
            }
        }
        DomainKind::IcoSphere(mesh) => {
            let quad = SphereQuadrature::new(2, sphere_nodes, SphereRule::Product)?;
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let frame: Vec<Vec<f64>> = mesh.frames[i].iter().map(|e| e.to_vec()).collect();
                    frame_moments(metric, &mesh.vertices[i], &frame, &quad)
                })
                .collect::<Result<_>>()?
        }
    };
    OsculatingField::from_moments(domain, moments)
}

/// `Γ^k_{ij} = ½ K^{kl}(∂_i K_{lj} + ∂_j K_{li} − ∂_l K_{ij})` by second-order
/// differences of `K_ij` on box charts.
pub fn christoffels_of_k(osc: &OsculatingField) -> Result<Vec<Christoffel>> {
    let grid = match osc.domain.kind() {
        DomainKind::BoxChart(g) => g,
        DomainKind::IcoSphere(_) => {
            return Err(Error::Unsupported(
                "coordinate Christoffel symbols on icospheres (tangent frames are not coordinate frames)".into(),
            ))
        }
    };
    let n = grid.dim();
    let count = osc.len();
    // dk[a][i*n + j] = ∂_a K_ij at every node
    let mut dk = vec![vec![Vec::new(); n * n]; n];
    for i in 0..n {
        for j in 0..n {
            let comp: Vec<f64> = osc.k_lower.iter().map(|m| m[(i, j)]).collect();
            if comp.iter().all(|v| *v == comp[0]) {
                for dka in dk.iter_mut() {
                    dka[i * n + j] = vec![0.0; count];
                }
                continue;
            }
            for (a, dka) in dk.iter_mut().enumerate() {
                dka[i * n + j] = grid.derivative(&comp, a);
            }
        }
    }
    Ok((0..count)
        .map(|node| {
            let ku = &osc.k_upper[node];
            let mut c = Christoffel::zeros(n);
            for k in 0..n {
                for i in 0..n {
                    for j in 0..=i {
                        let mut s = 0.0;
                        for l in 0..n {
                            let t = dk[i][l * n + j][node] + dk[j][l * n + i][node] - dk[l][i * n + j][node];
                            s += ku[(k, l)] * t;
                        }
                        c.set(k, i, j, 0.5 * s);
                        c.set(k, j, i, 0.5 * s);
                    }
                }
            }
            c
        })
        .collect())
}

/// `∫ field dv_F ≈ Σ field·σ_F·cell measure`.
pub fn integrate(field: &ScalarField, osc: &OsculatingField) -> Result<f64> {
    field.ensure_domain(&osc.domain)?;
    Ok(weighted_sum(field.values(), osc))
}

pub(crate) fn weighted_sum(values: &[f64], osc: &OsculatingField) -> f64 {
    values.iter().zip(&osc.sigma).zip(osc.domain.quadrature_weights()).map(|((v, s), w)| v * s * w).sum()
}

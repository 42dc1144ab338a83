//! `L^p` and `H_k^p` norms weighted by `dv_F`, with covariant derivatives taken
//! in the osculating metric.

use nalgebra::DMatrix;

use crate::domain::{cross, dot3, norm3, sub, DomainKind, IcoMesh};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::osculating::{weighted_sum, OsculatingField};

/// Per-order terms `‖∇^l φ‖_p`, `l = 0..=k`, and both norm variants.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevReport {
    pub p: f64,
    pub k: usize,
    pub terms: Vec<f64>,
    /// `Σ_l ‖∇^l φ‖_p`
    pub total: f64,
    /// `(Σ_l ‖∇^l φ‖_p^p)^{1/p}`
    pub total_variant: f64,
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidInput(format!("p = {p} must be a finite real >= 1")));
    }
    Ok(())
}

/// `(Σ |v|^p σ_F w)^{1/p}` over raw node values.
pub fn lp_norm_values(values: &[f64], osc: &OsculatingField, p: f64) -> Result<f64> {
    lp_norm_masked(values, osc, p, None)
}

/// As [`lp_norm_values`], restricted to nodes where `mask` is true.
pub fn lp_norm_masked(values: &[f64], osc: &OsculatingField, p: f64, mask: Option<&[bool]>) -> Result<f64> {
    check_p(p)?;
    if values.len() != osc.len() || mask.is_some_and(|m| m.len() != osc.len()) {
        return Err(Error::DimensionMismatch { expected: osc.len(), got: values.len() });
    }
    let keep = |i: usize| mask.is_none_or(|m| m[i]);
    let scale = (0..values.len()).filter(|&i| keep(i)).fold(0.0_f64, |m, i| m.max(values[i].abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let powered: Vec<f64> =
        (0..values.len()).map(|i| if keep(i) { (values[i].abs() / scale).powf(p) } else { 0.0 }).collect();
    Ok(scale * weighted_sum(&powered, osc).powf(1.0 / p))
}

pub fn lp_norm(field: &ScalarField, osc: &OsculatingField, p: f64) -> Result<f64> {
    field.ensure_domain(osc.domain())?;
    lp_norm_values(field.values(), osc, p)
}

/// Coordinate partial derivatives `∂_i φ` at every node (tangent-frame
/// components on icospheres).
pub fn partials(values: &[f64], osc: &OsculatingField) -> Vec<Vec<f64>> {
    match osc.domain().kind() {
        DomainKind::BoxChart(g) => (0..g.dim()).map(|a| g.derivative(values, a)).collect(),
        DomainKind::IcoSphere(mesh) => mesh_partials(values, mesh),
    }
}

/// Area-weighted average of per-triangle linear gradients, projected on the
/// vertex frames.
fn mesh_partials(values: &[f64], mesh: &IcoMesh) -> Vec<Vec<f64>> {
    let nv = mesh.vertices.len();
    let mut acc = vec![[0.0; 3]; nv];
    let mut area = vec![0.0; nv];
    for tri in &mesh.triangles {
        let [a, b, c] = tri.map(|i| mesh.vertices[i]);
        let n = cross(sub(b, a), sub(c, a));
        let twice = norm3(n);
        let nn = n.map(|v| v / twice);
        let mut g = [0.0; 3];
        for k in 0..3 {
            let (i, j, l) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let edge = sub(mesh.vertices[l], mesh.vertices[j]);
            let grad_lambda = cross(nn, edge).map(|v| v / twice);
            for d in 0..3 {
                g[d] += values[i] * grad_lambda[d];
            }
        }
        let t_area = 0.5 * twice;
        for &v in tri {
            for d in 0..3 {
                acc[v][d] += t_area * g[d];
            }
            area[v] += t_area;
        }
    }
    let mut out = vec![vec![0.0; nv]; 2];
    for v in 0..nv {
        let g = acc[v].map(|x| x / area[v]);
        for (k, e) in mesh.frames[v].iter().enumerate() {
            out[k][v] = dot3(g, *e);
        }
    }
    out
}

pub(crate) fn gradient_values(values: &[f64], osc: &OsculatingField) -> Vec<f64> {
    let d = partials(values, osc);
    let n = d.len();
    (0..values.len())
        .map(|node| {
            let k = &osc.k_upper[node];
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += k[(i, j)] * d[i][node] * d[j][node];
                }
            }
            s.max(0.0).sqrt()
        })
        .collect()
}

/// `|∇φ| = sqrt(K^{ij} ∂_iφ ∂_jφ)`.
pub fn gradient_magnitude(field: &ScalarField, osc: &OsculatingField) -> Result<ScalarField> {
    field.ensure_domain(osc.domain())?;
    ScalarField::new(field.domain().clone(), gradient_values(field.values(), osc))
}

fn hessian_values(values: &[f64], osc: &OsculatingField) -> Result<Vec<f64>> {
    let grid = match osc.domain().kind() {
        DomainKind::BoxChart(g) => g,
        DomainKind::IcoSphere(_) => {
            return Err(Error::Unsupported("second covariant derivatives on icospheres".into()))
        }
    };
    let gamma = osc
        .christoffels
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("Christoffel symbols have not been computed".into()))?;
    let n = grid.dim();
    let d: Vec<Vec<f64>> = (0..n).map(|a| grid.derivative(values, a)).collect();
    let dd: Vec<Vec<Vec<f64>>> = d.iter().map(|di| (0..n).map(|b| grid.derivative(di, b)).collect()).collect();
    Ok((0..values.len())
        .map(|node| {
            let h = DMatrix::from_fn(n, n, |i, j| {
                let mut v = 0.5 * (dd[i][j][node] + dd[j][i][node]);
                for (k, dk) in d.iter().enumerate() {
                    v -= gamma[node].get(k, i, j) * dk[node];
                }
                v
            });
            let kh = &osc.k_upper[node] * h;
            (&kh * &kh).trace().max(0.0).sqrt()
        })
        .collect())
}

/// `|∇²φ| = sqrt(K^{ia}K^{jb} ∇²_{ij}φ ∇²_{ab}φ)` with `∇²_{ij}φ = ∂_i∂_jφ − Γ^k_{ij}∂_kφ`.
pub fn hessian_magnitude(field: &ScalarField, osc: &OsculatingField) -> Result<ScalarField> {
    field.ensure_domain(osc.domain())?;
    ScalarField::new(field.domain().clone(), hessian_values(field.values(), osc)?)
}

/// Builds a report from already computed per-order terms.
pub fn report_from_terms(terms: Vec<f64>, p: f64) -> SobolevReport {
    let k = terms.len() - 1;
    let total: f64 = terms.iter().sum();
    let t_max = terms.iter().cloned().fold(0.0, f64::max);
    let total_variant = if p == 1.0 {
        total
    } else if t_max == 0.0 {
        0.0
    } else {
        let s: f64 = terms.iter().map(|t| (t / t_max).powf(p)).sum();
        (t_max * s.powf(1.0 / p)).min(total)
    };
    SobolevReport { p, k, terms, total, total_variant }
}

/// `H_k^p` norm terms over raw node values.
pub fn hkp_norm_values(values: &[f64], osc: &OsculatingField, k: usize, p: f64) -> Result<SobolevReport> {
    hkp_norm_masked(values, osc, k, p, None)
}

/// `H_k^p` norm over the nodes selected by `mask`. Derivatives still use the
/// full grid, so values just outside the mask must be meaningful.
pub fn hkp_norm_masked(
    values: &[f64],
    osc: &OsculatingField,
    k: usize,
    p: f64,
    mask: Option<&[bool]>,
) -> Result<SobolevReport> {
    check_p(p)?;
    if k > 2 {
        return Err(Error::Unsupported(format!("derivative order k = {k} (at most 2)")));
    }
    let mut terms = vec![lp_norm_masked(values, osc, p, mask)?];
    if k >= 1 {
        terms.push(lp_norm_masked(&gradient_values(values, osc), osc, p, mask)?);
    }
    if k == 2 {
        terms.push(lp_norm_masked(&hessian_values(values, osc)?, osc, p, mask)?);
    }
    Ok(report_from_terms(terms, p))
}

pub fn hkp_norm(field: &ScalarField, osc: &OsculatingField, k: usize, p: f64) -> Result<SobolevReport> {
    field.ensure_domain(osc.domain())?;
    hkp_norm_values(field.values(), osc, k, p)
}

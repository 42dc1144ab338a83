//! The weak problem `Δu = f` on closed discrete surfaces, with the
//! divergence-form operator of `(K, dv_F)` and piecewise-linear elements.

use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::density::{approximate_interior, ApproximationReport, InteriorParams};
use crate::domain::{cross, dot3, norm3, normalize3, sub, DomainKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::metric::FinslerMetric;
use crate::osculating::{frame_matrix, weighted_sum, OsculatingField};
use crate::partition::bump_profile;
use crate::sparse::{conjugate_gradient, dot, CsrMatrix};

/// Number of random bump test functions used for the weak identity.
pub const TEST_FUNCTIONS: usize = 10;

/// `∫ f dv_F` on a closed domain.
pub fn compatibility_check(f: &ScalarField, osc: &OsculatingField) -> Result<f64> {
    f.ensure_domain(osc.domain())?;
    if !osc.domain().is_closed() {
        return Err(Error::Unsupported("compatibility needs a domain without boundary".into()));
    }
    Ok(weighted_sum(f.values(), osc))
}

/// Symmetric stiffness matrix of `a(u, v) = ∫ K^{ij} ∂_i u ∂_j v dv_F` for
/// linear elements. Each triangle uses the vertex average of the ambient
/// tensors `E K Eᵀ` projected on its own plane, and the average of `σ_F`.
pub fn assemble_weak_laplacian(osc: &OsculatingField) -> Result<CsrMatrix> {
    let mesh = match osc.domain().kind() {
        DomainKind::IcoSphere(m) => m,
        DomainKind::BoxChart(_) => {
            return Err(Error::Unsupported("the weak Laplacian is assembled on closed surfaces only".into()))
        }
    };
    let ambient: Vec<Matrix3<f64>> = (0..mesh.vertices.len())
        .map(|v| {
            let e = frame_matrix(&mesh.frames[v]);
            let m: DMatrix<f64> = &e * &osc.k_upper[v] * e.transpose();
            Matrix3::from_fn(|r, c| m[(r, c)])
        })
        .collect();
    let local: Vec<[[f64; 3]; 3]> = mesh
        .triangles
        .par_iter()
        .map(|tri| {
            let [a, b, c] = tri.map(|i| mesh.vertices[i]);
            let n = cross(sub(b, a), sub(c, a));
            let twice = norm3(n);
            let nn = n.map(|x| x / twice);
            let t1 = normalize3(sub(b, a));
            let t2 = cross(nn, t1);
            let k_bar = (ambient[tri[0]] + ambient[tri[1]] + ambient[tri[2]]) / 3.0;
            let sigma = (osc.sigma[tri[0]] + osc.sigma[tri[1]] + osc.sigma[tri[2]]) / 3.0;
            let proj = |u: [f64; 3], v: [f64; 3]| {
                let (u, v) = (nalgebra::Vector3::from(u), nalgebra::Vector3::from(v));
                u.dot(&(k_bar * v))
            };
            let kt = [[proj(t1, t1), proj(t1, t2)], [proj(t2, t1), proj(t2, t2)]];
            let grads: Vec<[f64; 2]> = (0..3)
                .map(|k| {
                    let edge = sub(mesh.vertices[tri[(k + 2) % 3]], mesh.vertices[tri[(k + 1) % 3]]);
                    let g = cross(nn, edge).map(|x| x / twice);
                    [dot3(g, t1), dot3(g, t2)]
                })
                .collect();
            let scale = 0.5 * twice * sigma;
            let mut out = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let mut s = 0.0;
                    for p in 0..2 {
                        for q in 0..2 {
                            s += grads[i][p] * kt[p][q] * grads[j][q];
                        }
                    }
                    out[i][j] = scale * s;
                }
            }
            // exact symmetry
            for i in 0..3 {
                for j in 0..i {
                    let m = 0.5 * (out[i][j] + out[j][i]);
                    out[i][j] = m;
                    out[j][i] = m;
                }
            }
            out
        })
        .collect();
    let mut triplets = Vec::with_capacity(9 * local.len());
    for (tri, m) in mesh.triangles.iter().zip(&local) {
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((tri[i], tri[j], m[i][j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.vertices.len(), &triplets))
}

#[derive(Debug, Clone)]
pub struct WeakProblem {
    pub osc: OsculatingField,
    pub f: ScalarField,
    /// Exponent used when reporting norms of the solution.
    pub p: f64,
    /// Seed for the random test functions.
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Solution normalized to `∫ u dv_F = 0`.
    pub u: ScalarField,
    /// `|∫ u Δχ dv_F − ∫ f χ dv_F| / (‖f‖₂ ‖χ‖₂)` for each test function.
    pub weak_residuals: Vec<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// `|∫ f dv_F| / ∫ |f| dv_F` before solving.
    pub compatibility: f64,
    /// `|a(u, u) + ∫ f u dv_F| / |a(u, u)|`
    pub energy_residual: f64,
    /// `∫ u dv_F / ∫ |u| dv_F`
    pub mean: f64,
}

/// Random bumps `χ = exp(−1/(1 − (θ/r)²))` around random centres.
pub fn bump_test_functions(osc: &OsculatingField, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let domain = osc.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let center = loop {
                let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let n = norm3(v);
                if n > 0.1 && n <= 1.0 {
                    break v.map(|x| x / n);
                }
            };
            let radius = rng.random_range(0.5..1.2);
            (0..domain.node_count())
                .map(|i| {
                    let p = domain.point(i);
                    let angle = dot3(center, [p[0], p[1], p[2]]).clamp(-1.0, 1.0).acos();
                    bump_profile(angle / radius)
                })
                .collect()
        })
        .collect()
}

/// Solves `a(u, v) = −∫ f v dv_F` on the mean-zero subspace with lumped mass.
pub fn solve_dirichlet(problem: &WeakProblem, tol: f64) -> Result<SolveReport> {
    let osc = &problem.osc;
    let f = &problem.f;
    let integral = compatibility_check(f, osc)?;
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let scale = weighted_sum(&abs, osc);
    let compatibility = if scale > 0.0 { integral.abs() / scale } else { 0.0 };
    if compatibility >= 1e-8 {
        return Err(Error::Compatibility(compatibility));
    }
    let a = assemble_weak_laplacian(osc)?;
    let mass = osc.measure();
    let n = mass.len();
    let mut b: Vec<f64> = f.values().iter().zip(&mass).map(|(f, m)| -f * m).collect();
    let mean_b = b.iter().sum::<f64>() / n as f64;
    b.iter_mut().for_each(|x| *x -= mean_b);
    let out = conjugate_gradient(&a, &b, tol, 20 * n, true);
    let total_mass: f64 = mass.iter().sum();
    let shift = dot(&out.x, &mass) / total_mass;
    let u: Vec<f64> = out.x.iter().map(|x| x - shift).collect();

    let mf: Vec<f64> = f.values().iter().zip(&mass).map(|(f, m)| f * m).collect();
    let f_norm = dot(&mf, f.values()).sqrt();
    let weak_residuals = bump_test_functions(osc, TEST_FUNCTIONS, problem.seed)
        .iter()
        .map(|chi| {
            // ∫ u Δ_h χ dv_F with Δ_h χ = −M⁻¹ A χ
            let lhs = -a.quadratic_form(&u, chi);
            let rhs = dot(&mf, chi);
            let chi_norm = chi.iter().zip(&mass).map(|(c, m)| c * c * m).sum::<f64>().sqrt();
            let denom = f_norm * chi_norm;
            if denom > 0.0 {
                (lhs - rhs).abs() / denom
            } else {
                (lhs - rhs).abs()
            }
        })
        .collect();
    let energy = a.quadratic_form(&u, &u);
    let fu = dot(&mf, &u);
    let energy_residual = if energy > 0.0 { (energy + fu).abs() / energy } else { fu.abs() };
    let u_abs: f64 = u.iter().zip(&mass).map(|(u, m)| u.abs() * m).sum();
    let mean = if u_abs > 0.0 { dot(&u, &mass) / u_abs } else { 0.0 };
    Ok(SolveReport {
        u: ScalarField::new(f.domain().clone(), u)?,
        weak_residuals,
        iterations: out.iterations,
        final_residual: out.relative_residual,
        converged: out.converged,
        compatibility,
        energy_residual,
        mean,
    })
}

/// `sign(x₃)` on the nodes of a surface.
pub fn sign_x3(osc: &OsculatingField) -> Result<ScalarField> {
    ScalarField::from_fn(osc.domain().clone(), |x| {
        if x[2] > 0.0 {
            1.0
        } else if x[2] < 0.0 {
            -1.0
        } else {
            0.0
        }
    })
}

/// Axisymmetric solution of `Δu = sign(x₃)` on the round sphere in the polar
/// angle `θ`, before mean removal (its mean over the sphere is `ln 2`).
pub fn sign_x3_solution(theta: f64) -> f64 {
    if theta <= std::f64::consts::FRAC_PI_2 {
        -2.0 * (theta / 2.0).cos().ln()
    } else {
        2.0 * (theta / 2.0).sin().ln() + 2.0 * std::f64::consts::LN_2
    }
}

/// Runs the interior density pipeline on the mean-zero solution. On a compact
/// surface the cutoff is inactive once `j` exceeds the diameter, so the
/// mollification stage does the work.
pub fn smooth_approximate_solution(
    report: &SolveReport,
    metric: &FinslerMetric,
    osc: &OsculatingField,
    params: &InteriorParams,
) -> Result<ApproximationReport> {
    let u = &report.u;
    u.ensure_domain(osc.domain())?;
    let mass = osc.measure();
    let shift = dot(u.values(), &mass) / mass.iter().sum::<f64>();
    let centered = u.replace_values(u.values().iter().map(|v| v - shift).collect())?;
    approximate_interior(&centered, metric, osc, 0, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_icosphere;
    use crate::osculating::osculating_field;
    use std::sync::Arc;

    fn round(level: usize) -> OsculatingField {
        let d = Arc::new(build_icosphere(level).unwrap());
        OsculatingField::from_riemannian(d, |_| DMatrix::identity(3, 3)).unwrap()
    }

    #[test]
    fn compatibility_examples() {
        let osc = round(4);
        let s = sign_x3(&osc).unwrap();
        assert!(compatibility_check(&s, &osc).unwrap().abs() < 1e-10);
        let one = ScalarField::constant(osc.domain().clone(), 1.0).unwrap();
        let area = compatibility_check(&one, &osc).unwrap();
        assert!((area - 4.0 * std::f64::consts::PI).abs() < 0.02 * area);
        let g = ScalarField::from_fn(osc.domain().clone(), |x| x[0] * x[0] + 0.3 * x[1]).unwrap();
        let mean = compatibility_check(&g, &osc).unwrap() / area;
        let centered = g.replace_values(g.values().iter().map(|v| v - mean).collect()).unwrap();
        assert!(compatibility_check(&centered, &osc).unwrap().abs() < 1e-12);
    }

    #[test]
    fn operator_structure() {
        let osc = round(3);
        let a = assemble_weak_laplacian(&osc).unwrap();
        assert_eq!(a.max_asymmetry(), 0.0);
        let ones = vec![1.0; a.n];
        assert!(a.mul_vec(&ones).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn degree_one_eigenvalue() {
        let osc = round(5);
        let a = assemble_weak_laplacian(&osc).unwrap();
        let z: Vec<f64> = (0..a.n).map(|i| osc.domain().point(i)[2]).collect();
        let m = osc.measure();
        let rayleigh = a.quadratic_form(&z, &z) / z.iter().zip(&m).map(|(z, m)| z * z * m).sum::<f64>();
        assert!((rayleigh - 2.0).abs() < 0.04, "{rayleigh}");
    }

    #[test]
    fn zero_source_and_refusal() {
        let osc = round(3);
        let zero = ScalarField::constant(osc.domain().clone(), 0.0).unwrap();
        let r = solve_dirichlet(&WeakProblem { osc: osc.clone(), f: zero, p: 2.0, seed: 1 }, 1e-10).unwrap();
        assert!(r.u.max_abs() == 0.0);
        let area = osc.total_volume();
        let biased = ScalarField::constant(osc.domain().clone(), 0.1 / area).unwrap();
        assert!(matches!(
            solve_dirichlet(&WeakProblem { osc, f: biased, p: 2.0, seed: 1 }, 1e-10),
            Err(Error::Compatibility(_))
        ));
    }

    #[test]
    fn oracle_mean_is_ln2() {
        let mean =
            crate::quadrature::integrate_interval(|t| sign_x3_solution(t) * t.sin(), 0.0, std::f64::consts::PI, 64, 16)
                / 2.0;
        assert!((mean - std::f64::consts::LN_2).abs() < 1e-12, "{mean}");
    }

    #[test]
    fn riemannian_and_osculating_operators_agree() {
        let d = Arc::new(build_icosphere(2).unwrap());
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5]);
        let exact = OsculatingField::from_riemannian(d.clone(), |_| g.clone()).unwrap();
        let metric = FinslerMetric::riemannian_constant(g.clone()).unwrap();
        let numeric = osculating_field(&metric, d, 2048).unwrap();
        let (a, b) = (assemble_weak_laplacian(&exact).unwrap(), assemble_weak_laplacian(&numeric).unwrap());
        let worst = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let scale = a.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(worst / scale < 1e-5, "{}", worst / scale);
    }
}

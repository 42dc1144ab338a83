//! Moments of the indicatrix `I_x = {y : F(x, y) ≤ 1}`: Busemann density and the
//! osculating Riemannian metric.
//!
//! For a positively 1-homogeneous `F` the radial integral is exact:
//!
//! ```text
//! vol(I)  = 1/n     ∫_{S^{n-1}} F(ω)^{-n}     dσ(ω)
//! ∫_I yyᵀ = 1/(n+2) ∫_{S^{n-1}} ωωᵀ F(ω)^{-(n+2)} dσ(ω)
//! ```
//!
//! so only a quadrature on the unit sphere is needed.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::metric::FinslerMetric;
use crate::quadrature::{sample_directions, unit_ball_volume, SphereQuadrature, SphereRule};

pub const DEFAULT_SPHERE_NODES: usize = 2048;
pub const MIN_SPHERE_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentResult {
    /// Lebesgue measure of the indicatrix in tangent coordinates.
    pub volume: f64,
    /// `M^{ij} = ∫_I yⁱyʲ dy`.
    pub second_moments: DMatrix<f64>,
    pub node_count: usize,
}

impl MomentResult {
    pub fn dim(&self) -> usize {
        self.second_moments.nrows()
    }

    /// `σ_F = vol(Bⁿ(1)) / vol(I)`.
    pub fn density(&self) -> f64 {
        unit_ball_volume(self.dim()) / self.volume
    }

    /// `K^{ij} = (n+2) M^{ij} / vol(I)`.
    pub fn osculating(&self) -> DMatrix<f64> {
        &self.second_moments * ((self.dim() as f64 + 2.0) / self.volume)
    }
}

/// Moments of the unit ball of a norm on `R^n` given as a closure.
pub fn norm_moments<N>(mut norm: N, quad: &SphereQuadrature) -> Result<MomentResult>
where
    N: FnMut(&[f64]) -> f64,
{
    let n = quad.dim;
    let nf = n as f64;
    let mut vol = 0.0;
    let mut m = DMatrix::zeros(n, n);
    for (w, wt) in quad.nodes.iter().zip(&quad.weights) {
        let f = norm(w);
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::InvalidMetric(format!("F = {f} at sphere node {w:?}")));
        }
        let fi = f.recip();
        let fn_ = fi.powi(n as i32);
        vol += wt * fn_;
        let c = wt * fn_ * fi * fi;
        for i in 0..n {
            for j in 0..=i {
                m[(i, j)] += c * w[i] * w[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            m[(j, i)] = m[(i, j)];
        }
    }
    Ok(MomentResult { volume: vol / nf, second_moments: m / (nf + 2.0), node_count: quad.len() })
}

fn quadrature_for(dim: usize, sphere_nodes: usize) -> Result<SphereQuadrature> {
    if sphere_nodes < MIN_SPHERE_NODES {
        return Err(Error::InvalidInput(format!("sphere_nodes = {sphere_nodes} < {MIN_SPHERE_NODES}")));
    }
    SphereQuadrature::new(dim, sphere_nodes, SphereRule::Product)
}

pub fn indicatrix_moments(metric: &FinslerMetric, x: &[f64], sphere_nodes: usize) -> Result<MomentResult> {
    let quad = quadrature_for(metric.dim(), sphere_nodes)?;
    indicatrix_moments_with(metric, x, &quad)
}

pub fn indicatrix_moments_with(metric: &FinslerMetric, x: &[f64], quad: &SphereQuadrature) -> Result<MomentResult> {
    if x.len() != metric.dim() {
        return Err(Error::DimensionMismatch { expected: metric.dim(), got: x.len() });
    }
    if quad.dim != metric.dim() {
        return Err(Error::DimensionMismatch { expected: metric.dim(), got: quad.dim });
    }
    norm_moments(|w| metric.value(x, w), quad)
}

/// Moments of the indicatrix of `F(x, ·)` restricted to the span of `frame`, in
/// the frame's coordinates. Used for tangent planes of embedded surfaces.
pub fn frame_moments(
    metric: &FinslerMetric,
    x: &[f64],
    frame: &[Vec<f64>],
    quad: &SphereQuadrature,
) -> Result<MomentResult> {
    if quad.dim != frame.len() {
        return Err(Error::DimensionMismatch { expected: frame.len(), got: quad.dim });
    }
    let n = metric.dim();
    let mut v = vec![0.0; n];
    norm_moments(
        |w| {
            v.iter_mut().for_each(|c| *c = 0.0);
            for (wa, e) in w.iter().zip(frame) {
                for (c, ei) in v.iter_mut().zip(e) {
                    *c += wa * ei;
                }
            }
            metric.value(x, &v)
        },
        quad,
    )
}

pub fn busemann_density(metric: &FinslerMetric, x: &[f64], sphere_nodes: usize) -> Result<f64> {
    Ok(indicatrix_moments(metric, x, sphere_nodes)?.density())
}

pub fn osculating_metric(metric: &FinslerMetric, x: &[f64], sphere_nodes: usize) -> Result<DMatrix<f64>> {
    Ok(indicatrix_moments(metric, x, sphere_nodes)?.osculating())
}

/// Rejection-sampling estimate of the indicatrix moments with standard errors.
#[derive(Debug, Clone)]
pub struct MonteCarloMoments {
    pub moments: MomentResult,
    pub volume_se: f64,
    pub second_moment_se: DMatrix<f64>,
    pub density: f64,
    pub density_se: f64,
    pub osculating: DMatrix<f64>,
    /// Delta-method standard errors of the ratio `(n+2) M / vol`.
    pub osculating_se: DMatrix<f64>,
    pub acceptance_rate: f64,
    pub half_width: f64,
}

pub const MIN_MC_SAMPLES: usize = 10_000;

pub fn monte_carlo_moments(metric: &FinslerMetric, x: &[f64], samples: usize, seed: u64) -> Result<MonteCarloMoments> {
    let n = metric.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidInput(format!("samples = {samples} < {MIN_MC_SAMPLES}")));
    }
    let min_f = sample_directions(n, 256).iter().map(|w| metric.value(x, w)).fold(f64::INFINITY, f64::min);
    if !(min_f > 0.0) {
        return Err(Error::InvalidMetric(format!("min F over probe directions = {min_f}")));
    }
    // The probes can miss the true minimum of F by a little; pad the box.
    let r = 1.05 / min_f;
    let box_vol = (2.0 * r).powi(n as i32);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![0.0; n];
    let mut hits = 0usize;
    let mut sz = DMatrix::<f64>::zeros(n, n);
    let mut szz = DMatrix::<f64>::zeros(n, n);
    for _ in 0..samples {
        for c in y.iter_mut() {
            *c = rng.random_range(-r..r);
        }
        if metric.value(x, &y) <= 1.0 {
            hits += 1;
            for i in 0..n {
                for j in 0..n {
                    let z = y[i] * y[j];
                    sz[(i, j)] += z;
                    szz[(i, j)] += z * z;
                }
            }
        }
    }
    let nf = samples as f64;
    let p = hits as f64 / nf;
    if p < 1e-3 {
        return Err(Error::BoundingBox(p));
    }
    let volume = box_vol * p;
    let volume_se = box_vol * (p * (1.0 - p) / nf).sqrt();
    let mean_z = &sz / nf;
    let mean_zz = &szz / nf;
    let second_moments = &mean_z * box_vol;
    let second_moment_se = DMatrix::from_fn(n, n, |i, j| {
        let var = (mean_zz[(i, j)] - mean_z[(i, j)].powi(2)).max(0.0);
        box_vol * (var / nf).sqrt()
    });
    let scale = n as f64 + 2.0;
    let osculating = &mean_z * (scale / p);
    let osculating_se = DMatrix::from_fn(n, n, |i, j| {
        let ratio = mean_z[(i, j)] / p;
        // Var(Z - rX) with X the hit indicator, using X·Z = Z and X² = X.
        let var = (mean_zz[(i, j)] - 2.0 * ratio * mean_z[(i, j)] + ratio * ratio * p).max(0.0);
        scale * (var / nf).sqrt() / p
    });
    let density = unit_ball_volume(n) / volume;
    let density_se = density * volume_se / volume;
    Ok(MonteCarloMoments {
        moments: MomentResult { volume, second_moments, node_count: samples },
        volume_se,
        second_moment_se,
        density,
        density_se,
        osculating,
        osculating_se,
        acceptance_rate: p,
        half_width: r,
    })
}

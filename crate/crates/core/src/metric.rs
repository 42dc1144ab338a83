//! Finsler structures `F(x, y)` on coordinate charts.
//!
//! A metric is evaluated at a base point `x` (chart or ambient coordinates) and a
//! tangent vector `y` of the same dimension. Built-in kinds carry analytic
//! fundamental tensors; [`MetricKind::Custom`] evaluators fall back to central
//! differences of `F²`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::quadrature::sample_directions;

pub type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type CovectorFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
pub type Evaluator = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Relative tolerance for homogeneity/reversibility checks on analytic kinds.
pub const ANALYTIC_TOL: f64 = 1e-10;
/// Relative tolerance for the same checks on user-supplied evaluators.
pub const CUSTOM_TOL: f64 = 1e-6;
/// Smallest eigenvalue accepted as positive for analytic fundamental tensors.
pub const CONVEXITY_FLOOR: f64 = 1e-10;
/// For finite-difference tensors: smallest eigenvalue relative to the largest.
pub const CUSTOM_CONVEXITY_FLOOR: f64 = 1e-6;
const RANDERS_MARGIN: f64 = 1e-9;

/// A symmetric matrix field on the chart, constant or point-dependent.
#[derive(Clone)]
pub enum MatrixField {
    Constant(DMatrix<f64>),
    Varying(MatrixFn),
}

impl MatrixField {
    pub fn at(&self, x: &[f64]) -> DMatrix<f64> {
        match self {
            MatrixField::Constant(m) => m.clone(),
            MatrixField::Varying(f) => f(x),
        }
    }
}

/// A covector field on the chart, constant or point-dependent.
#[derive(Clone)]
pub enum CovectorField {
    Constant(DVector<f64>),
    Varying(CovectorFn),
}

impl CovectorField {
    pub fn at(&self, x: &[f64]) -> DVector<f64> {
        match self {
            CovectorField::Constant(v) => v.clone(),
            CovectorField::Varying(f) => f(x),
        }
    }
}

#[derive(Clone)]
pub enum MetricKind {
    Euclidean,
    Riemannian(MatrixField),
    /// `F = sqrt(a(y, y)) + b(y)` with `|b|_a < 1`.
    Randers {
        a: MatrixField,
        b: CovectorField,
    },
    /// `F = sqrt(|y|² + λ y₁²y₂²/|y|²)`, reversible and non-Riemannian for λ > 0.
    PerturbedReversible {
        lambda: f64,
    },
    Custom(Evaluator),
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Euclidean => "euclidean",
            MetricKind::Riemannian(_) => "riemannian",
            MetricKind::Randers { .. } => "randers",
            MetricKind::PerturbedReversible { .. } => "perturbed-reversible",
            MetricKind::Custom(_) => "custom",
        }
    }
}

/// A validated Finsler structure.
#[derive(Clone)]
pub struct FinslerMetric {
    dim: usize,
    kind: MetricKind,
    reversible: bool,
}

impl fmt::Debug for FinslerMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FinslerMetric")
            .field("dim", &self.dim)
            .field("kind", &self.kind.name())
            .field("reversible", &self.reversible)
            .finish()
    }
}

/// `g_ij = ½ ∂²(F²)/∂yⁱ∂yʲ` at `(x, y)`.
#[derive(Debug, Clone)]
pub struct FundamentalTensor {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub g: DMatrix<f64>,
}

impl FundamentalTensor {
    pub fn min_eigenvalue(&self) -> f64 {
        self.g.clone().symmetric_eigen().eigenvalues.min()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityReport {
    pub pass: bool,
    pub min_eigenvalue: f64,
    pub threshold: f64,
}

impl FinslerMetric {
    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::build(dim, MetricKind::Euclidean, true)
    }

    pub fn riemannian_constant(g: DMatrix<f64>) -> Result<Self> {
        let dim = g.nrows();
        Self::build(dim, MetricKind::Riemannian(MatrixField::Constant(g)), true)
    }

    pub fn riemannian<G>(dim: usize, g: G) -> Result<Self>
    where
        G: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self::build(dim, MetricKind::Riemannian(MatrixField::Varying(Arc::new(g))), true)
    }

    pub fn randers_constant(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let dim = a.nrows();
        let reversible = b.iter().all(|v| *v == 0.0);
        Self::build(dim, MetricKind::Randers { a: MatrixField::Constant(a), b: CovectorField::Constant(b) }, reversible)
    }

    pub fn randers<A, B>(dim: usize, a: A, b: B) -> Result<Self>
    where
        A: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        B: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        let a = MatrixField::Varying(Arc::new(a));
        let b = CovectorField::Varying(Arc::new(b));
        let reversible = validation_points(dim).iter().all(|x| b.at(x).iter().all(|v| *v == 0.0));
        Self::build(dim, MetricKind::Randers { a, b }, reversible)
    }

    pub fn perturbed_reversible(dim: usize, lambda: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidMetric("perturbed-reversible metric needs dim >= 2".into()));
        }
        if !(0.0..=0.5).contains(&lambda) {
            return Err(Error::InvalidMetric(format!("lambda {lambda} outside [0, 0.5]")));
        }
        Self::build(dim, MetricKind::PerturbedReversible { lambda }, true)
    }

    /// A user-supplied evaluator. `reversible` is a claim checked at construction.
    pub fn custom<F>(dim: usize, reversible: bool, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::build(dim, MetricKind::Custom(Arc::new(f)), reversible)
    }

    fn build(dim: usize, kind: MetricKind, reversible: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMetric("dimension must be positive".into()));
        }
        let metric = Self { dim, kind, reversible };
        metric.validate_at(&validation_points(dim))?;
        Ok(metric)
    }

    /// Checks positivity, homogeneity, the reversibility claim and kind-specific
    /// parameter constraints at the given base points.
    pub fn validate_at(&self, points: &[Vec<f64>]) -> Result<()> {
        let tol = self.tolerance();
        let dirs = sample_directions(self.dim, 16);
        for x in points {
            self.check_dim(x)?;
            self.validate_parameters(x)?;
            for y in &dirs {
                let f = self.value(x, y);
                if !(f > 0.0) || !f.is_finite() {
                    return Err(Error::InvalidMetric(format!("F(x, y) = {f} at x = {x:?}, y = {y:?}")));
                }
                for lambda in [0.5, 2.0, 7.5] {
                    let ys: Vec<f64> = y.iter().map(|v| lambda * v).collect();
                    let fl = self.value(x, &ys);
                    if (fl - lambda * f).abs() > tol * lambda * f {
                        return Err(Error::InvalidMetric(format!(
                            "not positively homogeneous at x = {x:?}: F(λy) = {fl}, λF(y) = {}",
                            lambda * f
                        )));
                    }
                }
                if self.reversible {
                    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
                    let fm = self.value(x, &neg);
                    if (fm - f).abs() > tol * f.max(fm) {
                        return Err(Error::InvalidMetric(format!("claimed reversible but F(-y) = {fm} != F(y) = {f}")));
                    }
                }
            }
        }
        if let MetricKind::PerturbedReversible { .. } = self.kind {
            let report = self.check_strong_convexity(&vec![0.0; self.dim], 64)?;
            if !report.pass {
                return Err(Error::InvalidMetric(format!(
                    "perturbed-reversible metric not strongly convex (min eigenvalue {})",
                    report.min_eigenvalue
                )));
            }
        }
        Ok(())
    }

    fn validate_parameters(&self, x: &[f64]) -> Result<()> {
        match &self.kind {
            MetricKind::Riemannian(g) => {
                let g = g.at(x);
                self.check_spd(&g, "riemannian g")?;
            }
            MetricKind::Randers { a, b } => {
                let a = a.at(x);
                let b = b.at(x);
                if b.len() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, got: b.len() });
                }
                let chol = self.check_spd(&a, "randers a")?;
                let norm = b.dot(&chol.solve(&b)).sqrt();
                if norm >= 1.0 - RANDERS_MARGIN {
                    return Err(Error::InvalidMetric(format!("randers |b|_a = {norm} >= 1")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn check_spd(&self, m: &DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: m.nrows() });
        }
        if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
            return Err(Error::InvalidMetric(format!("{what} is not symmetric")));
        }
        m.clone().cholesky().ok_or_else(|| Error::InvalidMetric(format!("{what} is not positive-definite")))
    }

    fn tolerance(&self) -> f64 {
        match self.kind {
            MetricKind::Custom(_) => CUSTOM_TOL,
            _ => ANALYTIC_TOL,
        }
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    /// True when `F(x, y)` does not depend on `x` (a Minkowski norm).
    pub fn is_translation_invariant(&self) -> bool {
        match &self.kind {
            MetricKind::Euclidean | MetricKind::PerturbedReversible { .. } => true,
            MetricKind::Riemannian(g) => matches!(g, MatrixField::Constant(_)),
            MetricKind::Randers { a, b } => {
                matches!(a, MatrixField::Constant(_)) && matches!(b, CovectorField::Constant(_))
            }
            MetricKind::Custom(_) => false,
        }
    }

    /// `F(x, y)` with dimension checks.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.value(x, y))
    }

    /// `F(x, y)` without dimension checks, for inner loops.
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.dim);
        match &self.kind {
            MetricKind::Euclidean => y.iter().map(|v| v * v).sum::<f64>().sqrt(),
            MetricKind::Riemannian(g) => quadratic_form(&g.at(x), y).max(0.0).sqrt(),
            MetricKind::Randers { a, b } => {
                let alpha = quadratic_form(&a.at(x), y).max(0.0).sqrt();
                let beta: f64 = b.at(x).iter().zip(y).map(|(b, y)| b * y).sum();
                alpha + beta
            }
            MetricKind::PerturbedReversible { lambda } => {
                let r2: f64 = y.iter().map(|v| v * v).sum();
                if r2 == 0.0 {
                    return 0.0;
                }
                (r2 + lambda * y[0] * y[0] * y[1] * y[1] / r2).sqrt()
            }
            MetricKind::Custom(f) => f(x, y),
        }
    }

    pub fn fundamental_tensor(&self, x: &[f64], y: &[f64]) -> Result<FundamentalTensor> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        if y.iter().all(|v| *v == 0.0) {
            return Err(Error::Domain("fundamental tensor undefined at y = 0".into()));
        }
        let g = self.fundamental_matrix(x, y);
        Ok(FundamentalTensor { x: x.to_vec(), y: y.to_vec(), g })
    }

    pub(crate) fn fundamental_matrix(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        match &self.kind {
            MetricKind::Euclidean => DMatrix::identity(n, n),
            MetricKind::Riemannian(g) => g.at(x),
            MetricKind::Randers { a, b } => {
                let a = a.at(x);
                let b = b.at(x);
                let yv = DVector::from_column_slice(y);
                let ay = &a * &yv;
                let alpha = yv.dot(&ay).sqrt();
                let l = ay / alpha;
                let f = alpha + b.dot(&yv);
                let lb = &l + &b;
                (&a - &l * l.transpose()) * (f / alpha) + &lb * lb.transpose()
            }
            MetricKind::PerturbedReversible { lambda } => {
                let r2: f64 = y.iter().map(|v| v * v).sum();
                let (y0, y1) = (y[0], y[1]);
                let q = y0 * y0 * y1 * y1;
                let mut grad_q = DVector::zeros(n);
                grad_q[0] = 2.0 * y0 * y1 * y1;
                grad_q[1] = 2.0 * y0 * y0 * y1;
                let mut hess_q = DMatrix::zeros(n, n);
                hess_q[(0, 0)] = 2.0 * y1 * y1;
                hess_q[(1, 1)] = 2.0 * y0 * y0;
                hess_q[(0, 1)] = 4.0 * y0 * y1;
                hess_q[(1, 0)] = 4.0 * y0 * y1;
                let yv = DVector::from_column_slice(y);
                let cross = &grad_q * yv.transpose() + &yv * grad_q.transpose();
                let hess = hess_q / r2 - cross * (2.0 / (r2 * r2)) - DMatrix::identity(n, n) * (2.0 * q / (r2 * r2))
                    + &yv * yv.transpose() * (8.0 * q / (r2 * r2 * r2));
                DMatrix::identity(n, n) + hess * (0.5 * lambda)
            }
            MetricKind::Custom(_) => self.fundamental_matrix_fd(x, y),
        }
    }

    /// Central-difference Hessian of `½F²` in `y`, step `1e-4·max(|y|, 1)`.
    pub fn fundamental_matrix_fd(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-4 * norm.max(1.0);
        let f2 = |dy: &[(usize, f64)]| {
            let mut z = y.to_vec();
            for &(i, d) in dy {
                z[i] += d;
            }
            let f = self.value(x, &z);
            f * f
        };
        let center = f2(&[]);
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            g[(i, i)] = 0.5 * (f2(&[(i, h)]) - 2.0 * center + f2(&[(i, -h)])) / (h * h);
            for j in 0..i {
                let v = (f2(&[(i, h), (j, h)]) - f2(&[(i, h), (j, -h)]) - f2(&[(i, -h), (j, h)])
                    + f2(&[(i, -h), (j, -h)]))
                    / (8.0 * h * h);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// Smallest eigenvalue of `g_ij` over `directions` unit-sphere samples.
    pub fn check_strong_convexity(&self, x: &[f64], directions: usize) -> Result<ConvexityReport> {
        if directions < 16 {
            return Err(Error::InvalidInput("strong convexity check needs >= 16 directions".into()));
        }
        self.check_dim(x)?;
        let custom = matches!(self.kind, MetricKind::Custom(_));
        let mut min_eig = f64::INFINITY;
        let mut max_eig: f64 = 0.0;
        for y in sample_directions(self.dim, directions) {
            let eig = self.fundamental_matrix(x, &y).symmetric_eigen().eigenvalues;
            min_eig = min_eig.min(eig.min());
            max_eig = max_eig.max(eig.max());
        }
        let threshold = if custom { CUSTOM_CONVEXITY_FLOOR * max_eig } else { CONVEXITY_FLOOR };
        Ok(ConvexityReport { pass: min_eig > threshold, min_eigenvalue: min_eig, threshold })
    }

    /// True iff the sampled relative asymmetry `|F(y) − F(−y)| / max` stays below 1e-8.
    pub fn check_reversibility(&self, x: &[f64], directions: usize) -> Result<bool> {
        self.check_dim(x)?;
        let worst = sample_directions(self.dim, directions.max(2))
            .iter()
            .map(|y| {
                let neg: Vec<f64> = y.iter().map(|v| -v).collect();
                let (a, b) = (self.value(x, y), self.value(x, &neg));
                (a - b).abs() / a.max(b)
            })
            .fold(0.0, f64::max);
        Ok(worst < 1e-8)
    }
}

fn quadratic_form(m: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = y.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += m[(i, j)] * y[i] * y[j];
        }
    }
    s
}

/// Base points used for construction-time validation.
pub fn validation_points(dim: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]];
    for i in 0..dim {
        let mut p = vec![0.0; dim];
        p[i] = 0.5;
        pts.push(p.clone());
        p[i] = -0.5;
        pts.push(p);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for _ in 0..4 {
        pts.push((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    pts
}

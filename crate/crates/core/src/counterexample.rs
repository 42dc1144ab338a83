//! The step function on `W = [−1, 1] × [0, 1]` that lies in `H_1^p(W)` but
//! cannot be approximated by `C¹(W̄)` functions: every candidate stays at
//! `H_1^p` distance at least `1/(2 + 2^{1/p′})`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::domain::build_box_chart;
use crate::error::{Error, Result};
use crate::metric::FinslerMetric;
use crate::osculating::osculating_field;
use crate::quadrature::integrate_interval;
use crate::sobolev::lp_norm_values;

/// Slack on the floor covering grid quadrature error.
pub const FLOOR_SLACK: f64 = 0.02;

/// Cubic smoothstep `3t² − 2t³` clamped to `[0, 1]`.
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn smoothstep_derivative(t: f64) -> f64 {
    if (0.0..=1.0).contains(&t) {
        6.0 * t * (1.0 - t)
    } else {
        0.0
    }
}

/// `φ_w(x¹) = s((x¹ + w/2)/w)`.
pub fn candidate(w: f64, x1: f64) -> f64 {
    smoothstep((x1 + 0.5 * w) / w)
}

pub fn candidate_derivative(w: f64, x1: f64) -> f64 {
    smoothstep_derivative((x1 + 0.5 * w) / w) / w
}

/// `1/(2 + 2^{1/p′})` with `1/p + 1/p′ = 1`.
pub fn theoretical_floor(p: f64) -> f64 {
    let inv_conj = 1.0 - 1.0 / p;
    1.0 / (2.0 + 2f64.powf(inv_conj))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleRow {
    pub w: f64,
    /// `‖u − φ_w‖_p`
    pub lp_err: f64,
    /// `‖∇(u − φ_w)‖_p = ‖∇φ_w‖_p` since `∇u = 0` a.e.
    pub grad_err: f64,
    pub h1p_err: f64,
    /// `1 − 2ε̂` with `ε̂` the measured `H_1^p` error.
    pub holder_lhs: f64,
    /// `2^{1/p′} ‖D_{x¹} φ_w‖_p`
    pub holder_rhs: f64,
    /// `ψ(x¹) = ∫₀¹ φ_w(x¹, x²) dx²` at `x¹ = −1` and `x¹ = 1`.
    pub psi_a: f64,
    pub psi_b: f64,
    /// `∫_{−1}^{1} ψ′` by piecewise Gauss–Legendre.
    pub psi_integral: f64,
}

impl CounterexampleRow {
    pub fn holder_holds(&self) -> bool {
        self.holder_lhs <= self.holder_rhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleReport {
    pub p: f64,
    pub p_conjugate: f64,
    pub floor: f64,
    pub slack: f64,
    pub nodes: [usize; 2],
    pub rows: Vec<CounterexampleRow>,
    /// Widths below four grid spacings, not evaluated.
    pub skipped: Vec<f64>,
    /// `‖u‖_{H_1^p(W)}` of the step field itself.
    pub step_norm: f64,
    /// Every candidate error is at least `floor − slack`.
    pub verdict: bool,
}

impl CounterexampleReport {
    pub fn min_error(&self) -> f64 {
        self.rows.iter().map(|r| r.h1p_err).fold(f64::INFINITY, f64::min)
    }
}

pub fn run_counterexample(p: f64, widths: &[f64], nodes: [usize; 2]) -> Result<CounterexampleReport> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidInput(format!("the obstruction needs 1 < p < ∞, got {p}")));
    }
    if widths.is_empty() || widths.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidInput("widths must be a nonempty list of positive reals".into()));
    }
    let domain = Arc::new(build_box_chart(&[-1.0, 0.0], &[1.0, 1.0], &nodes)?);
    let osc = osculating_field(&FinslerMetric::euclidean(2)?, domain.clone(), 64)?;
    let grid = domain.as_box().expect("box chart");
    let h = grid.spacing[0];
    let x1: Vec<f64> = (0..grid.len()).map(|i| grid.coord(i)[0]).collect();
    let step: Vec<f64> = x1.iter().map(|x| if *x > 0.0 { 1.0 } else { 0.0 }).collect();
    let step_norm = lp_norm_values(&step, &osc, p)?;
    let p_conjugate = p / (p - 1.0);
    let holder_factor = 2f64.powf(1.0 / p_conjugate);

    let (kept, skipped): (Vec<f64>, Vec<f64>) = widths.iter().partition(|w| **w >= 4.0 * h);
    let column = |x: f64| -> f64 {
        // trapezoid over x² of a function of x¹ alone
        let n2 = grid.nodes[1];
        (0..n2).map(|j| if j == 0 || j + 1 == n2 { 0.5 } else { 1.0 } * grid.spacing[1] * x).sum()
    };
    let rows = kept
        .par_iter()
        .map(|&w| {
            let diff: Vec<f64> = x1.iter().zip(&step).map(|(x, u)| u - candidate(w, *x)).collect();
            let grad: Vec<f64> = x1.iter().map(|x| candidate_derivative(w, *x)).collect();
            let lp_err = lp_norm_values(&diff, &osc, p)?;
            let grad_err = lp_norm_values(&grad, &osc, p)?;
            let h1p_err = lp_err + grad_err;
            let psi_a = column(candidate(w, -1.0));
            let psi_b = column(candidate(w, 1.0));
            let breaks = [-1.0, (-0.5 * w).max(-1.0), (0.5 * w).min(1.0), 1.0];
            let psi_integral: f64 = breaks
                .windows(2)
                .filter(|b| b[1] > b[0])
                .map(|b| integrate_interval(|x| column(candidate_derivative(w, x)), b[0], b[1], 4, 8))
                .sum();
            Ok(CounterexampleRow {
                w,
                lp_err,
                grad_err,
                h1p_err,
                holder_lhs: 1.0 - 2.0 * h1p_err,
                holder_rhs: holder_factor * grad_err,
                psi_a,
                psi_b,
                psi_integral,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let floor = theoretical_floor(p);
    let verdict = rows.iter().all(|r| r.h1p_err >= floor - FLOOR_SLACK);
    Ok(CounterexampleReport { p, p_conjugate, floor, slack: FLOOR_SLACK, nodes, rows, skipped, step_norm, verdict })
}

//! Constructive approximation pipelines: distance cutoff plus chart-wise
//! mollification in the interior, and translate-and-mollify on half-balls.

use std::sync::Arc;

use rayon::prelude::*;

use crate::distance::{distance_field, DistanceField};
use crate::domain::{build_box_chart, DiscreteDomain, DomainKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::metric::FinslerMetric;
use crate::mollifier::{mollify, mollify_in_cap};
use crate::osculating::OsculatingField;
use crate::partition::{default_charts, partition_of_unity, Chart, PartitionOfUnity};
use crate::sobolev::{gradient_values, hkp_norm_masked, lp_norm_masked, lp_norm_values};

/// `f(t)`: 1 for `t ≤ 0`, `1 − t` on `(0, 1)`, 0 for `t ≥ 1`.
pub fn cutoff(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t < 1.0 {
        1.0 - t
    } else {
        0.0
    }
}

/// `φ_j(x) = φ(x) f(d(x₀, x) − j)`, supported in `{d < j + 1}`.
pub fn truncate(phi: &ScalarField, dist: &DistanceField, j: f64) -> Result<ScalarField> {
    phi.ensure_domain(dist.domain())?;
    if !(j >= 0.0) {
        return Err(Error::InvalidInput(format!("truncation level j = {j} must be nonnegative")));
    }
    let (values, support): (Vec<f64>, Vec<bool>) = phi
        .values()
        .iter()
        .zip(phi.support())
        .zip(&dist.values)
        .map(|((v, s), d)| {
            let keep = *s && *d < j + 1.0;
            (if keep { v * cutoff(d - j) } else { 0.0 }, keep)
        })
        .unzip();
    ScalarField::with_support(phi.domain().clone(), values, support)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Interior,
    Boundary,
}

impl Pipeline {
    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Interior => "interior",
            Pipeline::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationRow {
    /// `j` for the interior pipeline, `m` for the boundary pipeline.
    pub parameter: f64,
    /// Mollification radius actually used.
    pub epsilon: f64,
    pub lp_error: f64,
    pub grad_error: f64,
    pub hkp_error: f64,
    /// Largest `d(x₀, ·)` (interior) or `|x|` (boundary) over the approximant's support.
    pub support_radius: f64,
    /// No support node lies on the domain boundary.
    pub support_interior: bool,
    /// `(‖φ_j − φ‖_p, 2‖φ‖_{L^p(M∖B⁺(j))})`
    pub tail: Option<(f64, f64)>,
    /// `(max|∇φ_j|, max|∇φ| + max|φ|·sup|f′|)`
    pub leibniz: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct ApproximationReport {
    pub pipeline: Pipeline,
    pub p: f64,
    pub k: usize,
    pub tolerance: f64,
    pub rows: Vec<ApproximationRow>,
    /// Errors strictly decrease and the last one is below `tolerance`.
    pub verdict: bool,
    /// Set when the interior pipeline ran on a non-reversible metric.
    pub non_reversible_metric: bool,
    /// Set when the boundary sequence was cut short by the grid resolution.
    pub stopped_early: bool,
    /// One approximant per row.
    pub approximants: Vec<ScalarField>,
}

impl ApproximationReport {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.hkp_error).collect()
    }

    pub fn errors_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].hkp_error < w[0].hkp_error)
    }

    /// Every row satisfies the tail bound with relative slack `1e-8`.
    pub fn tail_bound_holds(&self) -> bool {
        self.rows.iter().all(|r| r.tail.is_none_or(|(lhs, rhs)| lhs <= rhs * (1.0 + 1e-8)))
    }

    /// `log(e_i / e_{i+1}) / log(s_{i+1} / s_i)` between consecutive rows.
    pub fn empirical_orders(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| (w[0].hkp_error / w[1].hkp_error).ln() / (w[1].parameter / w[0].parameter).ln())
            .collect()
    }

    fn finish(&mut self) {
        let last_ok = self.rows.last().is_some_and(|r| r.hkp_error < self.tolerance);
        self.verdict = !self.rows.is_empty() && self.errors_decreasing() && last_ok;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteriorParams {
    pub j_sequence: Vec<f64>,
    /// Paired with `j_sequence`; the radius used is `min(ε, edge distance)/2`.
    pub eps_sequence: Vec<f64>,
    pub p: f64,
    pub k: usize,
    pub tolerance: f64,
}

impl InteriorParams {
    fn validate(&self) -> Result<()> {
        if self.j_sequence.is_empty() || self.j_sequence.len() != self.eps_sequence.len() {
            return Err(Error::InvalidInput("j and ε sequences must be nonempty and of equal length".into()));
        }
        if self.j_sequence.windows(2).any(|w| w[1] < w[0]) || self.j_sequence[0] < 0.0 {
            return Err(Error::InvalidInput("j sequence must be nonnegative and nondecreasing".into()));
        }
        if self.eps_sequence.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidInput("ε sequence must be positive".into()));
        }
        if !(self.p >= 1.0) || self.k > 2 {
            return Err(Error::InvalidInput(format!("need p >= 1 and k <= 2, got p = {}, k = {}", self.p, self.k)));
        }
        Ok(())
    }
}

/// Euclidean chart distance from the support to the faces of a box, `∞` on
/// closed domains.
fn edge_distance(field: &ScalarField) -> f64 {
    match field.domain().kind() {
        DomainKind::BoxChart(g) => (0..g.len())
            .filter(|&i| field.support()[i])
            .map(|i| {
                let x = g.coord(i);
                (0..g.dim()).map(|k| (x[k] - g.lower[k]).min(g.upper[k] - x[k])).fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min),
        DomainKind::IcoSphere(_) => f64::INFINITY,
    }
}

/// Splits by the partition of unity, mollifies each piece in its chart, and
/// sums the pieces.
fn mollify_by_charts(field: &ScalarField, pou: &PartitionOfUnity, eps: f64) -> Result<ScalarField> {
    let n = field.len();
    let pieces: Vec<ScalarField> = pou
        .charts
        .par_iter()
        .zip(&pou.weights)
        .enumerate()
        .filter_map(|(c, (chart, alpha))| {
            let support: Vec<bool> = (0..n).map(|i| field.support()[i] && alpha[i] > 0.0).collect();
            if !support.iter().any(|s| *s) {
                return None;
            }
            let values: Vec<f64> =
                (0..n).map(|i| if support[i] { alpha[i] * field.values()[i] } else { 0.0 }).collect();
            Some((|| {
                let mut piece = ScalarField::with_support(field.domain().clone(), values, support)?;
                piece.chart = Some(c);
                match chart {
                    Chart::Box { .. } => mollify(&piece, eps),
                    Chart::Cap { .. } => mollify_in_cap(&piece, chart, eps),
                }
            })())
        })
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; n];
    let mut support = vec![false; n];
    for piece in &pieces {
        for i in 0..n {
            values[i] += piece.values()[i];
            support[i] |= piece.support()[i];
        }
    }
    ScalarField::with_support(field.domain().clone(), values, support)
}

/// Cutoff `φ_j`, partition of unity, chart-wise mollification, and `H_k^p`
/// errors against `φ` for every `(j, ε)` pair.
pub fn approximate_interior(
    phi: &ScalarField,
    metric: &FinslerMetric,
    osc: &OsculatingField,
    x0: usize,
    params: &InteriorParams,
) -> Result<ApproximationReport> {
    params.validate()?;
    phi.ensure_domain(osc.domain())?;
    let domain = phi.domain().clone();
    let dist = distance_field(metric, domain.clone(), x0)?;
    if !dist.unreachable.is_empty() {
        return Err(Error::Domain(format!("{} nodes unreachable from the source", dist.unreachable.len())));
    }
    let pou = partition_of_unity(&domain, &default_charts(&domain))?;
    let p = params.p;
    let max_phi = phi.max_abs();
    let max_grad = gradient_values(phi.values(), osc).iter().cloned().fold(0.0, f64::max);
    let boundary = domain.boundary_mask();

    let results: Vec<(ApproximationRow, ScalarField)> = params
        .j_sequence
        .par_iter()
        .zip(&params.eps_sequence)
        .map(|(&j, &eps0)| {
            let phi_j = truncate(phi, &dist, j)?;
            let diff: Vec<f64> = phi_j.values().iter().zip(phi.values()).map(|(a, b)| a - b).collect();
            let outside: Vec<bool> = dist.values.iter().map(|d| *d >= j).collect();
            let tail = (lp_norm_values(&diff, osc, p)?, 2.0 * lp_norm_masked(phi.values(), osc, p, Some(&outside))?);
            let grad_j = gradient_values(phi_j.values(), osc).iter().cloned().fold(0.0, f64::max);
            let leibniz = (grad_j, max_grad + max_phi);

            let edge = edge_distance(&phi_j);
            let eps = eps0.min(edge) / 2.0;
            if edge <= 0.0 {
                return Err(Error::Domain(format!("support of the j = {j} truncation reaches the domain edge")));
            }
            let approx = mollify_by_charts(&phi_j, &pou, eps)?;
            let err: Vec<f64> = approx.values().iter().zip(phi.values()).map(|(a, b)| a - b).collect();
            let report = hkp_norm_masked(&err, osc, params.k, p, None)?;
            let support_radius =
                (0..approx.len()).filter(|&i| approx.support()[i]).map(|i| dist.values[i]).fold(0.0, f64::max);
            let support_interior = !(0..approx.len()).any(|i| approx.support()[i] && boundary[i]);
            let row = ApproximationRow {
                parameter: j,
                epsilon: eps,
                lp_error: report.terms[0],
                grad_error: report.terms.get(1).copied().unwrap_or(0.0),
                hkp_error: report.total,
                support_radius,
                support_interior,
                tail: Some(tail),
                leibniz: Some(leibniz),
            };
            Ok((row, approx))
        })
        .collect::<Result<_>>()?;
    let (rows, approximants) = results.into_iter().unzip();
    let mut report = ApproximationReport {
        pipeline: Pipeline::Interior,
        p,
        k: params.k,
        tolerance: params.tolerance,
        rows,
        verdict: false,
        non_reversible_metric: !metric.is_reversible(),
        stopped_early: false,
        approximants,
    };
    report.finish();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryParams {
    pub m_sequence: Vec<usize>,
    pub p: f64,
    pub k: usize,
    pub tolerance: f64,
}

/// Nodes of the closed half-ball `{|x| ≤ 1, x¹ ≤ 0}`.
pub fn half_ball_mask(domain: &DiscreteDomain) -> Vec<bool> {
    (0..domain.node_count())
        .map(|i| {
            let x = domain.point(i);
            x[0] <= 1e-12 && x.iter().map(|v| v * v).sum::<f64>() <= 1.0 + 1e-12
        })
        .collect()
}

/// Linear interpolation of grid values along axis 0 at `x¹ − shift`, clamped to
/// the first column on the left.
fn shifted_value(grid: &crate::domain::BoxGrid, values: &[f64], multi: &[usize], x0: f64, shift: f64) -> f64 {
    let s = ((x0 - shift - grid.lower[0]) / grid.spacing[0]).max(0.0);
    let i = (s.floor() as usize).min(grid.nodes[0] - 1);
    let frac = s - i as f64;
    let mut m = multi.to_vec();
    m[0] = i;
    let a = values[grid.index(&m)];
    if frac < 1e-9 || i + 1 >= grid.nodes[0] {
        return a;
    }
    m[0] = i + 1;
    a + frac * (values[grid.index(&m)] - a)
}

/// For each `m`: `u_m(x) = φ(x¹ − 1/m, x′)`, mollified with `ε = 1/(4m)` on a
/// grid extended past the face `x¹ = 0`, then compared with `φ` on the half-ball.
/// `φ` lives on a box chart whose upper face along axis 0 is `x¹ = 0`.
pub fn approximate_boundary(
    phi: &ScalarField,
    osc: &OsculatingField,
    params: &BoundaryParams,
) -> Result<ApproximationReport> {
    phi.ensure_domain(osc.domain())?;
    if params.m_sequence.is_empty() || params.m_sequence.windows(2).any(|w| w[1] <= w[0]) || params.m_sequence[0] == 0 {
        return Err(Error::InvalidInput("m sequence must be positive and strictly increasing".into()));
    }
    if !(params.p >= 1.0) || params.k > 2 {
        return Err(Error::InvalidInput(format!("need p >= 1 and k <= 2, got p = {}, k = {}", params.p, params.k)));
    }
    let domain = phi.domain().clone();
    let grid = domain
        .as_box()
        .ok_or_else(|| Error::Unsupported("the boundary pipeline runs on a half-ball box chart".into()))?
        .clone();
    let h = domain.spacing_scale();
    if grid.upper[0].abs() > 1e-12 {
        return Err(Error::Domain(format!("chart must end at x¹ = 0, got upper = {}", grid.upper[0])));
    }
    let m0 = params.m_sequence[0] as f64;
    let need_left = -1.0 - 1.0 / m0 - 1.0 / (2.0 * m0) - h;
    if grid.lower[0] > need_left
        || (1..grid.dim()).any(|k| grid.lower[k] > -1.0 - 0.5 / m0 || grid.upper[k] < 1.0 + 0.5 / m0)
    {
        return Err(Error::Domain(format!(
            "chart too small for the half-ball and the shift 1/{m0}: need lower x¹ <= {need_left}"
        )));
    }
    let mask = half_ball_mask(&domain);
    let mut stopped_early = false;
    let mut accepted = Vec::new();
    for &m in &params.m_sequence {
        let shift = 1.0 / m as f64;
        let eps = shift / 4.0;
        if shift < 2.0 * h || eps < 2.0 * h {
            stopped_early = true;
            break;
        }
        accepted.push(m);
    }

    let results: Vec<(ApproximationRow, ScalarField)> = accepted
        .par_iter()
        .map(|&m| {
            let shift = 1.0 / m as f64;
            let eps = shift / 4.0;
            let extra = (eps / grid.spacing[0]).ceil() as usize + 2;
            let mut nodes = grid.nodes.clone();
            nodes[0] += extra;
            let mut upper = grid.upper.clone();
            upper[0] = grid.upper[0] + extra as f64 * grid.spacing[0];
            let work = Arc::new(build_box_chart(&grid.lower, &upper, &nodes)?);
            let wg = work.as_box().expect("box chart");
            let shifted: Vec<f64> = (0..wg.len())
                .map(|idx| {
                    let multi = wg.multi_index(idx);
                    let x0 = wg.coord_along(0, multi[0]);
                    shifted_value(&grid, phi.values(), &multi, x0, shift)
                })
                .collect();
            let u_m = ScalarField::with_support(work.clone(), shifted, vec![true; wg.len()])?;
            let smooth = mollify(&u_m, eps)?;
            let values: Vec<f64> = (0..grid.len())
                .map(|idx| {
                    let multi = grid.multi_index(idx);
                    smooth.values()[wg.index(&multi)]
                })
                .collect();
            let err: Vec<f64> = values.iter().zip(phi.values()).map(|(a, b)| a - b).collect();
            let report = hkp_norm_masked(&err, osc, params.k, params.p, Some(&mask))?;
            let restricted: Vec<f64> = values.iter().zip(&mask).map(|(v, k)| if *k { *v } else { 0.0 }).collect();
            let approx = ScalarField::with_support(domain.clone(), restricted, mask.clone())?;
            let support_radius = (0..grid.len())
                .filter(|&i| mask[i])
                .map(|i| grid.coord(i).iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            let row = ApproximationRow {
                parameter: m as f64,
                epsilon: eps,
                lp_error: report.terms[0],
                grad_error: report.terms.get(1).copied().unwrap_or(0.0),
                hkp_error: report.total,
                support_radius,
                support_interior: true,
                tail: None,
                leibniz: None,
            };
            Ok((row, approx))
        })
        .collect::<Result<_>>()?;
    let (rows, approximants) = results.into_iter().unzip();
    let mut report = ApproximationReport {
        pipeline: Pipeline::Boundary,
        p: params.p,
        k: params.k,
        tolerance: params.tolerance,
        rows,
        verdict: false,
        non_reversible_metric: false,
        stopped_early,
        approximants,
    };
    report.finish();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_box_chart;
    use crate::osculating::osculating_field;

    #[test]
    fn cutoff_branches() {
        assert_eq!(cutoff(-1.0), 1.0);
        assert_eq!(cutoff(0.25), 0.75);
        assert_eq!(cutoff(3.0), 0.0);
        let ts: Vec<f64> = (0..200).map(|i| -0.5 + i as f64 * 0.01).collect();
        for w in ts.windows(2) {
            let (a, b) = (cutoff(w[0]), cutoff(w[1]));
            assert!(b <= a);
            assert!((a - b) <= (w[1] - w[0]) * (1.0 + 1e-12));
        }
    }

    fn setup(n: usize, half: f64) -> (Arc<DiscreteDomain>, FinslerMetric, OsculatingField, usize) {
        let d = Arc::new(build_box_chart(&[-half, -half], &[half, half], &[n, n]).unwrap());
        let e = FinslerMetric::euclidean(2).unwrap();
        let osc = osculating_field(&e, d.clone(), 64).unwrap();
        let x0 = d.as_box().unwrap().nearest(&[0.0, 0.0]).unwrap();
        (d, e, osc, x0)
    }

    #[test]
    fn truncation_properties() {
        let (d, e, _, x0) = setup(41, 2.0);
        let phi = ScalarField::from_fn(d.clone(), |x| 1.0 + x[0] * x[1]).unwrap();
        let dist = distance_field(&e, d.clone(), x0).unwrap();
        let j = 0.7;
        let t = truncate(&phi, &dist, j).unwrap();
        for i in 0..d.node_count() {
            let dv = dist.values[i];
            if dv <= j {
                assert_eq!(t.values()[i], phi.values()[i]);
            }
            if dv >= j + 1.0 {
                assert_eq!(t.values()[i], 0.0);
                assert!(!t.support()[i]);
            }
            assert!(t.values()[i].abs() <= phi.values()[i].abs());
        }
        assert!(truncate(&phi, &dist, -1.0).is_err());
    }

    #[test]
    fn interior_pipeline_on_small_box() {
        let (d, e, osc, x0) = setup(121, 6.0);
        let phi = ScalarField::from_fn(d, |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp()).unwrap();
        let params = InteriorParams {
            j_sequence: vec![1.0, 2.0, 3.0, 4.0],
            eps_sequence: vec![0.8, 0.6, 0.5, 0.4],
            p: 2.0,
            k: 1,
            tolerance: 1e-1,
        };
        let r = approximate_interior(&phi, &e, &osc, x0, &params).unwrap();
        assert!(r.errors_decreasing(), "{:?}", r.errors());
        assert!(r.tail_bound_holds());
        assert!(r.rows.iter().all(|row| row.support_interior));
        assert!(r.rows.iter().all(|row| row.support_radius <= row.parameter + 1.0 + row.epsilon + 0.15));
        assert!(!r.non_reversible_metric);
    }

    #[test]
    fn pure_mollification_when_cutoff_is_inactive() {
        let (d, e, osc, x0) = setup(81, 4.0);
        let phi = ScalarField::from_fn(d.clone(), |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 < 1.0 {
                (-1.0 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        })
        .unwrap();
        let dist = distance_field(&e, d, x0).unwrap();
        let t = truncate(&phi, &dist, 1.5).unwrap();
        assert_eq!(t.values(), phi.values());
        let params = InteriorParams { j_sequence: vec![1.5], eps_sequence: vec![0.4], p: 2.0, k: 1, tolerance: 1.0 };
        let r = approximate_interior(&phi, &e, &osc, x0, &params).unwrap();
        let direct = mollify(&phi, 0.2).unwrap();
        for (a, b) in r.approximants[0].values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(r.rows[0].tail.unwrap().0, 0.0);
    }

    #[test]
    fn boundary_pipeline_first_order() {
        let d = Arc::new(build_box_chart(&[-1.5, -1.25], &[0.0, 1.25], &[193, 321]).unwrap());
        assert!((d.as_box().unwrap().spacing[0] - 1.0 / 128.0).abs() < 1e-15);
        let osc = osculating_field(&FinslerMetric::euclidean(2).unwrap(), d.clone(), 64).unwrap();
        let phi = ScalarField::from_fn(d, |x| x[0] * x[0] + x[1]).unwrap();
        let params = BoundaryParams { m_sequence: vec![4, 8, 16, 32], p: 2.0, k: 1, tolerance: 1e-2 };
        let r = approximate_boundary(&phi, &osc, &params).unwrap();
        assert!(r.errors_decreasing());
        assert!(r.stopped_early, "m = 32 needs ε = 1/128 < 2h");
        assert_eq!(r.rows.len(), 3);
        assert!(r.empirical_orders().iter().all(|o| *o > 0.9), "{:?}", r.empirical_orders());
    }
}

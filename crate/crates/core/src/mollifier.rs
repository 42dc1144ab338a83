//! The standard mollifier `J_ε` and discrete convolution on box charts and on
//! gnomonic cap charts of the icosphere.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::domain::{DiscreteDomain, DomainKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::partition::Chart;
use crate::quadrature::{integrate_interval, unit_sphere_area};

const CACHED_DIMS: usize = 8;

fn radial_constant(n: usize) -> f64 {
    let radial = integrate_interval(|r| r.powi(n as i32 - 1) * (-1.0 / (1.0 - r * r)).exp(), 0.0, 1.0, 256, 16);
    1.0 / (unit_sphere_area(n) * radial)
}

/// `c_n` with `∫_{R^n} c_n exp(−1/(1−|x|²)) dx = 1`.
pub fn mollifier_constant(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| (1..=CACHED_DIMS).map(radial_constant).collect());
    if (1..=CACHED_DIMS).contains(&n) {
        table[n - 1]
    } else {
        radial_constant(n)
    }
}

/// `J_ε(x) = ε^{−n} c_n exp(−1/(1−|x/ε|²))` inside the ball of radius `ε`, else 0.
pub fn mollifier_kernel(x: &[f64], eps: f64) -> f64 {
    let n = x.len();
    let r2 = x.iter().map(|v| v * v).sum::<f64>() / (eps * eps);
    if r2 >= 1.0 {
        return 0.0;
    }
    mollifier_constant(n) * (-1.0 / (1.0 - r2)).exp() / eps.powi(n as i32)
}

/// Lattice offsets within radius `ε` and their kernel weights `J_ε(o·h)·Π h`.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    pub offsets: Vec<Vec<i64>>,
    pub weights: Vec<f64>,
}

impl DiscreteKernel {
    pub fn new(spacing: &[f64], eps: f64) -> Self {
        let n = spacing.len();
        let reach: Vec<i64> = spacing.iter().map(|h| (eps / h).ceil() as i64).collect();
        let cell: f64 = spacing.iter().product();
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut o: Vec<i64> = reach.iter().map(|r| -r).collect();
        loop {
            let x: Vec<f64> = o.iter().zip(spacing).map(|(k, h)| *k as f64 * h).collect();
            let w = mollifier_kernel(&x, eps) * cell;
            if w > 0.0 {
                offsets.push(o.clone());
                weights.push(w);
            }
            let mut axis = 0;
            loop {
                if axis == n {
                    return Self { offsets, weights };
                }
                o[axis] += 1;
                if o[axis] <= reach[axis] {
                    break;
                }
                o[axis] = -reach[axis];
                axis += 1;
            }
        }
    }

    /// Riemann sum of the kernel.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Rescales the weights to unit mass.
    pub fn normalized(mut self) -> Self {
        let m = self.mass();
        self.weights.iter_mut().for_each(|w| *w /= m);
        self
    }
}

fn check_resolution(domain: &DiscreteDomain, eps: f64) -> Result<()> {
    let h = domain.spacing_scale();
    if !(eps >= 2.0 * h) {
        return Err(Error::InvalidInput(format!(
            "mollification radius {eps} is under-resolved: need at least two spacings ({})",
            2.0 * h
        )));
    }
    Ok(())
}

/// `(J_ε * u)(x) = Σ_y J_ε(x − y) u(y) Π h` with the lattice kernel scaled to
/// unit mass. `u` is extended by zero; output beyond the grid is discarded.
pub fn mollify(u: &ScalarField, eps: f64) -> Result<ScalarField> {
    let domain = u.domain();
    let grid = match domain.kind() {
        DomainKind::BoxChart(g) => g,
        DomainKind::IcoSphere(_) => {
            return Err(Error::Unsupported("flat mollification needs a box chart; use mollify_in_cap".into()))
        }
    };
    check_resolution(domain, eps)?;
    let kernel = DiscreteKernel::new(&grid.spacing, eps).normalized();
    let values = u.values();
    let support = u.support();
    let dim = grid.dim();
    let out: Vec<(f64, bool)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let multi = grid.multi_index(idx);
            let mut acc = 0.0;
            let mut touched = false;
            'offsets: for (o, w) in kernel.offsets.iter().zip(&kernel.weights) {
                let mut src = 0;
                for k in 0..dim {
                    let t = multi[k] as i64 - o[k];
                    if t < 0 || t >= grid.nodes[k] as i64 {
                        continue 'offsets;
                    }
                    src += t as usize * grid.stride(k);
                }
                if support[src] {
                    touched = true;
                    acc += w * values[src];
                }
            }
            (if touched { acc } else { 0.0 }, touched)
        })
        .collect();
    let (vals, supp): (Vec<f64>, Vec<bool>) = out.into_iter().unzip();
    ScalarField::with_support(domain.clone(), vals, supp)
}

/// Flat convolution in the gnomonic coordinates of a cap chart. Each output node
/// uses the kernel normalized against the chart's area element, so constants are
/// reproduced exactly. Output is confined to the chart.
pub fn mollify_in_cap(u: &ScalarField, chart: &Chart, eps: f64) -> Result<ScalarField> {
    let domain = u.domain();
    let mesh = domain.as_sphere().ok_or_else(|| Error::Unsupported("cap mollification needs an icosphere".into()))?;
    if !matches!(chart, Chart::Cap { .. }) {
        return Err(Error::InvalidInput("cap mollification needs a cap chart".into()));
    }
    check_resolution(domain, eps)?;
    let weights = domain.quadrature_weights();
    // (node, chart coordinates, chart area element)
    let inside: Vec<(usize, [f64; 2], f64)> = (0..mesh.vertices.len())
        .filter_map(|i| {
            let c = chart.cap_coordinates(&mesh.vertices[i])?;
            let cosine = 1.0 / (1.0 + c[0] * c[0] + c[1] * c[1]).sqrt();
            Some((i, c, weights[i] / cosine.powi(3)))
        })
        .collect();
    let values = u.values();
    let support = u.support();
    if let Some(i) = (0..values.len()).find(|&i| support[i] && chart.cap_coordinates(&mesh.vertices[i]).is_none()) {
        return Err(Error::InvalidInput(format!("support leaves the chart at node {i}")));
    }
    let rows: Vec<(usize, f64, bool)> = inside
        .par_iter()
        .map(|(i, c, _)| {
            let mut num = 0.0;
            let mut den = 0.0;
            let mut touched = false;
            for (j, cj, mu) in &inside {
                let k = mollifier_kernel(&[c[0] - cj[0], c[1] - cj[1]], eps);
                if k > 0.0 {
                    den += k * mu;
                    if support[*j] {
                        num += k * mu * values[*j];
                        touched = true;
                    }
                }
            }
            (*i, if touched && den > 0.0 { num / den } else { 0.0 }, touched)
        })
        .collect();
    let mut vals = vec![0.0; values.len()];
    let mut supp = vec![false; values.len()];
    for (i, v, s) in rows {
        vals[i] = v;
        supp[i] = s;
    }
    let mut out = ScalarField::with_support(domain.clone(), vals, supp)?;
    out.chart = u.chart;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_box_chart, build_icosphere};
    use std::sync::Arc;

    #[test]
    fn kernel_has_unit_mass() {
        for n in 1..=3 {
            let m = DiscreteKernel::new(&vec![1.0 / 32.0; n], 1.0).mass();
            assert!((m - 1.0).abs() < 1e-6, "n = {n}: {m}");
            let coarse = DiscreteKernel::new(&vec![1.0 / 16.0; n], 1.0).mass();
            assert!((coarse - 1.0).abs() < 1e-5, "n = {n}: {coarse}");
        }
    }

    #[test]
    fn kernel_support_and_scaling() {
        assert_eq!(mollifier_kernel(&[0.5, 0.0], 0.5), 0.0);
        assert_eq!(mollifier_kernel(&[0.3, 0.4], 0.5), 0.0);
        let eps = 0.2;
        let j0 = mollifier_constant(2) * (-1.0f64).exp();
        assert!((mollifier_kernel(&[0.0, 0.0], eps) - j0 / (eps * eps)).abs() < 1e-12);
    }

    #[test]
    fn constants_are_preserved_inside() {
        let d = Arc::new(build_box_chart(&[-1.0, -1.0], &[1.0, 1.0], &[81, 81]).unwrap());
        let u = ScalarField::constant(d.clone(), 2.5).unwrap();
        let v = mollify(&u, 0.2).unwrap();
        for i in 0..d.node_count() {
            let x = d.point(i);
            if x.iter().all(|c| c.abs() < 0.75) {
                assert!((v.values()[i] - 2.5).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn under_resolved_radius_is_refused() {
        let d = Arc::new(build_box_chart(&[0.0], &[1.0], &[11]).unwrap());
        let u = ScalarField::constant(d, 1.0).unwrap();
        assert!(matches!(mollify(&u, 0.15), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn positivity_and_support_growth() {
        let d = Arc::new(build_box_chart(&[-1.0, -1.0], &[1.0, 1.0], &[41, 41]).unwrap());
        let u =
            ScalarField::from_fn(d.clone(), |x| if x[0].abs() < 0.2 && x[1].abs() < 0.2 { 1.0 } else { 0.0 }).unwrap();
        let eps = 0.15;
        let v = mollify(&u, eps).unwrap();
        assert!(v.values().iter().all(|x| *x >= 0.0));
        for i in 0..d.node_count() {
            let x = d.point(i);
            if v.support()[i] {
                assert!(x[0].abs() < 0.2 + eps + 1e-12 && x[1].abs() < 0.2 + eps + 1e-12);
            }
        }
    }

    #[test]
    fn cap_mollification_keeps_constants() {
        let d = Arc::new(build_icosphere(4).unwrap());
        let chart = Chart::Cap { center: [0.0, 0.0, 1.0], radius: 1.0, bump_radius: 0.78 };
        let vals: Vec<f64> =
            (0..d.node_count()).map(|i| if chart.cap_coordinates(&d.point(i)).is_some() { 1.0 } else { 0.0 }).collect();
        let u = ScalarField::new(d.clone(), vals).unwrap();
        let v = mollify_in_cap(&u, &chart, 0.2).unwrap();
        for i in 0..d.node_count() {
            let p = d.point(i);
            if p[2] > 0.9 {
                assert!((v.values()[i] - 1.0).abs() < 1e-12);
            }
        }
        let everywhere = ScalarField::constant(d, 1.0).unwrap();
        assert!(mollify_in_cap(&everywhere, &chart, 0.2).is_err());
    }
}

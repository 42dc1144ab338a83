//! Quadrature rules on intervals and on the unit sphere `S^{n-1}` for n ≤ 3.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre integration of `f` over [a, b].
pub fn integrate_interval<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (xs, ws) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let mut s = 0.0;
        for (x, w) in xs.iter().zip(&ws) {
            s += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * s;
    }
    total
}

/// Node-set families for integration over `S^{n-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SphereRule {
    /// n=2: uniform-angle trapezoid; n=3: Gauss–Legendre in cos θ times trapezoid in φ.
    #[default]
    Product,
    /// n=3: spherical Fibonacci lattice with equal weights. n=2 falls back to uniform angles.
    Fibonacci,
}

/// Weighted node set on the unit sphere of `R^dim`. Weights sum to the sphere's area.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereQuadrature {
    /// Builds a rule with approximately `requested` nodes (exactly, for n = 2).
    pub fn new(dim: usize, requested: usize, rule: SphereRule) -> Result<Self> {
        match dim {
            1 => Ok(Self { dim, nodes: vec![vec![1.0], vec![-1.0]], weights: vec![1.0, 1.0] }),
            2 => Ok(Self::circle(requested)),
            3 => Ok(match rule {
                SphereRule::Product => Self::gauss_product(requested),
                SphereRule::Fibonacci => Self::fibonacci(requested),
            }),
            _ => Err(Error::Unsupported(format!("sphere quadrature in dimension {dim} (supported: 1, 2, 3)"))),
        }
    }

    fn circle(n: usize) -> Self {
        let w = 2.0 * PI / n as f64;
        let nodes = (0..n)
            .map(|k| {
                let t = w * k as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        Self { dim: 2, nodes, weights: vec![w; n] }
    }

    fn gauss_product(requested: usize) -> Self {
        let nz = ((requested as f64 / 2.0).sqrt().round() as usize).max(4);
        let nphi = requested.div_ceil(nz).max(8);
        let (zs, wz) = gauss_legendre(nz);
        let dphi = 2.0 * PI / nphi as f64;
        let mut nodes = Vec::with_capacity(nz * nphi);
        let mut weights = Vec::with_capacity(nz * nphi);
        for (z, wzi) in zs.iter().zip(&wz) {
            let s = (1.0 - z * z).sqrt();
            for k in 0..nphi {
                let phi = dphi * k as f64;
                nodes.push(vec![s * phi.cos(), s * phi.sin(), *z]);
                weights.push(wzi * dphi);
            }
        }
        Self { dim: 3, nodes, weights }
    }

    fn fibonacci(n: usize) -> Self {
        let golden = PI * (3.0 - 5f64.sqrt());
        let nodes = (0..n)
            .map(|k| {
                let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
                let s = (1.0 - z * z).sqrt();
                let phi = golden * k as f64;
                vec![s * phi.cos(), s * phi.sin(), z]
            })
            .collect();
        Self { dim: 3, nodes, weights: vec![4.0 * PI / n as f64; n] }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Deterministic direction samples on the unit sphere, used by property checks.
pub fn sample_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => SphereQuadrature::circle(count).nodes,
        3 => SphereQuadrature::fibonacci(count).nodes,
        _ => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
            (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                    v.into_iter().map(|a| a / n).collect()
                })
                .collect()
        }
    }
}

/// Volume of the Euclidean unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Area of the unit sphere `S^{n-1}`.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        for deg in 0..16 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "deg {deg}: {q} vs {exact}");
        }
    }

    #[test]
    fn sphere_rules_sum_to_area() {
        for (dim, rule) in [(2, SphereRule::Product), (3, SphereRule::Product), (3, SphereRule::Fibonacci)] {
            let q = SphereQuadrature::new(dim, 512, rule).unwrap();
            let s: f64 = q.weights.iter().sum();
            assert!((s - unit_sphere_area(dim)).abs() < 1e-12);
        }
    }

    #[test]
    fn product_rule_second_moments() {
        let q = SphereQuadrature::new(3, 2048, SphereRule::Product).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let m: f64 = q.nodes.iter().zip(&q.weights).map(|(w, wt)| wt * w[i] * w[j]).sum();
                let exact = if i == j { 4.0 * PI / 3.0 } else { 0.0 };
                assert!((m - exact).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-15);
    }
}

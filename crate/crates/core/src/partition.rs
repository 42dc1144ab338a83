//! Charts covering a domain and smooth partitions of unity subordinate to them.

use crate::domain::{dot3, icosahedron_directions, DiscreteDomain, DomainKind};
use crate::error::{Error, Result};

/// A coordinate chart `V_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum Chart {
    /// Axis-aligned box in the domain's own coordinates.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Spherical cap of angular `radius` around `center`, with gnomonic chart
    /// coordinates. The bump of this chart lives on the smaller cap `bump_radius`.
    Cap { center: [f64; 3], radius: f64, bump_radius: f64 },
}

impl Chart {
    /// Bump profile `exp(−1/(1−t²))` (per axis for boxes), zero outside.
    pub fn bump(&self, p: &[f64]) -> f64 {
        match self {
            Chart::Box { lower, upper } => {
                let mut v = 1.0;
                for k in 0..lower.len() {
                    let t = (2.0 * p[k] - (lower[k] + upper[k])) / (upper[k] - lower[k]);
                    v *= bump_profile(t);
                    if v == 0.0 {
                        break;
                    }
                }
                v
            }
            Chart::Cap { center, bump_radius, .. } => {
                let angle = cap_angle(center, p);
                bump_profile(angle / bump_radius)
            }
        }
    }

    /// Distance from `p` to the edge of the bump support (negative outside).
    fn inner_margin(&self, p: &[f64]) -> f64 {
        match self {
            Chart::Box { lower, upper } => {
                (0..lower.len()).map(|k| (p[k] - lower[k]).min(upper[k] - p[k])).fold(f64::INFINITY, f64::min)
            }
            Chart::Cap { center, bump_radius, .. } => bump_radius - cap_angle(center, p),
        }
    }

    /// Gnomonic coordinates of a sphere point in a cap chart, or `None` if the
    /// point is outside the chart.
    pub fn cap_coordinates(&self, p: &[f64]) -> Option<[f64; 2]> {
        match self {
            Chart::Cap { center, radius, .. } => {
                if cap_angle(center, p) >= *radius {
                    return None;
                }
                let [e1, e2] = crate::domain::tangent_frame(*center);
                let q = [p[0], p[1], p[2]];
                let c = dot3(q, *center);
                Some([dot3(q, e1) / c, dot3(q, e2) / c])
            }
            Chart::Box { .. } => None,
        }
    }
}

fn cap_angle(center: &[f64; 3], p: &[f64]) -> f64 {
    dot3(*center, [p[0], p[1], p[2]]).clamp(-1.0, 1.0).acos()
}

pub fn bump_profile(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// `α_i` for every chart, normalized so that `Σ_i α_i = 1` at every node.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    pub charts: Vec<Chart>,
    pub weights: Vec<Vec<f64>>,
}

pub fn partition_of_unity(domain: &DiscreteDomain, charts: &[Chart]) -> Result<PartitionOfUnity> {
    if charts.is_empty() {
        return Err(Error::InvalidInput("no charts given".into()));
    }
    for c in charts {
        match (c, domain.kind()) {
            (Chart::Box { lower, upper }, DomainKind::BoxChart(g)) => {
                if lower.len() != g.dim() || upper.len() != g.dim() {
                    return Err(Error::DimensionMismatch { expected: g.dim(), got: lower.len() });
                }
            }
            (Chart::Cap { .. }, DomainKind::IcoSphere(_)) => {}
            _ => return Err(Error::InvalidInput("chart kind does not match domain kind".into())),
        }
    }
    let margin = 2.0 * domain.spacing_scale();
    let n = domain.node_count();
    let mut weights = vec![vec![0.0; n]; charts.len()];
    let mut uncovered = Vec::new();
    for node in 0..n {
        let p = domain.point(node);
        if !charts.iter().any(|c| c.inner_margin(&p) >= margin) {
            uncovered.push(node);
            continue;
        }
        let bumps: Vec<f64> = charts.iter().map(|c| c.bump(&p)).collect();
        let total: f64 = bumps.iter().sum();
        for (w, b) in weights.iter_mut().zip(&bumps) {
            w[node] = b / total;
        }
    }
    if !uncovered.is_empty() {
        return Err(Error::Coverage(uncovered));
    }
    Ok(PartitionOfUnity { charts: charts.to_vec(), weights })
}

/// Overlapping boxes (two per axis when the axis has room) that extend past the
/// domain so that boundary nodes are covered.
pub fn default_charts(domain: &DiscreteDomain) -> Vec<Chart> {
    match domain.kind() {
        DomainKind::BoxChart(g) => {
            let per_axis: Vec<Vec<(f64, f64)>> = (0..g.dim())
                .map(|k| {
                    let (l, u, h) = (g.lower[k], g.upper[k], g.spacing[k]);
                    let w = u - l;
                    if g.nodes[k] >= 40 {
                        vec![(l - 0.1 * w, l + 0.6 * w), (l + 0.4 * w, u + 0.1 * w)]
                    } else {
                        vec![(l - 0.1 * w - 4.0 * h, u + 0.1 * w + 4.0 * h)]
                    }
                })
                .collect();
            let mut charts = vec![(Vec::new(), Vec::new())];
            for axis in per_axis {
                let mut next = Vec::new();
                for (lo, hi) in &charts {
                    for &(a, b) in &axis {
                        let mut lo2: Vec<f64> = lo.clone();
                        let mut hi2: Vec<f64> = hi.clone();
                        lo2.push(a);
                        hi2.push(b);
                        next.push((lo2, hi2));
                    }
                }
                charts = next;
            }
            charts.into_iter().map(|(lower, upper)| Chart::Box { lower, upper }).collect()
        }
        DomainKind::IcoSphere(_) => {
            // Every point is within 0.653 rad of some icosahedron vertex.
            let bump_radius = 0.7 + 2.0 * domain.spacing_scale();
            let radius = (bump_radius + 0.3).min(1.5);
            icosahedron_directions().into_iter().map(|center| Chart::Cap { center, radius, bump_radius }).collect()
        }
    }
}

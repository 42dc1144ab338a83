//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use finsler_sobolev::{
    build_box_chart, build_icosphere, osculating_field, DiscreteDomain, FinslerMetric, OsculatingField, ScalarField,
};

pub fn square(nodes: usize, half_width: f64) -> Arc<DiscreteDomain> {
    Arc::new(build_box_chart(&[-half_width; 2], &[half_width; 2], &[nodes, nodes]).expect("valid box"))
}

pub fn gaussian(domain: &Arc<DiscreteDomain>, scale: f64) -> ScalarField {
    ScalarField::from_fn(domain.clone(), |x| (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * scale * scale)).exp())
        .expect("finite field")
}

pub fn round_sphere(level: usize) -> OsculatingField {
    let d = Arc::new(build_icosphere(level).expect("valid level"));
    osculating_field(&FinslerMetric::euclidean(3).expect("dim 3"), d, 256).expect("osculating field")
}

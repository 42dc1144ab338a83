use std::sync::Arc;

use finsler_sobolev::dirichlet::{sign_x3, sign_x3_solution};
use finsler_sobolev::{
    approximate_interior, build_box_chart, build_icosphere, osculating_field, solve_dirichlet, FinslerMetric,
    InteriorParams, ScalarField, WeakProblem,
};
use nalgebra::{DMatrix, DVector};

fn poisson_error(level: usize) -> f64 {
    let d = Arc::new(build_icosphere(level).unwrap());
    let osc = osculating_field(&FinslerMetric::euclidean(3).unwrap(), d.clone(), 256).unwrap();
    let f = sign_x3(&osc).unwrap();
    let r = solve_dirichlet(&WeakProblem { osc: osc.clone(), f, p: 2.0, seed: 1 }, 1e-11).unwrap();
    let mass = osc.measure();
    let exact: Vec<f64> =
        (0..d.node_count()).map(|i| sign_x3_solution(d.point(i)[2].clamp(-1.0, 1.0).acos())).collect();
    let mean = exact.iter().zip(&mass).map(|(e, m)| e * m).sum::<f64>() / mass.iter().sum::<f64>();
    let num: f64 = r.u.values().iter().zip(&exact).zip(&mass).map(|((u, e), m)| (u - e + mean).powi(2) * m).sum();
    let den: f64 = exact.iter().zip(&mass).map(|(e, m)| (e - mean).powi(2) * m).sum();
    (num / den).sqrt()
}

#[test]
fn poisson_on_the_sphere_converges_at_second_order() {
    let errs: Vec<f64> = (2..=4).map(poisson_error).collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] > 3.0, "{errs:?}");
    }
}

#[test]
fn interior_pipeline_flags_non_reversible_metrics() {
    let d = Arc::new(build_box_chart(&[-6.0, -6.0], &[6.0, 6.0], &[121, 121]).unwrap());
    let phi = ScalarField::from_fn(d.clone(), |x| (-(x[0] * x[0] + x[1] * x[1]) / 4.5).exp()).unwrap();
    let params = InteriorParams {
        j_sequence: vec![1.0, 1.5, 2.0],
        eps_sequence: vec![0.8, 0.6, 0.5],
        p: 2.0,
        k: 1,
        tolerance: 1e-2,
    };
    let randers = FinslerMetric::randers_constant(DMatrix::identity(2, 2), DVector::from_vec(vec![0.3, 0.0])).unwrap();
    let osc = osculating_field(&randers, d.clone(), 512).unwrap();
    let r = approximate_interior(&phi, &randers, &osc, 60 * 121 + 60, &params).unwrap();
    assert!(r.non_reversible_metric);
    assert_eq!(r.rows.len(), 3);
    assert!(r.tail_bound_holds());

    let e = FinslerMetric::euclidean(2).unwrap();
    let osc = osculating_field(&e, d, 64).unwrap();
    let r = approximate_interior(&phi, &e, &osc, 60 * 121 + 60, &params).unwrap();
    assert!(!r.non_reversible_metric);
    assert!(r.errors_decreasing());
}

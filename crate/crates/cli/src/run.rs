use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use finsler_sobolev::config::{DomainKindConfig, PipelineConfig};
use finsler_sobolev::container::{read_field, write_field};
use finsler_sobolev::dirichlet::sign_x3;
use finsler_sobolev::report::{KeyValueReport, RunMeta};
use finsler_sobolev::{
    approximate_boundary, approximate_interior, distance_field, emit_report, hkp_norm, indicatrix_moments,
    monte_carlo_moments, osculating_field, run_counterexample, smooth_approximate_solution, solve_dirichlet,
    BoundaryParams, Command, DiscreteDomain, Error, FinslerMetric, InteriorParams, OsculatingField, Report, Result,
    RunConfig, ScalarField, WeakProblem,
};

const CG_TOLERANCE: f64 = 1e-10;

/// Runs one configured command, writes its outputs into `out`, and returns the
/// verdict when the command has one.
pub fn execute(config: &RunConfig, out: &Path) -> Result<Option<bool>> {
    let start = Instant::now();
    let metric = config.metric.build()?;
    let prefix = config.prefix();
    let emit = |report: &dyn Report| -> Result<Option<bool>> {
        let meta = RunMeta {
            command: config.command.name().to_string(),
            seed: config.seed(),
            config_echo: config.to_toml(),
            wall_time: start.elapsed(),
        };
        let files = emit_report(report, out, &prefix, &meta)?;
        println!("wrote {}", files.csv.display());
        println!("wrote {}", files.meta.display());
        if let Some(p) = files.plot {
            println!("wrote {}", p.display());
        }
        Ok(report.verdict())
    };

    match config.command {
        Command::MetricInfo => emit(&metric_info(config, &metric)?),
        Command::Moments => emit(&moments(config, &metric)?),
        Command::Distance => {
            let domain = config.domain.build(metric.dim())?;
            let source = source_node(config, &domain)?;
            emit(&distance_field(&metric, domain, source)?)
        }
        Command::Norms => {
            let domain = config.domain.build(metric.dim())?;
            let osc = osculating(config, &metric, &domain)?;
            let field = load_field(config, &domain)?;
            emit(&hkp_norm(&field, &osc, config.k(), config.p())?)
        }
        Command::Approximate => {
            let domain = config.domain.build(metric.dim())?;
            let osc = osculating(config, &metric, &domain)?;
            let phi = load_field(config, &domain)?;
            let report = match config.analysis.pipeline.unwrap_or_default() {
                PipelineConfig::Interior => {
                    let source = source_node(config, &domain)?;
                    approximate_interior(&phi, &metric, &osc, source, &interior_params(config)?)?
                }
                PipelineConfig::Boundary => {
                    if config.domain.kind != DomainKindConfig::HalfBall {
                        return Err(Error::Config("the boundary pipeline needs domain.kind = \"half-ball\"".into()));
                    }
                    let params = BoundaryParams {
                        m_sequence: config.m_sequence(),
                        p: config.p(),
                        k: config.k(),
                        tolerance: config.tolerance(),
                    };
                    approximate_boundary(&phi, &osc, &params)?
                }
            };
            emit(&report)
        }
        Command::Dirichlet => {
            if config.domain.kind != DomainKindConfig::Icosphere {
                return Err(Error::Config("dirichlet needs domain.kind = \"icosphere\"".into()));
            }
            let domain = config.domain.build(metric.dim())?;
            let osc = osculating(config, &metric, &domain)?;
            let f = match config.analysis.field.as_deref() {
                None | Some("sign-x3") => sign_x3(&osc)?,
                Some(_) => load_field(config, &domain)?,
            };
            let problem = WeakProblem { osc: osc.clone(), f, p: config.p(), seed: config.seed() };
            let report = solve_dirichlet(&problem, CG_TOLERANCE)?;
            let u_path = out.join(format!("{prefix}.u.csv"));
            std::fs::create_dir_all(out)?;
            write_field(&report.u, &u_path)?;
            println!("wrote {}", u_path.display());
            let mut verdict = emit(&report)?;
            if config.analysis.j.is_some() {
                let mut params = interior_params(config)?;
                // On the sphere the smoothing tolerance is relative to the solution's norm.
                let u_norm = hkp_norm(&report.u, &osc, params.k, params.p)?.total;
                params.tolerance = config.analysis.tolerance.unwrap_or(0.05) * u_norm;
                let smooth = smooth_approximate_solution(&report, &metric, &osc, &params)?;
                let meta = RunMeta {
                    command: config.command.name().to_string(),
                    seed: config.seed(),
                    config_echo: config.to_toml(),
                    wall_time: start.elapsed(),
                };
                let files = emit_report(&smooth, out, &format!("{prefix}.smooth"), &meta)?;
                println!("wrote {}", files.csv.display());
                verdict = Some(verdict.unwrap_or(true) && smooth.verdict);
            }
            Ok(verdict)
        }
        Command::Counterexample => {
            let (nodes, p) = (config.domain.nodes.clone().unwrap_or(vec![401, 201]), config.p());
            if nodes.len() != 2 {
                return Err(Error::Config("counterexample needs domain.nodes = [nx, ny]".into()));
            }
            emit(&run_counterexample(p, &config.widths(), [nodes[0], nodes[1]])?)
        }
    }
}

fn metric_info(config: &RunConfig, metric: &FinslerMetric) -> Result<KeyValueReport> {
    let x = config.point();
    let convexity = metric.check_strong_convexity(&x, 64)?;
    let reversible = metric.check_reversibility(&x, 64)?;
    let mut y = vec![0.0; metric.dim()];
    y[0] = 1.0;
    let g = metric.fundamental_tensor(&x, &y)?;
    let mut entries = vec![
        ("kind".to_string(), metric.kind().name().to_string()),
        ("dim".to_string(), metric.dim().to_string()),
        ("reversible_claim".to_string(), metric.is_reversible().to_string()),
        ("reversible_measured".to_string(), reversible.to_string()),
        ("strongly_convex".to_string(), convexity.pass.to_string()),
        ("min_eigenvalue".to_string(), convexity.min_eigenvalue.to_string()),
    ];
    for i in 0..metric.dim() {
        for j in 0..metric.dim() {
            entries.push((format!("g_e0_{i}{j}"), g.g[(i, j)].to_string()));
        }
    }
    Ok(KeyValueReport { entries, verdict: Some(convexity.pass) })
}

fn moments(config: &RunConfig, metric: &FinslerMetric) -> Result<KeyValueReport> {
    let x = config.point();
    let m = indicatrix_moments(metric, &x, config.sphere_nodes())?;
    let mut entries: Vec<(String, String)> = m.table().header.into_iter().zip(m.table().rows.remove(0)).collect();
    let samples = config.analysis.samples.unwrap_or(0);
    let mut verdict = None;
    if samples > 0 {
        let mc = monte_carlo_moments(metric, &x, samples, config.seed())?;
        let z = (m.density() - mc.density).abs() / mc.density_se;
        entries.push(("mc_density".into(), mc.density.to_string()));
        entries.push(("mc_density_se".into(), mc.density_se.to_string()));
        entries.push(("mc_z".into(), z.to_string()));
        verdict = Some(z <= 3.0);
    }
    Ok(KeyValueReport { entries, verdict })
}

fn osculating(config: &RunConfig, metric: &FinslerMetric, domain: &Arc<DiscreteDomain>) -> Result<OsculatingField> {
    let osc = osculating_field(metric, domain.clone(), config.sphere_nodes())?;
    if config.k() == 2 && domain.as_box().is_some() {
        osc.with_christoffels()
    } else {
        Ok(osc)
    }
}

fn source_node(config: &RunConfig, domain: &Arc<DiscreteDomain>) -> Result<usize> {
    let target = config.analysis.source.clone().unwrap_or(vec![0.0; domain.ambient_dim()]);
    if target.len() != domain.ambient_dim() {
        return Err(Error::Config(format!("analysis.source needs {} entries", domain.ambient_dim())));
    }
    let d2 = |i: usize| domain.point(i).iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    Ok((0..domain.node_count()).min_by(|&a, &b| d2(a).total_cmp(&d2(b))).unwrap_or(0))
}

fn interior_params(config: &RunConfig) -> Result<InteriorParams> {
    let a = &config.analysis;
    match (&a.j, &a.epsilon) {
        (Some(j), Some(eps)) => Ok(InteriorParams {
            j_sequence: j.clone(),
            eps_sequence: eps.clone(),
            p: config.p(),
            k: config.k(),
            tolerance: config.tolerance(),
        }),
        _ => Err(Error::Config("the interior pipeline needs analysis.j and analysis.epsilon".into())),
    }
}

/// Builtin fields by name, otherwise a container path.
fn load_field(config: &RunConfig, domain: &Arc<DiscreteDomain>) -> Result<ScalarField> {
    let name = config.analysis.field.as_deref().unwrap_or("gaussian");
    let scale = config.analysis.scale.unwrap_or(1.0);
    match name {
        "gaussian" => ScalarField::from_fn(domain.clone(), |x| {
            (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * scale * scale)).exp()
        }),
        "linear" => ScalarField::from_fn(domain.clone(), |x| x[0]),
        "quadratic" => ScalarField::from_fn(domain.clone(), |x| x[0] * x[0] + x.get(1).copied().unwrap_or(0.0)),
        "sign-x3" => {
            if domain.ambient_dim() < 3 {
                return Err(Error::Config("sign-x3 needs three coordinates".into()));
            }
            ScalarField::from_fn(domain.clone(), |x| x[2].signum() * (x[2] != 0.0) as u8 as f64)
        }
        path => {
            let field = read_field(Path::new(path))?;
            if field.domain().node_count() != domain.node_count() {
                return Err(Error::Config(format!("field container {path} does not match the configured domain")));
            }
            ScalarField::new(domain.clone(), field.values().to_vec())
        }
    }
}

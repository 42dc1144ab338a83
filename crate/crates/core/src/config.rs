//! Run configuration: a TOML document with `[metric]`, `[domain]`,
//! `[analysis]` and `[output]` sections. Unknown keys are rejected.

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{build_box_chart, build_icosphere, DiscreteDomain};
use crate::error::{Error, Result};
use crate::metric::FinslerMetric;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    MetricInfo,
    Moments,
    Distance,
    Norms,
    Approximate,
    Dirichlet,
    Counterexample,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::MetricInfo => "metric-info",
            Command::Moments => "moments",
            Command::Distance => "distance",
            Command::Norms => "norms",
            Command::Approximate => "approximate",
            Command::Dirichlet => "dirichlet",
            Command::Counterexample => "counterexample",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKindConfig {
    Euclidean,
    Riemannian,
    Randers,
    PerturbedReversible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub kind: MetricKindConfig,
    pub dim: usize,
    /// Row-major entries of `g` (riemannian) or `a` (randers).
    pub matrix: Option<Vec<f64>>,
    /// `b` for randers.
    pub covector: Option<Vec<f64>>,
    /// Perturbation strength for perturbed-reversible.
    pub lambda: Option<f64>,
}

impl MetricConfig {
    fn matrix_or_identity(&self) -> Result<DMatrix<f64>> {
        let n = self.dim;
        match &self.matrix {
            None => Ok(DMatrix::identity(n, n)),
            Some(m) if m.len() == n * n => Ok(DMatrix::from_row_slice(n, n, m)),
            Some(m) => Err(Error::Config(format!("metric.matrix needs {} entries, got {}", n * n, m.len()))),
        }
    }

    pub fn build(&self) -> Result<FinslerMetric> {
        match self.kind {
            MetricKindConfig::Euclidean => FinslerMetric::euclidean(self.dim),
            MetricKindConfig::Riemannian => FinslerMetric::riemannian_constant(self.matrix_or_identity()?),
            MetricKindConfig::Randers => {
                let b = self
                    .covector
                    .as_ref()
                    .ok_or_else(|| Error::Config("metric.covector is required for randers".into()))?;
                if b.len() != self.dim {
                    return Err(Error::Config(format!("metric.covector needs {} entries", self.dim)));
                }
                FinslerMetric::randers_constant(self.matrix_or_identity()?, DVector::from_column_slice(b))
            }
            MetricKindConfig::PerturbedReversible => {
                let lambda = self
                    .lambda
                    .ok_or_else(|| Error::Config("metric.lambda is required for perturbed-reversible".into()))?;
                FinslerMetric::perturbed_reversible(self.dim, lambda)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKindConfig {
    #[default]
    Box,
    Icosphere,
    /// Chart `[lower, 0] × …` around the half-ball `{|x| ≤ 1, x¹ ≤ 0}`.
    HalfBall,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default)]
    pub kind: DomainKindConfig,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub nodes: Option<Vec<usize>>,
    pub level: Option<usize>,
}

impl DomainConfig {
    pub fn build(&self, dim: usize) -> Result<Arc<DiscreteDomain>> {
        let domain = match self.kind {
            DomainKindConfig::Icosphere => {
                if dim != 3 {
                    return Err(Error::Config("icosphere domains need a metric of dimension 3".into()));
                }
                build_icosphere(self.level.unwrap_or(4))?
            }
            DomainKindConfig::Box | DomainKindConfig::HalfBall => {
                let half = self.kind == DomainKindConfig::HalfBall;
                let (dl, du) = if half {
                    let mut l = vec![-1.25; dim];
                    l[0] = -1.5;
                    let mut u = vec![1.25; dim];
                    u[0] = 0.0;
                    (l, u)
                } else {
                    (vec![-1.0; dim], vec![1.0; dim])
                };
                let lower = self.lower.clone().unwrap_or(dl);
                let upper = self.upper.clone().unwrap_or(du);
                let nodes = self.nodes.clone().unwrap_or(vec![41; dim]);
                if lower.len() != dim || upper.len() != dim || nodes.len() != dim {
                    return Err(Error::Config(format!("domain.lower/upper/nodes need {dim} entries")));
                }
                if half && upper[0] != 0.0 {
                    return Err(Error::Config("half-ball charts must have upper[0] = 0".into()));
                }
                build_box_chart(&lower, &upper, &nodes)?
            }
        };
        Ok(Arc::new(domain))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineConfig {
    #[default]
    Interior,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub p: Option<f64>,
    pub k: Option<usize>,
    /// Evaluation point for metric-info and moments.
    pub point: Option<Vec<f64>>,
    pub sphere_nodes: Option<usize>,
    /// Point whose nearest node is the distance source `x₀`.
    pub source: Option<Vec<f64>>,
    pub pipeline: Option<PipelineConfig>,
    pub j: Option<Vec<f64>>,
    pub epsilon: Option<Vec<f64>>,
    pub m: Option<Vec<usize>>,
    pub widths: Option<Vec<f64>>,
    /// Final-error threshold for pipelines. For `dirichlet` it applies to the
    /// smoothing stage and is relative to the solution's norm (default 0.05).
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    /// Builtin field name (`gaussian`, `linear`, `quadratic`, `sign-x3`) or a
    /// path to a field container.
    pub field: Option<String>,
    /// Length scale of the builtin gaussian.
    pub scale: Option<f64>,
    /// Monte Carlo cross-check sample count for moments (0 disables it).
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub command: Command,
    pub metric: MetricConfig,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn p(&self) -> f64 {
        self.analysis.p.unwrap_or(2.0)
    }

    pub fn k(&self) -> usize {
        self.analysis.k.unwrap_or(1)
    }

    pub fn seed(&self) -> u64 {
        self.analysis.seed.unwrap_or(0)
    }

    pub fn tolerance(&self) -> f64 {
        self.analysis.tolerance.unwrap_or(1e-2)
    }

    pub fn sphere_nodes(&self) -> usize {
        self.analysis.sphere_nodes.unwrap_or(crate::indicatrix::DEFAULT_SPHERE_NODES)
    }

    pub fn point(&self) -> Vec<f64> {
        self.analysis.point.clone().unwrap_or(vec![0.0; self.metric.dim])
    }

    pub fn m_sequence(&self) -> Vec<usize> {
        self.analysis.m.clone().unwrap_or(vec![4, 8, 16, 32])
    }

    pub fn widths(&self) -> Vec<f64> {
        self.analysis.widths.clone().unwrap_or(vec![0.5, 0.2, 0.1, 0.05])
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn prefix(&self) -> String {
        self.output.prefix.clone().unwrap_or_else(|| self.command.name().to_string())
    }

    /// Canonical TOML form, used as the config echo in report metadata.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version = {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.metric.dim == 0 {
            return Err(Error::Config("metric.dim must be positive".into()));
        }
        let a = &self.analysis;
        if let Some(p) = a.p {
            if !(p >= 1.0) || !p.is_finite() {
                return Err(Error::Config(format!("analysis.p = {p} must satisfy p >= 1")));
            }
        }
        if a.k.is_some_and(|k| k > 2) {
            return Err(Error::Config("analysis.k must be 0, 1 or 2".into()));
        }
        if let Some(j) = &a.j {
            if j.is_empty() || j.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Config("analysis.j must be nonempty and nondecreasing".into()));
            }
        }
        if let Some(e) = &a.epsilon {
            if e.is_empty() || e.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::Config("analysis.epsilon must be nonempty and positive".into()));
            }
        }
        if let (Some(j), Some(e)) = (&a.j, &a.epsilon) {
            if j.len() != e.len() {
                return Err(Error::Config("analysis.j and analysis.epsilon must have equal length".into()));
            }
        }
        if let Some(m) = &a.m {
            if m.is_empty() || m[0] == 0 || m.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config("analysis.m must be nonempty, positive and increasing".into()));
            }
        }
        if let Some(w) = &a.widths {
            if w.is_empty() || w.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::Config("analysis.widths must be nonempty and positive".into()));
            }
        }
        if a.tolerance.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config("analysis.tolerance must be positive".into()));
        }
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "schema_version = 1\ncommand = \"moments\"\n\n[metric]\nkind = \"euclidean\"\ndim = 2\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.command, Command::Moments);
        assert_eq!(c.p(), 2.0);
        assert_eq!(c.sphere_nodes(), 2048);
        assert_eq!(c.point(), vec![0.0, 0.0]);
        assert_eq!(c.domain.kind, DomainKindConfig::Box);
        assert!(c.metric.build().is_ok());
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn p_below_one_is_rejected() {
        let text = format!("{MINIMAL}\n[analysis]\np = 0.5\n");
        assert!(matches!(parse_config(&text), Err(Error::Config(m)) if m.contains("p >= 1")));
    }

    #[test]
    fn unknown_key_is_named() {
        let text = format!("{MINIMAL}\n[analysis]\nfastmode = true\n");
        match parse_config(&text) {
            Err(Error::Config(m)) => assert!(m.contains("fastmode"), "{m}"),
            other => panic!("{other:?}"),
        }
        let text = format!("{MINIMAL}\n[extras]\nx = 1\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn missing_and_mistyped_keys() {
        assert!(parse_config("command = \"moments\"\n[metric]\nkind = \"euclidean\"\ndim = 2\n").is_err());
        assert!(parse_config("schema_version = 2\ncommand = \"moments\"\n[metric]\nkind = \"euclidean\"\ndim = 2\n")
            .is_err());
        assert!(parse_config(
            "schema_version = 1\ncommand = \"moments\"\n[metric]\nkind = \"euclidean\"\ndim = \"two\"\n"
        )
        .is_err());
        assert!(
            parse_config("schema_version = 1\ncommand = \"fly\"\n[metric]\nkind = \"euclidean\"\ndim = 2\n").is_err()
        );
    }

    #[test]
    fn metric_blocks() {
        let text = "schema_version = 1\ncommand = \"metric-info\"\n[metric]\nkind = \"randers\"\ndim = 2\ncovector = [0.3, 0.0]\n";
        let m = parse_config(text).unwrap().metric.build().unwrap();
        assert!((m.value(&[0.0, 0.0], &[1.0, 0.0]) - 1.3).abs() < 1e-12);
        let text = "schema_version = 1\ncommand = \"metric-info\"\n[metric]\nkind = \"randers\"\ndim = 2\n";
        assert!(parse_config(text).unwrap().metric.build().is_err());
    }
}

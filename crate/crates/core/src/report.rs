//! CSV, `.meta` and plot-data emission for every report type.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::counterexample::CounterexampleReport;
use crate::density::{ApproximationReport, Pipeline};
use crate::dirichlet::SolveReport;
use crate::distance::DistanceField;
use crate::error::Result;
use crate::indicatrix::MomentResult;
use crate::sobolev::SobolevReport;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| crate::error::Error::Container(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::error::Error::Container(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Shortest round-trip form; scientific outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Anything that can be written as a CSV table with a key-value summary.
pub trait Report {
    fn table(&self) -> Table;
    fn summary(&self) -> Vec<(String, String)>;
    /// Two columns per curve, when the report has curves.
    fn plot(&self) -> Option<Table> {
        None
    }
    fn verdict(&self) -> Option<bool> {
        None
    }
}

impl Report for ApproximationReport {
    fn table(&self) -> Table {
        let param = match self.pipeline {
            Pipeline::Interior => "j",
            Pipeline::Boundary => "m",
        };
        let mut t = Table::new([
            param,
            "epsilon",
            "lp_err",
            "grad_err",
            "hkp_err",
            "support_radius",
            "support_interior",
            "tail_lhs",
            "tail_rhs",
            "leibniz_lhs",
            "leibniz_rhs",
        ]);
        for r in &self.rows {
            t.push(vec![
                num(r.parameter),
                num(r.epsilon),
                num(r.lp_error),
                num(r.grad_error),
                num(r.hkp_error),
                num(r.support_radius),
                r.support_interior.to_string(),
                opt(r.tail.map(|t| t.0)),
                opt(r.tail.map(|t| t.1)),
                opt(r.leibniz.map(|t| t.0)),
                opt(r.leibniz.map(|t| t.1)),
            ]);
        }
        t
    }

    fn summary(&self) -> Vec<(String, String)> {
        let mut s = vec![
            ("pipeline".into(), self.pipeline.name().into()),
            ("p".into(), num(self.p)),
            ("k".into(), self.k.to_string()),
            ("tolerance".into(), num(self.tolerance)),
            ("verdict".into(), self.verdict.to_string()),
            ("errors_decreasing".into(), self.errors_decreasing().to_string()),
            ("non_reversible_metric".into(), self.non_reversible_metric.to_string()),
            ("stopped_early".into(), self.stopped_early.to_string()),
        ];
        if self.pipeline == Pipeline::Interior {
            s.push(("tail_bound_holds".into(), self.tail_bound_holds().to_string()));
        } else {
            let orders: Vec<String> = self.empirical_orders().into_iter().map(num).collect();
            s.push(("empirical_orders".into(), orders.join(" ")));
        }
        s
    }

    fn plot(&self) -> Option<Table> {
        let param = match self.pipeline {
            Pipeline::Interior => "j",
            Pipeline::Boundary => "m",
        };
        let mut t = Table::new([param, "hkp_err", param, "lp_err", param, "grad_err"]);
        for r in &self.rows {
            let x = num(r.parameter);
            t.push(vec![x.clone(), num(r.hkp_error), x.clone(), num(r.lp_error), x, num(r.grad_error)]);
        }
        Some(t)
    }

    fn verdict(&self) -> Option<bool> {
        Some(self.verdict)
    }
}

impl Report for CounterexampleReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["w", "lp_err", "grad_err", "h1p_err", "holder_lhs", "holder_rhs"]);
        for r in &self.rows {
            t.push(vec![
                num(r.w),
                num(r.lp_err),
                num(r.grad_err),
                num(r.h1p_err),
                num(r.holder_lhs),
                num(r.holder_rhs),
            ]);
        }
        t
    }

    fn summary(&self) -> Vec<(String, String)> {
        let mut s = vec![
            ("p".into(), num(self.p)),
            ("p_conjugate".into(), num(self.p_conjugate)),
            ("floor".into(), num(self.floor)),
            ("slack".into(), num(self.slack)),
            ("grid".into(), format!("{}x{}", self.nodes[0], self.nodes[1])),
            ("step_norm".into(), num(self.step_norm)),
            ("min_error".into(), num(self.min_error())),
            ("skipped_widths".into(), self.skipped.iter().map(|w| num(*w)).collect::<Vec<_>>().join(" ")),
            ("verdict".into(), self.verdict.to_string()),
        ];
        for r in &self.rows {
            s.push((format!("w={}.psi_a", num(r.w)), num(r.psi_a)));
            s.push((format!("w={}.psi_b", num(r.w)), num(r.psi_b)));
            s.push((format!("w={}.psi_integral", num(r.w)), num(r.psi_integral)));
        }
        s
    }

    fn plot(&self) -> Option<Table> {
        let mut t = Table::new(["w", "h1p_err", "w", "floor"]);
        for r in &self.rows {
            t.push(vec![num(r.w), num(r.h1p_err), num(r.w), num(self.floor)]);
        }
        Some(t)
    }

    fn verdict(&self) -> Option<bool> {
        Some(self.verdict)
    }
}

impl Report for SobolevReport {
    fn table(&self) -> Table {
        let mut header = vec!["p".to_string(), "k".to_string()];
        header.extend((0..self.terms.len()).map(|l| format!("term_{l}")));
        header.push("total".into());
        header.push("total_variant".into());
        let mut row = vec![num(self.p), self.k.to_string()];
        row.extend(self.terms.iter().map(|t| num(*t)));
        row.push(num(self.total));
        row.push(num(self.total_variant));
        Table { header, rows: vec![row] }
    }

    fn summary(&self) -> Vec<(String, String)> {
        vec![("total".into(), num(self.total)), ("total_variant".into(), num(self.total_variant))]
    }
}

impl Report for SolveReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["test_function", "weak_residual"]);
        for (i, r) in self.weak_residuals.iter().enumerate() {
            t.push(vec![i.to_string(), num(*r)]);
        }
        t
    }

    fn summary(&self) -> Vec<(String, String)> {
        vec![
            ("iterations".into(), self.iterations.to_string()),
            ("final_residual".into(), num(self.final_residual)),
            ("converged".into(), self.converged.to_string()),
            ("compatibility".into(), num(self.compatibility)),
            ("energy_residual".into(), num(self.energy_residual)),
            ("mean".into(), num(self.mean)),
            ("max_weak_residual".into(), num(self.weak_residuals.iter().cloned().fold(0.0, f64::max))),
        ]
    }

    fn verdict(&self) -> Option<bool> {
        Some(self.converged)
    }
}

impl Report for MomentResult {
    fn table(&self) -> Table {
        let n = self.dim();
        let k = self.osculating();
        let mut header = vec!["volume".to_string(), "density".to_string()];
        let mut row = vec![num(self.volume), num(self.density())];
        for i in 0..n {
            for j in 0..n {
                header.push(format!("k_{i}{j}"));
                row.push(num(k[(i, j)]));
            }
        }
        Table { header, rows: vec![row] }
    }

    fn summary(&self) -> Vec<(String, String)> {
        vec![("sphere_nodes".into(), self.node_count.to_string())]
    }
}

impl Report for DistanceField {
    fn table(&self) -> Table {
        let d = self.domain();
        let mut header: Vec<String> = (0..d.ambient_dim()).map(|k| format!("x{k}")).collect();
        header.push("distance".into());
        let rows = (0..d.node_count())
            .map(|i| {
                let mut r: Vec<String> = d.point(i).into_iter().map(num).collect();
                r.push(num(self.values[i]));
                r
            })
            .collect();
        Table { header, rows }
    }

    fn summary(&self) -> Vec<(String, String)> {
        vec![
            ("source".into(), self.source.to_string()),
            ("stencil".into(), format!("{:?}", self.stencil)),
            ("max_distance".into(), num(self.max_finite())),
            ("unreachable".into(), self.unreachable.len().to_string()),
        ]
    }
}

/// Key-value rows only, for commands without tabular output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeyValueReport {
    pub entries: Vec<(String, String)>,
    pub verdict: Option<bool>,
}

impl Report for KeyValueReport {
    fn table(&self) -> Table {
        let mut t = Table::new(["key", "value"]);
        for (k, v) in &self.entries {
            t.push(vec![k.clone(), v.clone()]);
        }
        t
    }

    fn summary(&self) -> Vec<(String, String)> {
        Vec::new()
    }

    fn verdict(&self) -> Option<bool> {
        self.verdict
    }
}

/// Run context written to the `.meta` file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub command: String,
    pub seed: u64,
    pub config_echo: String,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedFiles {
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub plot: Option<PathBuf>,
}

/// Writes `<prefix>.csv`, `<prefix>.meta` and, when available,
/// `<prefix>.plot.csv` into `dir`. The CSV depends only on the report, so
/// repeated runs produce identical bytes; timing goes to `.meta`.
pub fn emit_report(report: &dyn Report, dir: &Path, prefix: &str, meta: &RunMeta) -> Result<EmittedFiles> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{prefix}.csv"));
    fs::write(&csv, report.table().to_csv()?)?;
    let plot = match report.plot() {
        Some(t) => {
            let path = dir.join(format!("{prefix}.plot.csv"));
            fs::write(&path, t.to_csv()?)?;
            Some(path)
        }
        None => None,
    };
    let mut text = String::new();
    text.push_str(&format!("schema_version = {REPORT_SCHEMA_VERSION}\n"));
    text.push_str(&format!("command = {}\n", meta.command));
    text.push_str(&format!("seed = {}\n", meta.seed));
    text.push_str(&format!("wall_time_s = {}\n", meta.wall_time.as_secs_f64()));
    if let Some(v) = report.verdict() {
        text.push_str(&format!("verdict = {v}\n"));
    }
    for (k, v) in report.summary() {
        text.push_str(&format!("{k} = {v}\n"));
    }
    text.push_str("\n[config]\n");
    text.push_str(&meta.config_echo);
    let meta_path = dir.join(format!("{prefix}.meta"));
    fs::write(&meta_path, text)?;
    Ok(EmittedFiles { csv, meta: meta_path, plot })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexample::run_counterexample;
    use crate::density::ApproximationRow;

    fn meta() -> RunMeta {
        RunMeta {
            command: "test".into(),
            seed: 3,
            config_echo: "schema_version = 1\n".into(),
            wall_time: Duration::from_millis(5),
        }
    }

    #[test]
    fn approximation_rows_and_determinism() {
        let row = |j: f64| ApproximationRow {
            parameter: j,
            epsilon: 0.1,
            lp_error: 0.5 / j,
            grad_error: 1.0 / j,
            hkp_error: 1.5 / j,
            support_radius: j + 1.0,
            support_interior: true,
            tail: Some((0.1, 0.2)),
            leibniz: None,
        };
        let report = ApproximationReport {
            pipeline: Pipeline::Interior,
            p: 2.0,
            k: 1,
            tolerance: 1.0,
            rows: vec![row(1.0), row(2.0), row(3.0)],
            verdict: true,
            non_reversible_metric: false,
            stopped_early: false,
            approximants: Vec::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        let a = emit_report(&report, dir.path(), "a", &meta()).unwrap();
        let b = emit_report(&report, dir.path(), "b", &meta()).unwrap();
        let text = fs::read_to_string(&a.csv).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text, fs::read_to_string(&b.csv).unwrap());
        let plot = fs::read_to_string(a.plot.unwrap()).unwrap();
        assert!(plot.starts_with("j,hkp_err,j,lp_err,j,grad_err\n"));
        let m = fs::read_to_string(a.meta).unwrap();
        assert!(m.contains("verdict = true") && m.contains("seed = 3") && m.contains("[config]"));
    }

    #[test]
    fn counterexample_schema() {
        let r = run_counterexample(2.0, &[0.5], [41, 21]).unwrap();
        let t = r.table();
        assert_eq!(t.header, vec!["w", "lp_err", "grad_err", "h1p_err", "holder_lhs", "holder_rhs"]);
        assert_eq!(t.rows.len(), 1);
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, "x").unwrap();
        let kv = KeyValueReport::default();
        assert!(emit_report(&kv, &file.join("sub"), "x", &meta()).is_err());
    }
}

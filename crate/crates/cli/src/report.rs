//! Report documents and the CSV side outputs.

use std::collections::BTreeMap;
use std::path::Path;

use fineq::engine::TestResult;
use fineq::montecarlo::ExperimentReport;
use fineq::numerics::EvalGrid;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub rows: usize,
    pub observations: usize,
    pub group_counts: BTreeMap<i64, usize>,
}

/// Everything needed to reproduce a run: the resolved configuration, the
/// library version and the payload. Only `wall_clock_secs` varies between
/// identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument<C, P> {
    pub library_version: String,
    pub command: String,
    pub config: C,
    pub seed: u64,
    pub data: Option<DataSummary>,
    pub wall_clock_secs: f64,
    pub payload: P,
}

impl<C: Serialize, P: Serialize> ReportDocument<C, P> {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Numeric(format!("cannot serialise report: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| CliError::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Data(format!("{}: {other:?}", path.display())),
    }
}

/// One row per grid point: `tau, x1..xd, usable, u1..uJ, contact`, where
/// `contact` names the contact set (`1+2`) or is empty.
pub fn write_grid_csv(path: &Path, grid: &EvalGrid, result: &TestResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let j = result.fields.num_inequalities();
    let mut header = vec!["tau".to_string()];
    header.extend((1..=grid.x_dim()).map(|m| format!("x{m}")));
    header.push("usable".into());
    header.extend((1..=j).map(|k| format!("u{k}")));
    header.push("contact".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    let membership = result.contact.membership();
    for g in 0..grid.len() {
        let (_, ix) = grid.split_index(g);
        let mut row = vec![grid.tau_at(g).to_string()];
        row.extend(grid.x_point(ix).iter().map(f64::to_string));
        row.push(result.fields.usable[g].to_string());
        row.extend(result.fields.u.iter().map(|uj| uj[g].to_string()));
        let set = membership[g];
        row.push(
            (0..j)
                .filter(|k| set & (1 << k) != 0)
                .map(|k| (k + 1).to_string())
                .collect::<Vec<_>>()
                .join("+"),
        );
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One row per `(design, θ mode, C_cs)` cell.
pub fn write_coverage_csv(path: &Path, reports: &[ExperimentReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record([
        "shape", "L", "sigma", "n", "theta_mode", "theta", "c_cs", "coverage", "mc_se", "non_rejections", "n_mc",
    ])
    .map_err(|e| csv_error(path, e))?;
    for r in reports {
        let dgp = &r.config.dgp;
        let shape = serde_json::to_value(dgp.shape)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        let mode = serde_json::to_value(r.config.theta_mode)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        for c in &r.cells {
            w.write_record([
                shape.clone(),
                dgp.l.to_string(),
                dgp.sigma.to_string(),
                dgp.n.to_string(),
                mode.clone(),
                r.theta.to_string(),
                c.c_cs.to_string(),
                c.coverage.to_string(),
                c.mc_se.to_string(),
                c.non_rejections.to_string(),
                c.n_mc.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

//! CSV and JSON artifacts.
//!
//! Numbers are written with 17 significant digits in the style of C's
//! `%.17g`, '.' as decimal separator, ',' as field separator and LF line
//! endings, so repeated runs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::bsde::{AdjointMeans, AdjointPath};
use crate::error::Result;
use crate::harness::RateReport;
use crate::mesh::TimeMesh;
use crate::policy::FeedbackPolicy;
use crate::riccati::RiccatiSequence;
use crate::simulate::{MeanTrajectory, Moments, SimulatedPath};

/// Formats `v` like `printf("%.17g", v)`.
pub fn fmt_g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        strip_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Row-oriented CSV builder.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    out: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut csv = Self::default();
        csv.line(header.iter().map(|s| s.as_ref().to_string()));
        csv
    }

    fn line(&mut self, cells: impl IntoIterator<Item = String>) {
        let mut first = true;
        for cell in cells {
            if !first {
                self.out.push(',');
            }
            self.out.push_str(&cell);
            first = false;
        }
        self.out.push('\n');
    }

    /// Appends a row of already formatted cells.
    pub fn row(&mut self, cells: Vec<String>) {
        self.line(cells);
    }

    pub fn as_str(&self) -> &str {
        &self.out
    }

    pub fn into_string(self) -> String {
        self.out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.out)?;
        Ok(())
    }
}

fn indexed(prefix: &str, len: usize) -> Vec<String> {
    (0..len).map(|i| format!("{prefix}_{i}")).collect()
}

fn matrix_names(prefix: &str, rows: usize, cols: usize) -> Vec<String> {
    (0..rows)
        .flat_map(|i| (0..cols).map(move |j| format!("{prefix}_{i}_{j}")))
        .collect()
}

fn matrix_cells(m: &DMatrix<f64>) -> impl Iterator<Item = String> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| fmt_g17(m[(i, j)])))
}

fn vector_cells<'a>(v: impl IntoIterator<Item = &'a f64>) -> impl Iterator<Item = String> {
    v.into_iter().map(|x| fmt_g17(*x)).collect::<Vec<_>>().into_iter()
}

fn blanks(len: usize) -> impl Iterator<Item = String> {
    std::iter::repeat_n(String::new(), len)
}

fn lead(mesh: &TimeMesh, k: usize) -> Vec<String> {
    vec![k.to_string(), fmt_g17(mesh.t(k))]
}

/// `k,t,<name>_i_j…` with one row per grid point.
pub fn riccati_csv(seq: &RiccatiSequence, name: &str) -> Csv {
    let n = seq.get(0).nrows();
    let mut header = vec!["k".to_string(), "t".into()];
    header.extend(matrix_names(name, n, n));
    let mut csv = Csv::new(&header);
    for (k, value) in seq.values().iter().enumerate() {
        let mut row = lead(seq.mesh(), k);
        row.extend(matrix_cells(value.as_matrix()));
        csv.row(row);
    }
    csv
}

/// `k,t,K1_i_j…,K2_i_j…` for `k = 0..N−1`.
pub fn gains_csv(policy: &FeedbackPolicy) -> Csv {
    let (m, n) = policy.k1[0].shape();
    let mut header = vec!["k".to_string(), "t".into()];
    header.extend(matrix_names("K1", m, n));
    header.extend(matrix_names("K2", m, n));
    let mut csv = Csv::new(&header);
    for k in 0..policy.steps() {
        let mut row = lead(&policy.mesh, k);
        row.extend(matrix_cells(&policy.k1[k]));
        row.extend(matrix_cells(&policy.k2[k]));
        csv.row(row);
    }
    csv
}

/// `k,t,mean_x_i…,mean_u_i…`; the control cells are empty at `k = N`.
pub fn means_csv(means: &MeanTrajectory) -> Csv {
    let n = means.mean_x[0].len();
    let m = means.mean_u.first().map_or(0, |u| u.len());
    let mut header = vec!["k".to_string(), "t".into()];
    header.extend(indexed("mean_x", n));
    header.extend(indexed("mean_u", m));
    let mut csv = Csv::new(&header);
    for (k, x) in means.mean_x.iter().enumerate() {
        let mut row = lead(&means.mesh, k);
        row.extend(vector_cells(x.iter()));
        match means.mean_u.get(k) {
            Some(u) => row.extend(vector_cells(u.iter())),
            None => row.extend(blanks(m)),
        }
        csv.row(row);
    }
    csv
}

/// Empirical moments with their standard errors.
pub fn moments_csv(mesh: &TimeMesh, moments: &Moments) -> Csv {
    let n = moments.mean_x[0].len();
    let m = moments.mean_u.first().map_or(0, |u| u.len());
    let mut header = vec!["k".to_string(), "t".into()];
    header.extend(indexed("Ex", n));
    header.push("E|x|^2".into());
    header.extend(indexed("Eu", m));
    header.push("E|u|^2".into());
    header.extend(indexed("se_Ex", n));
    header.push("se_E|x|^2".into());
    header.extend(indexed("se_Eu", m));
    header.push("se_E|u|^2".into());
    let mut csv = Csv::new(&header);
    for k in 0..moments.mean_x.len() {
        let has_u = k < moments.mean_u.len();
        let mut row = lead(mesh, k);
        row.extend(vector_cells(moments.mean_x[k].iter()));
        row.push(fmt_g17(moments.sq_x[k]));
        if has_u {
            row.extend(vector_cells(moments.mean_u[k].iter()));
            row.push(fmt_g17(moments.sq_u[k]));
        } else {
            row.extend(blanks(m + 1));
        }
        row.extend(vector_cells(moments.se_mean_x[k].iter()));
        row.push(fmt_g17(moments.se_sq_x[k]));
        if has_u {
            row.extend(vector_cells(moments.se_mean_u[k].iter()));
            row.push(fmt_g17(moments.se_sq_u[k]));
        } else {
            row.extend(blanks(m + 1));
        }
        csv.row(row);
    }
    csv
}

/// Long-format path dump `path,k,t,x_i…,u_i…,dW`; `u` and `dW` are empty
/// at `k = N`.
pub fn paths_csv(mesh: &TimeMesh, paths: &[SimulatedPath]) -> Csv {
    let n = paths.first().map_or(0, |p| p.x.nrows());
    let m = paths.first().map_or(0, |p| p.u.nrows());
    let mut header = vec!["path".to_string(), "k".into(), "t".into()];
    header.extend(indexed("x", n));
    header.extend(indexed("u", m));
    header.push("dW".into());
    let mut csv = Csv::new(&header);
    for (i, path) in paths.iter().enumerate() {
        for k in 0..=mesh.steps() {
            let mut row = vec![i.to_string()];
            row.extend(lead(mesh, k));
            row.extend(vector_cells(path.x.column(k).iter()));
            if k < mesh.steps() {
                row.extend(vector_cells(path.u.column(k).iter()));
                row.push(fmt_g17(path.dw[k]));
            } else {
                row.extend(blanks(m + 1));
            }
            csv.row(row);
        }
    }
    csv
}

fn adjoint_header(n: usize, with_path: bool) -> Vec<String> {
    let mut header = Vec::new();
    if with_path {
        header.push("path".to_string());
    }
    header.push("k".into());
    header.push("t".into());
    header.extend(indexed("y", n));
    header.extend(indexed("z", n));
    header.extend(indexed("mean_y", n));
    header.extend(indexed("mean_z", n));
    header
}

fn adjoint_rows(
    csv: &mut Csv,
    mesh: &TimeMesh,
    path_id: Option<usize>,
    y: &dyn Fn(usize) -> DVector<f64>,
    z: &dyn Fn(usize) -> DVector<f64>,
    means: &AdjointMeans,
) {
    let n = means.mean_y[0].len();
    for k in 0..=mesh.steps() {
        let mut row = Vec::new();
        if let Some(i) = path_id {
            row.push(i.to_string());
        }
        row.extend(lead(mesh, k));
        row.extend(vector_cells(y(k).iter()));
        if k < mesh.steps() {
            row.extend(vector_cells(z(k).iter()));
        } else {
            row.extend(blanks(n));
        }
        row.extend(vector_cells(means.mean_y[k].iter()));
        if k < mesh.steps() {
            row.extend(vector_cells(means.mean_z[k].iter()));
        } else {
            row.extend(blanks(n));
        }
        csv.row(row);
    }
}

/// `k,t,y…,z…,mean_y…,mean_z…` for the mean adjoint pair (`y = E[y]`).
pub fn adjoint_means_csv(mesh: &TimeMesh, means: &AdjointMeans) -> Csv {
    let n = means.mean_y[0].len();
    let mut csv = Csv::new(&adjoint_header(n, false));
    adjoint_rows(
        &mut csv,
        mesh,
        None,
        &|k| means.mean_y[k].clone(),
        &|k| means.mean_z[k].clone(),
        means,
    );
    csv
}

/// `path,k,t,y…,z…,mean_y…,mean_z…` for per-path reconstructions.
pub fn adjoint_paths_csv(mesh: &TimeMesh, paths: &[AdjointPath], means: &AdjointMeans) -> Csv {
    let n = means.mean_y[0].len();
    let mut csv = Csv::new(&adjoint_header(n, true));
    for (i, path) in paths.iter().enumerate() {
        adjoint_rows(
            &mut csv,
            mesh,
            Some(i),
            &|k| path.y.column(k).into_owned(),
            &|k| path.z.column(k).into_owned(),
            means,
        );
    }
    csv
}

/// `metric,N,tau,error,stderr,flag`; `stderr` is empty for deterministic
/// metrics.
pub fn rates_csv<'a>(reports: impl IntoIterator<Item = &'a RateReport>) -> Csv {
    let mut csv = Csv::new(&["metric", "N", "tau", "error", "stderr", "flag"]);
    for report in reports {
        for level in &report.levels {
            csv.row(vec![
                report.metric.clone(),
                level.steps.to_string(),
                fmt_g17(level.tau),
                fmt_g17(level.error),
                level.stderr.map(fmt_g17).unwrap_or_default(),
                level.flag.as_str().to_string(),
            ]);
        }
    }
    csv
}

/// JSON summary keyed by metric name.
pub fn rates_json<'a>(reports: impl IntoIterator<Item = &'a RateReport>) -> Value {
    let metrics: serde_json::Map<String, Value> = reports
        .into_iter()
        .map(|r| (r.metric.clone(), r.to_json()))
        .collect();
    json!({ "metrics": metrics })
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Io(e.to_string()))?;
    let _ = writeln!(text);
    fs::write(path, text)?;
    Ok(())
}

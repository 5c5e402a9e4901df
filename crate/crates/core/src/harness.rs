//! Convergence studies: error tables over doubling levels and least-squares
//! rate estimates.
//!
//! Every study compares the discrete scheme against an [`Oracle`]. The
//! closed-form [`ExampleSolution`](crate::analytic::ExampleSolution) covers
//! the worked example; [`ReferenceOracle`] covers any problem through the
//! RK4 Riccati reference, with pathwise values only when no noise channel is
//! active.
//!
//! Strong and adjoint studies couple all levels through one fine Brownian
//! grid per path (the finest requested level). Coarse increments are block
//! sums, and `W(t_k)` fed to the oracle is the left-to-right cumulative sum
//! of the fine increments.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::mesh::TimeMesh;
use crate::policy::continuous_gains;
use crate::problem::Problem;
use crate::riccati::{riccati_error, solve_continuous_reference, ContinuousRiccatiReference};
use crate::rng::{coarsen, BrownianSource};
use crate::simulate::{simulate_path, Accumulator};
use crate::solver::DiscreteSolution;
use crate::bsde::{reconstruct_means, reconstruct_path, YWeight};

/// Levels whose standard error exceeds this fraction of the metric are
/// flagged and left out of the fit.
pub const MC_LIMIT_FRACTION: f64 = 0.2;
/// Minimum number of usable levels for a slope fit.
pub const MIN_FIT_LEVELS: usize = 4;
/// Paths per deterministic reduction chunk.
const CHUNK: usize = 64;

/// Exact (or reference) solution of the continuous problem.
pub trait Oracle: Sync {
    /// `(P(t), Π(t))`.
    fn riccati(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>);
    fn mean_state(&self, t: f64) -> DVector<f64>;
    fn mean_control(&self, t: f64) -> DVector<f64>;
    /// Optimal `(x*(t), u*(t))` given `W(t)`, when they depend on `W(t)` only.
    fn pathwise(&self, t: f64, w: f64) -> Option<(DVector<f64>, DVector<f64>)>;
}

/// Oracle built from the RK4 Riccati reference and an RK4 integration of the
/// optimal mean dynamics `dE[x] = (Â − B̂Σ₁⁻¹(B̂ᵀΠ + D̂ᵀPĈ)) E[x] dt`.
///
/// The mean ODE is stepped with `2h` so that reference grid points serve as
/// RK4 midpoints; mean values live on every other reference point.
#[derive(Debug, Clone)]
pub struct ReferenceOracle {
    pub reference: ContinuousRiccatiReference,
    mean_mesh: TimeMesh,
    mean_x: Vec<DVector<f64>>,
    mean_u: Vec<DVector<f64>>,
    noise_free: bool,
}

impl ReferenceOracle {
    pub fn new(p: &Problem, n_ref: usize) -> Result<Self> {
        let reference = solve_continuous_reference(p, n_ref)?;
        let hat = p.hat();
        let ref_mesh = *reference.mesh();
        let mean_mesh = TimeMesh::new(p.horizon, n_ref / 2)?;
        let h = 2.0 * ref_mesh.tau();
        let closed_loop = |j: usize| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
            let (_, k2) = continuous_gains(p, reference.p.get(j), reference.pi.get(j))?;
            Ok((&hat.a - &hat.b * &k2, k2))
        };
        let mut mean_x = Vec::with_capacity(n_ref / 2 + 1);
        let mut mean_u = Vec::with_capacity(n_ref / 2 + 1);
        let mut x = p.x0.clone();
        for i in 0..n_ref / 2 {
            let (a0, k0) = closed_loop(2 * i)?;
            let (a1, _) = closed_loop(2 * i + 1)?;
            let (a2, _) = closed_loop(2 * i + 2)?;
            mean_u.push(-(&k0 * &x));
            mean_x.push(x.clone());
            let s1 = &a0 * &x;
            let s2 = &a1 * (&x + &s1 * (h / 2.0));
            let s3 = &a1 * (&x + &s2 * (h / 2.0));
            let s4 = &a2 * (&x + &s3 * h);
            x = &x + (s1 + s2 * 2.0 + s3 * 2.0 + s4) * (h / 6.0);
        }
        let (_, k_last) = closed_loop(n_ref)?;
        mean_u.push(-(&k_last * &x));
        mean_x.push(x);
        Ok(Self {
            reference,
            mean_mesh,
            mean_x,
            mean_u,
            noise_free: p.is_noise_free(),
        })
    }
}

fn lerp(mesh: &TimeMesh, values: &[DVector<f64>], t: f64) -> DVector<f64> {
    let k = mesh.left_index(t);
    let w = ((t - mesh.t(k)) / mesh.tau()).clamp(0.0, 1.0);
    if w == 0.0 {
        return values[k].clone();
    }
    &values[k] * (1.0 - w) + &values[k + 1] * w
}

impl Oracle for ReferenceOracle {
    fn riccati(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let (pm, pim) = self.reference.at(t);
        (pm.as_matrix().clone(), pim.as_matrix().clone())
    }

    fn mean_state(&self, t: f64) -> DVector<f64> {
        lerp(&self.mean_mesh, &self.mean_x, t)
    }

    fn mean_control(&self, t: f64) -> DVector<f64> {
        lerp(&self.mean_mesh, &self.mean_u, t)
    }

    fn pathwise(&self, t: f64, _w: f64) -> Option<(DVector<f64>, DVector<f64>)> {
        self.noise_free.then(|| (self.mean_state(t), self.mean_control(t)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelFlag {
    Ok,
    McLimited,
}

impl LevelFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            LevelFlag::Ok => "ok",
            LevelFlag::McLimited => "mc-limited",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelError {
    pub steps: usize,
    pub tau: f64,
    pub error: f64,
    /// Monte Carlo standard error; `None` for deterministic metrics.
    pub stderr: Option<f64>,
    pub flag: LevelFlag,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub slope: f64,
    /// 95% Student-t half-width; `None` with only two points.
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateFit {
    Fitted(RateEstimate),
    /// Some usable error is exactly zero, so no log-log slope exists.
    Degenerate,
    InsufficientLevels,
}

impl RateFit {
    pub fn status(&self) -> &'static str {
        match self {
            RateFit::Fitted(_) => "fitted",
            RateFit::Degenerate => "degenerate",
            RateFit::InsufficientLevels => "insufficient-levels",
        }
    }

    pub fn slope(&self) -> Option<f64> {
        match self {
            RateFit::Fitted(e) => Some(e.slope),
            _ => None,
        }
    }
}

/// Error table for one metric plus its fitted slope.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub metric: String,
    pub levels: Vec<LevelError>,
    pub fit: RateFit,
}

impl RateReport {
    /// Flags Monte Carlo-limited levels and fits the rest.
    pub fn new(metric: impl Into<String>, mut levels: Vec<LevelError>) -> Self {
        for level in &mut levels {
            level.flag = match level.stderr {
                Some(se) if se > MC_LIMIT_FRACTION * level.error => LevelFlag::McLimited,
                _ => LevelFlag::Ok,
            };
        }
        let usable: Vec<&LevelError> = levels.iter().filter(|l| l.flag == LevelFlag::Ok).collect();
        let fit = if usable.len() < MIN_FIT_LEVELS {
            RateFit::InsufficientLevels
        } else {
            let errors: Vec<f64> = usable.iter().map(|l| l.error).collect();
            let taus: Vec<f64> = usable.iter().map(|l| l.tau).collect();
            match estimate_rate(&errors, &taus) {
                Ok(est) => RateFit::Fitted(est),
                Err(_) => RateFit::Degenerate,
            }
        };
        Self {
            metric: metric.into(),
            levels,
            fit,
        }
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.slope()
    }

    /// Error at the level with `steps` steps.
    pub fn error_at(&self, steps: usize) -> Option<f64> {
        self.levels.iter().find(|l| l.steps == steps).map(|l| l.error)
    }

    /// Same metric refitted without its coarsest level.
    pub fn without_coarsest(&self) -> RateReport {
        RateReport::new(self.metric.clone(), self.levels.iter().skip(1).cloned().collect())
    }

    pub fn to_json(&self) -> Value {
        let (slope, half_width) = match self.fit {
            RateFit::Fitted(e) => (json!(e.slope), json!(e.half_width)),
            _ => (Value::Null, Value::Null),
        };
        json!({
            "metric": self.metric,
            "status": self.fit.status(),
            "slope": slope,
            "half_width": half_width,
            "levels": self.levels.iter().map(|l| json!({
                "N": l.steps,
                "tau": l.tau,
                "error": l.error,
                "stderr": l.stderr,
                "flag": l.flag.as_str(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Ordinary least squares of `log₂ error` on `log₂ τ`.
pub fn estimate_rate(errors: &[f64], taus: &[f64]) -> Result<RateEstimate> {
    if errors.len() != taus.len() {
        return Err(Error::DegenerateData("errors and taus differ in length".into()));
    }
    if errors.len() < 2 {
        return Err(Error::DegenerateData("need at least two points".into()));
    }
    if errors.iter().chain(taus).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::DegenerateData("errors and taus must be positive and finite".into()));
    }
    let xs: Vec<f64> = taus.iter().map(|t| t.log2()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.log2()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateData("all taus are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let half_width = if xs.len() > 2 {
        let intercept = my - slope * mx;
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        let dof = n - 2.0;
        let se = (rss / dof / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof)
            .map_err(|e| Error::DegenerateData(e.to_string()))?
            .inverse_cdf(0.975);
        Some(t * se)
    } else {
        None
    };
    Ok(RateEstimate { slope, half_width })
}

fn check_levels(levels: &[usize]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidConfig("no levels given".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) || levels[0] == 0 {
        return Err(Error::InvalidConfig("levels must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// Powers of two `2^lo ..= 2^hi`.
pub fn power_levels(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|e| 1usize << e).collect()
}

fn deterministic(steps: usize, tau: f64, error: f64) -> LevelError {
    LevelError {
        steps,
        tau,
        error,
        stderr: None,
        flag: LevelFlag::Ok,
    }
}

/// `max_k ‖P(t_k) − P_k‖` and `max_k ‖Π(t_k) − Π_k‖` against the RK4
/// reference on `n_ref` steps.
pub fn riccati_convergence(p: &Problem, levels: &[usize], n_ref: usize) -> Result<(RateReport, RateReport)> {
    check_levels(levels)?;
    let reference = solve_continuous_reference(p, n_ref)?;
    let mut p_rows = Vec::new();
    let mut pi_rows = Vec::new();
    for &steps in levels {
        let mesh = TimeMesh::new(p.horizon, steps)?;
        let sol = DiscreteSolution::compute(p, mesh)?;
        p_rows.push(deterministic(steps, mesh.tau(), riccati_error(&sol.p, &reference.p)?));
        pi_rows.push(deterministic(steps, mesh.tau(), riccati_error(&sol.pi, &reference.pi)?));
    }
    Ok((RateReport::new("riccati_P", p_rows), RateReport::new("riccati_Pi", pi_rows)))
}

/// `sup_k ‖E[x*(t_k)] − E[x_τ(t_k)]‖` and the same for the control
/// (k = 0..N for the state, 0..N−1 for the control).
pub fn mean_convergence(p: &Problem, oracle: &dyn Oracle, levels: &[usize]) -> Result<(RateReport, RateReport)> {
    check_levels(levels)?;
    let mut x_rows = Vec::new();
    let mut u_rows = Vec::new();
    for &steps in levels {
        let mesh = TimeMesh::new(p.horizon, steps)?;
        let sol = DiscreteSolution::compute(p, mesh)?;
        let ex = (0..=steps)
            .map(|k| (oracle.mean_state(mesh.t(k)) - &sol.means.mean_x[k]).norm())
            .fold(0.0, f64::max);
        let eu = (0..steps)
            .map(|k| (oracle.mean_control(mesh.t(k)) - &sol.means.mean_u[k]).norm())
            .fold(0.0, f64::max);
        x_rows.push(deterministic(steps, mesh.tau(), ex));
        u_rows.push(deterministic(steps, mesh.tau(), eu));
    }
    Ok((RateReport::new("mean_x", x_rows), RateReport::new("mean_u", u_rows)))
}

/// Monte Carlo settings for the coupled studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub paths: usize,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl StudyOptions {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self {
            paths,
            seed,
            workers: None,
        }
    }
}

/// Per-level, per-time accumulators of one or more squared-error metrics.
#[derive(Clone)]
struct Table {
    /// `[level][metric][k]`
    cells: Vec<Vec<Vec<Accumulator>>>,
}

impl Table {
    fn new(shape: &[Vec<usize>]) -> Self {
        Self {
            cells: shape
                .iter()
                .map(|metrics| metrics.iter().map(|&len| vec![Accumulator::new(); len]).collect())
                .collect(),
        }
    }

    fn merge(&mut self, other: &Table) {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            for (ma, mb) in a.iter_mut().zip(b) {
                for (ca, cb) in ma.iter_mut().zip(mb) {
                    ca.merge(cb);
                }
            }
        }
    }

    /// `sup_k` of the mean with the standard error at the maximizing `k`.
    fn sup(&self, level: usize, metric: usize) -> (f64, f64) {
        let mut best = (0.0, 0.0);
        for acc in &self.cells[level][metric] {
            let m = acc.mean();
            if m > best.0 || (best.0 == 0.0 && best.1 == 0.0 && m == 0.0) {
                let se = acc.standard_error();
                best = (m, if se.is_nan() { 0.0 } else { se });
            }
        }
        best
    }
}

/// Runs `per_path` over all paths in fixed-size chunks and merges the chunk
/// tables in chunk order, so the result does not depend on the worker count.
fn coupled_reduce<F>(paths: usize, workers: Option<usize>, shape: &[Vec<usize>], per_path: F) -> Result<Table>
where
    F: Fn(u64, &mut Table) -> Result<()> + Sync + Send,
{
    if paths == 0 {
        return Err(Error::InvalidConfig("path count must be at least 1".into()));
    }
    let chunks = paths.div_ceil(CHUNK);
    let run = || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut table = Table::new(shape);
                for i in c * CHUNK..((c + 1) * CHUNK).min(paths) {
                    per_path(i as u64, &mut table)?;
                }
                Ok(table)
            })
            .collect::<Result<Vec<Table>>>()
    };
    let parts = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let mut total = Table::new(shape);
    for part in &parts {
        total.merge(part);
    }
    Ok(total)
}

fn cumulative(increments: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    w.push(acc);
    for d in increments {
        acc += d;
        w.push(acc);
    }
    w
}

fn no_pathwise() -> Error {
    Error::InvalidConfig("oracle provides no pathwise solution for this problem".into())
}

struct Level {
    ratio: usize,
    sol: DiscreteSolution,
}

fn coupled_levels(p: &Problem, levels: &[usize]) -> Result<(TimeMesh, Vec<Level>)> {
    check_levels(levels)?;
    let fine = TimeMesh::new(p.horizon, *levels.last().expect("non-empty"))?;
    let built = levels
        .iter()
        .map(|&steps| {
            let mesh = TimeMesh::new(p.horizon, steps)?;
            Ok(Level {
                ratio: fine.refinement_of(&mesh)?,
                sol: DiscreteSolution::compute(p, mesh)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((fine, built))
}

fn mc_report(metric: &str, table: &Table, levels: &[Level], index: usize) -> RateReport {
    let rows = levels
        .iter()
        .enumerate()
        .map(|(l, level)| {
            let (error, se) = table.sup(l, index);
            LevelError {
                steps: level.sol.mesh.steps(),
                tau: level.sol.mesh.tau(),
                error,
                stderr: Some(se),
                flag: LevelFlag::Ok,
            }
        })
        .collect();
    RateReport::new(metric, rows)
}

/// `sup_k E‖x*(t_k) − x_τ(t_k)‖²` and the same for the control, with
/// Brownian paths coupled across levels.
pub fn strong_convergence(
    p: &Problem,
    oracle: &dyn Oracle,
    levels: &[usize],
    opts: &StudyOptions,
) -> Result<(RateReport, RateReport)> {
    let (fine, built) = coupled_levels(p, levels)?;
    oracle.pathwise(0.0, 0.0).ok_or_else(no_pathwise)?;
    let source = BrownianSource::new(opts.seed, fine);
    let shape: Vec<Vec<usize>> = built
        .iter()
        .map(|l| vec![l.sol.mesh.steps() + 1, l.sol.mesh.steps()])
        .collect();
    let table = coupled_reduce(opts.paths, opts.workers, &shape, |i, table| {
        let fine_incs = source.fine_increments(i);
        let w = cumulative(&fine_incs);
        for (l, level) in built.iter().enumerate() {
            let sol = &level.sol;
            let incs = coarsen(&fine_incs, level.ratio);
            let path = simulate_path(p, &sol.policy, &sol.means, &incs)?;
            let steps = sol.mesh.steps();
            for k in 0..=steps {
                let t = sol.mesh.t(k);
                let (xs, us) = oracle.pathwise(t, w[k * level.ratio]).ok_or_else(no_pathwise)?;
                table.cells[l][0][k].push((xs - path.x.column(k)).norm_squared());
                if k < steps {
                    table.cells[l][1][k].push((us - path.u.column(k)).norm_squared());
                }
            }
        }
        Ok(())
    })?;
    Ok((
        mc_report("strong_x", &table, &built, 0),
        mc_report("strong_u", &table, &built, 1),
    ))
}

/// Reports of the adjoint reconstruction study.
#[derive(Debug, Clone, PartialEq)]
pub struct BsdeRates {
    /// `sup_k ‖E[y(t_k)] − E[y_τ(t_k)]‖`
    pub mean_y: RateReport,
    /// `sup_k ‖E[z(t_k)] − E[z_τ(t_k)]‖`
    pub mean_z: RateReport,
    /// `sup_k E‖y(t_k) − y_τ(t_k)‖²` with the `P`-weighted fluctuation.
    pub sq_y: RateReport,
    /// Same with the `Π`-weighted fluctuation.
    pub sq_y_pi: RateReport,
    /// `sup_k E‖z(t_k) − z_τ(t_k)‖²`
    pub sq_z: RateReport,
}

impl BsdeRates {
    pub fn reports(&self) -> [&RateReport; 5] {
        [&self.mean_y, &self.mean_z, &self.sq_y, &self.sq_y_pi, &self.sq_z]
    }
}

/// Compares the reconstructed adjoint pair with the continuous identities
///
/// ```text
/// y = P(x* − E[x*]) + Π E[x*]
/// z = P(C(x* − E[x*]) + Ĉ E[x*] + D(u* − E[u*]) + D̂ E[u*])
/// ```
///
/// evaluated with the oracle's `P`, `Π`, means and pathwise solution.
pub fn bsde_convergence(p: &Problem, oracle: &dyn Oracle, levels: &[usize], opts: &StudyOptions) -> Result<BsdeRates> {
    let (fine, built) = coupled_levels(p, levels)?;
    oracle.pathwise(0.0, 0.0).ok_or_else(no_pathwise)?;
    let hat = p.hat();
    let adjoint: Vec<_> = built
        .iter()
        .map(|l| reconstruct_means(p, &l.sol.p, &l.sol.pi, &l.sol.means))
        .collect::<Result<_>>()?;

    // continuous (P, Π, Ex, Eu) per level and grid point
    type Frozen = (DMatrix<f64>, DMatrix<f64>, DVector<f64>, DVector<f64>);
    let frozen: Vec<Vec<Frozen>> = built
        .iter()
        .map(|l| {
            l.sol
                .mesh
                .points()
                .map(|t| {
                    let (pm, pim) = oracle.riccati(t);
                    (pm, pim, oracle.mean_state(t), oracle.mean_control(t))
                })
                .collect()
        })
        .collect();

    let mut mean_y_rows = Vec::new();
    let mut mean_z_rows = Vec::new();
    for (l, level) in built.iter().enumerate() {
        let steps = level.sol.mesh.steps();
        let mut ey_err: f64 = 0.0;
        let mut ez_err: f64 = 0.0;
        for k in 0..=steps {
            let (pm, pim, ex, eu) = &frozen[l][k];
            ey_err = ey_err.max((pim * ex - &adjoint[l].mean_y[k]).norm());
            if k < steps {
                let ez = pm * (&hat.c * ex + &hat.d * eu);
                ez_err = ez_err.max((ez - &adjoint[l].mean_z[k]).norm());
            }
        }
        mean_y_rows.push(deterministic(steps, level.sol.mesh.tau(), ey_err));
        mean_z_rows.push(deterministic(steps, level.sol.mesh.tau(), ez_err));
    }

    let source = BrownianSource::new(opts.seed, fine);
    let shape: Vec<Vec<usize>> = built
        .iter()
        .map(|l| {
            let s = l.sol.mesh.steps();
            vec![s + 1, s + 1, s]
        })
        .collect();
    let table = coupled_reduce(opts.paths, opts.workers, &shape, |i, table| {
        let fine_incs = source.fine_increments(i);
        let w = cumulative(&fine_incs);
        for (l, level) in built.iter().enumerate() {
            let sol = &level.sol;
            let incs = coarsen(&fine_incs, level.ratio);
            let path = simulate_path(p, &sol.policy, &sol.means, &incs)?;
            let by_p = reconstruct_path(p, &sol.p, &sol.pi, &sol.means, &adjoint[l], &path, YWeight::P)?;
            let by_pi = reconstruct_path(p, &sol.p, &sol.pi, &sol.means, &adjoint[l], &path, YWeight::Pi)?;
            let steps = sol.mesh.steps();
            for k in 0..=steps {
                let t = sol.mesh.t(k);
                let (pm, pim, ex, eu) = &frozen[l][k];
                let (xs, us) = oracle.pathwise(t, w[k * level.ratio]).ok_or_else(no_pathwise)?;
                let dx = &xs - ex;
                let y = pm * &dx + pim * ex;
                table.cells[l][0][k].push((&y - by_p.y.column(k)).norm_squared());
                table.cells[l][1][k].push((&y - by_pi.y.column(k)).norm_squared());
                if k < steps {
                    let z = pm * (&p.c * &dx + &hat.c * ex + &p.d * (&us - eu) + &hat.d * eu);
                    table.cells[l][2][k].push((z - by_p.z.column(k)).norm_squared());
                }
            }
        }
        Ok(())
    })?;

    Ok(BsdeRates {
        mean_y: RateReport::new("bsde_mean_y", mean_y_rows),
        mean_z: RateReport::new("bsde_mean_z", mean_z_rows),
        sq_y: mc_report("bsde_sq_y", &table, &built, 0),
        sq_y_pi: mc_report("bsde_sq_y_pi", &table, &built, 1),
        sq_z: mc_report("bsde_sq_z", &table, &built, 2),
    })
}

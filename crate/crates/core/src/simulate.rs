//! Two-pass closed-loop simulation: the deterministic mean recursion first,
//! then Monte Carlo paths of the mean-field stochastic difference equation
//! driven by those means.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::TimeMesh;
use crate::policy::FeedbackPolicy;
use crate::problem::Problem;
use crate::rng::BrownianSource;

/// Deterministic means `E[x_τ(t_k)]` (k = 0..N) and `E[u_τ(t_k)]` (k = 0..N−1).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTrajectory {
    pub mesh: TimeMesh,
    pub mean_x: Vec<DVector<f64>>,
    pub mean_u: Vec<DVector<f64>>,
}

/// `E[x_{k+1}] = (I + Âτ − τB̂K²_k) E[x_k]`, `E[u_k] = −K²_k E[x_k]`.
pub fn mean_recursion(p: &Problem, policy: &FeedbackPolicy) -> Result<MeanTrajectory> {
    let hat = p.hat();
    let tau = policy.mesh.tau();
    let steps = policy.steps();
    let mut mean_x = Vec::with_capacity(steps + 1);
    let mut mean_u = Vec::with_capacity(steps);
    mean_x.push(p.x0.clone());
    for k in 0..steps {
        let xk = &mean_x[k];
        let uk = -(&policy.k2[k] * xk);
        let next = xk + (&hat.a * xk + &hat.b * &uk) * tau;
        mean_u.push(uk);
        mean_x.push(next);
    }
    Ok(MeanTrajectory {
        mesh: policy.mesh,
        mean_x,
        mean_u,
    })
}

/// One closed-loop path: states as columns `0..=N`, controls `0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub x: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub dw: Vec<f64>,
}

impl SimulatedPath {
    pub fn state(&self, k: usize) -> DVector<f64> {
        self.x.column(k).into_owned()
    }

    pub fn control(&self, k: usize) -> DVector<f64> {
        self.u.column(k).into_owned()
    }

    /// `W(t_k)` as the running left-to-right sum of increments.
    pub fn brownian(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.dw.len() + 1);
        let mut acc = 0.0;
        w.push(acc);
        for d in &self.dw {
            acc += d;
            w.push(acc);
        }
        w
    }
}

/// Euler step of the closed loop, with the deterministic means standing in
/// for `E[x_τ]` and `E[u_τ]`:
///
/// ```text
/// u_k     = −K¹_k(x_k − Ex_k) − K²_k Ex_k
/// x_{k+1} = x_k + τ(Ax_k + Ā Ex_k + Bu_k + B̄ Eu_k) + (Cx_k + C̄ Ex_k + Du_k + D̄ Eu_k) ΔW_{k+1}
/// ```
pub fn simulate_path(
    p: &Problem,
    policy: &FeedbackPolicy,
    means: &MeanTrajectory,
    increments: &[f64],
) -> Result<SimulatedPath> {
    let steps = policy.steps();
    if increments.len() != steps || means.mean_u.len() != steps {
        return Err(Error::MeshMismatch(format!(
            "{} increments and {} mean controls for {} steps",
            increments.len(),
            means.mean_u.len(),
            steps
        )));
    }
    let tau = policy.mesh.tau();
    let mut x = DMatrix::zeros(p.n, steps + 1);
    let mut u = DMatrix::zeros(p.m, steps);
    let mut xk = p.x0.clone();
    x.set_column(0, &xk);
    for k in 0..steps {
        let ex = &means.mean_x[k];
        let eu = &means.mean_u[k];
        let uk = -(&policy.k1[k] * (&xk - ex)) - &policy.k2[k] * ex;
        let drift = &p.a * &xk + &p.a_bar * ex + &p.b * &uk + &p.b_bar * eu;
        let diffusion = &p.c * &xk + &p.c_bar * ex + &p.d * &uk + &p.d_bar * eu;
        xk = &xk + drift * tau + diffusion * increments[k];
        u.set_column(k, &uk);
        x.set_column(k + 1, &xk);
    }
    Ok(SimulatedPath {
        x,
        u,
        dw: increments.to_vec(),
    })
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub paths: usize,
    pub seed: u64,
    /// Caps the worker count; results do not depend on it.
    pub workers: Option<usize>,
    /// Forces every Brownian increment to zero (debugging aid).
    pub zero_noise: bool,
}

impl McOptions {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self {
            paths,
            seed,
            workers: None,
            zero_noise: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub seed: u64,
    pub paths: Vec<SimulatedPath>,
}

/// Per-time empirical moments with standard errors.
///
/// Means and second moments use `1/M`; standard errors use the `1/(M−1)`
/// sample variance and are NaN for a single path.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean_x: Vec<DVector<f64>>,
    pub sq_x: Vec<f64>,
    pub mean_u: Vec<DVector<f64>>,
    pub sq_u: Vec<f64>,
    pub se_mean_x: Vec<DVector<f64>>,
    pub se_sq_x: Vec<f64>,
    pub se_mean_u: Vec<DVector<f64>>,
    pub se_sq_u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloRun {
    pub ensemble: PathEnsemble,
    pub moments: Moments,
}

/// Runs `f(0..count)` on the worker pool and returns results in index order.
pub(crate) fn par_map_indexed<T, F>(count: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let run = || (0..count as u64).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?
            .install(run),
        None => run(),
    }
}

pub fn monte_carlo(
    p: &Problem,
    policy: &FeedbackPolicy,
    means: &MeanTrajectory,
    opts: &McOptions,
) -> Result<MonteCarloRun> {
    if opts.paths == 0 {
        return Err(Error::InvalidConfig("path count must be at least 1".into()));
    }
    let source = BrownianSource::new(opts.seed, policy.mesh);
    let paths = par_map_indexed(opts.paths, opts.workers, |i| {
        let incs = if opts.zero_noise {
            vec![0.0; policy.steps()]
        } else {
            source.fine_increments(i)
        };
        simulate_path(p, policy, means, &incs)
    })?;
    let moments = ensemble_moments(&paths);
    Ok(MonteCarloRun {
        ensemble: PathEnsemble { seed: opts.seed, paths },
        moments,
    })
}

/// Running sums for a mean and its standard error.
#[derive(Debug, Clone)]
pub(crate) struct Accumulator {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self {
            count: 0,
            sum: 0.0,
            sum_sq: 0.0,
        }
    }

    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// `sqrt(s² / M)` with the `1/(M−1)` sample variance.
    pub fn standard_error(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let m = self.count as f64;
        let var = ((self.sum_sq - self.sum * self.sum / m) / (m - 1.0)).max(0.0);
        (var / m).sqrt()
    }
}

fn column_moments(count: usize, dim: usize, paths: &[SimulatedPath], get: impl Fn(&SimulatedPath) -> &DMatrix<f64>)
    -> (Vec<DVector<f64>>, Vec<f64>, Vec<DVector<f64>>, Vec<f64>)
{
    let mut mean = Vec::with_capacity(count);
    let mut sq = Vec::with_capacity(count);
    let mut se_mean = Vec::with_capacity(count);
    let mut se_sq = Vec::with_capacity(count);
    for k in 0..count {
        let mut comp = vec![Accumulator::new(); dim];
        let mut norm = Accumulator::new();
        for path in paths {
            let col = get(path).column(k);
            for (i, acc) in comp.iter_mut().enumerate() {
                acc.push(col[i]);
            }
            norm.push(col.norm_squared());
        }
        mean.push(DVector::from_iterator(dim, comp.iter().map(Accumulator::mean)));
        se_mean.push(DVector::from_iterator(dim, comp.iter().map(Accumulator::standard_error)));
        sq.push(norm.mean());
        se_sq.push(norm.standard_error());
    }
    (mean, sq, se_mean, se_sq)
}

/// Moments reduced sequentially in path-index order.
pub fn ensemble_moments(paths: &[SimulatedPath]) -> Moments {
    let first = &paths[0];
    let (n, steps) = (first.x.nrows(), first.u.ncols());
    let m = first.u.nrows();
    let (mean_x, sq_x, se_mean_x, se_sq_x) = column_moments(steps + 1, n, paths, |p| &p.x);
    let (mean_u, sq_u, se_mean_u, se_sq_u) = column_moments(steps, m, paths, |p| &p.u);
    Moments {
        mean_x,
        sq_x,
        mean_u,
        sq_u,
        se_mean_x,
        se_sq_x,
        se_mean_u,
        se_sq_u,
    }
}

/// The six summands of the discrete cost.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CostTerms {
    /// `τ Σ_k E⟨Qx_k, x_k⟩`
    pub state: f64,
    /// `τ Σ_k ⟨Q̄ Ex_k, Ex_k⟩`
    pub mean_state: f64,
    /// `τ Σ_k E⟨Ru_k, u_k⟩`
    pub control: f64,
    /// `τ Σ_k ⟨R̄ Eu_k, Eu_k⟩`
    pub mean_control: f64,
    /// `E⟨Gx_N, x_N⟩`
    pub terminal: f64,
    /// `⟨Ḡ Ex_N, Ex_N⟩`
    pub mean_terminal: f64,
}

impl CostTerms {
    pub fn total(&self) -> f64 {
        self.state + self.mean_state + self.control + self.mean_control + self.terminal + self.mean_terminal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CostReport {
    #[serde(rename = "J_tau")]
    pub j_tau: f64,
    pub standard_error: f64,
    pub terms: CostTerms,
}

fn quad(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

/// Discrete cost with expectations by ensemble average and the mean-field
/// terms evaluated on the deterministic means. Sums run over k = 0..N−1.
pub fn discrete_cost(p: &Problem, ensemble: &PathEnsemble, means: &MeanTrajectory) -> Result<CostReport> {
    let steps = means.mesh.steps();
    let tau = means.mesh.tau();
    if ensemble.paths.is_empty() {
        return Err(Error::InvalidConfig("empty ensemble".into()));
    }
    if ensemble.paths.iter().any(|path| path.u.ncols() != steps) {
        return Err(Error::MeshMismatch("ensemble and means use different meshes".into()));
    }
    let mut state = Accumulator::new();
    let mut control = Accumulator::new();
    let mut terminal = Accumulator::new();
    let mut total = Accumulator::new();
    for path in &ensemble.paths {
        let s: f64 = (0..steps).map(|k| quad(&p.q, &path.state(k))).sum::<f64>() * tau;
        let c: f64 = (0..steps).map(|k| quad(&p.r, &path.control(k))).sum::<f64>() * tau;
        let g = quad(&p.g, &path.state(steps));
        state.push(s);
        control.push(c);
        terminal.push(g);
        total.push(s + c + g);
    }
    let mean_state = (0..steps).map(|k| quad(&p.q_bar, &means.mean_x[k])).sum::<f64>() * tau;
    let mean_control = (0..steps).map(|k| quad(&p.r_bar, &means.mean_u[k])).sum::<f64>() * tau;
    let mean_terminal = quad(&p.g_bar, &means.mean_x[steps]);
    let terms = CostTerms {
        state: state.mean(),
        mean_state,
        control: control.mean(),
        mean_control,
        terminal: terminal.mean(),
        mean_terminal,
    };
    Ok(CostReport {
        j_tau: terms.total(),
        standard_error: total.standard_error(),
        terms,
    })
}

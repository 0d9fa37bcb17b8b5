//! Coupled network ODE assembly, fixed-step RK4 integration, and error
//! diagnostics.
//!
//! The full state of a run is the stacked vector
//! `[x_1 … x_N, γ̂_1 … γ̂_N, s]` (N·n plant states, N·m estimator states,
//! n reference states). Estimator slots are carried in every regime and
//! simply have zero rates in open loop.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{self, ControllerSpec};
use crate::dynamics::{MismatchEnsemble, OscillatorModel};
use crate::graph::UndirectedLaplacian;
use crate::{Error, Result};

/// Any state component beyond this magnitude counts as divergence.
const DIVERGENCE_LIMIT: f64 = 1e9;

/// Fixed-step integration settings. The method is classical RK4.
#[derive(Debug, Clone)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Per-dimension `[lo, hi]` box for initial states; a single entry
    /// broadcasts across dimensions.
    pub x0_box: Vec<(f64, f64)>,
}

impl IntegrationConfig {
    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Validation(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > self.dt) {
            return Err(Error::Validation(format!(
                "t_end must exceed dt, got {}",
                self.t_end
            )));
        }
        if self.x0_box.is_empty() || (self.x0_box.len() != 1 && self.x0_box.len() != state_dim) {
            return Err(Error::Validation(format!(
                "x0_box needs 1 or {state_dim} intervals, got {}",
                self.x0_box.len()
            )));
        }
        for (lo, hi) in &self.x0_box {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Validation(format!("bad x0 interval [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn interval(&self, dim: usize) -> (f64, f64) {
        if self.x0_box.len() == 1 {
            self.x0_box[0]
        } else {
            self.x0_box[dim]
        }
    }
}

/// Everything a single run needs, borrowed from the caller.
pub struct RunSetup<'a> {
    pub model: &'a dyn OscillatorModel,
    pub plant: &'a UndirectedLaplacian,
    pub inner_coupling: &'a DMatrix<f64>,
    pub mismatch: &'a MismatchEnsemble,
    pub controller: &'a ControllerSpec,
    pub integration: &'a IntegrationConfig,
    /// Record every `stride` steps.
    pub stride: usize,
    pub per_node: bool,
}

/// Instantaneous network state split into its logical parts.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub t: f64,
    /// Row i is x_i.
    pub x: DMatrix<f64>,
    /// Row i is γ̂_i.
    pub gamma_hat: DMatrix<f64>,
    pub s: DVector<f64>,
}

/// One recorded sample of error norms.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    /// `√(Σ_i ‖x_i - x̄‖²)`, the stacked average-trajectory error norm.
    pub e_avg: f64,
    /// `‖x - 1⊗s‖`.
    pub e_ref: f64,
    /// `‖γ̂ - γ(t)‖` (0 in open loop).
    pub gamma_err: f64,
    /// Optional per-node error norms (from the average in open loop,
    /// from the reference otherwise).
    pub per_node: Option<Vec<f64>>,
}

/// Time-indexed record of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub stride: usize,
    pub diverged: bool,
    pub divergence_time: Option<f64>,
    /// Max over samples of the largest |Σ_i e_i| component, a numerical
    /// hygiene diagnostic (should be ~0 by construction).
    pub max_error_sum: f64,
    /// Empirical max over samples of `max_i γ_iᵀGᵀ(x_i)G(x_i)γ_i`, for
    /// comparison against the certified `γ_cᵀΓγ_c`.
    pub observed_quad_max: f64,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }
}

/// Index layout of the flat run state `[x, γ̂, s]`.
pub struct StateLayout {
    n_nodes: usize,
    n: usize,
    m: usize,
}

impl StateLayout {
    pub fn new(n_nodes: usize, n: usize, m: usize) -> Self {
        Self { n_nodes, n, m }
    }

    pub fn flat_len(&self) -> usize {
        self.n_nodes * (self.n + self.m) + self.n
    }

    fn x_range(&self, i: usize) -> std::ops::Range<usize> {
        i * self.n..(i + 1) * self.n
    }

    fn gamma_range(&self, i: usize) -> std::ops::Range<usize> {
        let base = self.n_nodes * self.n;
        base + i * self.m..base + (i + 1) * self.m
    }

    fn s_range(&self) -> std::ops::Range<usize> {
        let base = self.n_nodes * (self.n + self.m);
        base..base + self.n
    }

    fn unpack(&self, y: &DVector<f64>, t: f64) -> NetworkState {
        let x = DMatrix::from_fn(self.n_nodes, self.n, |i, j| y[i * self.n + j]);
        let base = self.n_nodes * self.n;
        let gamma_hat = DMatrix::from_fn(self.n_nodes, self.m, |i, j| y[base + i * self.m + j]);
        let s = DVector::from_fn(self.n, |j, _| y[self.n_nodes * (self.n + self.m) + j]);
        NetworkState { t, x, gamma_hat, s }
    }
}

/// Per-node average-trajectory errors `e_i = x_i - x̄` and the norm of
/// the stacked error vector, which equals `(1/N)‖(R_N ⊗ I_n) x‖`.
pub fn average_error(x: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let n_nodes = x.nrows();
    let mean = x.row_sum() / n_nodes as f64;
    let mut errors = x.clone();
    for i in 0..n_nodes {
        for j in 0..x.ncols() {
            errors[(i, j)] -= mean[j];
        }
    }
    let norm = errors.norm();
    (errors, norm)
}

/// Per-node reference errors `‖x_i - s‖` and the Euclidean total
/// `‖x - 1⊗s‖`.
pub fn reference_error(x: &DMatrix<f64>, s: &DVector<f64>) -> (Vec<f64>, f64) {
    let mut per_node = Vec::with_capacity(x.nrows());
    let mut total_sq = 0.0;
    for i in 0..x.nrows() {
        let mut sq = 0.0;
        for j in 0..x.ncols() {
            let d = x[(i, j)] - s[j];
            sq += d * d;
        }
        per_node.push(sq.sqrt());
        total_sq += sq;
    }
    (per_node, total_sq.sqrt())
}

/// Smallest sampled time after which the average-error norm stays at or
/// below `threshold` through the end of the trajectory.
pub fn settling_time(traj: &Trajectory, threshold: f64) -> Option<f64> {
    let mut settle = None;
    for sample in traj.samples.iter().rev() {
        if sample.e_avg <= threshold {
            settle = Some(sample.t);
        } else {
            break;
        }
    }
    settle
}

/// Time derivative of the full network state.
pub fn network_rhs(setup: &RunSetup, layout: &StateLayout, t: f64, y: &DVector<f64>) -> DVector<f64> {
    let n_nodes = layout.n_nodes;
    let n = layout.n;

    let xs: Vec<DVector<f64>> = (0..n_nodes)
        .map(|i| DVector::from_iterator(n, layout.x_range(i).map(|k| y[k])))
        .collect();
    let s = DVector::from_iterator(n, layout.s_range().map(|k| y[k]));
    let h = setup.inner_coupling;

    let mut dy = DVector::zeros(layout.flat_len());

    // Plant coupling -Σ_j l_ij H x_j, shared by every regime.
    let hx: Vec<DVector<f64>> = xs.iter().map(|x| h * x).collect();

    for i in 0..n_nodes {
        let x_i = &xs[i];
        let gamma_i = setup.mismatch.gamma_at(i, t);
        let mut dx = setup.model.drift(x_i) + setup.model.mismatch_basis(x_i) * &gamma_i;
        let lrow = setup.plant.entries().row(i);
        for j in 0..n_nodes {
            let lij = lrow[j];
            if lij != 0.0 {
                dx -= &hx[j] * lij;
            }
        }

        let gamma_hat_i =
            DVector::from_iterator(layout.m, layout.gamma_range(i).map(|k| y[k]));
        let (u, gamma_rate) = match setup.controller {
            ControllerSpec::OpenLoop => (DVector::zeros(n), DVector::zeros(layout.m)),
            ControllerSpec::Decentralized { z, k } => (
                control::decentralized_input(x_i, &s, z.get(i), &gamma_hat_i, setup.model, h),
                control::decentralized_estimator_rate(x_i, &s, k[i], setup.model),
            ),
            ControllerSpec::Distributed { b, c, z, zprime, k } => (
                control::distributed_input(i, &xs, &s, &gamma_hat_i, b, z, setup.model, h),
                control::distributed_estimator_rate(i, &xs, &s, c, zprime, k[i], setup.model),
            ),
        };
        dx += u;

        for (dst, v) in layout.x_range(i).zip(dx.iter()) {
            dy[dst] = *v;
        }
        for (dst, v) in layout.gamma_range(i).zip(gamma_rate.iter()) {
            dy[dst] = *v;
        }
    }

    let ds = setup.model.drift(&s);
    for (dst, v) in layout.s_range().zip(ds.iter()) {
        dy[dst] = *v;
    }
    dy
}

fn record_sample(setup: &RunSetup, layout: &StateLayout, t: f64, y: &DVector<f64>, traj: &mut Trajectory) {
    let state = layout.unpack(y, t);
    let (errors, e_avg) = average_error(&state.x);
    let (per_node_ref, e_ref) = reference_error(&state.x, &state.s);

    let open_loop = matches!(setup.controller, ControllerSpec::OpenLoop);
    let gamma_err = if open_loop {
        0.0
    } else {
        let mut sq = 0.0;
        for i in 0..layout.n_nodes {
            let gamma_i = setup.mismatch.gamma_at(i, t);
            for j in 0..layout.m {
                let d = state.gamma_hat[(i, j)] - gamma_i[j];
                sq += d * d;
            }
        }
        sq.sqrt()
    };

    // Column sums of the error matrix are Σ_i e_i per component.
    for j in 0..layout.n {
        let col_sum: f64 = (0..layout.n_nodes).map(|i| errors[(i, j)]).sum();
        traj.max_error_sum = traj.max_error_sum.max(col_sum.abs());
    }

    for i in 0..layout.n_nodes {
        let x_i = state.x.row(i).transpose();
        let gamma_i = setup.mismatch.gamma_at(i, t);
        let q = (setup.model.mismatch_basis(&x_i) * gamma_i).norm_squared();
        traj.observed_quad_max = traj.observed_quad_max.max(q);
    }

    let per_node = if setup.per_node {
        Some(if open_loop {
            (0..layout.n_nodes)
                .map(|i| errors.row(i).norm())
                .collect()
        } else {
            per_node_ref
        })
    } else {
        None
    };

    traj.samples.push(Sample {
        t,
        e_avg,
        e_ref,
        gamma_err,
        per_node,
    });
}

/// Integrates the scenario with classical RK4 from `t = 0` to `t_end`.
///
/// Deterministic for a fixed seed. Blow-up (a non-finite component or a
/// magnitude beyond 1e9) stops the run and is reported through the
/// `diverged` flag with the trajectory recorded so far.
pub fn integrate(setup: &RunSetup) -> Result<Trajectory> {
    let n = setup.model.state_dim();
    let m = setup.model.mismatch_dim();
    let n_nodes = setup.plant.n();
    if setup.mismatch.n_nodes() != n_nodes {
        return Err(Error::Dimension(format!(
            "mismatch ensemble has {} nodes, network has {n_nodes}",
            setup.mismatch.n_nodes()
        )));
    }
    if setup.mismatch.mismatch_dim() != m {
        return Err(Error::Dimension(format!(
            "mismatch dimension {} vs model {m}",
            setup.mismatch.mismatch_dim()
        )));
    }
    if setup.inner_coupling.nrows() != n || setup.inner_coupling.ncols() != n {
        return Err(Error::Dimension(format!(
            "inner coupling is {}x{}, state dimension is {n}",
            setup.inner_coupling.nrows(),
            setup.inner_coupling.ncols()
        )));
    }
    setup.controller.validate(n_nodes)?;
    setup.integration.validate(n)?;
    if setup.stride == 0 {
        return Err(Error::Validation("stride must be >= 1".into()));
    }

    let layout = StateLayout::new(n_nodes, n, m);
    let mut y = DVector::zeros(layout.flat_len());

    // Draw order: reference first, then node states; estimators start at
    // zero.
    let mut rng = ChaCha8Rng::seed_from_u64(setup.integration.seed);
    for j in 0..n {
        let (lo, hi) = setup.integration.interval(j);
        y[layout.s_range().start + j] = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
    }
    for i in 0..n_nodes {
        for j in 0..n {
            let (lo, hi) = setup.integration.interval(j);
            y[layout.x_range(i).start + j] = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
        }
    }

    let dt = setup.integration.dt;
    let steps = (setup.integration.t_end / dt).round() as usize;

    let mut traj = Trajectory {
        samples: Vec::with_capacity(steps / setup.stride + 2),
        stride: setup.stride,
        diverged: false,
        divergence_time: None,
        max_error_sum: 0.0,
        observed_quad_max: 0.0,
    };
    record_sample(setup, &layout, 0.0, &y, &mut traj);

    let mut t = 0.0;
    for step in 1..=steps {
        let k1 = network_rhs(setup, &layout, t, &y);
        let k2 = network_rhs(setup, &layout, t + 0.5 * dt, &(&y + &k1 * (0.5 * dt)));
        let k3 = network_rhs(setup, &layout, t + 0.5 * dt, &(&y + &k2 * (0.5 * dt)));
        let k4 = network_rhs(setup, &layout, t + dt, &(&y + &k3 * dt));
        let y_next = &y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);

        if y_next
            .iter()
            .any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT)
        {
            traj.diverged = true;
            traj.divergence_time = Some(t);
            return Ok(traj);
        }
        y = y_next;
        t = step as f64 * dt;
        if step % setup.stride == 0 || step == steps {
            record_sample(setup, &layout, t, &y, &mut traj);
        }
    }
    Ok(traj)
}

//! Control inputs and adaptive estimator rates for the three regimes:
//! open loop, decentralized compensation, and distributed compensation.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::OscillatorModel;
use crate::graph::{GainDiagonal, UndirectedLaplacian};
use crate::{Error, Result};

/// Controller regime together with its gains and graphs.
#[derive(Debug, Clone)]
pub enum ControllerSpec {
    OpenLoop,
    Decentralized {
        z: GainDiagonal,
        /// Per-node estimator gains k_i.
        k: DVector<f64>,
    },
    Distributed {
        /// Controller coupling graph (may be the zero Laplacian).
        b: UndirectedLaplacian,
        /// Estimator communication graph; must be connected with
        /// nonpositive off-diagonals.
        c: UndirectedLaplacian,
        z: GainDiagonal,
        zprime: GainDiagonal,
        k: DVector<f64>,
    },
}

impl ControllerSpec {
    pub fn regime_name(&self) -> &'static str {
        match self {
            ControllerSpec::OpenLoop => "open_loop",
            ControllerSpec::Decentralized { .. } => "decentralized",
            ControllerSpec::Distributed { .. } => "distributed",
        }
    }

    /// Checks the theorem hypotheses for `n_nodes` nodes.
    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        match self {
            ControllerSpec::OpenLoop => Ok(()),
            ControllerSpec::Decentralized { z, k } => {
                if z.n() != n_nodes || k.len() != n_nodes {
                    return Err(Error::Dimension(format!(
                        "decentralized gains sized {}/{} for {n_nodes} nodes",
                        z.n(),
                        k.len()
                    )));
                }
                if z.gains().iter().any(|g| *g <= 0.0) {
                    return Err(Error::Validation(
                        "decentralized regime requires every z_i > 0".into(),
                    ));
                }
                if k.iter().any(|g| *g <= 0.0) {
                    return Err(Error::Validation(
                        "estimator gains must satisfy k_i > 0".into(),
                    ));
                }
                Ok(())
            }
            ControllerSpec::Distributed { b, c, z, zprime, k } => {
                if b.n() != n_nodes
                    || c.n() != n_nodes
                    || z.n() != n_nodes
                    || zprime.n() != n_nodes
                    || k.len() != n_nodes
                {
                    return Err(Error::Dimension(format!(
                        "distributed spec sizes {}/{}/{}/{}/{} for {n_nodes} nodes",
                        b.n(),
                        c.n(),
                        z.n(),
                        zprime.n(),
                        k.len()
                    )));
                }
                if k.iter().any(|g| *g <= 0.0) {
                    return Err(Error::Validation(
                        "estimator gains must satisfy k_i > 0".into(),
                    ));
                }
                if !z.gains().iter().any(|g| *g > 0.0) {
                    return Err(Error::Validation(
                        "distributed regime needs at least one z_i > 0".into(),
                    ));
                }
                if !zprime.gains().iter().any(|g| *g > 0.0) {
                    return Err(Error::Validation(
                        "distributed regime needs at least one z'_i > 0".into(),
                    ));
                }
                if !c.is_connected()? {
                    return Err(Error::Validation(
                        "estimator communication graph C must be connected".into(),
                    ));
                }
                for i in 0..n_nodes {
                    for j in 0..n_nodes {
                        if i != j && c.entries()[(i, j)] > 0.0 {
                            return Err(Error::Validation(format!(
                                "C off-diagonal ({i},{j}) must be <= 0"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

/// `u_i = -z_i H (x_i - s) - G(x_i) γ̂_i`.
pub fn decentralized_input(
    x_i: &DVector<f64>,
    s: &DVector<f64>,
    z_i: f64,
    gamma_hat_i: &DVector<f64>,
    model: &dyn OscillatorModel,
    h: &DMatrix<f64>,
) -> DVector<f64> {
    -(h * (x_i - s)) * z_i - model.mismatch_basis(x_i) * gamma_hat_i
}

/// `γ̂̇_i = k_i Gᵀ(x_i) (x_i - s)`.
pub fn decentralized_estimator_rate(
    x_i: &DVector<f64>,
    s: &DVector<f64>,
    k_i: f64,
    model: &dyn OscillatorModel,
) -> DVector<f64> {
    model.mismatch_basis(x_i).transpose() * (x_i - s) * k_i
}

/// `u_i = -Σ_j b_ij H x_j - z_i H (x_i - s) - G(x_i) γ̂_i`.
///
/// The pinning gain multiplying the reference term is the same z_i that
/// enters the spectral condition.
#[allow(clippy::too_many_arguments)]
pub fn distributed_input(
    i: usize,
    x: &[DVector<f64>],
    s: &DVector<f64>,
    gamma_hat_i: &DVector<f64>,
    b: &UndirectedLaplacian,
    z: &GainDiagonal,
    model: &dyn OscillatorModel,
    h: &DMatrix<f64>,
) -> DVector<f64> {
    let n = model.state_dim();
    let mut coupling = DVector::zeros(n);
    for (j, x_j) in x.iter().enumerate() {
        let bij = b.entries()[(i, j)];
        if bij != 0.0 {
            coupling += h * x_j * bij;
        }
    }
    -coupling - (h * (&x[i] - s)) * z.get(i) - model.mismatch_basis(&x[i]) * gamma_hat_i
}

/// `γ̂̇_i = k_i Gᵀ(x_i) ( Σ_j c_ij x_j + z'_i (x_i - s) )`.
pub fn distributed_estimator_rate(
    i: usize,
    x: &[DVector<f64>],
    s: &DVector<f64>,
    c: &UndirectedLaplacian,
    zprime: &GainDiagonal,
    k_i: f64,
    model: &dyn OscillatorModel,
) -> DVector<f64> {
    let n = model.state_dim();
    let mut signal = DVector::zeros(n);
    for (j, x_j) in x.iter().enumerate() {
        let cij = c.entries()[(i, j)];
        if cij != 0.0 {
            signal += x_j * cij;
        }
    }
    signal += (&x[i] - s) * zprime.get(i);
    model.mismatch_basis(&x[i]).transpose() * signal * k_i
}

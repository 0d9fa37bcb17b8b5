//! Node-level vector fields: nominal drift, mismatch basis, the shipped
//! Lorenz model, and per-node mismatch ensembles with their bound data.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// A node model: nominal drift `f` and mismatch basis `G`, so that the
/// uncontrolled isolated node evolves as `ẋ = f(x) + G(x) γ`.
pub trait OscillatorModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn mismatch_dim(&self) -> usize;
    fn drift(&self, x: &DVector<f64>) -> DVector<f64>;
    fn mismatch_basis(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// Lorenz oscillator with parameters `(a, b, c)`; the mismatch enters
/// through a diagonal basis so each γ component perturbs one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for LorenzModel {
    fn default() -> Self {
        Self {
            a: 10.0,
            b: 28.0,
            c: 8.0 / 3.0,
        }
    }
}

impl OscillatorModel for LorenzModel {
    fn state_dim(&self) -> usize {
        3
    }

    fn mismatch_dim(&self) -> usize {
        3
    }

    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![
            self.a * (x[1] - x[0]),
            self.b * x[0] - x[1] - x[0] * x[2],
            x[0] * x[1] - self.c * x[2],
        ])
    }

    fn mismatch_basis(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(3, 3);
        g[(0, 0)] = x[1] - x[0];
        g[(1, 1)] = x[0];
        g[(2, 2)] = -x[2];
        g
    }
}

/// Optional time variation applied on top of the sampled constant
/// mismatch vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeVarying {
    /// `γ_i(t) = γ_i · cos(2π f t)`: stays inside the sampled bounds.
    Sinusoid { frequency: f64 },
}

/// Per-node mismatch vectors together with the box bounds they were
/// drawn from.
#[derive(Debug, Clone)]
pub struct MismatchEnsemble {
    /// Row `i` is `γ_i`.
    gammas: DMatrix<f64>,
    bounds: DVector<f64>,
    time_varying: Option<TimeVarying>,
}

impl MismatchEnsemble {
    pub fn new(gammas: DMatrix<f64>, bounds: Vec<f64>) -> Result<Self> {
        let bounds = DVector::from_vec(bounds);
        if bounds.len() != gammas.ncols() {
            return Err(Error::Dimension(format!(
                "{} bounds for mismatch dimension {}",
                bounds.len(),
                gammas.ncols()
            )));
        }
        for j in 0..bounds.len() {
            if !(bounds[j].is_finite() && bounds[j] >= 0.0) {
                return Err(Error::Validation(format!(
                    "bound {j} must be finite and nonnegative, got {}",
                    bounds[j]
                )));
            }
        }
        for i in 0..gammas.nrows() {
            for j in 0..gammas.ncols() {
                if gammas[(i, j)].abs() > bounds[j] {
                    return Err(Error::Validation(format!(
                        "gamma[{i}][{j}] = {} exceeds bound {}",
                        gammas[(i, j)],
                        bounds[j]
                    )));
                }
            }
        }
        Ok(Self {
            gammas,
            bounds,
            time_varying: None,
        })
    }

    pub fn with_time_varying(mut self, tv: TimeVarying) -> Self {
        self.time_varying = Some(tv);
        self
    }

    pub fn n_nodes(&self) -> usize {
        self.gammas.nrows()
    }

    pub fn mismatch_dim(&self) -> usize {
        self.gammas.ncols()
    }

    pub fn bounds(&self) -> &DVector<f64> {
        &self.bounds
    }

    pub fn gammas(&self) -> &DMatrix<f64> {
        &self.gammas
    }

    /// Mismatch vector of node `i` at time `t`.
    pub fn gamma_at(&self, i: usize, t: f64) -> DVector<f64> {
        let base = self.gammas.row(i).transpose();
        match self.time_varying {
            None => base,
            Some(TimeVarying::Sinusoid { frequency }) => {
                base * (2.0 * std::f64::consts::PI * frequency * t).cos()
            }
        }
    }
}

/// Draws `γ_i` uniformly from the box `[-bounds, bounds]` with a
/// deterministic seeded generator.
pub fn sample_mismatches(n_nodes: usize, bounds: &[f64], seed: u64) -> Result<MismatchEnsemble> {
    for (j, b) in bounds.iter().enumerate() {
        if !(b.is_finite() && *b >= 0.0) {
            return Err(Error::Validation(format!(
                "bound {j} must be finite and nonnegative, got {b}"
            )));
        }
    }
    let m = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gammas = DMatrix::zeros(n_nodes, m);
    for i in 0..n_nodes {
        for j in 0..m {
            gammas[(i, j)] = if bounds[j] == 0.0 {
                0.0
            } else {
                rng.gen_range(-bounds[j]..=bounds[j])
            };
        }
    }
    MismatchEnsemble::new(gammas, bounds.to_vec())
}

/// The positive corner of the mismatch box: the `γ_c` realizing the
/// worst-case bound of the uncertainty assumption.
pub fn corner_gamma_c(bounds: &[f64]) -> Result<DVector<f64>> {
    for (j, b) in bounds.iter().enumerate() {
        if !(b.is_finite() && *b >= 0.0) {
            return Err(Error::Validation(format!(
                "bound {j} must be finite and nonnegative, got {b}"
            )));
        }
    }
    Ok(DVector::from_column_slice(bounds))
}

/// The pair `(Γ, γ_c)` bounding `γᵀ Gᵀ(x) G(x) γ ≤ γ_cᵀ Γ γ_c` over the
/// working region.
#[derive(Debug, Clone)]
pub struct UncertaintyBound {
    gamma: DMatrix<f64>,
    gamma_c: DVector<f64>,
}

impl UncertaintyBound {
    pub fn new(gamma: DMatrix<f64>, gamma_c: DVector<f64>) -> Result<Self> {
        let m = gamma.nrows();
        if gamma.ncols() != m {
            return Err(Error::InvalidSize("Gamma must be square".into()));
        }
        if gamma_c.len() != m {
            return Err(Error::Dimension(format!(
                "gamma_c has length {}, Gamma is {m}x{m}",
                gamma_c.len()
            )));
        }
        let spec = crate::graph::symmetric_eigendecompose(&gamma)
            .map_err(|_| Error::Asymmetric("Gamma must be symmetric".into()))?;
        if spec.eigenvalues()[0] < -1e-9 {
            return Err(Error::Validation(format!(
                "Gamma must be positive semidefinite, smallest eigenvalue {}",
                spec.eigenvalues()[0]
            )));
        }
        Ok(Self { gamma, gamma_c })
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn gamma_c(&self) -> &DVector<f64> {
        &self.gamma_c
    }

    /// The scalar `γ_cᵀ Γ γ_c`.
    pub fn worst_case(&self) -> f64 {
        (self.gamma_c.transpose() * &self.gamma * &self.gamma_c)[(0, 0)]
    }
}

/// The one-sided Lipschitz bound matrix of the nominal drift,
/// `(x-s)ᵀ[f(x)-f(s)] ≤ (x-s)ᵀ F (x-s)`. Not necessarily symmetric.
#[derive(Debug, Clone)]
pub struct QuadBound {
    f: DMatrix<f64>,
}

impl QuadBound {
    pub fn new(f: DMatrix<f64>) -> Result<Self> {
        if f.nrows() != f.ncols() || f.is_empty() {
            return Err(Error::InvalidSize("F must be square and nonempty".into()));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("F contains non-finite entries".into()));
        }
        Ok(Self { f })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn dim(&self) -> usize {
        self.f.nrows()
    }
}

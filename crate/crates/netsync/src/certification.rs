//! Spectral stability certificates.
//!
//! All conditions have the shape "F − μ H⁽ˢ⁾ (+ λI) negative definite
//! over a set of Laplacian eigenvalues μ". Negative definiteness of the
//! possibly-asymmetric matrix is decided through its symmetric part, so
//! every check reduces to a largest-eigenvalue computation and the
//! uniform-margin program has an exact closed form.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{QuadBound, UncertaintyBound};
use crate::graph::{symmetric_eigendecompose, GainDiagonal, UndirectedLaplacian};
use crate::{Error, Result};

/// Outcome of a spectral certificate check.
///
/// `margin` is the smallest value of `-λ_max(sym(F) - μ_i H⁽ˢ⁾)` over the
/// checked eigenvalue set; the certificate holds iff it is positive.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub satisfied: bool,
    pub margin: f64,
    /// The eigenvalue μ_i at which the margin is attained.
    pub binding_eigenvalue: f64,
    /// Uniform margin λ* (ultimate-bound certificate only).
    pub lambda_star: Option<f64>,
    /// Ultimate synchronization-error bound (when λ* > 0).
    pub epsilon_bound: Option<f64>,
}

fn sym_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn lambda_max(m: &DMatrix<f64>) -> Result<f64> {
    let spec = symmetric_eigendecompose(m)?;
    Ok(spec.eigenvalues()[m.nrows() - 1])
}

fn check_inputs(f: &QuadBound, h: &DMatrix<f64>) -> Result<()> {
    let n = f.dim();
    if h.nrows() != n || h.ncols() != n {
        return Err(Error::Dimension(format!(
            "H is {}x{}, F is {n}x{n}",
            h.nrows(),
            h.ncols()
        )));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("H contains non-finite entries".into()));
    }
    Ok(())
}

/// Margin over an explicit eigenvalue set; returns `(margin, binding_mu)`.
fn margin_over(f: &QuadBound, h: &DMatrix<f64>, mus: &[f64]) -> Result<(f64, f64)> {
    check_inputs(f, h)?;
    if mus.is_empty() {
        return Err(Error::InvalidSize("eigenvalue set is empty".into()));
    }
    if mus.iter().any(|m| !m.is_finite()) {
        return Err(Error::NonFinite("eigenvalue set has non-finite entry".into()));
    }
    let fs = sym_part(f.matrix());
    let hs = sym_part(h);
    let mut best = f64::INFINITY;
    let mut binding = mus[0];
    for &mu in mus {
        let margin = -lambda_max(&(&fs - &hs * mu))?;
        if margin < best {
            best = margin;
            binding = mu;
        }
    }
    Ok((best, binding))
}

/// The largest uniform margin λ such that `F - μ_i H⁽ˢ⁾ + λI ≺ 0` for
/// every listed μ_i; equals `min_i -λ_max(sym(F) - μ_i H⁽ˢ⁾)` and may be
/// nonpositive, in which case the ultimate-bound condition fails.
pub fn lambda_star(f: &QuadBound, h: &DMatrix<f64>, nonzero_mu: &[f64]) -> Result<f64> {
    margin_over(f, h, nonzero_mu).map(|(m, _)| m)
}

/// Ultimate bound `√(N γ_cᵀ Γ γ_c) / λ*` on the norm of the stacked
/// average-trajectory error.
pub fn epsilon_bound(n_nodes: usize, unc: &UncertaintyBound, lambda_star: f64) -> Result<f64> {
    if lambda_star <= 0.0 {
        return Err(Error::CertificateFailed(format!(
            "lambda_star = {lambda_star} is not positive; no ultimate bound exists"
        )));
    }
    Ok((n_nodes as f64 * unc.worst_case()).sqrt() / lambda_star)
}

/// Full ultimate-bound certificate for the uncontrolled network: λ* over
/// the nonzero Laplacian eigenvalues plus the resulting ε bound.
pub fn certify_open_loop(
    f: &QuadBound,
    h: &DMatrix<f64>,
    l: &UndirectedLaplacian,
    unc: &UncertaintyBound,
) -> Result<CertificateReport> {
    if !l.is_connected()? {
        return Err(Error::Validation(
            "plant network must be connected for the ultimate-bound certificate".into(),
        ));
    }
    let spec = l.spectrum()?;
    let nonzero: Vec<f64> = spec.eigenvalues().iter().skip(1).copied().collect();
    let (margin, binding) = margin_over(f, h, &nonzero)?;
    let eps = if margin > 0.0 {
        Some(epsilon_bound(l.n(), unc, margin)?)
    } else {
        None
    };
    Ok(CertificateReport {
        satisfied: margin > 0.0,
        margin,
        binding_eigenvalue: binding,
        lambda_star: Some(margin),
        epsilon_bound: eps,
    })
}

/// Gain condition for the decentralized regime: margin over all
/// eigenvalues of `L + Z`.
pub fn check_decentralized(
    f: &QuadBound,
    h: &DMatrix<f64>,
    l: &UndirectedLaplacian,
    z: &GainDiagonal,
) -> Result<CertificateReport> {
    if z.n() != l.n() {
        return Err(Error::Dimension(format!(
            "Z has {} gains, network has {} nodes",
            z.n(),
            l.n()
        )));
    }
    let lz = l.entries() + z.as_matrix();
    let spec = symmetric_eigendecompose(&lz)?;
    let mus: Vec<f64> = spec.eigenvalues().iter().copied().collect();
    let (margin, binding) = margin_over(f, h, &mus)?;
    Ok(CertificateReport {
        satisfied: margin > 0.0,
        margin,
        binding_eigenvalue: binding,
        lambda_star: None,
        epsilon_bound: None,
    })
}

/// Gain condition for the distributed regime: margin over all
/// eigenvalues of `L + B + Z`.
pub fn check_distributed(
    f: &QuadBound,
    h: &DMatrix<f64>,
    l: &UndirectedLaplacian,
    b: &UndirectedLaplacian,
    z: &GainDiagonal,
) -> Result<CertificateReport> {
    if b.n() != l.n() || z.n() != l.n() {
        return Err(Error::Dimension(format!(
            "L, B, Z sizes disagree: {}, {}, {}",
            l.n(),
            b.n(),
            z.n()
        )));
    }
    let lbz = l.entries() + b.entries() + z.as_matrix();
    let spec = symmetric_eigendecompose(&lbz)?;
    let mus: Vec<f64> = spec.eigenvalues().iter().copied().collect();
    let (margin, binding) = margin_over(f, h, &mus)?;
    Ok(CertificateReport {
        satisfied: margin > 0.0,
        margin,
        binding_eigenvalue: binding,
        lambda_star: None,
        epsilon_bound: None,
    })
}

/// The smallest μ such that `sym(F) - μ H⁽ˢ⁾ ≺ 0`; requires H⁽ˢ⁾ ≻ 0.
/// For `H = h·I` this is `λ_max(sym(F)) / h`.
pub fn mu_threshold(f: &QuadBound, h: &DMatrix<f64>) -> Result<f64> {
    check_inputs(f, h)?;
    let hs = sym_part(h);
    let hspec = symmetric_eigendecompose(&hs)?;
    if hspec.eigenvalues()[0] <= 0.0 {
        return Err(Error::Validation(format!(
            "H symmetric part must be positive definite, smallest eigenvalue {}",
            hspec.eigenvalues()[0]
        )));
    }
    // W = Hs^{-1/2} sym(F) Hs^{-1/2}; the threshold is λ_max(W).
    let inv_sqrt = hspec.eigenvectors()
        * DMatrix::from_diagonal(&DVector::from_iterator(
            hs.nrows(),
            hspec.eigenvalues().iter().map(|e| 1.0 / e.sqrt()),
        ))
        * hspec.eigenvectors().transpose();
    let w = &inv_sqrt * sym_part(f.matrix()) * &inv_sqrt;
    lambda_max(&w)
}

/// Greedy pin placement: adds one pinned node at a time, each step
/// choosing the node that maximizes the smallest eigenvalue of `L + Z`.
/// Ties (within 1e-9) break toward the lowest node index.
pub fn greedy_pin_selection(
    l: &UndirectedLaplacian,
    k: usize,
    gain: f64,
) -> Result<GainDiagonal> {
    let n = l.n();
    if k == 0 || k > n {
        return Err(Error::Validation(format!(
            "pin count must satisfy 1 <= k <= {n}, got {k}"
        )));
    }
    if !(gain.is_finite() && gain > 0.0) {
        return Err(Error::Validation(format!("pin gain must be positive, got {gain}")));
    }
    let mut gains = vec![0.0; n];
    for _ in 0..k {
        let mut best_idx = None;
        let mut best_lam = f64::NEG_INFINITY;
        for cand in 0..n {
            if gains[cand] > 0.0 {
                continue;
            }
            let mut trial = l.entries().clone();
            for (i, g) in gains.iter().enumerate() {
                trial[(i, i)] += g;
            }
            trial[(cand, cand)] += gain;
            let lam = symmetric_eigendecompose(&trial)?.eigenvalues()[0];
            if lam > best_lam + 1e-9 {
                best_lam = lam;
                best_idx = Some(cand);
            }
        }
        gains[best_idx.expect("at least one unpinned candidate")] = gain;
    }
    GainDiagonal::new(gains)
}

//! Noise-subspace blind channel estimator.
//!
//! The observation is cut into overlapping windows of `Q` blocks,
//! `w_n = y_N[nP .. nP + QP - L]`, each of which follows the `N = Q` system
//! model `w_n = K_Q(h) s_window + e`. The eigenvectors of the windowed sample
//! covariance beyond the `QM`-dimensional signal subspace approximate the left
//! null space of `K_Q(h)`. Each one, lifted by `G^H` and rearranged into a
//! Hankel matrix `Hk`, gives `u^H K_Q(h) = h^T Hk^H (I_Q (x) F)`, so the channel
//! minimizes the quadratic form `h^H Q h` with
//! `Q = conj(sum_u Hk_u^H X X^H Hk_u)`, `X = I_Q (x) F`.

use num_complex::Complex64;

use crate::crb_blind::hankel_of;
use crate::error::{Error, Result};
use crate::linalg::{block_diag_repeat, c, hermitian_eigen_sorted, CMatrix, CVector};
use crate::model::{Precoder, SystemConfig};

/// Relative gap below which the two smallest eigenvalues of the criterion
/// matrix are considered equal.
pub const DEGENERACY_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSettings {
    /// Consecutive blocks per covariance window (at least 2).
    pub window_blocks: usize,
    /// Diagonal loading added to the sample covariance.
    pub shrinkage: f64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings { window_blocks: 2, shrinkage: 0.0 }
    }
}

impl EstimatorSettings {
    pub fn validate(&self, n_blocks: usize) -> Result<()> {
        if self.window_blocks < 2 || self.window_blocks > n_blocks {
            return Err(Error::InvalidConfig(format!(
                "window_blocks must lie in 2..={n_blocks}, got {}",
                self.window_blocks
            )));
        }
        if !(self.shrinkage >= 0.0) || !self.shrinkage.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "shrinkage must be a nonnegative number, got {}",
                self.shrinkage
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: CVector,
    /// Whether the scalar ambiguity has been fixed by [`resolve_ambiguity`].
    pub resolved: bool,
}

/// Channel estimate (unit norm, unresolved scale) from a received frame.
pub fn subspace_estimate(
    y: &CVector,
    cfg: &SystemConfig,
    precoder: &Precoder,
    settings: &EstimatorSettings,
) -> Result<ChannelEstimate> {
    let noise = noise_subspace(y, cfg, settings)?;
    estimate_from_noise_subspace(&noise, precoder, settings.window_blocks)
}

/// Estimated noise subspace (`(QP - L) x k`) of the windowed sample covariance.
///
/// The signal dimension is `QM`, capped by the number of windows when the
/// frame is too short to excite the whole signal subspace.
pub fn noise_subspace(y: &CVector, cfg: &SystemConfig, settings: &EstimatorSettings) -> Result<CMatrix> {
    settings.validate(cfg.n)?;
    if y.len() != cfg.observation_len() {
        return Err(Error::ShapeMismatch(format!(
            "observation has length {}, expected {}",
            y.len(),
            cfg.observation_len()
        )));
    }
    let q = settings.window_blocks;
    let p = cfg.p();
    let width = q * p - cfg.l;
    let count = cfg.n - q + 1;
    let mut cov = CMatrix::zeros(width, width);
    for start in (0..count).map(|w| w * p) {
        let win = y.rows(start, width);
        cov.gerc(c(1.0, 0.0), &win, &win, c(1.0, 0.0));
    }
    if cov.iter().all(|z| *z == c(0.0, 0.0)) {
        return Err(Error::InsufficientData("received frame carries no energy".into()));
    }
    cov *= c(1.0 / count as f64, 0.0);
    for i in 0..width {
        cov[(i, i)] += c(settings.shrinkage, 0.0);
    }
    let signal_dim = (q * cfg.m).min(count);
    if signal_dim >= width {
        return Err(Error::InsufficientData(format!(
            "signal subspace of dimension {signal_dim} fills the {width}-sample window"
        )));
    }
    let (_, vectors) = hermitian_eigen_sorted(&cov);
    Ok(vectors.columns(0, width - signal_dim).into_owned())
}

/// Minimizer of the subspace criterion for a given noise basis whose vectors
/// have length `QP - L`.
pub fn estimate_from_noise_subspace(
    noise: &CMatrix,
    precoder: &Precoder,
    window_blocks: usize,
) -> Result<ChannelEstimate> {
    let (p, l) = (precoder.p(), precoder.l());
    let width = window_blocks * p - l;
    if noise.nrows() != width {
        return Err(Error::ShapeMismatch(format!(
            "noise vectors have length {}, expected {width}",
            noise.nrows()
        )));
    }
    if noise.ncols() == 0 {
        return Err(Error::InsufficientData("empty noise subspace".into()));
    }
    let x = block_diag_repeat(&precoder.f, window_blocks);
    let stream_len = window_blocks * p;
    let mut lifted = CMatrix::zeros(width + 2 * l, noise.ncols());
    lifted.view_mut((l, 0), (width, noise.ncols())).copy_from(noise);
    let mut acc = CMatrix::zeros(l + 1, l + 1);
    for j in 0..noise.ncols() {
        let hk = hankel_of(&lifted, j, stream_len, l);
        let b = hk.ad_mul(&x);
        acc += &b * b.adjoint();
    }
    let criterion = acc.map(|z| z.conj());
    let (values, vectors) = hermitian_eigen_sorted(&criterion);
    let top = values.last().copied().unwrap_or(0.0).abs();
    if values.len() >= 2 && (values[1] - values[0]).abs() <= DEGENERACY_RTOL * top {
        return Err(Error::SolverDegenerate(values[0], values[1]));
    }
    Ok(ChannelEstimate { h_hat: vectors.column(0).into_owned(), resolved: false })
}

/// Fixes the scalar ambiguity: returns `(hd0 / h_hat[d]) h_hat`, with entry
/// `d` set to `hd0` exactly.
pub fn resolve_ambiguity(estimate: &ChannelEstimate, d: usize, hd0: Complex64) -> Result<ChannelEstimate> {
    let h = &estimate.h_hat;
    if d >= h.len() {
        return Err(Error::InvalidDimensions(format!("anchor tap {d} outside 0..{}", h.len())));
    }
    let anchor = h[d];
    if anchor.norm() < 1e-12 {
        return Err(Error::ZeroAnchorTap(anchor.norm()));
    }
    let scale = hd0 / anchor;
    let mut out = h * scale;
    out[d] = hd0;
    Ok(ChannelEstimate { h_hat: out, resolved: true })
}

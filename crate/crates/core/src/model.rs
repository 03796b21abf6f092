//! System model of a redundant block transmission over an FIR channel.
//!
//! `N` blocks of `M` symbols are precoded by `F = R * F_tilde` into blocks of
//! `P = M + L` samples and sent back to back through an order-`L` channel.
//! The receiver drops the first `L` samples (they depend on the unknown
//! block preceding the frame) and observes
//!
//! ```text
//! y_N = G H (I_N (x) F) s_N + e_N = K s_N + e_N,    K = sum_l h_l K_l
//! ```
//!
//! with `e_N ~ CN(0, sigma2 I)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{block_diag_repeat, c, CMatrix, CVector, RANK_RTOL};

/// Redundancy pattern `R` (`P x M`).
#[derive(Debug, Clone, PartialEq)]
pub enum RedundancyKind {
    /// Cyclic prefix: the last `L` samples of each block are copied to the front.
    Cp,
    /// Zero padding: `L` zeros are appended to each block.
    Zp,
    Custom(CMatrix),
}

impl RedundancyKind {
    pub fn name(&self) -> &'static str {
        match self {
            RedundancyKind::Cp => "cp",
            RedundancyKind::Zp => "zp",
            RedundancyKind::Custom(_) => "custom",
        }
    }
}

/// Inner (square) precoder `F_tilde` (`M x M`).
#[derive(Debug, Clone, PartialEq)]
pub enum InnerKind {
    /// Single-carrier transmission.
    Identity,
    /// OFDM: the unitary inverse DFT matrix.
    Idft,
    Custom(CMatrix),
}

impl InnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            InnerKind::Identity => "identity",
            InnerKind::Idft => "idft",
            InnerKind::Custom(_) => "custom",
        }
    }
}

/// Dimensions, noise level and precoder selection of one system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Symbols per block.
    pub m: usize,
    /// Channel order.
    pub l: usize,
    /// Number of received blocks.
    pub n: usize,
    /// Noise variance; real and imaginary parts each carry half of it.
    pub sigma2: f64,
    pub redundancy: RedundancyKind,
    pub inner: InnerKind,
}

impl SystemConfig {
    pub fn new(
        m: usize,
        l: usize,
        n: usize,
        sigma2: f64,
        redundancy: RedundancyKind,
        inner: InnerKind,
    ) -> Result<Self> {
        let cfg = SystemConfig { m, l, n, sigma2, redundancy, inner };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.l == 0 || self.l >= self.m {
            return Err(Error::InvalidDimensions(format!(
                "need 1 <= L < M, got M={} L={}",
                self.m, self.l
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidDimensions(format!(
                "need N >= 2 blocks for a nonempty noise subspace, got N={}",
                self.n
            )));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::NonPositiveNoise(self.sigma2));
        }
        Ok(())
    }

    /// Samples per transmitted block, `M + L`.
    pub fn p(&self) -> usize {
        self.m + self.l
    }

    /// Length of the observation vector, `N P - L`.
    pub fn observation_len(&self) -> usize {
        self.n * self.p() - self.l
    }

    pub fn symbol_count(&self) -> usize {
        self.n * self.m
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Self {
        SystemConfig { sigma2, ..self.clone() }
    }

    pub fn with_blocks(&self, n: usize) -> Self {
        SystemConfig { n, ..self.clone() }
    }
}

/// Linear redundant precoder `F = R * F_tilde`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub redundancy: RedundancyKind,
    pub inner: InnerKind,
    pub r: CMatrix,
    pub ftilde: CMatrix,
    pub f: CMatrix,
}

impl Precoder {
    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        let r = build_redundancy(&cfg.redundancy, cfg.m, cfg.l)?;
        let ftilde = build_inner_precoder(&cfg.inner, cfg.m)?;
        Self::from_parts(cfg.redundancy.clone(), cfg.inner.clone(), r, ftilde)
    }

    /// Assembles `F = R * F_tilde`, checking that `F_tilde` is nonsingular and
    /// `F` has full column rank.
    pub fn from_parts(
        redundancy: RedundancyKind,
        inner: InnerKind,
        r: CMatrix,
        ftilde: CMatrix,
    ) -> Result<Self> {
        let m = ftilde.nrows();
        if ftilde.ncols() != m || r.ncols() != m || r.nrows() <= m {
            return Err(Error::ShapeMismatch(format!(
                "R is {}x{}, F_tilde is {}x{}",
                r.nrows(),
                r.ncols(),
                ftilde.nrows(),
                ftilde.ncols()
            )));
        }
        check_full_column_rank(&ftilde, "inner precoder")?;
        let f = &r * &ftilde;
        check_full_column_rank(&f, "precoder")?;
        Ok(Precoder { redundancy, inner, r, ftilde, f })
    }

    pub fn m(&self) -> usize {
        self.f.ncols()
    }

    pub fn p(&self) -> usize {
        self.f.nrows()
    }

    pub fn l(&self) -> usize {
        self.p() - self.m()
    }

    pub fn is_zero_padded(&self) -> bool {
        self.redundancy == RedundancyKind::Zp
    }
}

fn check_full_column_rank(a: &CMatrix, what: &'static str) -> Result<()> {
    let sv = a.singular_values();
    let largest = sv.max();
    let smallest = sv.min();
    if !(largest > 0.0) || smallest <= RANK_RTOL * largest {
        let ratio = if largest > 0.0 { smallest / largest } else { 0.0 };
        return Err(Error::RankDeficient { what, ratio });
    }
    Ok(())
}

/// FIR channel with a known anchor tap.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    /// Taps `h_0 .. h_L`.
    pub h: CVector,
    /// Index of the tap known to the receiver.
    pub d: usize,
    /// Realized value of the known tap.
    pub hd0: Complex64,
}

impl Channel {
    pub fn new(h: CVector, d: usize) -> Result<Self> {
        if d >= h.len() {
            return Err(Error::InvalidDimensions(format!(
                "known tap index {d} outside 0..{}",
                h.len()
            )));
        }
        if h[d] == c(0.0, 0.0) {
            return Err(Error::InvalidConfig(format!("known tap h[{d}] is zero")));
        }
        let hd0 = h[d];
        Ok(Channel { h, d, hd0 })
    }

    /// Anchors the tap with the largest power.
    pub fn with_strongest_tap(h: CVector) -> Result<Self> {
        let d = strongest_tap(&h);
        Self::new(h, d)
    }

    pub fn order(&self) -> usize {
        self.h.len() - 1
    }
}

/// `argmax_l |h_l|^2`, lowest index on ties.
pub fn strongest_tap(h: &CVector) -> usize {
    let mut best = 0;
    for (i, z) in h.iter().enumerate() {
        if z.norm_sqr() > h[best].norm_sqr() {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    /// Unit-power constellation `{(+-1 +- j)/sqrt(2)}`.
    Qpsk,
    /// Caller-supplied symbols; cannot be generated.
    Custom,
}

/// Concatenated symbol blocks `s(0) .. s(N-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub s: CVector,
    pub modulation: Modulation,
}

impl SymbolFrame {
    pub fn custom(s: CVector) -> Self {
        SymbolFrame { s, modulation: Modulation::Custom }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: CVector,
}

/// Redundancy matrix `R` (`P x M`) for the given scheme.
pub fn build_redundancy(kind: &RedundancyKind, m: usize, l: usize) -> Result<CMatrix> {
    if m == 0 || l == 0 || l >= m {
        return Err(Error::InvalidDimensions(format!(
            "redundancy needs 1 <= L < M, got M={m} L={l}"
        )));
    }
    let p = m + l;
    let mut r = CMatrix::zeros(p, m);
    match kind {
        RedundancyKind::Cp => {
            for i in 0..l {
                r[(i, m - l + i)] = c(1.0, 0.0);
            }
            for i in 0..m {
                r[(l + i, i)] = c(1.0, 0.0);
            }
        }
        RedundancyKind::Zp => {
            for i in 0..m {
                r[(i, i)] = c(1.0, 0.0);
            }
        }
        RedundancyKind::Custom(custom) => {
            if custom.shape() != (p, m) {
                return Err(Error::ShapeMismatch(format!(
                    "custom R must be {p}x{m}, got {}x{}",
                    custom.nrows(),
                    custom.ncols()
                )));
            }
            r.copy_from(custom);
        }
    }
    Ok(r)
}

/// Inner precoder `F_tilde` (`M x M`). The IDFT option has entries
/// `exp(+j 2 pi m n / M) / sqrt(M)`.
pub fn build_inner_precoder(kind: &InnerKind, m: usize) -> Result<CMatrix> {
    if m == 0 {
        return Err(Error::InvalidDimensions("M must be positive".into()));
    }
    match kind {
        InnerKind::Identity => Ok(CMatrix::identity(m, m)),
        InnerKind::Idft => {
            let scale = 1.0 / (m as f64).sqrt();
            Ok(CMatrix::from_fn(m, m, |r, k| {
                let phase = 2.0 * PI * ((r * k) % m) as f64 / m as f64;
                Complex64::from_polar(scale, phase)
            }))
        }
        InnerKind::Custom(custom) => {
            if custom.shape() != (m, m) {
                return Err(Error::ShapeMismatch(format!(
                    "custom F_tilde must be {m}x{m}, got {}x{}",
                    custom.nrows(),
                    custom.ncols()
                )));
            }
            Ok(custom.clone())
        }
    }
}

/// Banded Toeplitz convolution matrix of the channel.
///
/// With `rows - cols = L` this is the tall form (`[i, j] = h_{i-j}`); with
/// `cols - rows = L` it is the fat form whose row `i` holds `h_L .. h_0` in
/// columns `i .. i+L`.
pub fn build_channel_toeplitz(h: &CVector, rows: usize, cols: usize) -> Result<CMatrix> {
    if h.is_empty() {
        return Err(Error::InvalidDimensions("empty channel".into()));
    }
    let l = h.len() - 1;
    if rows == cols + l {
        Ok(CMatrix::from_fn(rows, cols, |i, j| {
            if i >= j && i - j <= l {
                h[i - j]
            } else {
                c(0.0, 0.0)
            }
        }))
    } else if cols == rows + l {
        Ok(CMatrix::from_fn(rows, cols, |i, j| {
            if j >= i && j - i <= l {
                h[l - (j - i)]
            } else {
                c(0.0, 0.0)
            }
        }))
    } else {
        Err(Error::ShapeMismatch(format!(
            "a {rows}x{cols} Toeplitz matrix cannot hold a channel of order {l}"
        )))
    }
}

/// Row selector `G` (`(NP-L) x (NP+L)`, `[0 | I | 0]`) and the shift matrices
/// `J_l` (`(NP+L) x NP`, ones where `i - j = l`).
pub fn build_selection_matrices(n: usize, p: usize, l: usize) -> Result<(CMatrix, Vec<CMatrix>)> {
    if n == 0 || p == 0 || n * p <= l {
        return Err(Error::InvalidDimensions(format!(
            "selection matrices need N P > L, got N={n} P={p} L={l}"
        )));
    }
    let np = n * p;
    let mut g = CMatrix::zeros(np - l, np + l);
    for i in 0..np - l {
        g[(i, i + l)] = c(1.0, 0.0);
    }
    let js = (0..=l)
        .map(|shift| {
            let mut j = CMatrix::zeros(np + l, np);
            for col in 0..np {
                j[(col + shift, col)] = c(1.0, 0.0);
            }
            j
        })
        .collect();
    Ok((g, js))
}

/// `x_N = (I_N (x) F) s_N`.
pub fn precode(precoder: &Precoder, s: &CVector) -> Result<CVector> {
    let (p, m) = precoder.f.shape();
    if !s.len().is_multiple_of(m) {
        return Err(Error::ShapeMismatch(format!(
            "symbol vector length {} is not a multiple of M={m}",
            s.len()
        )));
    }
    let n = s.len() / m;
    let mut x = CVector::zeros(n * p);
    for b in 0..n {
        let block = &precoder.f * s.rows(b * m, m);
        x.rows_mut(b * p, p).copy_from(&block);
    }
    Ok(x)
}

/// `K = G H (I_N (x) F)` and its per-tap components `K_l = G J_l (I_N (x) F)`.
///
/// `K_l` is a row window of `I_N (x) F`: row `r` of `K_l` is row `r + L - l`.
pub fn build_k(n: usize, precoder: &Precoder, h: &CVector) -> Result<(CMatrix, Vec<CMatrix>)> {
    let l = precoder.l();
    if h.len() != l + 1 {
        return Err(Error::ShapeMismatch(format!(
            "channel has {} taps, precoder expects {}",
            h.len(),
            l + 1
        )));
    }
    if n == 0 {
        return Err(Error::InvalidDimensions("N must be positive".into()));
    }
    let p = precoder.p();
    let rows = n * p - l;
    let x = block_diag_repeat(&precoder.f, n);
    let k_list: Vec<CMatrix> = (0..=l)
        .map(|tap| x.rows(l - tap, rows).into_owned())
        .collect();
    let mut k = CMatrix::zeros(rows, x.ncols());
    for (tap, kl) in k_list.iter().enumerate() {
        k += kl * h[tap];
    }
    Ok((k, k_list))
}

/// i.i.d. symbols for `N` blocks of `M`.
pub fn generate_symbols<R: Rng + ?Sized>(
    modulation: Modulation,
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<SymbolFrame> {
    match modulation {
        Modulation::Qpsk => {
            let s = CVector::from_fn(n * m, |_, _| {
                let re = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                let im = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                c(re, im)
            });
            Ok(SymbolFrame { s, modulation })
        }
        Modulation::Custom => Err(Error::UnsupportedModulation(
            "custom symbols must be supplied, not generated".into(),
        )),
    }
}

/// Noiseless observation `K s_N`, evaluated as a linear convolution of the
/// precoded stream with the first and last `L` output samples dropped.
pub fn noiseless_observation(precoder: &Precoder, h: &CVector, s: &CVector) -> Result<CVector> {
    let l = precoder.l();
    if h.len() != l + 1 {
        return Err(Error::ShapeMismatch(format!(
            "channel has {} taps, precoder expects {}",
            h.len(),
            l + 1
        )));
    }
    let x = precode(precoder, s)?;
    let total = x.len();
    if total <= l {
        return Err(Error::InvalidDimensions("frame shorter than the channel".into()));
    }
    Ok(CVector::from_fn(total - l, |r, _| {
        let t = r + l;
        (0..=l).map(|tap| h[tap] * x[t - tap]).sum()
    }))
}

/// Circular complex Gaussian vector with per-entry variance `sigma2`.
pub fn complex_noise<R: Rng + ?Sized>(len: usize, sigma2: f64, rng: &mut R) -> CVector {
    let scale = (sigma2 / 2.0).sqrt();
    CVector::from_fn(len, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(scale * re, scale * im)
    })
}

/// `y_N = K s_N + e_N` with noise variance `cfg.sigma2`.
pub fn synthesize_observation<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    precoder: &Precoder,
    h: &CVector,
    s: &CVector,
    rng: &mut R,
) -> Result<Observation> {
    synthesize_observation_with_noise(cfg, precoder, h, s, cfg.sigma2, rng)
}

/// As [`synthesize_observation`] with an explicit noise variance; `0` gives
/// the noiseless observation and consumes no randomness.
pub fn synthesize_observation_with_noise<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    precoder: &Precoder,
    h: &CVector,
    s: &CVector,
    sigma2: f64,
    rng: &mut R,
) -> Result<Observation> {
    check_frame(cfg, precoder, h, s)?;
    if !(sigma2 >= 0.0) {
        return Err(Error::NonPositiveNoise(sigma2));
    }
    let mut y = noiseless_observation(precoder, h, s)?;
    if sigma2 > 0.0 {
        y += complex_noise(y.len(), sigma2, rng);
    }
    Ok(Observation { y })
}

fn check_frame(cfg: &SystemConfig, precoder: &Precoder, h: &CVector, s: &CVector) -> Result<()> {
    if precoder.m() != cfg.m || precoder.l() != cfg.l {
        return Err(Error::ShapeMismatch(format!(
            "precoder is {}x{}, config has M={} L={}",
            precoder.p(),
            precoder.m(),
            cfg.m,
            cfg.l
        )));
    }
    if h.len() != cfg.l + 1 || s.len() != cfg.symbol_count() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} taps and {} symbols, got {} and {}",
            cfg.l + 1,
            cfg.symbol_count(),
            h.len(),
            s.len()
        )));
    }
    Ok(())
}

/// `ln p(y_N; h, s_N) = -(NP-L) ln(pi sigma2) - ||y_N - K s_N||^2 / sigma2`.
pub fn log_likelihood(
    y: &CVector,
    cfg: &SystemConfig,
    precoder: &Precoder,
    h: &CVector,
    s: &CVector,
) -> Result<f64> {
    let e = residual(y, cfg, precoder, h, s)?;
    let n_obs = e.len() as f64;
    Ok(-n_obs * (PI * cfg.sigma2).ln() - e.norm_squared() / cfg.sigma2)
}

fn residual(
    y: &CVector,
    cfg: &SystemConfig,
    precoder: &Precoder,
    h: &CVector,
    s: &CVector,
) -> Result<CVector> {
    check_frame(cfg, precoder, h, s)?;
    if !(cfg.sigma2 > 0.0) {
        return Err(Error::NonPositiveNoise(cfg.sigma2));
    }
    if y.len() != cfg.observation_len() {
        return Err(Error::ShapeMismatch(format!(
            "observation has length {}, expected {}",
            y.len(),
            cfg.observation_len()
        )));
    }
    Ok(y - noiseless_observation(precoder, h, s)?)
}

/// Wirtinger gradients of the log-likelihood with respect to the conjugated
/// parameters. The gradients in `h` and `s_N` are their complex conjugates.
#[derive(Debug, Clone, PartialEq)]
pub struct LoglikGradients {
    /// `d ln p / d h_l^* = s_N^H K_l^H e_N / sigma2`, one entry per tap.
    pub dh_conj: CVector,
    /// `d ln p / d s_N^* = K^H e_N / sigma2`.
    pub ds_conj: CVector,
}

pub fn loglik_gradients(
    y: &CVector,
    cfg: &SystemConfig,
    precoder: &Precoder,
    h: &CVector,
    s: &CVector,
) -> Result<LoglikGradients> {
    let e = residual(y, cfg, precoder, h, s)?;
    let (k, k_list) = build_k(cfg.n, precoder, h)?;
    let inv = 1.0 / cfg.sigma2;
    let dh_conj = CVector::from_iterator(
        k_list.len(),
        k_list.iter().map(|kl| (kl * s).dotc(&e) * inv),
    );
    let ds_conj = k.ad_mul(&e) * c(inv, 0.0);
    Ok(LoglikGradients { dh_conj, ds_conj })
}

//! Cramér-Rao bound for blind channel estimation.
//!
//! The parameter vector is `theta = [h^T, s_N^T]^T`; the symbols are nuisance
//! parameters and the scalar ambiguity is removed by fixing the tap `h_d`.
//! Two independent routes compute the `L x L` bound on the remaining taps:
//!
//! * **direct**: assemble the Fisher information blocks, take the Schur
//!   complement `D = J00 - J01 J11^-1 J01^H`, delete row/column `d`, invert;
//! * **fast**: write `D` through an orthonormal basis `U` of the left null
//!   space of `K`, rearranged into Hankel matrices, so that
//!   `D = (1/sigma2) sum_j v_j v_j^H` with `v_j = Hankel_j^T x_N^*` and
//!   `x_N = (I_N (x) F) s_N`.
//!
//! The per-block zero-padding bound keeps all `NP` samples and serves as the
//! reference for the cost of dropping the first `L` samples.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    c, delete_row_col, inverse_hermitian_pd, left_null_space, real_trace, solve_hermitian_pd, RANK_RTOL,
    CMatrix, CVector,
};
use crate::model::{build_k, precode, Precoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrbPath {
    Direct,
    Fast,
    ZpPerBlock,
}

/// Bound on the `L` unknown taps (tap `d` removed).
#[derive(Debug, Clone, PartialEq)]
pub struct CrbResult {
    pub c: CMatrix,
    pub trace: f64,
    pub d: usize,
    pub path: CrbPath,
}

impl CrbResult {
    fn new(c: CMatrix, d: usize, path: CrbPath) -> Self {
        let trace = real_trace(&c);
        CrbResult { c, trace, d, path }
    }

    /// The `(L+1) x (L+1)` bound with the zero row and column of the known tap.
    pub fn with_known_tap(&self) -> CMatrix {
        crate::linalg::insert_zero_row_col(&self.c, self.d)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CrbResult::new(&self.c * c(factor, 0.0), self.d, self.path)
    }
}

/// Blocks of the Fisher information of `[h; s_N]`. `J10 = J01^H` is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct FimBlocks {
    /// `(L+1) x (L+1)`.
    pub j00: CMatrix,
    /// `(L+1) x NM`.
    pub j01: CMatrix,
    /// `NM x NM`.
    pub j11: CMatrix,
    pub sigma2: f64,
}

impl FimBlocks {
    pub fn assemble(&self) -> CMatrix {
        let a = self.j00.nrows();
        let b = self.j11.nrows();
        let mut j = CMatrix::zeros(a + b, a + b);
        j.view_mut((0, 0), (a, a)).copy_from(&self.j00);
        j.view_mut((0, a), (a, b)).copy_from(&self.j01);
        j.view_mut((a, 0), (b, a)).copy_from(&self.j01.adjoint());
        j.view_mut((a, a), (b, b)).copy_from(&self.j11);
        j
    }

    pub fn taps(&self) -> usize {
        self.j00.nrows()
    }
}

/// Fisher information blocks
/// `[J00]_ij = s^H K_i^H K_j s / sigma2`, `row_i(J01) = s^H K_i^H K / sigma2`,
/// `J11 = K^H K / sigma2`.
pub fn fim_blocks(k: &CMatrix, k_list: &[CMatrix], s: &CVector, sigma2: f64) -> Result<FimBlocks> {
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveNoise(sigma2));
    }
    if k.ncols() != s.len() || k_list.iter().any(|kl| kl.shape() != k.shape()) {
        return Err(Error::ShapeMismatch(format!(
            "K is {}x{}, s_N has {} entries",
            k.nrows(),
            k.ncols(),
            s.len()
        )));
    }
    let inv = c(1.0 / sigma2, 0.0);
    // Column l of W is K_l s.
    let mut w = CMatrix::zeros(k.nrows(), k_list.len());
    for (l, kl) in k_list.iter().enumerate() {
        w.set_column(l, &(kl * s));
    }
    let j00 = w.ad_mul(&w) * inv;
    let j01 = w.ad_mul(k) * inv;
    let j11 = k.ad_mul(k) * inv;
    Ok(FimBlocks { j00, j01, j11, sigma2 })
}

/// Schur complement `D = J00 - J01 J11^-1 J01^H`: the information left about
/// the channel once the symbols are eliminated.
pub fn schur_information(blocks: &FimBlocks) -> Result<CMatrix> {
    let x = solve_hermitian_pd(&blocks.j11, &blocks.j01.adjoint(), "J11")?;
    let d = &blocks.j00 - &blocks.j01 * x;
    Ok(crate::linalg::hermitian_part(&d))
}

/// `C = (E_d D E_d^H)^-1` through the dense Fisher information.
pub fn crb_direct(blocks: &FimBlocks, d: usize) -> Result<CrbResult> {
    check_tap(d, blocks.taps())?;
    let info = schur_information(blocks)?;
    let c = inverse_hermitian_pd(&delete_row_col(&info, d), "E_d D E_d^H")?;
    Ok(CrbResult::new(c, d, CrbPath::Direct))
}

/// Builds `K` for `(h, F, N)` and evaluates the direct bound through
/// [`schur_information_from_model`].
pub fn crb_direct_for(
    h: &CVector,
    s: &CVector,
    precoder: &Precoder,
    d: usize,
    sigma2: f64,
    n: usize,
) -> Result<CrbResult> {
    let (k, k_list) = build_k(n, precoder, h)?;
    crb_direct_from_model(&k, &k_list, s, d, sigma2, CrbPath::Direct)
}

/// Schur complement of the Fisher information evaluated from `K` itself:
/// with `K = QR`, `J01 J11^-1 J01^H = W^H Q Q^H W / sigma2`, so
/// `D = ||(I - QQ^H) W||^2 / sigma2` without ever forming `K^H K`.
pub fn schur_information_from_model(k: &CMatrix, k_list: &[CMatrix], s: &CVector, sigma2: f64) -> Result<CMatrix> {
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveNoise(sigma2));
    }
    if k.ncols() != s.len() || k.ncols() > k.nrows() || k_list.iter().any(|kl| kl.shape() != k.shape()) {
        return Err(Error::ShapeMismatch(format!(
            "K is {}x{}, s_N has {} entries",
            k.nrows(),
            k.ncols(),
            s.len()
        )));
    }
    let sv = k.singular_values();
    let (largest, smallest) = (sv.max(), sv.min());
    if largest == 0.0 || smallest <= RANK_RTOL * largest {
        let ratio = if largest == 0.0 { 0.0 } else { smallest / largest };
        return Err(Error::RankDeficient { what: "K", ratio });
    }
    let q = k.clone().qr().q();
    let mut w = CMatrix::zeros(k.nrows(), k_list.len());
    for (l, kl) in k_list.iter().enumerate() {
        w.set_column(l, &(kl * s));
    }
    // Two projection passes keep the residual orthogonal to range(K).
    let mut r = &w - &q * q.ad_mul(&w);
    r -= &q * q.ad_mul(&r);
    Ok(crate::linalg::hermitian_part(&(r.ad_mul(&r) * c(1.0 / sigma2, 0.0))))
}

fn crb_direct_from_model(
    k: &CMatrix,
    k_list: &[CMatrix],
    s: &CVector,
    d: usize,
    sigma2: f64,
    path: CrbPath,
) -> Result<CrbResult> {
    check_tap(d, k_list.len())?;
    let info = schur_information_from_model(k, k_list, s, sigma2)?;
    let c = inverse_hermitian_pd(&delete_row_col(&info, d), "E_d D E_d^H")?;
    Ok(CrbResult::new(c, d, path))
}

fn check_tap(d: usize, taps: usize) -> Result<()> {
    if d >= taps {
        return Err(Error::InvalidDimensions(format!("known tap {d} outside 0..{taps}")));
    }
    Ok(())
}

/// Orthonormal left annihilator of `K` and its Hankel rearrangement.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSpaceBasis {
    /// `(NP-L) x (N-1)L`, orthonormal columns with `K^H U = 0`.
    pub utilde: CMatrix,
    /// `G^H U`, `(NP+L) x (N-1)L`; the first and last `L` rows are zero.
    pub ghu: CMatrix,
    /// One `PN x (L+1)` Hankel matrix per basis vector, `[r, c] = ghu[r + c, j]`.
    pub hankels: Vec<CMatrix>,
    /// `[Hankel_0^T, Hankel_1^T, ...]`, `(L+1) x (L P N (N-1))`.
    pub utilde_concat: Option<CMatrix>,
    pub l: usize,
}

impl NullSpaceBasis {
    pub fn dim(&self) -> usize {
        self.utilde.ncols()
    }

    /// Length of the transmitted stream, `NP`.
    pub fn stream_len(&self) -> usize {
        self.ghu.nrows() - self.l
    }
}

/// SVD-based orthonormal basis of the left null space of `K` (order `l`
/// channel). `K` must have full column rank.
pub fn left_null_basis(k: &CMatrix, l: usize) -> Result<NullSpaceBasis> {
    let utilde = left_null_space(k, "K")?;
    let rows = utilde.nrows();
    let mut ghu = CMatrix::zeros(rows + 2 * l, utilde.ncols());
    ghu.view_mut((l, 0), (rows, utilde.ncols())).copy_from(&utilde);
    Ok(NullSpaceBasis { utilde, ghu, hankels: Vec::new(), utilde_concat: None, l })
}

/// `PN x (L+1)` Hankel matrix of one column of `G^H U`.
pub fn hankel_of(ghu: &CMatrix, j: usize, stream_len: usize, l: usize) -> CMatrix {
    CMatrix::from_fn(stream_len, l + 1, |r, col| ghu[(r + col, j)])
}

/// Fills the Hankel matrices and their transposed concatenation.
pub fn hankel_rearrange(mut basis: NullSpaceBasis, p: usize, n: usize, l: usize) -> Result<NullSpaceBasis> {
    let stream_len = p * n;
    if basis.ghu.nrows() != stream_len + l || basis.l != l {
        return Err(Error::ShapeMismatch(format!(
            "G^H U has {} rows, expected NP + L = {}",
            basis.ghu.nrows(),
            stream_len + l
        )));
    }
    let count = basis.dim();
    let hankels: Vec<CMatrix> = (0..count).map(|j| hankel_of(&basis.ghu, j, stream_len, l)).collect();
    let mut concat = CMatrix::zeros(l + 1, stream_len * count);
    for (j, hk) in hankels.iter().enumerate() {
        concat.view_mut((0, j * stream_len), (l + 1, stream_len)).copy_from(&hk.transpose());
    }
    basis.hankels = hankels;
    basis.utilde_concat = Some(concat);
    Ok(basis)
}

/// `D * sigma2 = sum_j v_j v_j^H` with `v_j[k] = sum_r ghu[r + k, j] x_r^*`,
/// accumulated in ascending `j` without forming the Kronecker product.
pub fn unit_noise_information(basis: &NullSpaceBasis, x: &CVector) -> Result<CMatrix> {
    let stream_len = basis.stream_len();
    if x.len() != stream_len {
        return Err(Error::ShapeMismatch(format!(
            "precoded stream has {} samples, basis expects {stream_len}",
            x.len()
        )));
    }
    let taps = basis.l + 1;
    let xc: Vec<Complex64> = x.iter().map(|z| z.conj()).collect();
    let mut d = CMatrix::zeros(taps, taps);
    let mut v = vec![c(0.0, 0.0); taps];
    for j in 0..basis.dim() {
        let col = basis.ghu.column(j);
        for (k, vk) in v.iter_mut().enumerate() {
            // Only rows l..NP of G^H U are nonzero.
            let lo = basis.l.saturating_sub(k);
            let hi = stream_len - k;
            *vk = (lo..hi).map(|r| col[r + k] * xc[r]).sum();
        }
        for a in 0..taps {
            for b in 0..taps {
                d[(a, b)] += v[a] * v[b].conj();
            }
        }
    }
    Ok(crate::linalg::hermitian_part(&d))
}

/// `C = sigma2 (E_d D1 E_d^H)^-1` from a precomputed basis, where `D1` is the
/// unit-noise information.
pub fn crb_fast_with_basis(
    basis: &NullSpaceBasis,
    precoder: &Precoder,
    s: &CVector,
    d: usize,
    sigma2: f64,
) -> Result<CrbResult> {
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveNoise(sigma2));
    }
    check_tap(d, basis.l + 1)?;
    let x = precode(precoder, s)?;
    let info = unit_noise_information(basis, &x)?;
    let inv = inverse_hermitian_pd(&delete_row_col(&info, d), "E_d D E_d^H")?;
    Ok(CrbResult::new(inv * c(sigma2, 0.0), d, CrbPath::Fast))
}

/// Closed-form bound through the Hankel-rearranged null space of `K`.
pub fn crb_fast(
    h: &CVector,
    s: &CVector,
    precoder: &Precoder,
    d: usize,
    sigma2: f64,
    n: usize,
) -> Result<CrbResult> {
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveNoise(sigma2));
    }
    let (k, _) = build_k(n, precoder, h)?;
    let basis = left_null_basis(&k, precoder.l())?;
    crb_fast_with_basis(&basis, precoder, s, d, sigma2)
}

/// Bound for the zero-padded system when every received sample is kept: the
/// blocks decouple into `y(n) = T(h) F_tilde s(n)` with `T` the `P x M` tall
/// Toeplitz matrix.
pub fn crb_zp_per_block(
    h: &CVector,
    s: &CVector,
    precoder: &Precoder,
    d: usize,
    sigma2: f64,
    n: usize,
) -> Result<CrbResult> {
    if !precoder.is_zero_padded() {
        return Err(Error::NotZeroPadded(precoder.redundancy.name().to_string()));
    }
    let (m, l) = (precoder.m(), precoder.l());
    if h.len() != l + 1 || s.len() != n * m {
        return Err(Error::ShapeMismatch(format!(
            "expected {} taps and {} symbols, got {} and {}",
            l + 1,
            n * m,
            h.len(),
            s.len()
        )));
    }
    let p = m + l;
    let k_list: Vec<CMatrix> = (0..=l)
        .map(|tap| {
            let mut block = CMatrix::zeros(p, m);
            block.rows_mut(tap, m).copy_from(&precoder.ftilde);
            crate::linalg::block_diag_repeat(&block, n)
        })
        .collect();
    let mut k = CMatrix::zeros(n * p, n * m);
    for (tap, kl) in k_list.iter().enumerate() {
        k += kl * h[tap];
    }
    crb_direct_from_model(&k, &k_list, s, d, sigma2, CrbPath::ZpPerBlock)
}

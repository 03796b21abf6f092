#![allow(dead_code)]

use blindcrb::linalg::{c, CMatrix, CVector};
use blindcrb::model::{
    build_k, generate_symbols, strongest_tap, InnerKind, Modulation, Precoder, RedundancyKind, SystemConfig,
};
use blindcrb::rng::rng_from_seed;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct Instance {
    pub cfg: SystemConfig,
    pub pre: Precoder,
    pub h: CVector,
    pub s: CVector,
    pub d: usize,
}

pub fn gaussian(len: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(len, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let v = gaussian(rows * cols, rng);
    CMatrix::from_iterator(rows, cols, v.iter().copied())
}

pub fn instance(
    seed: u64,
    red: RedundancyKind,
    inner: InnerKind,
    m: usize,
    l: usize,
    n: usize,
) -> Instance {
    let mut rng = rng_from_seed(seed);
    let sigma2 = 0.05 + rng.random::<f64>();
    let cfg = SystemConfig::new(m, l, n, sigma2, red, inner).unwrap();
    let pre = Precoder::from_config(&cfg).unwrap();
    let h = gaussian(l + 1, &mut rng);
    let s = generate_symbols(Modulation::Qpsk, m, n, &mut rng).unwrap().s;
    let d = strongest_tap(&h);
    Instance { cfg, pre, h, s, d }
}

/// `(NP - L) x NP` band matrix with `[i, j] = h[i + L - j]`.
pub fn fat_toeplitz_oracle(h: &CVector, np: usize, l: usize) -> CMatrix {
    CMatrix::from_fn(np - l, np, |i, j| {
        let k = i as isize + l as isize - j as isize;
        if (0..=l as isize).contains(&k) { h[k as usize] } else { c(0.0, 0.0) }
    })
}

/// Block-by-block transmission: precode each block with `R F~`, stream the
/// blocks, convolve sample by sample and drop the first and last `L` outputs.
pub fn convolution_oracle(pre: &Precoder, h: &CVector, s: &CVector) -> CVector {
    let (m, p, l) = (pre.m(), pre.p(), pre.l());
    let n = s.len() / m;
    let mut stream = Vec::with_capacity(n * p);
    for b in 0..n {
        let block = &pre.r * (&pre.ftilde * s.rows(b * m, m));
        stream.extend(block.iter().copied());
    }
    let full: Vec<Complex64> = (0..n * p + l)
        .map(|t| {
            (0..=l)
                .filter(|&k| t >= k && t - k < stream.len())
                .map(|k| h[k] * stream[t - k])
                .sum()
        })
        .collect();
    CVector::from_vec(full[l..n * p].to_vec())
}

/// `K_l` columns applied to `s`, stacked: `W = [K_0 s, ..., K_L s]`.
pub fn tap_response(n: usize, pre: &Precoder, h: &CVector, s: &CVector) -> CMatrix {
    let (_, k_list) = build_k(n, pre, h).unwrap();
    let mut w = CMatrix::zeros(k_list[0].nrows(), k_list.len());
    for (l, kl) in k_list.iter().enumerate() {
        w.set_column(l, &(kl * s));
    }
    w
}

/// Central-difference Wirtinger derivative `df/dv*` of a real function.
pub fn wirtinger_fd(v: &CVector, step: f64, f: impl Fn(&CVector) -> f64) -> CVector {
    CVector::from_fn(v.len(), |i, _| {
        let probe = |delta: Complex64| {
            let mut w = v.clone();
            w[i] += delta;
            f(&w)
        };
        let dre = (probe(c(step, 0.0)) - probe(c(-step, 0.0))) / (2.0 * step);
        let dim = (probe(c(0.0, step)) - probe(c(0.0, -step))) / (2.0 * step);
        c(0.5 * dre, 0.5 * dim)
    })
}

pub fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    let herm = (a + a.adjoint()) * c(0.5, 0.0);
    herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(a: &CMatrix) -> f64 {
    let herm = (a + a.adjoint()) * c(0.5, 0.0);
    herm.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub const SHAPES: [(usize, usize); 8] = [(4, 1), (4, 2), (8, 1), (8, 2), (8, 4), (12, 1), (12, 2), (12, 4)];

pub fn all_kinds() -> Vec<(RedundancyKind, InnerKind)> {
    let mut out = Vec::new();
    for red in [RedundancyKind::Cp, RedundancyKind::Zp] {
        for inner in [InnerKind::Identity, InnerKind::Idft] {
            out.push((red.clone(), inner.clone()));
        }
    }
    out
}

/// `I - K K^+` through a thin QR factorization of full-column-rank `K`.
pub fn range_complement_projector(k: &CMatrix) -> CMatrix {
    let q = k.clone().qr().q();
    CMatrix::identity(k.nrows(), k.nrows()) - &q * q.adjoint()
}

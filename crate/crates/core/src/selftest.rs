//! Built-in consistency checks run by `blindcrb selftest`.

use rand::Rng;

use crate::crb_blind::{crb_direct, crb_fast, fim_blocks};
use crate::linalg::{c, hermitian_eigenvalues, relative_diff, CVector};
use crate::model::{
    build_k, complex_noise, generate_symbols, log_likelihood, loglik_gradients, noiseless_observation,
    strongest_tap, InnerKind, Modulation, Precoder, RedundancyKind, SystemConfig,
};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckReport {
    fn new(name: impl Into<String>, worst: f64, tolerance: f64) -> Self {
        CheckReport { name: name.into(), worst, tolerance, passed: worst.is_finite() && worst <= tolerance }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: worst {:.3e} (tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance
        )
    }
}

fn instance(seed: u64, k: u64, m: usize, l: usize, n: usize, red: RedundancyKind, inner: InnerKind) -> (SystemConfig, Precoder, CVector, CVector, usize) {
    let mut rng = stream_rng(seed, Stream::Selftest, k, 0);
    let sigma2 = 0.05 + rng.random::<f64>();
    let cfg = SystemConfig::new(m, l, n, sigma2, red, inner).expect("valid selftest config");
    let pre = Precoder::from_config(&cfg).expect("valid selftest precoder");
    let h = complex_noise(l + 1, 1.0, &mut rng);
    let s = generate_symbols(Modulation::Qpsk, m, n, &mut rng).expect("qpsk").s;
    let d = strongest_tap(&h);
    (cfg, pre, h, s, d)
}

const SHAPES: [(usize, usize, usize); 3] = [(4, 1, 3), (4, 2, 4), (8, 2, 3)];

/// Direct and Hankel-based bounds on CP/ZP x identity/IDFT instances.
pub fn two_path_check(seed: u64) -> CheckReport {
    let mut worst = 0.0f64;
    let mut k = 0;
    for red in [RedundancyKind::Cp, RedundancyKind::Zp] {
        for inner in [InnerKind::Identity, InnerKind::Idft] {
            for &(m, l, n) in &SHAPES {
                let (cfg, pre, h, s, d) = instance(seed, k, m, l, n, red.clone(), inner.clone());
                k += 1;
                let err = crate::crb_blind::crb_direct_for(&h, &s, &pre, d, cfg.sigma2, n)
                    .and_then(|a| crb_fast(&h, &s, &pre, d, cfg.sigma2, n).map(|b| relative_diff(&b.c, &a.c)))
                    .unwrap_or(f64::INFINITY);
                worst = worst.max(err);
            }
        }
    }
    CheckReport::new("two-path bound equivalence", worst, 1e-8)
}

/// Wirtinger gradients of the log-likelihood against central differences.
pub fn gradient_check(seed: u64) -> CheckReport {
    let mut worst = 0.0f64;
    for (k, &(m, l, n)) in SHAPES.iter().enumerate() {
        let (cfg, pre, h, s, _) = instance(seed, 100 + k as u64, m, l, n, RedundancyKind::Cp, InnerKind::Idft);
        let mut rng = stream_rng(seed, Stream::Selftest, 200 + k as u64, 0);
        let y = noiseless_observation(&pre, &h, &s).unwrap() + complex_noise(cfg.observation_len(), cfg.sigma2, &mut rng);
        let g = loglik_gradients(&y, &cfg, &pre, &h, &s).unwrap();
        let f = |h: &CVector, s: &CVector| log_likelihood(&y, &cfg, &pre, h, s).unwrap();
        let step = 1e-4;
        let fd = |v: &CVector, which: usize| -> CVector {
            CVector::from_fn(v.len(), |i, _| {
                let probe = |delta| {
                    let mut w = v.clone();
                    w[i] += delta;
                    if which == 0 { f(&w, &s) } else { f(&h, &w) }
                };
                let dre = (probe(c(step, 0.0)) - probe(c(-step, 0.0))) / (2.0 * step);
                let dim = (probe(c(0.0, step)) - probe(c(0.0, -step))) / (2.0 * step);
                c(0.5 * dre, 0.5 * dim)
            })
        };
        let eh = (fd(&h, 0) - &g.dh_conj).norm() / g.dh_conj.norm();
        let es = (fd(&s, 1) - &g.ds_conj).norm() / g.ds_conj.norm();
        worst = worst.max(eh).max(es);
    }
    CheckReport::new("log-likelihood gradients", worst, 1e-6)
}

/// The assembled Fisher information must annihilate `[h; -s_N]`.
pub fn ambiguity_check(seed: u64) -> CheckReport {
    let mut worst = 0.0f64;
    for (k, &(m, l, n)) in SHAPES.iter().enumerate() {
        let (cfg, pre, h, s, d) = instance(seed, 300 + k as u64, m, l, n, RedundancyKind::Zp, InnerKind::Identity);
        let (kk, kl) = build_k(n, &pre, &h).unwrap();
        let blocks = fim_blocks(&kk, &kl, &s, cfg.sigma2).unwrap();
        let j = blocks.assemble();
        let mut dir = CVector::zeros(h.len() + s.len());
        dir.rows_mut(0, h.len()).copy_from(&h);
        dir.rows_mut(h.len(), s.len()).copy_from(&(-&s));
        let ev = hermitian_eigenvalues(&j);
        let neg = (-ev[0]).max(0.0) / ev[ev.len() - 1];
        let null = (&j * &dir).norm() / j.norm();
        worst = worst.max(null).max(neg);
        if crb_direct(&blocks, d).is_err() {
            worst = f64::INFINITY;
        }
    }
    CheckReport::new("Fisher information ambiguity direction", worst, 1e-10)
}

pub fn run_all(seed: u64) -> Vec<CheckReport> {
    vec![two_path_check(seed), gradient_check(seed), ambiguity_check(seed)]
}

//! Monte Carlo comparison of an estimator's MSE with the averaged bound.
//!
//! For every SNR cell, `n_channels` unit-norm Rayleigh channels and
//! `n_trials` QPSK frames per channel are simulated. Each trial contributes
//! `||(h_d / h_hat_d) h_hat - h||^2` to the MSE and `tr C(h, s_N, F, d)` to the
//! bound, with `d` the strongest tap of the channel.
//!
//! Channels, symbol frames and normalized noise depend only on
//! `(master_seed, channel, trial)`, so all cells share the same realizations
//! and the bound scales exactly with `sigma2 = 10^(-snr_db / 10)`.

use std::io::Write;

use rayon::prelude::*;

use crate::crb_blind::{crb_fast_with_basis, crb_zp_per_block, left_null_basis};
use crate::error::{Error, Result};
use crate::estimator::{resolve_ambiguity, subspace_estimate, ChannelEstimate, EstimatorSettings};
use crate::linalg::CVector;
use crate::model::{
    build_k, complex_noise, generate_symbols, noiseless_observation, strongest_tap, Channel,
    Modulation, Precoder, SystemConfig,
};
use crate::rng::{stream_rng, Stream};

/// Largest tolerated share of excluded trials in a cell.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

pub const CSV_HEADER: &str =
    "snr_db,crb_avg,mse_avg,crb_zp_ref_avg,n_blocks,redundancy,inner,seed,excluded_trials";

/// Noise variance for a given SNR with unit-power symbols and unit-norm
/// channels: `sigma2 = 10^(-snr_db / 10)`.
pub fn sigma2_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    /// System template; its `sigma2` is replaced per SNR cell.
    pub config: SystemConfig,
    pub snr_db_grid: Vec<f64>,
    pub n_channels: usize,
    pub n_trials: usize,
    pub master_seed: u64,
    pub estimator_settings: EstimatorSettings,
    pub compute_zp_reference: bool,
}

impl ExperimentPlan {
    /// Desk-scale plan: 20 channels, 5 frames each, SNR 10..=40 dB in 5 dB steps.
    pub fn desk_scale(config: SystemConfig) -> Self {
        ExperimentPlan {
            config,
            snr_db_grid: (0..7).map(|i| 10.0 + 5.0 * i as f64).collect(),
            n_channels: 20,
            n_trials: 5,
            master_seed: 1,
            estimator_settings: EstimatorSettings::default(),
            compute_zp_reference: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.snr_db_grid.is_empty() {
            return Err(Error::InvalidConfig("SNR grid is empty".into()));
        }
        if self.snr_db_grid.iter().any(|x| !x.is_finite())
            || self.snr_db_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidConfig("SNR grid must be finite and strictly increasing".into()));
        }
        if self.n_channels == 0 || self.n_trials == 0 {
            return Err(Error::InvalidConfig("n_channels and n_trials must be positive".into()));
        }
        self.estimator_settings.validate(self.config.n)?;
        if self.compute_zp_reference && self.config.redundancy != crate::model::RedundancyKind::Zp {
            return Err(Error::NotZeroPadded(self.config.redundancy.name().to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub snr_db: f64,
    pub crb_avg: f64,
    pub mse_avg: f64,
    pub crb_zp_ref_avg: Option<f64>,
    pub n_blocks: usize,
    pub redundancy: String,
    pub inner: String,
    pub seed: u64,
    pub excluded_trials: usize,
}

impl ResultRecord {
    pub fn csv_row(&self) -> String {
        let zp = self.crb_zp_ref_avg.map(fmt_sig12).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            fmt_sig12(self.snr_db),
            fmt_sig12(self.crb_avg),
            fmt_sig12(self.mse_avg),
            zp,
            self.n_blocks,
            self.redundancy,
            self.inner,
            self.seed,
            self.excluded_trials
        )
    }
}

/// Twelve significant digits in scientific notation.
pub fn fmt_sig12(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn write_csv<W: Write>(records: &[ResultRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Unit-norm channel with i.i.d. `CN(0, 1)` taps, anchored at its strongest tap.
pub fn draw_channel<R: rand::Rng + ?Sized>(l: usize, rng: &mut R) -> Channel {
    loop {
        let mut h = complex_noise(l + 1, 1.0, rng);
        let norm = h.norm();
        if norm > 0.0 {
            h.unscale_mut(norm);
            let d = strongest_tap(&h);
            let hd0 = h[d];
            return Channel { h, d, hd0 };
        }
    }
}

/// Everything a trial hands to an estimator.
pub struct TrialInput<'a> {
    pub config: &'a SystemConfig,
    pub precoder: &'a Precoder,
    pub y: &'a CVector,
    /// Ground truth. Blind estimators must not look at it; it exists so that
    /// reference estimators can exercise the protocol.
    pub truth: &'a Channel,
}

pub trait BlindEstimator: Sync {
    fn estimate(&self, input: &TrialInput<'_>) -> Result<ChannelEstimate>;
}

/// The noise-subspace estimator of [`crate::estimator`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SubspaceEstimator(pub EstimatorSettings);

impl BlindEstimator for SubspaceEstimator {
    fn estimate(&self, input: &TrialInput<'_>) -> Result<ChannelEstimate> {
        subspace_estimate(input.y, input.config, input.precoder, &self.0)
    }
}

/// Returns the true channel; the protocol must then report zero MSE.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleEstimator;

impl BlindEstimator for OracleEstimator {
    fn estimate(&self, input: &TrialInput<'_>) -> Result<ChannelEstimate> {
        Ok(ChannelEstimate { h_hat: input.truth.h.clone(), resolved: false })
    }
}

/// Per-trial data that does not depend on the SNR.
struct TrialBase {
    clean: CVector,
    unit_noise: CVector,
    /// Bound trace at `sigma2 = 1`, or the reason it is unavailable.
    unit_crb: std::result::Result<f64, String>,
    unit_zp_ref: Option<std::result::Result<f64, String>>,
}

struct ChannelBase {
    channel: Channel,
    trials: Vec<TrialBase>,
}

fn prepare(plan: &ExperimentPlan, precoder: &Precoder) -> Result<Vec<ChannelBase>> {
    let cfg = &plan.config;
    (0..plan.n_channels)
        .into_par_iter()
        .map(|ci| {
            let channel = draw_channel(cfg.l, &mut stream_rng(plan.master_seed, Stream::Channel, ci as u64, 0));
            let basis = build_k(cfg.n, precoder, &channel.h).and_then(|(k, _)| left_null_basis(&k, cfg.l));
            let mut trials = Vec::with_capacity(plan.n_trials);
            for ti in 0..plan.n_trials {
                let mut sym_rng = stream_rng(plan.master_seed, Stream::Symbols, ci as u64, ti as u64);
                let symbols = generate_symbols(Modulation::Qpsk, cfg.m, cfg.n, &mut sym_rng)?.s;
                let clean = noiseless_observation(precoder, &channel.h, &symbols)?;
                let mut noise_rng = stream_rng(plan.master_seed, Stream::Noise, ci as u64, ti as u64);
                let unit_noise = complex_noise(clean.len(), 1.0, &mut noise_rng);
                let unit_crb = match &basis {
                    Ok(b) => crb_fast_with_basis(b, precoder, &symbols, channel.d, 1.0)
                        .map(|r| r.trace)
                        .map_err(|e| e.to_string()),
                    Err(e) => Err(e.to_string()),
                };
                let unit_zp_ref = plan.compute_zp_reference.then(|| {
                    crb_zp_per_block(&channel.h, &symbols, precoder, channel.d, 1.0, cfg.n)
                        .map(|r| r.trace)
                        .map_err(|e| e.to_string())
                });
                trials.push(TrialBase { clean, unit_noise, unit_crb, unit_zp_ref });
            }
            Ok(ChannelBase { channel, trials })
        })
        .collect()
}

struct TrialOutcome {
    sq_err: f64,
    crb: f64,
    zp_ref: Option<f64>,
}

fn evaluate_cell<E: BlindEstimator>(
    plan: &ExperimentPlan,
    precoder: &Precoder,
    bases: &[ChannelBase],
    snr_db: f64,
    estimator: &E,
) -> Result<ResultRecord> {
    let sigma2 = sigma2_from_snr_db(snr_db);
    let cfg = plan.config.with_sigma2(sigma2);
    let amplitude = sigma2.sqrt();
    let per_channel: Vec<Vec<std::result::Result<TrialOutcome, String>>> = bases
        .par_iter()
        .map(|base| {
            base.trials
                .iter()
                .map(|t| {
                    let crb = t.unit_crb.clone()? * sigma2;
                    let zp_ref = match &t.unit_zp_ref {
                        Some(r) => Some(r.clone()? * sigma2),
                        None => None,
                    };
                    let y = &t.clean + &t.unit_noise * num_complex::Complex64::new(amplitude, 0.0);
                    let input = TrialInput { config: &cfg, precoder, y: &y, truth: &base.channel };
                    let est = estimator
                        .estimate(&input)
                        .and_then(|e| resolve_ambiguity(&e, base.channel.d, base.channel.hd0))
                        .map_err(|e| e.to_string())?;
                    let sq_err = (&est.h_hat - &base.channel.h).norm_squared();
                    Ok(TrialOutcome { sq_err, crb, zp_ref })
                })
                .collect()
        })
        .collect();

    let total = plan.n_channels * plan.n_trials;
    let mut excluded = 0usize;
    let mut first_error = None;
    let (mut mse_sum, mut crb_sum, mut zp_sum, mut used) = (0.0, 0.0, 0.0, 0usize);
    for outcome in per_channel.into_iter().flatten() {
        match outcome {
            Ok(o) => {
                mse_sum += o.sq_err;
                crb_sum += o.crb;
                zp_sum += o.zp_ref.unwrap_or(0.0);
                used += 1;
            }
            Err(e) => {
                excluded += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if excluded as f64 >= MAX_EXCLUDED_FRACTION * total as f64 || used == 0 {
        return Err(Error::CellFailed {
            snr_db,
            excluded,
            total,
            first_error: first_error.unwrap_or_default(),
        });
    }
    let n = used as f64;
    Ok(ResultRecord {
        snr_db,
        crb_avg: crb_sum / n,
        mse_avg: mse_sum / n,
        crb_zp_ref_avg: plan.compute_zp_reference.then_some(zp_sum / n),
        n_blocks: plan.config.n,
        redundancy: plan.config.redundancy.name().to_string(),
        inner: plan.config.inner.name().to_string(),
        seed: plan.master_seed,
        excluded_trials: excluded,
    })
}

/// One SNR cell with the subspace estimator.
pub fn run_cell(plan: &ExperimentPlan, snr_db: f64) -> Result<ResultRecord> {
    run_cell_with(plan, snr_db, &SubspaceEstimator(plan.estimator_settings))
}

pub fn run_cell_with<E: BlindEstimator>(plan: &ExperimentPlan, snr_db: f64, estimator: &E) -> Result<ResultRecord> {
    plan.validate()?;
    if !snr_db.is_finite() {
        return Err(Error::InvalidConfig(format!("invalid SNR {snr_db}")));
    }
    let precoder = Precoder::from_config(&plan.config)?;
    let bases = prepare(plan, &precoder)?;
    evaluate_cell(plan, &precoder, &bases, snr_db, estimator)
}

/// All cells of the plan, in ascending SNR order.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<ResultRecord>> {
    run_experiment_with(plan, &SubspaceEstimator(plan.estimator_settings))
}

pub fn run_experiment_with<E: BlindEstimator>(plan: &ExperimentPlan, estimator: &E) -> Result<Vec<ResultRecord>> {
    plan.validate()?;
    let precoder = Precoder::from_config(&plan.config)?;
    let bases = prepare(plan, &precoder)?;
    let mut records = Vec::with_capacity(plan.snr_db_grid.len());
    let mut failures = Vec::new();
    for &snr in &plan.snr_db_grid {
        match evaluate_cell(plan, &precoder, &bases, snr, estimator) {
            Ok(r) => records.push(r),
            Err(e) => failures.push(e.to_string()),
        }
    }
    if failures.is_empty() {
        Ok(records)
    } else {
        Err(Error::CellsFailed(failures))
    }
}

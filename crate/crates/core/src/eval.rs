//! Monte-Carlo estimates of false rejection and false acceptance rates.
//!
//! Trial `i` uses sub-seed `seed + i` for everything it draws, so results do
//! not depend on how rayon schedules the trials.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::binding::AuthFailure;
use crate::config::ProtocolConfig;
use crate::credential::IssuerKeyPair;
use crate::parties::{
    device_authenticate, device_enroll, AgePolicy, AttributeServiceProvider, AuthError, Clock, EnrollError,
    EnrollmentInput, Evidence,
};
use crate::store::DeviceRecord;
use crate::synthbio::{new_identity, sample_genuine, sample_impostor, NoiseModel};

pub const MIN_FRR_TRIALS: usize = 100;
pub const MIN_FAR_TRIALS: usize = 1000;
pub const CSV_HEADER: &str = "sigma,trials,frr,frr_lo,frr_hi,far,far_lo,far_hi,seed";

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959963984540054;

/// Fixed issuance time for simulated enrollments.
const EVAL_EPOCH: u64 = 1_700_000_000;
const EVAL_ISSUER_SEED: u64 = 0x6576_616c;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{what} needs at least {min} trials, got {got}")]
    TooFewTrials { what: &'static str, min: usize, got: usize },
    #[error("invalid sigma {0}")]
    InvalidSigma(f64),
    #[error("no sigma values given")]
    NoSigmas,
    #[error("configuration: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("enrollment of the impostor target failed: {0}")]
    Enroll(#[from] EnrollError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Liveness,
    Extract,
    HashCheck,
    Decrypt,
    Success,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Liveness, Stage::Extract, Stage::HashCheck, Stage::Decrypt, Stage::Success];

    fn of(result: &Result<crate::credential::AgeCred, AuthError>) -> Stage {
        match result {
            Ok(_) => Stage::Success,
            Err(AuthError::LivenessFailed) => Stage::Liveness,
            Err(AuthError::ExtractFailure | AuthError::Incompatible(_)) => Stage::Extract,
            Err(AuthError::Rejected(AuthFailure::HashMismatch)) => Stage::HashCheck,
            Err(AuthError::Rejected(_)) => Stage::Decrypt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialKind {
    Genuine,
    Impostor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub kind: TrialKind,
    pub stage_reached: Stage,
}

impl TrialOutcome {
    pub fn succeeded(&self) -> bool {
        self.stage_reached == Stage::Success
    }
}

/// Counts per stage, indexed in [`Stage::ALL`] order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageHistogram([usize; 5]);

impl StageHistogram {
    fn from_outcomes(outcomes: &[TrialOutcome]) -> Self {
        let mut h = Self::default();
        for o in outcomes {
            h.0[o.stage_reached as usize] += 1;
        }
        h
    }

    pub fn get(&self, stage: Stage) -> usize {
        self.0[stage as usize]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub events: usize,
    pub trials: usize,
    pub rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl RateEstimate {
    pub fn new(events: usize, trials: usize) -> Self {
        assert!(trials > 0 && events <= trials);
        let (wilson_low, wilson_high) = wilson_interval(events, trials, Z95);
        Self {
            events,
            trials,
            rate: events as f64 / trials as f64,
            wilson_low,
            wilson_high,
        }
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The bounds are exactly 0 and 1 at the extremes; avoid rounding residue.
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub frr: Option<RateEstimate>,
    pub far: Option<RateEstimate>,
    pub genuine_stages: StageHistogram,
    pub impostor_stages: StageHistogram,
}

fn eval_issuer(cfg: &ProtocolConfig) -> Result<AttributeServiceProvider, EvalError> {
    Ok(AttributeServiceProvider::new(
        IssuerKeyPair::from_seed(EVAL_ISSUER_SEED),
        AgePolicy::new(cfg.age_threshold, cfg.validity_seconds)?,
        Clock::Fixed(EVAL_EPOCH),
    ))
}

fn enroll_trial(
    cfg: &ProtocolConfig,
    asp: &AttributeServiceProvider,
    identity_seed: u64,
) -> Result<(crate::synthbio::IdentityProfile, DeviceRecord), EnrollError> {
    let profile = new_identity(identity_seed, cfg.dim).map_err(|e| {
        EnrollError::Config(crate::config::ConfigError::Value {
            key: "dim".into(),
            reason: e.to_string(),
        })
    })?;
    let input = EnrollmentInput {
        profile: &profile,
        evidence: Evidence::AlwaysApprove,
        issuer_public: asp.public_key(),
    };
    let record = device_enroll(&input, asp, cfg, identity_seed)?;
    Ok((profile, record))
}

fn check_sigma(sigma: f64) -> Result<NoiseModel, EvalError> {
    NoiseModel::new(sigma).map_err(|_| EvalError::InvalidSigma(sigma))
}

/// One trial per identity: enroll, then authenticate once with a fresh
/// genuine sample at `sigma`.
pub fn frr_outcomes(cfg: &ProtocolConfig, sigma: f64, trials: usize, seed: u64) -> Result<Vec<TrialOutcome>, EvalError> {
    cfg.validate()?;
    let noise = check_sigma(sigma)?;
    let asp = eval_issuer(cfg)?;
    Ok((0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let sub = seed.wrapping_add(i);
            let stage = match enroll_trial(cfg, &asp, sub) {
                Ok((profile, record)) => {
                    let sample = sample_genuine(&profile, noise, sub ^ 0x5eed_5eed);
                    Stage::of(&device_authenticate(&sample, &record, &cfg.liveness))
                }
                Err(EnrollError::LivenessFailed(_)) => Stage::Liveness,
                Err(_) => Stage::Extract,
            };
            TrialOutcome {
                kind: TrialKind::Genuine,
                stage_reached: stage,
            }
        })
        .collect())
}

pub fn estimate_frr(cfg: &ProtocolConfig, sigma: f64, trials: usize, seed: u64) -> Result<EvalReport, EvalError> {
    if trials < MIN_FRR_TRIALS {
        return Err(EvalError::TooFewTrials {
            what: "FRR",
            min: MIN_FRR_TRIALS,
            got: trials,
        });
    }
    let outcomes = frr_outcomes(cfg, sigma, trials, seed)?;
    let failures = outcomes.iter().filter(|o| !o.succeeded()).count();
    Ok(EvalReport {
        sigma,
        trials,
        seed,
        frr: Some(RateEstimate::new(failures, trials)),
        far: None,
        genuine_stages: StageHistogram::from_outcomes(&outcomes),
        impostor_stages: StageHistogram::default(),
    })
}

/// Enrolls one identity (derived from `seed`) and presents `trials`
/// independent impostor samples to it.
pub fn far_outcomes(cfg: &ProtocolConfig, trials: usize, seed: u64) -> Result<Vec<TrialOutcome>, EvalError> {
    cfg.validate()?;
    let asp = eval_issuer(cfg)?;
    let (_, record) = enroll_trial(cfg, &asp, seed)?;
    Ok((0..trials as u64)
        .into_par_iter()
        .map(|i| {
            // Offset keeps impostor streams clear of the enrolled identity's seed.
            let sub = seed.wrapping_add(1).wrapping_add(i);
            let stage = match sample_impostor(sub, cfg.dim) {
                Ok(sample) => Stage::of(&device_authenticate(&sample, &record, &cfg.liveness)),
                Err(_) => Stage::Extract,
            };
            TrialOutcome {
                kind: TrialKind::Impostor,
                stage_reached: stage,
            }
        })
        .collect())
}

pub fn estimate_far(cfg: &ProtocolConfig, trials: usize, seed: u64) -> Result<EvalReport, EvalError> {
    if trials < MIN_FAR_TRIALS {
        return Err(EvalError::TooFewTrials {
            what: "FAR",
            min: MIN_FAR_TRIALS,
            got: trials,
        });
    }
    let outcomes = far_outcomes(cfg, trials, seed)?;
    let accepted = outcomes.iter().filter(|o| o.succeeded()).count();
    Ok(EvalReport {
        sigma: cfg.sigma_default,
        trials,
        seed,
        frr: None,
        far: Some(RateEstimate::new(accepted, trials)),
        genuine_stages: StageHistogram::default(),
        impostor_stages: StageHistogram::from_outcomes(&outcomes),
    })
}

/// FRR at `sigma` and FAR, both over `trials` trials with the same seed.
pub fn evaluate_point(cfg: &ProtocolConfig, sigma: f64, trials: usize, seed: u64) -> Result<EvalReport, EvalError> {
    let frr = estimate_frr(cfg, sigma, trials, seed)?;
    let far = estimate_far(cfg, trials, seed)?;
    Ok(EvalReport {
        far: far.far,
        impostor_stages: far.impostor_stages,
        ..frr
    })
}

fn fmt_rate(r: Option<RateEstimate>) -> String {
    match r {
        Some(r) => format!("{:.6},{:.6},{:.6}", r.rate, r.wilson_low, r.wilson_high),
        None => ",,".into(),
    }
}

pub fn csv_row(report: &EvalReport) -> String {
    format!(
        "{},{},{},{},{}",
        report.sigma,
        report.trials,
        fmt_rate(report.frr),
        fmt_rate(report.far),
        report.seed
    )
}

/// Writes the header and one row per sigma, in input order.
pub fn sweep<W: Write>(
    cfg: &ProtocolConfig,
    sigmas: &[f64],
    trials: usize,
    seed: u64,
    sink: &mut W,
) -> Result<Vec<EvalReport>, EvalError> {
    if sigmas.is_empty() {
        return Err(EvalError::NoSigmas);
    }
    for &s in sigmas {
        check_sigma(s)?;
    }
    if trials < MIN_FAR_TRIALS {
        return Err(EvalError::TooFewTrials {
            what: "sweep",
            min: MIN_FAR_TRIALS,
            got: trials,
        });
    }
    let far = estimate_far(cfg, trials, seed)?;
    writeln!(sink, "{CSV_HEADER}")?;
    let mut reports = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let report = EvalReport {
            far: far.far,
            impostor_stages: far.impostor_stages,
            ..estimate_frr(cfg, sigma, trials, seed)?
        };
        writeln!(sink, "{}", csv_row(&report))?;
        reports.push(report);
    }
    sink.flush()?;
    Ok(reports)
}

/// Largest sigma in `grid` whose Wilson upper bound on FRR is at most
/// `max_frr`, scanning in increasing order and stopping at the first miss.
pub fn calibrate_sigma(
    cfg: &ProtocolConfig,
    grid: &[f64],
    trials: usize,
    seed: u64,
    max_frr: f64,
) -> Result<Option<(f64, Vec<EvalReport>)>, EvalError> {
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = None;
    let mut reports = vec![];
    for sigma in sorted {
        let report = estimate_frr(cfg, sigma, trials, seed)?;
        let ok = report.frr.is_some_and(|r| r.wilson_high <= max_frr);
        reports.push(report);
        if !ok {
            break;
        }
        best = Some(sigma);
    }
    Ok(best.map(|s| (s, reports)))
}

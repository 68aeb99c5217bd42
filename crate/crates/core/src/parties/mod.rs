//! The three roles: attribute service provider (issuer), the user's device,
//! and the relying party.
//!
//! The device talks to the issuer only through [`IssuanceChannel`], which
//! carries canonical request/response bytes. Nothing biometric crosses it:
//! the request holds a pseudonymous subject id, the age evidence and a nonce.
//! Binding happens on the device after the signed credential comes back.

mod messages;
pub mod transport;

use std::collections::HashSet;
use std::sync::Mutex;

use chrono::{DateTime, NaiveDate};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

pub use messages::{
    DenyReason, Evidence, IssuanceRequest, IssuanceResponse, IssuanceStatus, MessageError,
    MESSAGE_VERSION,
};

use crate::binding::{bind_enroll_inner, unbind_auth, AuthFailure, StableSecret};
use crate::config::{ConfigError, ProtocolConfig};
use crate::credential::{
    issue_agecred, signature_valid, verify_agecred, AgeCred, IssuerKeyPair, RejectReason, Verdict,
};
use crate::fextract::{fe_generate, fe_reproduce, FextractError, StableKey};
use crate::store::DeviceRecord;
use crate::synthbio::{sample_genuine, Embedding, IdentityProfile, NoiseModel};

// ---------------------------------------------------------------------------
// Liveness

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LivenessPolicy {
    AlwaysPass,
    AlwaysFail,
    /// Passes with probability `rate`, drawn deterministically from `seed`.
    SeededRandom { rate: f64, seed: u64 },
}

impl LivenessPolicy {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            LivenessPolicy::SeededRandom { rate, .. } if !(0.0..=1.0).contains(&rate) => {
                Err(format!("pass rate {rate} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for LivenessPolicy {
    type Err = String;

    /// `pass`, `fail`, or `random:<rate>:<seed>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pass" => Ok(Self::AlwaysPass),
            "fail" => Ok(Self::AlwaysFail),
            _ => {
                let parts: Vec<&str> = s.split(':').collect();
                match parts[..] {
                    ["random", rate, seed] => {
                        let policy = Self::SeededRandom {
                            rate: rate.parse().map_err(|e| format!("rate: {e}"))?,
                            seed: seed.parse().map_err(|e| format!("seed: {e}"))?,
                        };
                        policy.validate()?;
                        Ok(policy)
                    }
                    _ => Err(format!("unknown liveness policy `{s}`")),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LivenessResult {
    pub passed: bool,
    pub detail: String,
}

pub fn liveness_check(policy: &LivenessPolicy) -> LivenessResult {
    match *policy {
        LivenessPolicy::AlwaysPass => LivenessResult {
            passed: true,
            detail: "mock: always pass".into(),
        },
        LivenessPolicy::AlwaysFail => LivenessResult {
            passed: false,
            detail: "mock: always fail".into(),
        },
        LivenessPolicy::SeededRandom { rate, seed } => {
            let draw: f64 = ChaCha20Rng::seed_from_u64(seed).random();
            LivenessResult {
                passed: draw < rate,
                detail: format!("mock: draw {draw:.4} against rate {rate}"),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Issuer

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgePolicy {
    threshold: u32,
    validity_seconds: u64,
}

impl AgePolicy {
    pub fn new(threshold: u32, validity_seconds: u64) -> Result<Self, ConfigError> {
        if threshold == 0 || threshold >= 150 {
            return Err(ConfigError::Value {
                key: "age_threshold".into(),
                reason: "must be in 1..150".into(),
            });
        }
        if validity_seconds == 0 {
            return Err(ConfigError::Value {
                key: "validity_seconds".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(Self {
            threshold,
            validity_seconds,
        })
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }
}

/// Whole years from `dob` to the UTC calendar date of `now`. A birthday
/// counts from the first second of that day; someone born on 29 February
/// turns a year older on 1 March in non-leap years.
pub fn age_at(dob: NaiveDate, now: u64) -> Option<u32> {
    let today = DateTime::from_timestamp(i64::try_from(now).ok()?, 0)?.date_naive();
    today.years_since(dob)
}

/// Stateless issuance decision. Replay protection lives in
/// [`AttributeServiceProvider`].
pub fn asp_handle_issuance(
    req: &IssuanceRequest,
    policy: &AgePolicy,
    keys: &IssuerKeyPair,
    now: u64,
) -> IssuanceResponse {
    let approved = match req.evidence {
        Evidence::AlwaysApprove => true,
        Evidence::MockDateOfBirth(dob) => match age_at(dob, now) {
            Some(age) => age >= policy.threshold,
            // Birth date after the current date.
            None => return IssuanceResponse::denied(DenyReason::BadEvidence),
        },
    };
    if !approved {
        return IssuanceResponse::denied(DenyReason::UnderAge);
    }
    match issue_agecred(keys, req.subject_id, policy.threshold, now, policy.validity_seconds) {
        Ok(cred) => IssuanceResponse::issued(cred),
        // Only reachable when now + validity overflows.
        Err(_) => IssuanceResponse::denied(DenyReason::BadEvidence),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    System,
    Fixed(u64),
}

impl Clock {
    pub fn now(&self) -> u64 {
        match self {
            Clock::System => std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            Clock::Fixed(t) => *t,
        }
    }
}

#[derive(Debug, Error)]
#[error("issuance transport failed: {0}")]
pub struct TransportError(pub String);

impl From<std::io::Error> for TransportError {
    fn from(e: std::io::Error) -> Self {
        Self(e.to_string())
    }
}

/// Request/response channel from the device to an issuer, in canonical bytes.
pub trait IssuanceChannel {
    fn exchange(&self, request: &[u8]) -> Result<Vec<u8>, TransportError>;
}

/// In-memory issuer with a nonce replay set. Safe to share across threads.
#[derive(Debug)]
pub struct AttributeServiceProvider {
    keys: IssuerKeyPair,
    policy: AgePolicy,
    clock: Clock,
    seen_nonces: Mutex<HashSet<[u8; 16]>>,
}

impl AttributeServiceProvider {
    pub fn new(keys: IssuerKeyPair, policy: AgePolicy, clock: Clock) -> Self {
        Self {
            keys,
            policy,
            clock,
            seen_nonces: Mutex::new(HashSet::new()),
        }
    }

    pub fn public_key(&self) -> [u8; 32] {
        self.keys.public()
    }

    pub fn handle(&self, req: &IssuanceRequest) -> IssuanceResponse {
        if !self.seen_nonces.lock().unwrap().insert(req.request_nonce) {
            return IssuanceResponse::denied(DenyReason::ReplayedNonce);
        }
        asp_handle_issuance(req, &self.policy, &self.keys, self.clock.now())
    }

    pub fn handle_bytes(&self, request: &[u8]) -> Vec<u8> {
        let response = match IssuanceRequest::from_bytes(request) {
            Ok(req) => self.handle(&req),
            Err(MessageError::BadEvidence(_)) => IssuanceResponse::denied(DenyReason::BadEvidence),
            Err(_) => IssuanceResponse::denied(DenyReason::MalformedRequest),
        };
        response.to_bytes()
    }
}

impl IssuanceChannel for AttributeServiceProvider {
    fn exchange(&self, request: &[u8]) -> Result<Vec<u8>, TransportError> {
        Ok(self.handle_bytes(request))
    }
}

// ---------------------------------------------------------------------------
// Device

#[derive(Debug, Error)]
pub enum EnrollError {
    #[error("liveness check failed: {0}")]
    LivenessFailed(String),
    #[error("issuance denied: {0:?}")]
    IssuanceDenied(DenyReason),
    #[error("issuer returned a credential that does not verify")]
    UntrustedCredential,
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("bad issuer response: {0}")]
    Response(#[from] MessageError),
    #[error(transparent)]
    Extract(#[from] FextractError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuthError {
    #[error("liveness check failed")]
    LivenessFailed,
    #[error("could not reproduce the biometric key")]
    ExtractFailure,
    #[error("{0}")]
    Rejected(#[from] AuthFailure),
    #[error("sample incompatible with record: {0}")]
    Incompatible(String),
}

impl AuthError {
    /// Short stage label for reports.
    pub fn reason(&self) -> &'static str {
        match self {
            AuthError::LivenessFailed => "LivenessFailed",
            AuthError::ExtractFailure => "ExtractFailure",
            AuthError::Rejected(AuthFailure::HashMismatch) => "HashMismatch",
            AuthError::Rejected(AuthFailure::SketchOpenFailed) => "SketchOpenFailed",
            AuthError::Rejected(AuthFailure::DecryptFailed) => "DecryptFailed",
            AuthError::Rejected(AuthFailure::MalformedCredential) => "MalformedCredential",
            AuthError::Incompatible(_) => "Incompatible",
        }
    }
}

/// What a device is enrolling with.
#[derive(Debug, Clone)]
pub struct EnrollmentInput<'a> {
    pub profile: &'a IdentityProfile,
    pub evidence: Evidence,
    /// The issuer key the device trusts.
    pub issuer_public: [u8; 32],
}

/// Ephemeral enrollment values, exposed only to audit tests.
#[derive(Debug, Clone)]
pub struct EnrollmentSecrets {
    pub key: StableKey,
    pub secret: StableSecret,
    pub credential: AgeCred,
}

fn enroll_inner(
    input: &EnrollmentInput<'_>,
    asp: &dyn IssuanceChannel,
    cfg: &ProtocolConfig,
    rng_seed: u64,
) -> Result<(DeviceRecord, EnrollmentSecrets), EnrollError> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let capture_seed = rng.next_u64();
    let extract_seed = rng.next_u64();
    let bind_seed = rng.next_u64();
    let mut subject_id = [0u8; 16];
    rng.fill_bytes(&mut subject_id);
    let mut request_nonce = [0u8; 16];
    rng.fill_bytes(&mut request_nonce);

    let noise = NoiseModel::new(cfg.enroll_sigma).map_err(|e| ConfigError::Value {
        key: "enroll_sigma".into(),
        reason: e.to_string(),
    })?;
    let sample = sample_genuine(input.profile, noise, capture_seed);
    let liveness = liveness_check(&cfg.liveness);
    if !liveness.passed {
        return Err(EnrollError::LivenessFailed(liveness.detail));
    }

    let (key, helper) = fe_generate(&sample, &cfg.code(), &cfg.quantizer(), extract_seed)?;

    let request = IssuanceRequest {
        subject_id,
        evidence: input.evidence,
        request_nonce,
    };
    let response = IssuanceResponse::from_bytes(&asp.exchange(&request.to_bytes())?)?;
    let credential = match response.status {
        IssuanceStatus::Issued => response.credential.ok_or(MessageError::Malformed(
            "issued response without credential".into(),
        ))?,
        IssuanceStatus::Denied(reason) => return Err(EnrollError::IssuanceDenied(reason)),
    };
    if credential.subject_id != subject_id || !signature_valid(&credential, &input.issuer_public) {
        return Err(EnrollError::UntrustedCredential);
    }

    let (bound, secret) = bind_enroll_inner(&key, &credential, cfg.variant, bind_seed);
    let record = DeviceRecord {
        helper,
        sketch: bound.sketch,
        digest: bound.digest,
        bound: bound.bound,
    };
    Ok((
        record,
        EnrollmentSecrets {
            key,
            secret,
            credential,
        },
    ))
}

/// Full enrollment: capture, liveness, key extraction, issuance, binding.
/// Only the four storable artifacts leave this function.
pub fn device_enroll(
    input: &EnrollmentInput<'_>,
    asp: &dyn IssuanceChannel,
    cfg: &ProtocolConfig,
    rng_seed: u64,
) -> Result<DeviceRecord, EnrollError> {
    enroll_inner(input, asp, cfg, rng_seed).map(|(record, _)| record)
}

#[cfg(feature = "test-hooks")]
pub fn device_enroll_traced(
    input: &EnrollmentInput<'_>,
    asp: &dyn IssuanceChannel,
    cfg: &ProtocolConfig,
    rng_seed: u64,
) -> Result<(DeviceRecord, EnrollmentSecrets), EnrollError> {
    enroll_inner(input, asp, cfg, rng_seed)
}

/// Liveness, key reproduction, then unbinding. Never contacts the issuer.
pub fn device_authenticate(
    sample: &Embedding,
    record: &DeviceRecord,
    liveness: &LivenessPolicy,
) -> Result<AgeCred, AuthError> {
    if !liveness_check(liveness).passed {
        return Err(AuthError::LivenessFailed);
    }
    let key = match fe_reproduce(sample, &record.helper) {
        Ok(key) => key,
        Err(FextractError::ExtractFailure) => return Err(AuthError::ExtractFailure),
        Err(e) => return Err(AuthError::Incompatible(e.to_string())),
    };
    Ok(unbind_auth(&key, &record.sketch, &record.digest, &record.bound)?)
}

// ---------------------------------------------------------------------------
// Relying party

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessDecision {
    Grant,
    Deny(RejectReason),
}

pub fn rp_check_access(
    cred: &AgeCred,
    issuer_public: &[u8; 32],
    now: u64,
    required_age_over: u32,
) -> AccessDecision {
    match verify_agecred(cred, issuer_public, now, required_age_over) {
        Verdict::Accept => AccessDecision::Grant,
        Verdict::Reject(reason) => AccessDecision::Deny(reason),
    }
}

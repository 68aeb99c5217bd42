//! Signed age-over attestations.
//!
//! Wire layout (114 bytes, integers big-endian):
//!
//! ```text
//! version(1) | issuer_id(16) | subject_id(16) | age_over(1)
//!   | issued_at(8) | expires_at(8) | signature(64)
//! ```
//!
//! The Ed25519 signature covers the first 50 bytes.

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::crypto::{labeled_hash, LABEL_ISSUER_ID};

pub const CREDENTIAL_VERSION: u8 = 1;
pub const ENCODED_LEN: usize = 114;
pub const SIGNED_LEN: usize = 50;
pub const SIGNATURE_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CredentialError {
    #[error("age threshold {0} outside 1..150")]
    InvalidAge(u32),
    #[error("validity period must be positive and end before u64::MAX")]
    InvalidValidity,
    #[error("credential encoding is {0} bytes, expected {ENCODED_LEN}")]
    Length(usize),
    #[error("unsupported credential version {0}")]
    Version(u8),
    #[error("credential expires at or before issuance")]
    BadInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    BadSignature,
    Expired,
    NotYetValid,
    ThresholdNotMet,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::BadSignature => "BadSignature",
            RejectReason::Expired => "Expired",
            RejectReason::NotYetValid => "NotYetValid",
            RejectReason::ThresholdNotMet => "ThresholdNotMet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgeCred {
    pub version: u8,
    pub issuer_id: [u8; 16],
    pub subject_id: [u8; 16],
    pub age_over: u8,
    pub issued_at: u64,
    pub expires_at: u64,
    pub signature: [u8; SIGNATURE_LEN],
}

impl AgeCred {
    /// The bytes covered by the signature.
    pub fn signed_bytes(&self) -> [u8; SIGNED_LEN] {
        let mut out = [0u8; SIGNED_LEN];
        out[0] = self.version;
        out[1..17].copy_from_slice(&self.issuer_id);
        out[17..33].copy_from_slice(&self.subject_id);
        out[33] = self.age_over;
        out[34..42].copy_from_slice(&self.issued_at.to_be_bytes());
        out[42..50].copy_from_slice(&self.expires_at.to_be_bytes());
        out
    }

    pub fn encode(&self) -> [u8; ENCODED_LEN] {
        let mut out = [0u8; ENCODED_LEN];
        out[..SIGNED_LEN].copy_from_slice(&self.signed_bytes());
        out[SIGNED_LEN..].copy_from_slice(&self.signature);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CredentialError> {
        if bytes.len() != ENCODED_LEN {
            return Err(CredentialError::Length(bytes.len()));
        }
        if bytes[0] != CREDENTIAL_VERSION {
            return Err(CredentialError::Version(bytes[0]));
        }
        let u64_at = |at: usize| u64::from_be_bytes(bytes[at..at + 8].try_into().unwrap());
        let cred = Self {
            version: bytes[0],
            issuer_id: bytes[1..17].try_into().unwrap(),
            subject_id: bytes[17..33].try_into().unwrap(),
            age_over: bytes[33],
            issued_at: u64_at(34),
            expires_at: u64_at(42),
            signature: bytes[SIGNED_LEN..].try_into().unwrap(),
        };
        if cred.expires_at <= cred.issued_at {
            return Err(CredentialError::BadInterval);
        }
        Ok(cred)
    }
}

pub fn encode_agecred(c: &AgeCred) -> [u8; ENCODED_LEN] {
    c.encode()
}

pub fn decode_agecred(bytes: &[u8]) -> Result<AgeCred, CredentialError> {
    AgeCred::decode(bytes)
}

/// Ed25519 issuer identity.
#[derive(Clone)]
pub struct IssuerKeyPair {
    signing: SigningKey,
}

impl IssuerKeyPair {
    pub fn from_private(private: &[u8; 32]) -> Self {
        Self {
            signing: SigningKey::from_bytes(private),
        }
    }

    pub fn from_seed(seed: u64) -> Self {
        let mut private = [0u8; 32];
        ChaCha20Rng::seed_from_u64(seed).fill_bytes(&mut private);
        Self::from_private(&private)
    }

    pub fn public(&self) -> [u8; 32] {
        self.signing.verifying_key().to_bytes()
    }

    pub fn private(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn issuer_id(&self) -> [u8; 16] {
        issuer_id_for(&self.public())
    }
}

impl std::fmt::Debug for IssuerKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IssuerKeyPair")
            .field("public", &self.public())
            .finish_non_exhaustive()
    }
}

/// Issuer identifier: a truncated labeled hash of the public key.
pub fn issuer_id_for(public: &[u8; 32]) -> [u8; 16] {
    labeled_hash(LABEL_ISSUER_ID, public)[..16].try_into().unwrap()
}

pub fn issue_agecred(
    keys: &IssuerKeyPair,
    subject_id: [u8; 16],
    age_over: u32,
    issued_at: u64,
    validity_seconds: u64,
) -> Result<AgeCred, CredentialError> {
    if age_over == 0 || age_over >= 150 {
        return Err(CredentialError::InvalidAge(age_over));
    }
    let expires_at = match issued_at.checked_add(validity_seconds) {
        Some(e) if validity_seconds > 0 => e,
        _ => return Err(CredentialError::InvalidValidity),
    };
    let mut cred = AgeCred {
        version: CREDENTIAL_VERSION,
        issuer_id: keys.issuer_id(),
        subject_id,
        age_over: age_over as u8,
        issued_at,
        expires_at,
        signature: [0; SIGNATURE_LEN],
    };
    cred.signature = keys.signing.sign(&cred.signed_bytes()).to_bytes();
    Ok(cred)
}

pub fn signature_valid(c: &AgeCred, issuer_public: &[u8; 32]) -> bool {
    let Ok(key) = VerifyingKey::from_bytes(issuer_public) else {
        return false;
    };
    key.verify(&c.signed_bytes(), &Signature::from_bytes(&c.signature))
        .is_ok()
}

/// Accepts iff the signature verifies, `issued_at <= now < expires_at` and
/// the attested age meets `required_age_over`. Checks run in that order.
pub fn verify_agecred(c: &AgeCred, issuer_public: &[u8; 32], now: u64, required_age_over: u32) -> Verdict {
    if !signature_valid(c, issuer_public) {
        Verdict::Reject(RejectReason::BadSignature)
    } else if now < c.issued_at {
        Verdict::Reject(RejectReason::NotYetValid)
    } else if now >= c.expires_at {
        Verdict::Reject(RejectReason::Expired)
    } else if u32::from(c.age_over) < required_age_over {
        Verdict::Reject(RejectReason::ThresholdNotMet)
    } else {
        Verdict::Accept
    }
}

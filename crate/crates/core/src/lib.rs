//! Biometric bound credentials for privacy-preserving age verification.
//!
//! An issuer signs an age credential. The user's device encrypts it under a
//! secret that can only be recovered with a key reproduced from a fresh
//! biometric capture. A relying party checks the decrypted credential's
//! signature, validity window and age threshold.

pub mod binding;
pub mod bits;
pub mod config;
pub mod credential;
pub mod crypto;
pub mod ecc;
pub mod eval;
pub mod fextract;
pub mod parties;
pub mod quantize;
pub mod store;
pub mod synthbio;

pub use binding::{
    bind_enroll, bind_oneway, hash_key, unbind_auth, AuthFailure, BoundCredential, KeyDigest, Sketch, SketchVariant,
    StableSecret,
};
pub use bits::{hamming, BitString};
pub use config::{ProtocolConfig, SIGMA_DEFAULT};
pub use credential::{issue_agecred, verify_agecred, AgeCred, IssuerKeyPair, RejectReason, Verdict};
pub use ecc::{BchCode, CodeParams};
pub use eval::{estimate_far, estimate_frr, sweep, EvalReport, Stage};
pub use fextract::{fe_generate, fe_reproduce, HelperData, StableKey};
pub use parties::{
    device_authenticate, device_enroll, rp_check_access, AccessDecision, AttributeServiceProvider, Evidence,
    LivenessPolicy,
};
pub use quantize::{quantize, QuantizerConfig};
pub use store::{load_record, save_record, DeviceRecord, FormatError};
pub use synthbio::{new_identity, sample_genuine, sample_impostor, Embedding, IdentityProfile, NoiseModel};

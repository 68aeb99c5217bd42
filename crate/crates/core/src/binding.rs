//! Binding an age credential to a biometric key, and releasing it again.
//!
//! Enrollment draws a uniformly random 32-byte secret and links it to the
//! biometric key through a sketch: either `key XOR secret`, or the secret
//! sealed under a key derived from the biometric key. The credential is sealed
//! under a key derived from the secret, and only the key's digest is kept.
//!
//! Unbinding checks the candidate key against the digest first, then
//! recovers the secret from the sketch, then opens the credential. Each step
//! has its own failure reason.

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::credential::{AgeCred, ENCODED_LEN};
use crate::crypto::{
    derive_key, labeled_hash, open, seal, xor32, LABEL_CRED, LABEL_KEYHASH, LABEL_ONEWAY,
    LABEL_SKETCH, NONCE_LEN, TAG_LEN,
};
use crate::fextract::StableKey;

pub const BOUND_VERSION: u8 = 1;
pub const BOUND_CIPHERTEXT_LEN: usize = ENCODED_LEN + TAG_LEN;
pub const XOR_SKETCH_LEN: usize = 32;
pub const ENCRYPTED_SKETCH_LEN: usize = NONCE_LEN + 32 + TAG_LEN;

/// Random secret that keys the credential encryption. Debug output is redacted.
#[derive(Clone, PartialEq, Eq)]
pub struct StableSecret(pub [u8; 32]);

impl StableSecret {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for StableSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("StableSecret(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum SketchVariant {
    Xor = 1,
    Encrypted = 2,
}

impl SketchVariant {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(Self::Xor),
            2 => Some(Self::Encrypted),
            _ => None,
        }
    }

    pub fn payload_len(self) -> usize {
        match self {
            Self::Xor => XOR_SKETCH_LEN,
            Self::Encrypted => ENCRYPTED_SKETCH_LEN,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Xor => "xor",
            Self::Encrypted => "encrypted",
        }
    }
}

impl std::str::FromStr for SketchVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xor" => Ok(Self::Xor),
            "encrypted" => Ok(Self::Encrypted),
            other => Err(format!("unknown sketch variant `{other}` (expected xor or encrypted)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BindingError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("malformed {what}: {reason}")]
    Malformed { what: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error)]
pub enum AuthFailure {
    #[error("key digest mismatch")]
    HashMismatch,
    #[error("sketch could not be opened")]
    SketchOpenFailed,
    #[error("bound credential failed to decrypt")]
    DecryptFailed,
    #[error("decrypted credential is malformed")]
    MalformedCredential,
}

/// Public value linking the biometric key to the secret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sketch {
    variant: SketchVariant,
    payload: Vec<u8>,
}

impl Sketch {
    pub fn new(variant: SketchVariant, payload: Vec<u8>) -> Result<Self, BindingError> {
        if payload.len() != variant.payload_len() {
            return Err(BindingError::Malformed {
                what: "sketch",
                reason: format!(
                    "{} payload is {} bytes, expected {}",
                    variant.name(),
                    payload.len(),
                    variant.payload_len()
                ),
            });
        }
        Ok(Self { variant, payload })
    }

    pub fn variant(&self) -> SketchVariant {
        self.variant
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// `variant(1) | length(4, big-endian) | payload`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.payload.len());
        out.push(self.variant as u8);
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BindingError> {
        let malformed = |reason: String| BindingError::Malformed {
            what: "sketch",
            reason,
        };
        if bytes.len() < 5 {
            return Err(malformed("shorter than header".into()));
        }
        let variant = SketchVariant::from_byte(bytes[0])
            .ok_or_else(|| malformed(format!("unknown variant {}", bytes[0])))?;
        let len = u32::from_be_bytes(bytes[1..5].try_into().unwrap()) as usize;
        if bytes.len() - 5 != len {
            return Err(malformed(format!(
                "declared {len} payload bytes, found {}",
                bytes.len() - 5
            )));
        }
        Self::new(variant, bytes[5..].to_vec())
    }
}

/// Stored digest of the enrolled key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyDigest(pub [u8; 32]);

/// The credential sealed under the secret-derived key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundCredential {
    pub aad_version: u8,
    pub nonce: [u8; NONCE_LEN],
    pub ciphertext: Vec<u8>,
}

impl BoundCredential {
    /// `aad_version(1) | nonce(12) | length(4, big-endian) | ciphertext`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(17 + self.ciphertext.len());
        out.push(self.aad_version);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&(self.ciphertext.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BindingError> {
        let malformed = |reason: String| BindingError::Malformed {
            what: "bound credential",
            reason,
        };
        if bytes.len() < 17 {
            return Err(malformed("shorter than header".into()));
        }
        if bytes[0] != BOUND_VERSION {
            return Err(malformed(format!("unsupported version {}", bytes[0])));
        }
        let len = u32::from_be_bytes(bytes[13..17].try_into().unwrap()) as usize;
        if len != BOUND_CIPHERTEXT_LEN || bytes.len() - 17 != len {
            return Err(malformed(format!(
                "ciphertext must be {BOUND_CIPHERTEXT_LEN} bytes, header says {len}, found {}",
                bytes.len() - 17
            )));
        }
        Ok(Self {
            aad_version: bytes[0],
            nonce: bytes[1..13].try_into().unwrap(),
            ciphertext: bytes[17..].to_vec(),
        })
    }
}

/// The three artifacts enrollment hands back for storage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enrollment {
    pub sketch: Sketch,
    pub digest: KeyDigest,
    pub bound: BoundCredential,
}

pub fn hash_key(k: &StableKey) -> KeyDigest {
    KeyDigest(labeled_hash(LABEL_KEYHASH, k.as_bytes()))
}

fn sketch_key(k: &StableKey) -> [u8; 32] {
    derive_key(k.as_bytes(), None, LABEL_SKETCH)
}

fn credential_key(s: &StableSecret) -> [u8; 32] {
    derive_key(s.as_bytes(), None, LABEL_CRED)
}

pub(crate) fn bind_enroll_inner(
    key: &StableKey,
    cred: &AgeCred,
    variant: SketchVariant,
    rng_seed: u64,
) -> (Enrollment, StableSecret) {
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut secret = [0u8; 32];
    rng.fill_bytes(&mut secret);
    let secret = StableSecret(secret);

    let payload = match variant {
        SketchVariant::Xor => xor32(key.as_bytes(), secret.as_bytes()).to_vec(),
        SketchVariant::Encrypted => {
            let mut nonce = [0u8; NONCE_LEN];
            rng.fill_bytes(&mut nonce);
            let mut payload = nonce.to_vec();
            payload.extend(seal(&sketch_key(key), &nonce, &[variant as u8], secret.as_bytes()));
            payload
        }
    };
    let sketch = Sketch::new(variant, payload).expect("payload length matches variant");

    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let bound = BoundCredential {
        aad_version: BOUND_VERSION,
        nonce,
        ciphertext: seal(&credential_key(&secret), &nonce, &[BOUND_VERSION], &cred.encode()),
    };

    let enrollment = Enrollment {
        sketch,
        digest: hash_key(key),
        bound,
    };
    (enrollment, secret)
}

/// Binds `cred` to `key`. Neither the key nor the generated secret survives
/// the call.
pub fn bind_enroll(key: &StableKey, cred: &AgeCred, variant: SketchVariant, rng_seed: u64) -> Enrollment {
    bind_enroll_inner(key, cred, variant, rng_seed).0
}

/// Like [`bind_enroll`], but also returns the secret so tests can audit
/// stored bytes against it.
#[cfg(feature = "test-hooks")]
pub fn bind_enroll_traced(
    key: &StableKey,
    cred: &AgeCred,
    variant: SketchVariant,
    rng_seed: u64,
) -> (Enrollment, StableSecret) {
    bind_enroll_inner(key, cred, variant, rng_seed)
}

fn recover_secret(key: &StableKey, sketch: &Sketch) -> Result<StableSecret, AuthFailure> {
    match sketch.variant {
        SketchVariant::Xor => {
            let pad: [u8; 32] = sketch.payload[..].try_into().map_err(|_| AuthFailure::SketchOpenFailed)?;
            Ok(StableSecret(xor32(key.as_bytes(), &pad)))
        }
        SketchVariant::Encrypted => {
            if sketch.payload.len() != ENCRYPTED_SKETCH_LEN {
                return Err(AuthFailure::SketchOpenFailed);
            }
            let (nonce, ct) = sketch.payload.split_at(NONCE_LEN);
            let plain = open(&sketch_key(key), nonce.try_into().unwrap(), &[sketch.variant as u8], ct)
                .ok_or(AuthFailure::SketchOpenFailed)?;
            Ok(StableSecret(plain.try_into().map_err(|_| AuthFailure::SketchOpenFailed)?))
        }
    }
}

pub fn unbind_auth(
    key_candidate: &StableKey,
    sketch: &Sketch,
    digest: &KeyDigest,
    bound: &BoundCredential,
) -> Result<AgeCred, AuthFailure> {
    if hash_key(key_candidate) != *digest {
        return Err(AuthFailure::HashMismatch);
    }
    let secret = recover_secret(key_candidate, sketch)?;
    let plain = open(
        &credential_key(&secret),
        &bound.nonce,
        &[bound.aad_version],
        &bound.ciphertext,
    )
    .ok_or(AuthFailure::DecryptFailed)?;
    AgeCred::decode(&plain).map_err(|_| AuthFailure::MalformedCredential)
}

/// One-way token `H(secret XOR sketch)` for internally generated credentials.
/// Only defined for XOR sketches.
pub fn bind_oneway(secret: &StableSecret, sketch: &Sketch) -> Result<[u8; 32], BindingError> {
    if sketch.variant != SketchVariant::Xor {
        return Err(BindingError::Contract(
            "one-way binding requires an XOR sketch".into(),
        ));
    }
    let pad: [u8; 32] = sketch.payload[..].try_into().expect("XOR sketch is 32 bytes");
    Ok(labeled_hash(LABEL_ONEWAY, &xor32(secret.as_bytes(), &pad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::credential::{issue_agecred, IssuerKeyPair};
    use std::collections::HashSet;

    fn cred(seed: u64) -> AgeCred {
        let keys = IssuerKeyPair::from_seed(seed);
        issue_agecred(&keys, [seed as u8; 16], 18, 1_700_000_000 + seed, 86_400).unwrap()
    }

    fn key(seed: u64) -> StableKey {
        let mut k = [0u8; 32];
        ChaCha20Rng::seed_from_u64(seed).fill_bytes(&mut k);
        StableKey(k)
    }

    #[test]
    fn digest_is_deterministic_and_collision_free() {
        assert_eq!(hash_key(&key(1)), hash_key(&key(1)));
        let digests: HashSet<[u8; 32]> = (0..10_000).map(|s| hash_key(&key(s)).0).collect();
        assert_eq!(digests.len(), 10_000);
    }

    #[test]
    fn xor_sketch_of_zero_key_is_the_secret() {
        let zero = StableKey([0; 32]);
        let (e, secret) = bind_enroll_inner(&zero, &cred(1), SketchVariant::Xor, 4);
        assert_eq!(e.sketch.payload(), secret.as_bytes());
    }

    #[test]
    fn roundtrip_both_variants() {
        for variant in [SketchVariant::Xor, SketchVariant::Encrypted] {
            for s in 0..100 {
                let (k, c) = (key(s), cred(s));
                let e = bind_enroll(&k, &c, variant, s);
                assert_eq!(e.bound.ciphertext.len(), ENCODED_LEN + 16);
                assert_eq!(e.sketch.payload().len(), variant.payload_len());
                assert_eq!(unbind_auth(&k, &e.sketch, &e.digest, &e.bound), Ok(c));
            }
        }
    }

    #[test]
    fn xor_sketch_reconstructs_the_encryption_secret() {
        let k = key(3);
        let (e, secret) = bind_enroll_inner(&k, &cred(3), SketchVariant::Xor, 3);
        let pad: [u8; 32] = e.sketch.payload().try_into().unwrap();
        assert_eq!(xor32(k.as_bytes(), &pad), secret.0);
    }

    #[test]
    fn single_bit_key_changes_fail_the_hash_check() {
        let k = key(7);
        let e = bind_enroll(&k, &cred(7), SketchVariant::Xor, 7);
        for bit in 0..256 {
            let mut bad = k.clone();
            bad.0[bit / 8] ^= 1 << (bit % 8);
            assert_eq!(
                unbind_auth(&bad, &e.sketch, &e.digest, &e.bound),
                Err(AuthFailure::HashMismatch)
            );
        }
    }

    #[test]
    fn ciphertext_and_nonce_tampering_fails_decryption() {
        for variant in [SketchVariant::Xor, SketchVariant::Encrypted] {
            let k = key(8);
            let e = bind_enroll(&k, &cred(8), variant, 8);
            for i in 0..e.bound.ciphertext.len() {
                let mut bad = e.bound.clone();
                bad.ciphertext[i] ^= 0x01;
                assert_eq!(unbind_auth(&k, &e.sketch, &e.digest, &bad), Err(AuthFailure::DecryptFailed));
            }
            for i in 0..NONCE_LEN {
                for bit in 0..8 {
                    let mut bad = e.bound.clone();
                    bad.nonce[i] ^= 1 << bit;
                    assert_eq!(unbind_auth(&k, &e.sketch, &e.digest, &bad), Err(AuthFailure::DecryptFailed));
                }
            }
            let mut bad = e.bound.clone();
            bad.aad_version ^= 0x01;
            assert_eq!(unbind_auth(&k, &e.sketch, &e.digest, &bad), Err(AuthFailure::DecryptFailed));
        }
    }

    #[test]
    fn sketch_tampering_is_caught_at_the_right_stage() {
        let k = key(9);
        let e = bind_enroll(&k, &cred(9), SketchVariant::Encrypted, 9);
        for i in 0..ENCRYPTED_SKETCH_LEN {
            let mut payload = e.sketch.payload().to_vec();
            payload[i] ^= 0x01;
            let bad = Sketch::new(SketchVariant::Encrypted, payload).unwrap();
            assert_eq!(unbind_auth(&k, &bad, &e.digest, &e.bound), Err(AuthFailure::SketchOpenFailed));
        }
        let e = bind_enroll(&k, &cred(9), SketchVariant::Xor, 9);
        let mut payload = e.sketch.payload().to_vec();
        payload[0] ^= 0x01;
        let bad = Sketch::new(SketchVariant::Xor, payload).unwrap();
        assert_eq!(unbind_auth(&k, &bad, &e.digest, &e.bound), Err(AuthFailure::DecryptFailed));
    }

    #[test]
    fn oneway_token() {
        let secret = StableSecret([0x5a; 32]);
        let zero = Sketch::new(SketchVariant::Xor, vec![0; 32]).unwrap();
        assert_eq!(bind_oneway(&secret, &zero).unwrap(), labeled_hash(LABEL_ONEWAY, &secret.0));

        let k = key(11);
        let (e, secret) = bind_enroll_inner(&k, &cred(11), SketchVariant::Xor, 11);
        let token = bind_oneway(&secret, &e.sketch).unwrap();
        assert_eq!(token, labeled_hash(LABEL_ONEWAY, k.as_bytes()));
        assert_eq!(token, bind_oneway(&secret, &e.sketch).unwrap());
        assert_ne!(token, e.digest.0);

        let enc = bind_enroll(&k, &cred(11), SketchVariant::Encrypted, 11);
        assert!(matches!(bind_oneway(&secret, &enc.sketch), Err(BindingError::Contract(_))));
    }

    #[test]
    fn encodings_roundtrip_and_validate() {
        let e = bind_enroll(&key(12), &cred(12), SketchVariant::Encrypted, 12);
        let sb = e.sketch.to_bytes();
        assert_eq!(&sb[..5], &[2, 0, 0, 0, 60]);
        assert_eq!(Sketch::from_bytes(&sb).unwrap(), e.sketch);
        assert!(Sketch::from_bytes(&sb[..sb.len() - 1]).is_err());
        let mut bad = sb.clone();
        bad[0] = 1; // XOR with a 60-byte payload
        assert!(Sketch::from_bytes(&bad).is_err());

        let bb = e.bound.to_bytes();
        assert_eq!(bb.len(), 1 + 12 + 4 + 130);
        assert_eq!(BoundCredential::from_bytes(&bb).unwrap(), e.bound);
        assert!(BoundCredential::from_bytes(&bb[..bb.len() - 1]).is_err());
        let mut bad = bb;
        bad[0] = 7;
        assert!(BoundCredential::from_bytes(&bad).is_err());
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("XOR".parse::<SketchVariant>(), Ok(SketchVariant::Xor));
        assert_eq!("encrypted".parse::<SketchVariant>(), Ok(SketchVariant::Encrypted));
        assert!("aes".parse::<SketchVariant>().is_err());
    }
}

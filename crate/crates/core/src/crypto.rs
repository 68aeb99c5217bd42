//! Hashing, key derivation and AEAD primitives shared by the protocol layers.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use hkdf::Hkdf;
use sha2::{Digest, Sha256};

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

pub const LABEL_FE: &[u8] = b"bbcreds/fe/v1";
pub const LABEL_KEYHASH: &[u8] = b"bbcreds/keyhash/v1";
pub const LABEL_SKETCH: &[u8] = b"bbcreds/sketch/v1";
pub const LABEL_CRED: &[u8] = b"bbcreds/cred/v1";
pub const LABEL_ONEWAY: &[u8] = b"bbcreds/oneway/v1";
pub const LABEL_ISSUER_ID: &[u8] = b"bbcreds/issuer-id/v1";

/// SHA-256 over a length-prefixed label followed by `data`.
pub fn labeled_hash(label: &[u8], data: &[u8]) -> [u8; 32] {
    assert!(label.len() <= u8::MAX as usize);
    let mut h = Sha256::new();
    h.update([label.len() as u8]);
    h.update(label);
    h.update(data);
    h.finalize().into()
}

/// HKDF-SHA256 expanding `ikm` to a 32-byte key bound to `label`.
pub fn derive_key(ikm: &[u8], salt: Option<&[u8]>, label: &[u8]) -> [u8; 32] {
    let mut out = [0u8; 32];
    Hkdf::<Sha256>::new(salt, ikm)
        .expand(label, &mut out)
        .expect("32 bytes is a valid HKDF-SHA256 output length");
    out
}

pub fn seal(key: &[u8; 32], nonce: &[u8; NONCE_LEN], aad: &[u8], plaintext: &[u8]) -> Vec<u8> {
    ChaCha20Poly1305::new(Key::from_slice(key))
        .encrypt(Nonce::from_slice(nonce), Payload { msg: plaintext, aad })
        .expect("ChaCha20-Poly1305 encryption is infallible for in-memory buffers")
}

/// `None` on any authentication failure.
pub fn open(key: &[u8; 32], nonce: &[u8; NONCE_LEN], aad: &[u8], ciphertext: &[u8]) -> Option<Vec<u8>> {
    ChaCha20Poly1305::new(Key::from_slice(key))
        .decrypt(Nonce::from_slice(nonce), Payload { msg: ciphertext, aad })
        .ok()
}

pub fn xor32(a: &[u8; 32], b: &[u8; 32]) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (o, (x, y)) in out.iter_mut().zip(a.iter().zip(b)) {
        *o = x ^ y;
    }
    out
}

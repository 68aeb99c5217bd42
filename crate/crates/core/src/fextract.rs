//! Code-offset fuzzy extractor.
//!
//! `fe_generate` picks a random message `m`, publishes
//! `offset = quantize(e) XOR encode(m)` and derives the key from `m` with a
//! salted HKDF. `fe_reproduce` XORs a fresh quantization onto the offset,
//! decodes back to `m` and re-derives the key. The key depends only on the
//! random message and the salt, never directly on biometric bits.

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::bits::BitString;
use crate::crypto::{derive_key, LABEL_FE};
use crate::ecc::{BchCode, CodeParams, EccError};
use crate::quantize::{quantize, QuantizeError, QuantizerConfig};
use crate::synthbio::Embedding;

pub const HELPER_VERSION: u8 = 1;
pub const SALT_LEN: usize = 16;
pub const KEY_LEN: usize = 32;

/// Length of the fixed header preceding the packed offset bits.
const HELPER_HEADER_LEN: usize = 1 + SALT_LEN + 2 + 2 + 2 + 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FextractError {
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error("inconsistent parameters: {0}")]
    Inconsistent(String),
    #[error("biometric sample too far from enrollment to reproduce the key")]
    ExtractFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HelperDecodeError {
    #[error("helper data has unsupported version {0}")]
    Version(u8),
    #[error("helper data is {got} bytes, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("helper data is invalid: {0}")]
    Invalid(String),
}

/// 256-bit key reproduced from a biometric sample. Debug output is redacted.
#[derive(Clone, PartialEq, Eq)]
pub struct StableKey(pub [u8; KEY_LEN]);

impl StableKey {
    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for StableKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("StableKey(..)")
    }
}

/// Public data needed to reproduce a key from a later sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelperData {
    pub version: u8,
    pub salt: [u8; SALT_LEN],
    pub offset: BitString,
    pub code: CodeParams,
    pub quant: QuantizerConfig,
}

impl HelperData {
    fn check(&self) -> Result<(), FextractError> {
        if self.offset.len() != self.code.n {
            return Err(FextractError::Inconsistent(format!(
                "offset has {} bits, code length is {}",
                self.offset.len(),
                self.code.n
            )));
        }
        if self.quant.code_length() != self.code.n {
            return Err(FextractError::Inconsistent(format!(
                "quantizer emits {} bits, code length is {}",
                self.quant.code_length(),
                self.code.n
            )));
        }
        Ok(())
    }

    /// Canonical encoding: version, salt, n, k, t, dim (u16 big-endian each),
    /// then the offset bits packed MSB-first.
    ///
    /// The encoding has no room for a custom coordinate selection, so only
    /// prefix quantizers can be serialized.
    pub fn to_bytes(&self) -> Result<Vec<u8>, FextractError> {
        self.check()?;
        if !self.quant.is_prefix() {
            return Err(FextractError::Inconsistent(
                "only prefix coordinate selection has a canonical encoding".into(),
            ));
        }
        let field = |v: usize, name: &str| {
            u16::try_from(v)
                .map_err(|_| FextractError::Inconsistent(format!("{name}={v} exceeds 16 bits")))
        };
        let mut out = Vec::with_capacity(HELPER_HEADER_LEN + self.offset.as_bytes().len());
        out.push(self.version);
        out.extend_from_slice(&self.salt);
        out.extend_from_slice(&field(self.code.n, "n")?.to_be_bytes());
        out.extend_from_slice(&field(self.code.k, "k")?.to_be_bytes());
        out.extend_from_slice(&field(self.code.t, "t")?.to_be_bytes());
        out.extend_from_slice(&field(self.quant.dim(), "dim")?.to_be_bytes());
        out.extend_from_slice(self.offset.as_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, HelperDecodeError> {
        if bytes.len() < HELPER_HEADER_LEN {
            return Err(HelperDecodeError::Length {
                expected: HELPER_HEADER_LEN,
                got: bytes.len(),
            });
        }
        let version = bytes[0];
        if version != HELPER_VERSION {
            return Err(HelperDecodeError::Version(version));
        }
        let salt: [u8; SALT_LEN] = bytes[1..1 + SALT_LEN].try_into().unwrap();
        let u16_at = |at: usize| u16::from_be_bytes([bytes[at], bytes[at + 1]]) as usize;
        let base = 1 + SALT_LEN;
        let code = CodeParams {
            n: u16_at(base),
            k: u16_at(base + 2),
            t: u16_at(base + 4),
        };
        let dim = u16_at(base + 6);

        let expected = HELPER_HEADER_LEN + code.n.div_ceil(8);
        if bytes.len() != expected {
            return Err(HelperDecodeError::Length {
                expected,
                got: bytes.len(),
            });
        }
        BchCode::cached(code).map_err(|e| HelperDecodeError::Invalid(e.to_string()))?;
        let quant = QuantizerConfig::prefix(dim, code.n)
            .map_err(|e| HelperDecodeError::Invalid(e.to_string()))?;
        let offset = BitString::from_packed(&bytes[HELPER_HEADER_LEN..], code.n)
            .map_err(|e| HelperDecodeError::Invalid(e.to_string()))?;
        Ok(Self {
            version,
            salt,
            offset,
            code,
            quant,
        })
    }
}

fn kdf(message: &BitString, salt: &[u8; SALT_LEN]) -> StableKey {
    StableKey(derive_key(message.as_bytes(), Some(salt), LABEL_FE))
}

pub fn fe_generate(
    e: &Embedding,
    code: &BchCode,
    quant: &QuantizerConfig,
    rng_seed: u64,
) -> Result<(StableKey, HelperData), FextractError> {
    let params = code.params();
    if quant.code_length() != params.n {
        return Err(FextractError::Inconsistent(format!(
            "quantizer emits {} bits, code length is {}",
            quant.code_length(),
            params.n
        )));
    }
    let bits = quantize(e, quant)?;

    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut raw = vec![0u8; params.k.div_ceil(8)];
    rng.fill_bytes(&mut raw);
    let message = BitString::truncate_from(&raw, params.k);
    let mut salt = [0u8; SALT_LEN];
    rng.fill_bytes(&mut salt);

    let codeword = code.encode(&message).expect("message length equals k");
    let offset = bits.xor(&codeword).expect("quantized length equals n");
    let helper = HelperData {
        version: HELPER_VERSION,
        salt,
        offset,
        code: params,
        quant: quant.clone(),
    };
    Ok((kdf(&message, &salt), helper))
}

pub fn fe_reproduce(e: &Embedding, helper: &HelperData) -> Result<StableKey, FextractError> {
    helper.check()?;
    if helper.version != HELPER_VERSION {
        return Err(FextractError::Inconsistent(format!(
            "helper version {}",
            helper.version
        )));
    }
    let code =
        BchCode::cached(helper.code).map_err(|e| FextractError::Inconsistent(e.to_string()))?;
    let bits = quantize(e, &helper.quant)?;
    let noisy = bits.xor(&helper.offset).expect("lengths checked");
    match code.decode(&noisy) {
        Ok(message) => Ok(kdf(&message, &helper.salt)),
        Err(EccError::DecodeFailure) => Err(FextractError::ExtractFailure),
        Err(e) => Err(FextractError::Inconsistent(e.to_string())),
    }
}

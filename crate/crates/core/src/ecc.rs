//! Binary narrow-sense BCH codes with bounded-distance decoding.
//!
//! Codes are full length, `n = 2^m - 1`, systematic: the first `k` codeword
//! bits are the message and the remaining `n - k` bits are parity. Codeword bit
//! `i` is the coefficient of `x^(n-1-i)`.
//!
//! Decoding computes `2t` syndromes, runs Berlekamp-Massey to find the error
//! locator and locates its roots with a Chien search. Any word whose locator
//! does not split into exactly `deg` distinct roots is reported as a decoding
//! failure. Words further than `t` from every codeword may still be
//! miscorrected to a wrong message; callers that need certainty must check the
//! result independently.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::bits::BitString;

/// Primitive polynomials for GF(2^m), indexed by m.
const PRIMITIVE_POLYS: [(u32, u32); 10] = [
    (3, 0b1011),
    (4, 0b1_0011),
    (5, 0b10_0101),
    (6, 0b100_0011),
    (7, 0b1000_1001),
    (8, 0b1_0001_1101),
    (9, 0b10_0001_0001),
    (10, 0b100_0000_1001),
    (11, 0b1000_0000_0101),
    (12, 0b1_0000_0101_0011),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EccError {
    #[error("expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unsupported code parameters: {0}")]
    Unsupported(String),
    #[error("word is outside every decoding sphere")]
    DecodeFailure,
}

/// Codeword length, message length and guaranteed correction radius, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodeParams {
    pub n: usize,
    pub k: usize,
    pub t: usize,
}

impl CodeParams {
    /// BCH(511, 259, 30): the production code. 259 message bits carry a
    /// 256-bit key seed with margin.
    pub const PRODUCTION: CodeParams = CodeParams {
        n: 511,
        k: 259,
        t: 30,
    };

    /// BCH(15, 7, 2): small enough to enumerate every message and every
    /// correctable error pattern.
    pub const SMALL: CodeParams = CodeParams { n: 15, k: 7, t: 2 };
}

impl Default for CodeParams {
    fn default() -> Self {
        Self::PRODUCTION
    }
}

/// GF(2^m) with log/antilog tables.
#[derive(Debug, Clone)]
struct Field {
    order: usize,
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl Field {
    fn new(m: u32, poly: u32) -> Self {
        let order = (1usize << m) - 1;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; order + 1];
        let mut x = 1u32;
        for (i, slot) in exp.iter_mut().enumerate().take(order) {
            *slot = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & (1 << m) != 0 {
                x ^= poly;
            }
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Self { order, exp, log }
    }

    #[inline]
    fn alpha_pow(&self, e: usize) -> u16 {
        self.exp[e % self.order]
    }

    #[inline]
    fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
    }

    #[inline]
    fn div(&self, a: u16, b: u16) -> u16 {
        assert!(b != 0, "division by zero in GF(2^m)");
        if a == 0 {
            return 0;
        }
        let e = self.log[a as usize] as usize + self.order - self.log[b as usize] as usize;
        self.exp[e]
    }
}

#[derive(Debug, Clone)]
pub struct BchCode {
    params: CodeParams,
    field: Field,
    /// Generator polynomial coefficients; index is the power of x.
    generator: Vec<bool>,
}

impl BchCode {
    /// Builds the narrow-sense BCH code of length `2^m - 1` with designed
    /// distance `2t + 1`.
    pub fn new(m: u32, t: usize) -> Result<Self, EccError> {
        let poly = PRIMITIVE_POLYS
            .iter()
            .find(|(deg, _)| *deg == m)
            .map(|(_, p)| *p)
            .ok_or_else(|| EccError::Unsupported(format!("field degree m={m}")))?;
        let field = Field::new(m, poly);
        let n = field.order;
        if t == 0 || 2 * t >= n {
            return Err(EccError::Unsupported(format!("t={t} for n={n}")));
        }

        // Roots of g(x): the union of cyclotomic cosets of 1..=2t.
        let mut is_root = vec![false; n];
        for i in 1..=2 * t {
            let mut j = i % n;
            while !is_root[j] {
                is_root[j] = true;
                j = (2 * j) % n;
            }
        }

        let mut gen: Vec<u16> = vec![1];
        for (e, _) in is_root.iter().enumerate().filter(|(_, r)| **r) {
            let root = field.alpha_pow(e);
            let mut next = vec![0u16; gen.len() + 1];
            for (d, &c) in gen.iter().enumerate() {
                next[d + 1] ^= c;
                next[d] ^= field.mul(c, root);
            }
            gen = next;
        }
        if gen.iter().any(|&c| c > 1) {
            return Err(EccError::Unsupported(
                "generator polynomial is not binary".into(),
            ));
        }
        let degree = gen.len() - 1;
        if degree >= n {
            return Err(EccError::Unsupported(format!("t={t} leaves no message bits")));
        }
        Ok(Self {
            params: CodeParams {
                n,
                k: n - degree,
                t,
            },
            field,
            generator: gen.into_iter().map(|c| c == 1).collect(),
        })
    }

    /// Builds the code described by `params`, checking that `k` matches the
    /// BCH dimension for that `(n, t)`.
    pub fn from_params(params: CodeParams) -> Result<Self, EccError> {
        let m = (params.n + 1).trailing_zeros();
        if params.n + 1 != 1usize << m {
            return Err(EccError::Unsupported(format!(
                "n={} is not of the form 2^m - 1",
                params.n
            )));
        }
        let code = Self::new(m, params.t)?;
        if code.params.k != params.k {
            return Err(EccError::Unsupported(format!(
                "BCH(n={}, t={}) has k={}, not {}",
                params.n, params.t, code.params.k, params.k
            )));
        }
        Ok(code)
    }

    /// Shared, lazily built instance for `params`.
    pub fn cached(params: CodeParams) -> Result<Arc<Self>, EccError> {
        static CACHE: OnceLock<Mutex<HashMap<CodeParams, Arc<BchCode>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(code) = cache.lock().unwrap().get(&params) {
            return Ok(Arc::clone(code));
        }
        let code = Arc::new(Self::from_params(params)?);
        let mut guard = cache.lock().unwrap();
        Ok(Arc::clone(guard.entry(params).or_insert(code)))
    }

    pub fn params(&self) -> CodeParams {
        self.params
    }

    pub fn encode(&self, msg: &BitString) -> Result<BitString, EccError> {
        let CodeParams { n, k, .. } = self.params;
        if msg.len() != k {
            return Err(EccError::LengthMismatch {
                expected: k,
                got: msg.len(),
            });
        }
        let r = n - k;
        let g = &self.generator;
        let mut rem = vec![false; r];
        for bit in msg.iter() {
            let feedback = bit ^ rem[r - 1];
            for j in (1..r).rev() {
                rem[j] = rem[j - 1] ^ (feedback && g[j]);
            }
            rem[0] = feedback && g[0];
        }

        let mut word = BitString::zeros(n);
        for (i, bit) in msg.iter().enumerate() {
            word.set(i, bit);
        }
        for (j, &bit) in rem.iter().enumerate() {
            word.set(k + (r - 1 - j), bit);
        }
        Ok(word)
    }

    pub fn decode(&self, word: &BitString) -> Result<BitString, EccError> {
        let CodeParams { n, k, t } = self.params;
        if word.len() != n {
            return Err(EccError::LengthMismatch {
                expected: n,
                got: word.len(),
            });
        }

        let syndromes = self.syndromes(word);
        let message = |w: &BitString| BitString::from_bools(&w.iter().take(k).collect::<Vec<_>>());
        if syndromes.iter().all(|&s| s == 0) {
            return Ok(message(word));
        }

        let locator = self.berlekamp_massey(&syndromes);
        let degree = locator.len() - 1;
        if degree == 0 || degree > t {
            return Err(EccError::DecodeFailure);
        }

        let mut corrected = word.clone();
        let mut found = 0;
        for power in 0..n {
            // Root at alpha^(-power) marks an error at x^power.
            let inv = self.field.alpha_pow(n - power);
            if self.eval(&locator, inv) == 0 {
                corrected.flip(n - 1 - power);
                found += 1;
            }
        }
        if found != degree {
            return Err(EccError::DecodeFailure);
        }
        Ok(message(&corrected))
    }

    /// `S_j = r(alpha^j)` for `j = 1..=2t`.
    fn syndromes(&self, word: &BitString) -> Vec<u16> {
        let n = self.params.n;
        let set: Vec<usize> = (0..n).filter(|&i| word.get(i)).map(|i| n - 1 - i).collect();
        (1..=2 * self.params.t)
            .map(|j| {
                set.iter()
                    .fold(0u16, |acc, &p| acc ^ self.field.alpha_pow(j * p))
            })
            .collect()
    }

    /// Error-locator polynomial, trimmed to its true degree.
    fn berlekamp_massey(&self, s: &[u16]) -> Vec<u16> {
        let f = &self.field;
        let mut c = vec![1u16];
        let mut b = vec![1u16];
        let mut len = 0usize;
        let mut shift = 1usize;
        let mut last = 1u16;

        for step in 0..s.len() {
            let mut d = s[step];
            for i in 1..=len.min(c.len() - 1) {
                d ^= f.mul(c[i], s[step - i]);
            }
            if d == 0 {
                shift += 1;
                continue;
            }
            let coef = f.div(d, last);
            let prev = c.clone();
            if c.len() < b.len() + shift {
                c.resize(b.len() + shift, 0);
            }
            for (i, &bi) in b.iter().enumerate() {
                c[i + shift] ^= f.mul(coef, bi);
            }
            if 2 * len <= step {
                len = step + 1 - len;
                b = prev;
                last = d;
                shift = 1;
            } else {
                shift += 1;
            }
        }
        while c.len() > 1 && *c.last().unwrap() == 0 {
            c.pop();
        }
        c
    }

    fn eval(&self, poly: &[u16], x: u16) -> u16 {
        poly.iter()
            .rev()
            .fold(0u16, |acc, &c| self.field.mul(acc, x) ^ c)
    }
}

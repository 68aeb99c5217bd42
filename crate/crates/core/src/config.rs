//! Protocol-wide configuration.

use std::sync::Arc;

use thiserror::Error;

use crate::binding::SketchVariant;
use crate::ecc::{BchCode, CodeParams};
use crate::parties::LivenessPolicy;
use crate::quantize::QuantizerConfig;
use crate::synthbio::{DEFAULT_DIM, MIN_DIM};

/// Largest noise level on the calibration grid whose 95% Wilson upper bound
/// on FRR stays at or below 1% (1000 trials per point, seed 2025: 2 failures,
/// upper bound 0.73%; the next point, 0.006, gives 28). See
/// `CALIBRATION_GRID` and the `calibrate` example.
pub const SIGMA_DEFAULT: f64 = 0.005;

/// Noise levels scanned to pick [`SIGMA_DEFAULT`].
pub const CALIBRATION_GRID: [f64; 8] = [0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.008, 0.01];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    Value { key: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub dim: usize,
    pub code: CodeParams,
    pub variant: SketchVariant,
    /// Genuine-sample noise used when no sigma is given explicitly.
    pub sigma_default: f64,
    /// Noise applied to the enrollment capture itself.
    pub enroll_sigma: f64,
    pub age_threshold: u32,
    pub validity_seconds: u64,
    pub liveness: LivenessPolicy,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            code: CodeParams::PRODUCTION,
            variant: SketchVariant::Xor,
            sigma_default: SIGMA_DEFAULT,
            enroll_sigma: 0.0,
            age_threshold: 18,
            validity_seconds: 365 * 24 * 3600,
            liveness: LivenessPolicy::AlwaysPass,
        }
    }
}

fn value_err(key: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

fn parse_sigma(key: &str, value: &str) -> Result<f64, ConfigError> {
    let s: f64 = value.parse().map_err(|e| value_err(key, e))?;
    if !s.is_finite() || s < 0.0 {
        return Err(value_err(key, "must be finite and nonnegative"));
    }
    Ok(s)
}

impl ProtocolConfig {
    pub fn quantizer(&self) -> QuantizerConfig {
        QuantizerConfig::prefix(self.dim, self.code.n).expect("validated configuration")
    }

    pub fn code(&self) -> Arc<BchCode> {
        BchCode::cached(self.code).expect("validated configuration")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dim < MIN_DIM || self.dim > u16::MAX as usize {
            return Err(value_err("dim", format!("{} out of range", self.dim)));
        }
        BchCode::cached(self.code).map_err(|e| value_err("code", e))?;
        if self.code.n > self.dim {
            return Err(value_err("code", "code length exceeds embedding dimension"));
        }
        for (key, s) in [("sigma_default", self.sigma_default), ("enroll_sigma", self.enroll_sigma)] {
            if !s.is_finite() || s < 0.0 {
                return Err(value_err(key, "must be finite and nonnegative"));
            }
        }
        if self.age_threshold == 0 || self.age_threshold >= 150 {
            return Err(value_err("age_threshold", "must be in 1..150"));
        }
        if self.validity_seconds == 0 {
            return Err(value_err("validity_seconds", "must be positive"));
        }
        self.liveness.validate().map_err(|e| value_err("liveness", e))?;
        Ok(())
    }

    /// Applies one `key=value` setting. Returns `Ok(false)` for keys this
    /// type does not own, so callers can layer their own keys on top.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ConfigError> {
        let num = |v: &str| v.parse::<u64>().map_err(|e| value_err(key, e));
        match key {
            "dim" => self.dim = num(value)? as usize,
            "code" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                let [n, k, t] = parts[..] else {
                    return Err(value_err(key, "expected n,k,t"));
                };
                self.code = CodeParams {
                    n: num(n)? as usize,
                    k: num(k)? as usize,
                    t: num(t)? as usize,
                };
            }
            "variant" => self.variant = value.parse().map_err(|e: String| value_err(key, e))?,
            "sigma_default" => self.sigma_default = parse_sigma(key, value)?,
            "enroll_sigma" => self.enroll_sigma = parse_sigma(key, value)?,
            "age_threshold" => self.age_threshold = num(value)? as u32,
            "validity_seconds" => self.validity_seconds = num(value)?,
            "liveness" => self.liveness = value.parse().map_err(|e: String| value_err(key, e))?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Splits `key=value` lines, skipping blanks and `#` comments.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        let cfg = ProtocolConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.quantizer().code_length(), 511);
        assert!(CALIBRATION_GRID.contains(&cfg.sigma_default));
    }

    #[test]
    fn kv_settings() {
        let mut cfg = ProtocolConfig::default();
        let text = "# comment\n\ncode = 15,7,2\ndim=16\nvariant=encrypted\nliveness = random:0.5:9\nother=1\n";
        let mut unknown = vec![];
        for (k, v) in parse_kv(text).unwrap() {
            if !cfg.set(&k, &v).unwrap() {
                unknown.push(k);
            }
        }
        assert_eq!(unknown, vec!["other"]);
        assert_eq!(cfg.code, CodeParams::SMALL);
        assert_eq!(cfg.variant, SketchVariant::Encrypted);
        assert_eq!(cfg.liveness, LivenessPolicy::SeededRandom { rate: 0.5, seed: 9 });
        cfg.validate().unwrap();
    }

    #[test]
    fn bad_settings() {
        let mut cfg = ProtocolConfig::default();
        assert!(cfg.set("sigma_default", "-1").is_err());
        assert!(cfg.set("code", "511,259").is_err());
        assert!(parse_kv("novalue").is_err());
        cfg.set("code", "511,260,30").unwrap();
        assert!(cfg.validate().is_err());
        let mut cfg = ProtocolConfig::default();
        cfg.set("dim", "256").unwrap();
        assert!(cfg.validate().is_err());
    }
}

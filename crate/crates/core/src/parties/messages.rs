//! Canonical issuance messages.
//!
//! Request: `version(1) | subject_id(16) | evidence_tag(1) | evidence_len(2) | evidence | nonce(16)`
//!
//! Response: `version(1) | status(1) | [credential(114) when issued]`

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use crate::credential::{AgeCred, ENCODED_LEN};

pub const MESSAGE_VERSION: u8 = 1;

const EVIDENCE_DOB: u8 = 0x01;
const EVIDENCE_APPROVE: u8 = 0x02;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MessageError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unusable evidence: {0}")]
    BadEvidence(String),
}

/// Age evidence the device forwards to the issuer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evidence {
    /// Encoded as year (u16 big-endian), month, day.
    MockDateOfBirth(NaiveDate),
    AlwaysApprove,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssuanceRequest {
    pub subject_id: [u8; 16],
    pub evidence: Evidence,
    pub request_nonce: [u8; 16],
}

impl IssuanceRequest {
    pub fn to_bytes(&self) -> Vec<u8> {
        let (tag, body) = match self.evidence {
            Evidence::MockDateOfBirth(d) => {
                let year = u16::try_from(d.year()).expect("birth year fits in u16");
                let mut b = year.to_be_bytes().to_vec();
                b.push(d.month() as u8);
                b.push(d.day() as u8);
                (EVIDENCE_DOB, b)
            }
            Evidence::AlwaysApprove => (EVIDENCE_APPROVE, vec![]),
        };
        let mut out = Vec::with_capacity(36 + body.len());
        out.push(MESSAGE_VERSION);
        out.extend_from_slice(&self.subject_id);
        out.push(tag);
        out.extend_from_slice(&(body.len() as u16).to_be_bytes());
        out.extend_from_slice(&body);
        out.extend_from_slice(&self.request_nonce);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MessageError> {
        let malformed = |s: &str| MessageError::Malformed(s.to_string());
        if bytes.len() < 20 {
            return Err(malformed("request shorter than header"));
        }
        if bytes[0] != MESSAGE_VERSION {
            return Err(malformed("unsupported request version"));
        }
        let subject_id = bytes[1..17].try_into().unwrap();
        let tag = bytes[17];
        let len = u16::from_be_bytes([bytes[18], bytes[19]]) as usize;
        if bytes.len() != 20 + len + 16 {
            return Err(malformed("request length does not match evidence length"));
        }
        let body = &bytes[20..20 + len];
        let request_nonce = bytes[20 + len..].try_into().unwrap();

        let evidence = match (tag, body) {
            (EVIDENCE_DOB, &[y0, y1, m, d]) => {
                let year = u16::from_be_bytes([y0, y1]) as i32;
                NaiveDate::from_ymd_opt(year, m as u32, d as u32)
                    .map(Evidence::MockDateOfBirth)
                    .ok_or_else(|| MessageError::BadEvidence(format!("no such date {year}-{m}-{d}")))?
            }
            (EVIDENCE_DOB, _) => return Err(MessageError::BadEvidence("date must be 4 bytes".into())),
            (EVIDENCE_APPROVE, &[]) => Evidence::AlwaysApprove,
            (EVIDENCE_APPROVE, _) => {
                return Err(MessageError::BadEvidence("approval evidence carries no body".into()))
            }
            (other, _) => return Err(MessageError::BadEvidence(format!("unknown evidence tag {other}"))),
        };
        Ok(Self {
            subject_id,
            evidence,
            request_nonce,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenyReason {
    UnderAge,
    BadEvidence,
    ReplayedNonce,
    MalformedRequest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssuanceStatus {
    Issued,
    Denied(DenyReason),
}

impl IssuanceStatus {
    fn code(self) -> u8 {
        match self {
            IssuanceStatus::Issued => 0,
            IssuanceStatus::Denied(DenyReason::UnderAge) => 1,
            IssuanceStatus::Denied(DenyReason::BadEvidence) => 2,
            IssuanceStatus::Denied(DenyReason::ReplayedNonce) => 3,
            IssuanceStatus::Denied(DenyReason::MalformedRequest) => 4,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => IssuanceStatus::Issued,
            1 => IssuanceStatus::Denied(DenyReason::UnderAge),
            2 => IssuanceStatus::Denied(DenyReason::BadEvidence),
            3 => IssuanceStatus::Denied(DenyReason::ReplayedNonce),
            4 => IssuanceStatus::Denied(DenyReason::MalformedRequest),
            _ => return None,
        })
    }
}

/// `credential` is present exactly when `status` is `Issued`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssuanceResponse {
    pub status: IssuanceStatus,
    pub credential: Option<AgeCred>,
}

impl IssuanceResponse {
    pub fn issued(cred: AgeCred) -> Self {
        Self {
            status: IssuanceStatus::Issued,
            credential: Some(cred),
        }
    }

    pub fn denied(reason: DenyReason) -> Self {
        Self {
            status: IssuanceStatus::Denied(reason),
            credential: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![MESSAGE_VERSION, self.status.code()];
        if let Some(c) = &self.credential {
            out.extend_from_slice(&c.encode());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MessageError> {
        let malformed = |s: &str| MessageError::Malformed(s.to_string());
        if bytes.len() < 2 || bytes[0] != MESSAGE_VERSION {
            return Err(malformed("bad response header"));
        }
        let status = IssuanceStatus::from_code(bytes[1]).ok_or_else(|| malformed("unknown status"))?;
        match (status, bytes.len() - 2) {
            (IssuanceStatus::Issued, ENCODED_LEN) => {
                let cred = AgeCred::decode(&bytes[2..]).map_err(|e| MessageError::Malformed(e.to_string()))?;
                Ok(Self::issued(cred))
            }
            (IssuanceStatus::Denied(r), 0) => Ok(Self::denied(r)),
            _ => Err(malformed("credential presence does not match status")),
        }
    }
}

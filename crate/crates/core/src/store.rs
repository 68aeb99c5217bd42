//! Device record persistence.
//!
//! A record file is the magic `BBC1`, a format version byte, then one TLV
//! entry per artifact: `tag(1) | length(4, big-endian) | value`, tags in
//! ascending order.
//!
//! | tag  | value                     |
//! |------|---------------------------|
//! | 0x01 | helper data               |
//! | 0x02 | sketch                    |
//! | 0x03 | key digest (32 bytes)     |
//! | 0x04 | bound credential          |
//!
//! Parsing is strict. Unknown or repeated tags, trailing garbage and missing
//! entries are all errors; nothing short of a complete record is returned.

use std::fmt;
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::binding::{BoundCredential, KeyDigest, Sketch};
use crate::fextract::{FextractError, HelperData};

pub const MAGIC: [u8; 4] = *b"BBC1";
pub const FORMAT_VERSION: u8 = 0x01;
pub const FILE_EXTENSION: &str = "bbc";

pub const TAG_HELPER: u8 = 0x01;
pub const TAG_SKETCH: u8 = 0x02;
pub const TAG_DIGEST: u8 = 0x03;
pub const TAG_BOUND: u8 = 0x04;
const TAGS: [u8; 4] = [TAG_HELPER, TAG_SKETCH, TAG_DIGEST, TAG_BOUND];

const HEADER_LEN: usize = MAGIC.len() + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatErrorKind {
    BadMagic,
    BadVersion,
    DuplicateTag,
    UnknownTag,
    Truncated,
    InvariantViolation,
}

impl fmt::Display for FormatErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {position}: {detail}")]
pub struct FormatError {
    pub kind: FormatErrorKind,
    pub position: usize,
    pub detail: String,
}

impl FormatError {
    fn new(kind: FormatErrorKind, position: usize, detail: impl Into<String>) -> Self {
        Self {
            kind,
            position,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("record cannot be serialized: {0}")]
    Unserializable(#[from] FextractError),
}

/// Everything a device keeps after enrollment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceRecord {
    pub helper: HelperData,
    pub sketch: Sketch,
    pub digest: KeyDigest,
    pub bound: BoundCredential,
}

impl DeviceRecord {
    pub fn to_bytes(&self) -> Result<Vec<u8>, FextractError> {
        let entries = [
            (TAG_HELPER, self.helper.to_bytes()?),
            (TAG_SKETCH, self.sketch.to_bytes()),
            (TAG_DIGEST, self.digest.0.to_vec()),
            (TAG_BOUND, self.bound.to_bytes()),
        ];
        let mut out = Vec::with_capacity(256);
        out.extend_from_slice(&MAGIC);
        out.push(FORMAT_VERSION);
        for (tag, value) in entries {
            out.push(tag);
            out.extend_from_slice(&(value.len() as u32).to_be_bytes());
            out.extend_from_slice(&value);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        use FormatErrorKind::*;

        for (i, &m) in MAGIC.iter().enumerate() {
            match bytes.get(i) {
                None => return Err(FormatError::new(Truncated, i, "file ends inside magic")),
                Some(&b) if b != m => {
                    return Err(FormatError::new(BadMagic, i, "not a BBC1 record"))
                }
                _ => {}
            }
        }
        match bytes.get(MAGIC.len()) {
            None => return Err(FormatError::new(Truncated, MAGIC.len(), "missing version byte")),
            Some(&v) if v != FORMAT_VERSION => {
                return Err(FormatError::new(BadVersion, MAGIC.len(), format!("version {v}")))
            }
            _ => {}
        }

        let mut values: [Option<(usize, &[u8])>; 4] = [None; 4];
        let mut pos = HEADER_LEN;
        let mut last_tag = 0u8;
        while pos < bytes.len() {
            let tag = bytes[pos];
            let slot = TAGS
                .iter()
                .position(|&t| t == tag)
                .ok_or_else(|| FormatError::new(UnknownTag, pos, format!("tag 0x{tag:02x}")))?;
            if values[slot].is_some() {
                return Err(FormatError::new(DuplicateTag, pos, format!("tag 0x{tag:02x}")));
            }
            if tag < last_tag {
                return Err(FormatError::new(
                    InvariantViolation,
                    pos,
                    format!("tag 0x{tag:02x} after 0x{last_tag:02x}"),
                ));
            }
            if bytes.len() < pos + 5 {
                return Err(FormatError::new(Truncated, pos, "file ends inside entry header"));
            }
            let len = u32::from_be_bytes(bytes[pos + 1..pos + 5].try_into().unwrap()) as usize;
            let start = pos + 5;
            let end = start
                .checked_add(len)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| {
                    FormatError::new(Truncated, pos, format!("entry 0x{tag:02x} needs {len} bytes"))
                })?;
            values[slot] = Some((start, &bytes[start..end]));
            last_tag = tag;
            pos = end;
        }

        // Missing only trailing entries means the file was cut short; a gap
        // in the middle is a malformed record.
        let present = values.iter().take_while(|v| v.is_some()).count();
        if present < TAGS.len() {
            let kind = if values[present..].iter().all(Option::is_none) {
                Truncated
            } else {
                InvariantViolation
            };
            return Err(FormatError::new(
                kind,
                bytes.len(),
                format!("missing entry 0x{:02x}", TAGS[present]),
            ));
        }
        let [helper, sketch, digest, bound] = values.map(Option::unwrap);

        let invalid = |(at, _): (usize, &[u8]), e: String| FormatError::new(InvariantViolation, at, e);
        let helper_data = HelperData::from_bytes(helper.1).map_err(|e| invalid(helper, e.to_string()))?;
        let sketch_data = Sketch::from_bytes(sketch.1).map_err(|e| invalid(sketch, e.to_string()))?;
        let digest_data = KeyDigest(
            digest
                .1
                .try_into()
                .map_err(|_| invalid(digest, format!("digest is {} bytes", digest.1.len())))?,
        );
        let bound_data = BoundCredential::from_bytes(bound.1).map_err(|e| invalid(bound, e.to_string()))?;

        Ok(Self {
            helper: helper_data,
            sketch: sketch_data,
            digest: digest_data,
            bound: bound_data,
        })
    }
}

pub fn save_record<W: Write>(r: &DeviceRecord, destination: &mut W) -> Result<usize, StoreError> {
    let bytes = r.to_bytes()?;
    destination.write_all(&bytes)?;
    destination.flush()?;
    Ok(bytes.len())
}

pub fn load_record<R: Read>(source: &mut R) -> Result<DeviceRecord, StoreError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    Ok(DeviceRecord::from_bytes(&bytes)?)
}

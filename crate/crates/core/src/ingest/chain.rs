//! Append-only store of hash-chained log records.
//!
//! On-disk layout, repeated once per entry:
//!
//! ```text
//! u32 LE   body length (bytes that follow)
//! u64 LE   entry index, 0-based
//! [u8]     payload (JSON serialization of a LogRecord)
//! [u8;32]  prev_digest  (all zero for index 0)
//! [u8;32]  entry_digest = SHA-256(index LE || SHA-256(payload) || prev_digest)
//! ```
//!
//! The store is single-writer. Readers may verify concurrently with other
//! readers but not with an append in flight.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest as _, Sha256};

use super::{IngestError, LogRecord};

pub type Digest = [u8; 32];

pub const ZERO_DIGEST: Digest = [0; 32];

const LEN_PREFIX: usize = 4;
const INDEX_LEN: usize = 8;
const FIXED_BODY: usize = INDEX_LEN + 32 + 32;

/// One persisted entry. `payload_digest` is recomputed from `payload` when
/// an entry is read back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainedEntry {
    pub index: u64,
    pub payload: Vec<u8>,
    pub payload_digest: Digest,
    pub prev_digest: Digest,
    pub entry_digest: Digest,
}

fn sha256(bytes: &[u8]) -> Digest {
    Sha256::digest(bytes).into()
}

fn entry_digest(index: u64, payload_digest: &Digest, prev_digest: &Digest) -> Digest {
    let mut h = Sha256::new();
    h.update(index.to_le_bytes());
    h.update(payload_digest);
    h.update(prev_digest);
    h.finalize().into()
}

impl ChainedEntry {
    fn seal(index: u64, payload: Vec<u8>, prev_digest: Digest) -> Self {
        let payload_digest = sha256(&payload);
        let entry_digest = entry_digest(index, &payload_digest, &prev_digest);
        Self { index, payload, payload_digest, prev_digest, entry_digest }
    }

    /// True when the stored entry digest matches the other fields.
    pub fn is_sealed(&self) -> bool {
        sha256(&self.payload) == self.payload_digest
            && entry_digest(self.index, &self.payload_digest, &self.prev_digest) == self.entry_digest
    }

    fn encode(&self) -> Vec<u8> {
        let body = FIXED_BODY + self.payload.len();
        let mut buf = Vec::with_capacity(LEN_PREFIX + body);
        buf.extend_from_slice(&(body as u32).to_le_bytes());
        buf.extend_from_slice(&self.index.to_le_bytes());
        buf.extend_from_slice(&self.payload);
        buf.extend_from_slice(&self.prev_digest);
        buf.extend_from_slice(&self.entry_digest);
        buf
    }

    /// Decode the log record carried in the payload.
    pub fn record(&self) -> Result<LogRecord, serde_json::Error> {
        serde_json::from_slice(&self.payload)
    }
}

/// Outcome of [`verify_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerificationReport {
    pub valid: bool,
    pub entries: u64,
    pub first_bad_index: Option<u64>,
}

enum Parsed {
    Entry(ChainedEntry, usize),
    End,
    Truncated,
}

fn parse_at(bytes: &[u8], offset: usize) -> Parsed {
    let rest = &bytes[offset..];
    if rest.is_empty() {
        return Parsed::End;
    }
    if rest.len() < LEN_PREFIX {
        return Parsed::Truncated;
    }
    let body = u32::from_le_bytes(rest[..LEN_PREFIX].try_into().unwrap()) as usize;
    if body < FIXED_BODY || rest.len() - LEN_PREFIX < body {
        return Parsed::Truncated;
    }
    let body = &rest[LEN_PREFIX..LEN_PREFIX + body];
    let index = u64::from_le_bytes(body[..INDEX_LEN].try_into().unwrap());
    let payload_end = body.len() - 64;
    let payload = body[INDEX_LEN..payload_end].to_vec();
    let prev_digest: Digest = body[payload_end..payload_end + 32].try_into().unwrap();
    let stored: Digest = body[payload_end + 32..].try_into().unwrap();
    let payload_digest = sha256(&payload);
    let entry = ChainedEntry { index, payload, payload_digest, prev_digest, entry_digest: stored };
    Parsed::Entry(entry, LEN_PREFIX + body.len())
}

/// Walk the encoded chain, returning the entries that verified and the
/// report. Stops at the first bad entry.
fn walk(bytes: &[u8]) -> (Vec<ChainedEntry>, VerificationReport) {
    let mut entries = Vec::new();
    let mut offset = 0;
    let mut prev = ZERO_DIGEST;
    let mut position = 0u64;
    loop {
        match parse_at(bytes, offset) {
            Parsed::End => {
                let report = VerificationReport { valid: true, entries: position, first_bad_index: None };
                return (entries, report);
            }
            Parsed::Truncated => break,
            Parsed::Entry(entry, used) => {
                if entry.index != position || entry.prev_digest != prev || !entry.is_sealed() {
                    break;
                }
                prev = entry.entry_digest;
                offset += used;
                position += 1;
                entries.push(entry);
            }
        }
    }
    let report = VerificationReport { valid: false, entries: position, first_bad_index: Some(position) };
    (entries, report)
}

/// Verify an in-memory copy of a chain store.
pub fn verify_bytes(bytes: &[u8]) -> VerificationReport {
    walk(bytes).1
}

/// Verify the chain store at `path`.
pub fn verify_chain(path: impl AsRef<Path>) -> Result<VerificationReport, IngestError> {
    let bytes = std::fs::read(path)?;
    Ok(verify_bytes(&bytes))
}

/// File-backed chain store opened for appending.
#[derive(Debug)]
pub struct ChainStore {
    path: PathBuf,
    file: File,
    len: u64,
    size: u64,
    last_digest: Digest,
}

impl ChainStore {
    /// Open or create the store at `path`. An existing store must verify,
    /// otherwise appending to it would extend a broken chain.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let (entries, report) = walk(&bytes);
        if let Some(index) = report.first_bad_index {
            return Err(IngestError::CorruptChain { index });
        }
        let last_digest = entries.last().map_or(ZERO_DIGEST, |e| e.entry_digest);
        Ok(Self { path, file, len: report.entries, size: bytes.len() as u64, last_digest })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<ChainedEntry, IngestError> {
        let payload = serde_json::to_vec(record).expect("LogRecord serializes");
        self.append_payload(payload)
    }

    /// Append raw payload bytes. On failure the file is cut back to its
    /// previous length, so no partial entry survives.
    pub fn append_payload(&mut self, payload: Vec<u8>) -> Result<ChainedEntry, IngestError> {
        if payload.len() > u32::MAX as usize - FIXED_BODY {
            return Err(IngestError::PayloadTooLarge);
        }
        let entry = ChainedEntry::seal(self.len, payload, self.last_digest);
        let buf = entry.encode();
        let write = |file: &mut File, size: u64| -> std::io::Result<()> {
            file.seek(SeekFrom::Start(size))?;
            file.write_all(&buf)?;
            file.flush()
        };
        if let Err(e) = write(&mut self.file, self.size) {
            let _ = self.file.set_len(self.size);
            return Err(IngestError::AppendFailed(e));
        }
        self.size += buf.len() as u64;
        self.len += 1;
        self.last_digest = entry.entry_digest;
        Ok(entry)
    }

    pub fn sync(&self) -> Result<(), IngestError> {
        self.file.sync_all()?;
        Ok(())
    }

    /// Read and verify every entry of the store at `path`.
    pub fn read_entries(path: impl AsRef<Path>) -> Result<Vec<ChainedEntry>, IngestError> {
        let bytes = std::fs::read(path)?;
        let (entries, report) = walk(&bytes);
        match report.first_bad_index {
            Some(index) => Err(IngestError::CorruptChain { index }),
            None => Ok(entries),
        }
    }
}

//! Append-only block log: `"FSCF"`, a version byte, then frames of
//! `[u64 big-endian length ‖ canonical-JSON block]`.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::block::Block;

pub const MAGIC: &[u8; 4] = b"FSCF";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("log I/O: {0}")]
    Io(#[from] io::Error),
    #[error("bad log header")]
    BadHeader,
    #[error("frame at byte {offset} is truncated")]
    Truncated { offset: usize },
    #[error("frame {index} does not decode: {reason}")]
    BadFrame { index: usize, reason: String },
}

pub fn header() -> Vec<u8> {
    let mut h = MAGIC.to_vec();
    h.push(VERSION);
    h
}

pub fn encode_frame(block: &Block) -> Vec<u8> {
    let body = block.to_bytes();
    let mut out = Vec::with_capacity(body.len() + 8);
    out.extend_from_slice(&(body.len() as u64).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

/// A complete log image for `blocks`.
pub fn encode_log<'a>(blocks: impl IntoIterator<Item = &'a Block>) -> Vec<u8> {
    let mut out = header();
    for b in blocks {
        out.extend_from_slice(&encode_frame(b));
    }
    out
}

/// Splits a log image into frame bodies, checking the header and framing.
pub fn frames(bytes: &[u8]) -> Result<Vec<&[u8]>, LogError> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC || bytes[4] != VERSION {
        return Err(LogError::BadHeader);
    }
    let mut out = Vec::new();
    let mut pos = HEADER_LEN;
    while pos < bytes.len() {
        let len_end = pos.checked_add(8).filter(|&e| e <= bytes.len()).ok_or(LogError::Truncated { offset: pos })?;
        let len = u64::from_be_bytes(bytes[pos..len_end].try_into().expect("8 bytes"));
        let end = usize::try_from(len)
            .ok()
            .and_then(|l| len_end.checked_add(l))
            .filter(|&e| e <= bytes.len())
            .ok_or(LogError::Truncated { offset: pos })?;
        out.push(&bytes[len_end..end]);
        pos = end;
    }
    Ok(out)
}

pub fn decode_block(frame: &[u8], index: usize) -> Result<Block, LogError> {
    serde_json::from_slice(frame).map_err(|e| LogError::BadFrame { index, reason: e.to_string() })
}

pub fn read_log(bytes: &[u8]) -> Result<Vec<Block>, LogError> {
    frames(bytes)?.into_iter().enumerate().map(|(i, f)| decode_block(f, i)).collect()
}

/// An open log file positioned for appending.
#[derive(Debug)]
pub struct BlockLog {
    path: PathBuf,
    file: File,
}

impl BlockLog {
    /// Creates a new, empty log; fails if the file exists.
    pub fn create(path: &Path) -> Result<Self, LogError> {
        let mut file = OpenOptions::new().write(true).create_new(true).open(path)?;
        file.write_all(&header())?;
        file.sync_data()?;
        Ok(BlockLog { path: path.to_path_buf(), file })
    }

    /// Opens an existing log, returning it with its contents.
    pub fn open(path: &Path) -> Result<(Self, Vec<Block>), LogError> {
        let bytes = std::fs::read(path)?;
        let blocks = read_log(&bytes)?;
        let file = OpenOptions::new().append(true).open(path)?;
        Ok((BlockLog { path: path.to_path_buf(), file }, blocks))
    }

    pub fn append(&mut self, block: &Block) -> Result<(), LogError> {
        self.file.write_all(&encode_frame(block))?;
        self.file.sync_data()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

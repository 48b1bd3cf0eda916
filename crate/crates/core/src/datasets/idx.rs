//! IDX containers: a big-endian `u32` magic (`0x0000_08_nd`, unsigned bytes),
//! `nd` big-endian `u32` dimensions, then the raw bytes. Gzip input is
//! detected from its header.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 2051;
pub const LABELS_MAGIC: u32 = 2049;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub magic: u32,
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxArray {
    pub fn new(dims: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 255 {
            return Err(Error::invalid(format!("idx arrays need 1..=255 dims, got {}", dims.len())));
        }
        let want: usize = dims.iter().product();
        if want != data.len() {
            return Err(Error::invalid(format!("idx dims {dims:?} need {want} bytes, got {}", data.len())));
        }
        Ok(Self {
            magic: 0x0800 | dims.len() as u32,
            dims,
            data,
        })
    }

    /// Length of the leading dimension.
    pub fn count(&self) -> usize {
        self.dims[0]
    }

    /// Bytes per item along the leading dimension.
    pub fn item_len(&self) -> usize {
        self.dims[1..].iter().product()
    }

    pub fn item(&self, i: usize) -> &[u8] {
        let len = self.item_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + self.data.len());
        out.extend_from_slice(&self.magic.to_be_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }
}

fn read_u32(bytes: &[u8], offset: usize, what: &'static str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Format {
            what,
            offset: offset as u64,
            reason: format!("truncated header, file is {} bytes", bytes.len()),
        })
}

/// Parses an uncompressed IDX buffer of unsigned bytes.
pub fn parse_idx(bytes: &[u8], what: &'static str) -> Result<IdxArray> {
    let magic = read_u32(bytes, 0, what)?;
    if magic >> 8 != 0x08 {
        return Err(Error::Format {
            what,
            offset: 0,
            reason: format!("magic {magic:#010x} is not an unsigned-byte idx file"),
        });
    }
    let nd = (magic & 0xff) as usize;
    if nd == 0 {
        return Err(Error::Format {
            what,
            offset: 3,
            reason: "zero dimensions".into(),
        });
    }
    let dims = (0..nd)
        .map(|i| read_u32(bytes, 4 + 4 * i, what).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = 4 + 4 * nd;
    let want = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| Error::Format {
        what,
        offset: 4,
        reason: format!("dims {dims:?} overflow"),
    })?;
    let have = bytes.len() - start;
    if have != want {
        return Err(Error::Format {
            what,
            offset: (start + have.min(want)) as u64,
            reason: format!("dims {dims:?} need {want} payload bytes, found {have}"),
        });
    }
    Ok(IdxArray {
        magic,
        dims,
        data: bytes[start..].to_vec(),
    })
}

pub fn read_idx_file(path: &Path, what: &'static str) -> Result<IdxArray> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bytes = if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        out
    } else {
        raw
    };
    parse_idx(&bytes, what)
}

/// Writes `array`, gzip-compressed when the path ends in `.gz`.
pub fn write_idx_file(path: &Path, array: &IdxArray) -> Result<()> {
    let bytes = array.to_bytes();
    let out = if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        bytes
    };
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

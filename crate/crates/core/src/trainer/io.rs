//! Checkpoint files and metric logs.
//!
//! Checkpoint layout, all integers little-endian:
//!
//! ```text
//! bytes 0..4    magic  b"LSCK"
//! u32           format version (1)
//! u64           parameter count N
//! u32           layer count L
//! L × (u32,u32) (fan_in, fan_out), output layer first
//! N × f64       parameter values in layout order
//! ```
//!
//! A sidecar `<file>.meta.toml` carries epoch, learning rate, init seed and
//! the config hash.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{Layout, ParamVector};

use super::EpochRecord;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LSCK";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const METRICS_SCHEMA: &str = "# schema: landscape-metrics v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub eta: f64,
    pub seed: u64,
    pub config_hash: String,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.toml");
    path.with_file_name(name)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn encode_checkpoint(params: &ParamVector) -> Vec<u8> {
    let shapes = params.layout().shapes();
    let mut out = Vec::with_capacity(20 + 8 * shapes.len() + 8 * params.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    out.extend_from_slice(&(shapes.len() as u32).to_le_bytes());
    for (fan_in, fan_out) in shapes {
        out.extend_from_slice(&(fan_in as u32).to_le_bytes());
        out.extend_from_slice(&(fan_out as u32).to_le_bytes());
    }
    for v in params.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let chunk = self.bytes.get(self.pos..self.pos + n).ok_or_else(|| Error::Format {
            what: "checkpoint",
            offset: self.pos as u64,
            reason: format!("truncated: needed {n} more bytes, file is {} bytes", self.bytes.len()),
        })?;
        self.pos += n;
        Ok(chunk)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ParamVector> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format {
            what: "checkpoint",
            offset: 0,
            reason: "bad magic".into(),
        });
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format {
            what: "checkpoint",
            offset: 4,
            reason: format!("unsupported version {version}"),
        });
    }
    let n = c.u64()? as usize;
    let layers = c.u32()? as usize;
    let shapes = (0..layers)
        .map(|_| Ok((c.u32()? as usize, c.u32()? as usize)))
        .collect::<Result<Vec<_>>>()?;
    let layout = Layout::from_shapes(&shapes)?;
    if layout.len() != n {
        return Err(Error::Format {
            what: "checkpoint",
            offset: 8,
            reason: format!("layout holds {} parameters, header says {n}", layout.len()),
        });
    }
    let values = (0..n)
        .map(|_| Ok(f64::from_le_bytes(c.take(8)?.try_into().expect("8 bytes"))))
        .collect::<Result<Vec<_>>>()?;
    if c.pos != bytes.len() {
        return Err(Error::Format {
            what: "checkpoint",
            offset: c.pos as u64,
            reason: format!("{} trailing bytes", bytes.len() - c.pos),
        });
    }
    ParamVector::new(layout, values)
}

pub fn save_checkpoint(path: &Path, params: &ParamVector, meta: &CheckpointMeta) -> Result<()> {
    write_atomic(path, &encode_checkpoint(params))?;
    let text = toml::to_string(meta).expect("checkpoint meta serializes");
    write_atomic(&meta_path(path), text.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<(ParamVector, CheckpointMeta)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let params = decode_checkpoint(&bytes)?;
    let mp = meta_path(path);
    let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let meta = toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {}", mp.display(), e.message())))?;
    Ok((params, meta))
}

pub const METRICS_COLUMNS: [&str; 11] = [
    "epoch",
    "eta",
    "train_loss",
    "eval_loss",
    "grad_norm",
    "lambda_max",
    "lambda_neg_max",
    "n_eff",
    "weight_dist_to_ref",
    "misalignment_to_ref",
    "ritz_converged",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn record_row(r: &EpochRecord) -> Vec<String> {
    let s = r.spectrum;
    vec![
        r.epoch.to_string(),
        r.eta.to_string(),
        r.train_loss.to_string(),
        r.eval_loss.to_string(),
        r.grad_norm.to_string(),
        cell(s.map(|s| s.lambda_max)),
        cell(s.map(|s| s.lambda_neg_max)),
        cell(s.map(|s| s.n_eff)),
        cell(s.and_then(|s| s.weight_dist_to_ref)),
        cell(s.and_then(|s| s.misalignment_to_ref)),
        s.map(|s| s.ritz_converged.to_string()).unwrap_or_default(),
    ]
}

/// Schema line followed by an RFC-4180 table.
pub fn csv_with_schema(schema: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let csv_err = |e: csv::Error| Error::invalid(format!("csv: {e}"));
    let mut out = Vec::new();
    out.extend_from_slice(schema.as_bytes());
    out.push(b'\n');
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))
}

pub fn metrics_csv(records: &[EpochRecord]) -> Result<Vec<u8>> {
    csv_with_schema(METRICS_SCHEMA, &METRICS_COLUMNS, records.iter().map(record_row))
}

pub fn write_metrics(path: &Path, records: &[EpochRecord]) -> Result<()> {
    write_atomic(path, &metrics_csv(records)?)
}

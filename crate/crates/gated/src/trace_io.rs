//! Binary trace files.
//!
//! Little-endian throughout. Header (56 bytes):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 8    | magic `GATEDTRC`              |
//! | 8      | 4    | version (u32, currently 1)    |
//! | 12     | 4    | window length (u32, samples)  |
//! | 16     | 8    | sample spacing (f64, ns)      |
//! | 24     | 8    | window count (u64)            |
//! | 32     | 1    | vacuum flag (0 or 1)          |
//! | 33     | 7    | reserved, zero                |
//! | 40     | 8    | seed (u64)                    |
//! | 48     | 8    | config hash (u64)             |
//!
//! Then `count` records of one f32 qualifier delay (ns) followed by
//! `window length` f32 samples. Samples are held as f64 in memory; the file
//! stores them as f32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use gated_core::homodyne::{TraceMeta, TraceSet, TraceWindow};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"GATEDTRC";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 56;

#[derive(Debug, Error)]
pub enum TraceFileError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("truncated file: expected {expected} bytes of window data, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("invalid trace set: {0}")]
    Invalid(#[from] gated_core::Error),
}

pub fn write_traces(w: &mut impl Write, set: &TraceSet) -> Result<(), TraceFileError> {
    let len = u32::try_from(set.window_len())
        .map_err(|_| TraceFileError::Format("window length exceeds u32".into()))?;
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&len.to_le_bytes());
    header.extend_from_slice(&set.dt.to_le_bytes());
    header.extend_from_slice(&(set.len() as u64).to_le_bytes());
    header.push(set.vacuum as u8);
    header.extend_from_slice(&[0u8; 7]);
    header.extend_from_slice(&set.meta.seed.to_le_bytes());
    header.extend_from_slice(&set.meta.config_hash.to_le_bytes());
    debug_assert_eq!(header.len(), HEADER_LEN);
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(4 * (len as usize + 1));
    for win in &set.windows {
        buf.clear();
        buf.extend_from_slice(&(win.qualifier_delay as f32).to_le_bytes());
        for &s in &win.samples {
            buf.extend_from_slice(&(s as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn f32_at(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

pub fn read_traces(r: &mut impl Read) -> Result<TraceSet, TraceFileError> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        let n = r.read(&mut header[got..])?;
        if n == 0 {
            break;
        }
        got += n;
    }
    if got < MAGIC.len() || &header[..8] != MAGIC {
        return Err(TraceFileError::Format("bad magic, not a trace file".into()));
    }
    if got < HEADER_LEN {
        return Err(TraceFileError::Truncated {
            expected: HEADER_LEN as u64,
            found: got as u64,
        });
    }
    let version = u32_at(&header, 8);
    if version != VERSION {
        return Err(TraceFileError::Format(format!(
            "unsupported version {version}"
        )));
    }
    let len = u32_at(&header, 12) as usize;
    let dt = f64::from_le_bytes(header[16..24].try_into().unwrap());
    let count = u64_at(&header, 24);
    let vacuum = match header[32] {
        0 => false,
        1 => true,
        v => {
            return Err(TraceFileError::Format(format!(
                "vacuum flag {v} is not 0 or 1"
            )))
        }
    };
    let meta = TraceMeta {
        seed: u64_at(&header, 40),
        config_hash: u64_at(&header, 48),
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(TraceFileError::Format(format!(
            "sample spacing {dt} is not > 0"
        )));
    }
    let record = 4 * (len as u64 + 1);
    let expected = count
        .checked_mul(record)
        .ok_or_else(|| TraceFileError::Format("window count overflows".into()))?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let found = body.len() as u64;
    if found < expected {
        return Err(TraceFileError::Truncated { expected, found });
    }
    if found > expected {
        return Err(TraceFileError::Format(format!(
            "{} trailing bytes after the last window",
            found - expected
        )));
    }
    let windows = body
        .chunks_exact(record as usize)
        .map(|rec| TraceWindow {
            qualifier_delay: f32_at(rec, 0) as f64,
            samples: (0..len).map(|i| f32_at(rec, 4 * (i + 1)) as f64).collect(),
        })
        .collect();
    Ok(TraceSet::new(windows, vacuum, dt, meta)?)
}

pub fn save_traces(path: &Path, set: &TraceSet) -> Result<(), TraceFileError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_traces(&mut w, set)?;
    w.flush()?;
    Ok(())
}

pub fn load_traces(path: &Path) -> Result<TraceSet, TraceFileError> {
    read_traces(&mut BufReader::new(File::open(path)?))
}

//! Dense binary container for waveform matrices.
//!
//! Layout (little endian): magic `NTRC`, u16 version, u32 channels,
//! u64 time samples, f64 sample rate, u32 channel-name count followed by
//! length-prefixed UTF-8 names, then channels*time f64 samples row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::signal::Recording;

const MAGIC: &[u8; 4] = b"NTRC";
const VERSION: u16 = 1;

pub fn write_recording(path: &Path, rec: &Recording) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io_path(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(rec.channels() as u32).to_le_bytes())?;
    w.write_all(&(rec.time_samples() as u64).to_le_bytes())?;
    w.write_all(&rec.sample_rate_hz.to_le_bytes())?;
    let names = rec.channel_names.as_deref().unwrap_or(&[]);
    w.write_all(&(names.len() as u32).to_le_bytes())?;
    for name in names {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
    }
    for v in rec.samples.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_recording(path: &Path) -> Result<Recording> {
    let file = File::open(path).map_err(|e| Error::io_path(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::config(format!("{}: not a recording file", path.display())));
    }
    let version = read_u16(&mut r)?;
    if version != VERSION {
        return Err(Error::config(format!("unsupported recording version {version}")));
    }
    let channels = read_u32(&mut r)? as usize;
    let time = read_u64(&mut r)? as usize;
    let rate = read_f64(&mut r)?;
    let n_names = read_u32(&mut r)? as usize;
    let mut names = Vec::with_capacity(n_names);
    for _ in 0..n_names {
        let len = read_u32(&mut r)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        names.push(String::from_utf8(buf).map_err(|_| Error::config("invalid channel name"))?);
    }
    let mut data = vec![0.0f64; channels * time];
    let mut buf = [0u8; 8];
    for v in data.iter_mut() {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    let samples = Array2::from_shape_vec((channels, time), data)
        .map_err(|e| Error::Shape(e.to_string()))?;
    let mut rec = Recording::new(samples, rate)?;
    if !names.is_empty() {
        rec.channel_names = Some(names);
    }
    Ok(rec)
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

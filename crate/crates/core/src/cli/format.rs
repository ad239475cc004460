//! On-disk volume format `SWR1`.
//!
//! Layout: magic `SWR1`, then little-endian `u32 n_t, u32 n_r, u32 n_s,
//! f64 dt, f64 d_rcv, f64 d_src`, then `n_s·n_r·n_t` `f32` samples with time
//! fastest, then receiver, then source.

use std::io::{Read, Write};
use std::path::Path;

use crate::datamodel::{GridGeometry, SeismicVolume};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SWR1";
const HEADER_LEN: usize = 4 + 3 * 4 + 3 * 8;

pub fn write_volume<W: Write>(mut out: W, v: &SeismicVolume) -> Result<()> {
    let g = v.geometry();
    let dim = |x: usize| {
        u32::try_from(x).map_err(|_| Error::Format(format!("dimension {x} exceeds u32")))
    };
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * g.n_samples());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&dim(g.n_time)?.to_le_bytes());
    buf.extend_from_slice(&dim(g.n_receivers)?.to_le_bytes());
    buf.extend_from_slice(&dim(g.n_sources)?.to_le_bytes());
    buf.extend_from_slice(&g.dt.to_le_bytes());
    buf.extend_from_slice(&g.d_rcv.to_le_bytes());
    buf.extend_from_slice(&g.d_src.to_le_bytes());
    for &x in v.samples() {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_volume<R: Read>(mut input: R) -> Result<SeismicVolume> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    parse_volume(&bytes)
}

pub fn parse_volume(bytes: &[u8]) -> Result<SeismicVolume> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("file too short for an SWR1 header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, expected SWR1".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (n_t, n_r, n_s) = (u32_at(4), u32_at(8), u32_at(12));
    let (dt, d_rcv, d_src) = (f64_at(16), f64_at(24), f64_at(32));
    let geometry = GridGeometry::new(n_s, n_r, n_t, dt, d_src, d_rcv)
        .map_err(|e| Error::Format(format!("invalid geometry in header: {e}")))?;
    let expected = n_s
        .checked_mul(n_r)
        .and_then(|x| x.checked_mul(n_t))
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let samples = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    SeismicVolume::new(geometry, samples).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_volume_file(path: &Path, v: &SeismicVolume) -> Result<()> {
    write_volume(std::io::BufWriter::new(std::fs::File::create(path)?), v)
}

pub fn read_volume_file(path: &Path) -> Result<SeismicVolume> {
    parse_volume(&std::fs::read(path)?)
}

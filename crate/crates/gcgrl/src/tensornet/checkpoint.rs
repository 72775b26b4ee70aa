//! Versioned binary checkpoint format.
//!
//! Layout (all integers little-endian):
//!   magic "GCGRLCKP" | version u32 | arch-json (u32 len + bytes)
//!   | extra-json (u32 len + bytes) | blob count u32
//!   | per blob: name (u32 len + bytes), rows u64, cols u64, f32 payload
//!
//! Round-trips bit-exactly: payloads are the raw IEEE-754 words.

use std::io::{Read, Write};
use std::path::Path;

use super::params::ArchConfig;
use super::Tensor;
use crate::error::Error;
use crate::Result;

const MAGIC: &[u8; 8] = b"GCGRLCKP";
const VERSION: u32 = 1;

pub struct CheckpointFile {
    pub arch: ArchConfig,
    pub extra_json: String,
    pub blobs: Vec<(String, Tensor<f32>)>,
}

pub fn write_checkpoint(
    path: &Path,
    arch: &ArchConfig,
    extra_json: &str,
    blobs: impl Iterator<Item = (String, Tensor<f32>)>,
    blob_count: usize,
) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = std::io::BufWriter::new(file);
        let werr = |e: std::io::Error| Error::io(path, e);
        w.write_all(MAGIC).map_err(werr)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(werr)?;
        let arch_json = serde_json::to_string(arch)
            .map_err(|e| Error::Format(format!("arch serialization: {e}")))?;
        write_str(&mut w, &arch_json).map_err(werr)?;
        write_str(&mut w, extra_json).map_err(werr)?;
        w.write_all(&(blob_count as u32).to_le_bytes()).map_err(werr)?;
        let mut written = 0usize;
        for (name, t) in blobs {
            write_str(&mut w, &name).map_err(werr)?;
            w.write_all(&(t.rows() as u64).to_le_bytes()).map_err(werr)?;
            w.write_all(&(t.cols() as u64).to_le_bytes()).map_err(werr)?;
            for v in t.iter() {
                w.write_all(&v.to_le_bytes()).map_err(werr)?;
            }
            written += 1;
        }
        if written != blob_count {
            return Err(Error::Format(format!(
                "checkpoint writer: expected {blob_count} blobs, got {written}"
            )));
        }
        w.flush().map_err(werr)?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<CheckpointFile> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = std::io::BufReader::new(file);
    let rerr = |e: std::io::Error| Error::io(path, e);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(rerr)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "{} is not a checkpoint file (bad magic)",
            path.display()
        )));
    }
    let version = read_u32(&mut r).map_err(rerr)?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let arch_json = read_str(&mut r).map_err(rerr)?;
    let arch: ArchConfig = serde_json::from_str(&arch_json)
        .map_err(|e| Error::Format(format!("bad architecture header: {e}")))?;
    let extra_json = read_str(&mut r).map_err(rerr)?;
    let count = read_u32(&mut r).map_err(rerr)? as usize;
    let mut blobs = Vec::with_capacity(count);
    for _ in 0..count {
        let name = read_str(&mut r).map_err(rerr)?;
        let rows = read_u64(&mut r).map_err(rerr)? as usize;
        let cols = read_u64(&mut r).map_err(rerr)? as usize;
        let mut buf = vec![0u8; rows * cols * 4];
        r.read_exact(&mut buf).map_err(rerr)?;
        let data: Vec<f32> = buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        blobs.push((name, Tensor::from_vec(rows, cols, data)));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(rerr)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint payload".into()));
    }
    Ok(CheckpointFile {
        arch,
        extra_json,
        blobs,
    })
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> std::io::Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

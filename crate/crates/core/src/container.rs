//! The array container used by every persistence path in the workspace.
//!
//! A record is laid out as:
//!
//! ```text
//! magic   4 bytes     "BFL1"
//! rank    u32 LE
//! dims    rank × u32 LE
//! dtype   u32 LE      0 = f32
//! data    prod(dims) × f32 LE, row-major
//! ```
//!
//! A file holds one record or a back-to-back sequence of records (used for
//! model parameter stores, in architecture order).

use crate::error::{CoreError, Result};
use ndarray::{ArrayD, IxDyn};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"BFL1";
pub const DTYPE_F32: u32 = 0;
const MAX_RANK: u32 = 8;

fn format_err(path: &Path, detail: impl Into<String>) -> CoreError {
    CoreError::Format {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

fn write_record<W: Write>(w: &mut W, arr: &ArrayD<f32>) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(arr.ndim() as u32).to_le_bytes())?;
    for &d in arr.shape() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&DTYPE_F32.to_le_bytes())?;
    // Row-major element order regardless of the source layout.
    for &v in arr.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R, path: &Path, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| format_err(path, format!("truncated while reading {what}")))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_record<R: Read>(r: &mut R, path: &Path) -> Result<ArrayD<f32>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| format_err(path, "truncated magic"))?;
    if &magic != MAGIC {
        return Err(format_err(path, "bad magic bytes (expected BFL1)"));
    }
    let rank = read_u32(r, path, "rank")?;
    if rank > MAX_RANK {
        return Err(format_err(path, format!("rank {rank} exceeds maximum {MAX_RANK}")));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    for i in 0..rank {
        let d = read_u32(r, path, &format!("dim {i}"))?;
        dims.push(d as usize);
    }
    let dtype = read_u32(r, path, "dtype")?;
    if dtype != DTYPE_F32 {
        return Err(format_err(path, format!("unsupported dtype code {dtype}")));
    }
    let len: usize = dims.iter().product();
    let mut bytes = vec![0u8; len * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| format_err(path, "truncated data payload"))?;
    let mut data = Vec::with_capacity(len);
    for chunk in bytes.chunks_exact(4) {
        data.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
    }
    ArrayD::from_shape_vec(IxDyn(&dims), data)
        .map_err(|e| format_err(path, format!("shape error: {e}")))
}

/// Writes a single array to `path`.
pub fn write_array(path: &Path, arr: &ArrayD<f32>) -> Result<()> {
    write_arrays(path, std::slice::from_ref(arr))
}

/// Writes a sequence of records to `path`.
pub fn write_arrays(path: &Path, arrs: &[ArrayD<f32>]) -> Result<()> {
    let file = File::create(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    for arr in arrs {
        write_record(&mut w, arr).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    }
    w.flush()
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    Ok(())
}

/// Reads a file expected to hold exactly one record.
pub fn read_array(path: &Path) -> Result<ArrayD<f32>> {
    let arrs = read_arrays(path)?;
    match arrs.len() {
        1 => Ok(arrs.into_iter().next().unwrap()),
        n => Err(format_err(path, format!("expected one record, found {n}"))),
    }
}

/// Reads every record in the file. A partial trailing record is a format
/// error; nothing is returned in that case.
pub fn read_arrays(path: &Path) -> Result<Vec<ArrayD<f32>>> {
    let file = File::open(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let mut out = Vec::new();
    loop {
        let mut probe = [0u8; 1];
        match r.read(&mut probe) {
            Ok(0) => break,
            Ok(_) => {
                let mut rest = [0u8; 3];
                r.read_exact(&mut rest)
                    .map_err(|_| format_err(path, "truncated magic"))?;
                let magic = [probe[0], rest[0], rest[1], rest[2]];
                if &magic != MAGIC {
                    return Err(format_err(path, "bad magic bytes (expected BFL1)"));
                }
                let rank = read_u32(&mut r, path, "rank")?;
                if rank > MAX_RANK {
                    return Err(format_err(
                        path,
                        format!("rank {rank} exceeds maximum {MAX_RANK}"),
                    ));
                }
                let mut dims = Vec::with_capacity(rank as usize);
                for i in 0..rank {
                    dims.push(read_u32(&mut r, path, &format!("dim {i}"))? as usize);
                }
                let dtype = read_u32(&mut r, path, "dtype")?;
                if dtype != DTYPE_F32 {
                    return Err(format_err(path, format!("unsupported dtype code {dtype}")));
                }
                let len: usize = dims.iter().product();
                let mut bytes = vec![0u8; len * 4];
                r.read_exact(&mut bytes)
                    .map_err(|_| format_err(path, "truncated data payload"))?;
                let mut data = Vec::with_capacity(len);
                for chunk in bytes.chunks_exact(4) {
                    data.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
                }
                let arr = ArrayD::from_shape_vec(IxDyn(&dims), data)
                    .map_err(|e| format_err(path, format!("shape error: {e}")))?;
                out.push(arr);
            }
            Err(e) => return Err(CoreError::io(path.display().to_string(), e)),
        }
    }
    Ok(out)
}

/// Reads a single record from an open reader (used by streaming callers).
pub fn read_record_from<R: Read>(r: &mut R, path: &Path) -> Result<ArrayD<f32>> {
    read_record(r, path)
}

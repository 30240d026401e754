//! Segment cache, little-endian:
//!
//! ```text
//! magic "BQSEGS\0\0" | u32 version (1) | u64 count | u32 channels | u32 width
//! per segment: u64 id | u32 user | u32 label | u8 normalized | f64 x channels*width
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{EegError, Result};
use crate::pipeline::EegSegment;

const MAGIC: &[u8; 8] = b"BQSEGS\0\0";
const VERSION: u32 = 1;

pub fn write_cache<W: Write>(mut w: W, segments: &[EegSegment]) -> Result<()> {
    let (c, width) = segments.first().map_or((0, 0), |s| (s.channels, s.width));
    if segments.iter().any(|s| s.channels != c || s.width != width) {
        return Err(EegError::Cache("segments differ in shape".into()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(segments.len() as u64).to_le_bytes())?;
    w.write_all(&(c as u32).to_le_bytes())?;
    w.write_all(&(width as u32).to_le_bytes())?;
    for s in segments {
        w.write_all(&(s.id as u64).to_le_bytes())?;
        w.write_all(&(s.user as u32).to_le_bytes())?;
        w.write_all(&(s.label as u32).to_le_bytes())?;
        w.write_all(&[u8::from(s.normalized)])?;
        for x in &s.window {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_n<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| EegError::Cache(format!("truncated: {e}")))?;
    Ok(b)
}

pub fn read_cache<R: Read>(mut r: R) -> Result<Vec<EegSegment>> {
    if &read_n::<8, _>(&mut r)? != MAGIC {
        return Err(EegError::Cache("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_n(&mut r)?);
    if version != VERSION {
        return Err(EegError::Cache(format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(read_n(&mut r)?) as usize;
    let channels = u32::from_le_bytes(read_n(&mut r)?) as usize;
    let width = u32::from_le_bytes(read_n(&mut r)?) as usize;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let id = u64::from_le_bytes(read_n(&mut r)?) as usize;
        let user = u32::from_le_bytes(read_n(&mut r)?) as usize;
        let label = u32::from_le_bytes(read_n(&mut r)?) as usize;
        let normalized = match read_n::<1, _>(&mut r)?[0] {
            0 => false,
            1 => true,
            b => return Err(EegError::Cache(format!("bad normalized flag {b}"))),
        };
        let window = (0..channels * width)
            .map(|_| read_n::<8, _>(&mut r).map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        out.push(EegSegment {
            id,
            user,
            label,
            channels,
            width,
            window,
            normalized,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(EegError::Cache("trailing bytes".into()));
    }
    Ok(out)
}

pub fn save_cache(path: &Path, segments: &[EegSegment]) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_cache(f, segments)
}

pub fn load_cache(path: &Path) -> Result<Vec<EegSegment>> {
    read_cache(std::io::BufReader::new(std::fs::File::open(path)?))
}

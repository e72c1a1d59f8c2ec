//! Versioned binary persistence for the correlator cache.
//!
//! Layout: header { magic, format_version, dim, mass decimal string,
//! dispersion tag, digits }, then records { kind byte, displacement ints,
//! value decimal string }. Decimal strings keep the file independent of the
//! in-memory float format.

use super::{CorrError, CorrResult, CorrelatorKernel, Kind};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"VACNEGC\x01";
const FORMAT_VERSION: u32 = 1;

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_str(r: &mut impl Read) -> std::io::Result<String> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut buf = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

/// Serialize the kernel's cache. The key tuple (dim, mass, dispersion,
/// digits) is embedded in the header and checked on load.
pub fn save_cache(kernel: &CorrelatorKernel, path: &Path) -> CorrResult<()> {
    let tmp = path.with_extension("tmp");
    {
        let f = std::fs::File::create(&tmp)
            .map_err(|e| CorrError::InvalidConfig(format!("cache write: {e}")))?;
        let mut w = BufWriter::new(f);
        let io = |e: std::io::Error| CorrError::InvalidConfig(format!("cache write: {e}"));
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(kernel.config().dim as u32).to_le_bytes()).map_err(io)?;
        write_str(&mut w, &format!("{}", kernel.config().mass)).map_err(io)?;
        write_str(&mut w, kernel.config().dispersion.tag()).map_err(io)?;
        w.write_all(&kernel.ctx().digits().to_le_bytes()).map_err(io)?;

        let cache = kernel.cache.read().unwrap();
        w.write_all(&(cache.len() as u64).to_le_bytes()).map_err(io)?;
        let mut entries: Vec<_> = cache.iter().collect();
        entries.sort_by_key(|((k, a, b), _)| (*k, *a, *b));
        for ((kind, a, b), v) in entries {
            let kb = match kind {
                Kind::PhiPhi => 0u8,
                Kind::PiPi => 1u8,
            };
            w.write_all(&[kb]).map_err(io)?;
            w.write_all(&(*a as u64).to_le_bytes()).map_err(io)?;
            w.write_all(&(*b as u64).to_le_bytes()).map_err(io)?;
            write_str(&mut w, &kernel.ctx().to_decimal(v)).map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    std::fs::rename(&tmp, path)
        .map_err(|e| CorrError::InvalidConfig(format!("cache rename: {e}")))?;
    Ok(())
}

/// Load records into the kernel, verifying the header key.
pub fn load_cache(kernel: &CorrelatorKernel, path: &Path) -> CorrResult<usize> {
    let f = std::fs::File::open(path)
        .map_err(|e| CorrError::InvalidConfig(format!("cache read: {e}")))?;
    let mut r = BufReader::new(f);
    let io = |e: std::io::Error| CorrError::InvalidConfig(format!("cache read: {e}"));

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(CorrError::InvalidConfig("cache file: bad magic".into()));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4).map_err(io)?;
    if u32::from_le_bytes(buf4) != FORMAT_VERSION {
        return Err(CorrError::InvalidConfig("cache file: unsupported version".into()));
    }
    r.read_exact(&mut buf4).map_err(io)?;
    let dim = u32::from_le_bytes(buf4) as usize;
    let mass = read_str(&mut r).map_err(io)?;
    let disp = read_str(&mut r).map_err(io)?;
    r.read_exact(&mut buf4).map_err(io)?;
    let digits = u32::from_le_bytes(buf4);

    let cfg = kernel.config();
    if dim != cfg.dim
        || mass != format!("{}", cfg.mass)
        || disp != cfg.dispersion.tag()
        || digits != kernel.ctx().digits()
    {
        return Err(CorrError::InvalidConfig(format!(
            "cache key mismatch: file (dim={dim}, mass={mass}, dispersion={disp}, digits={digits})"
        )));
    }

    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8).map_err(io)?;
    let count = u64::from_le_bytes(buf8) as usize;
    let mut loaded = 0usize;
    let mut cache = kernel.cache.write().unwrap();
    for _ in 0..count {
        let mut kb = [0u8; 1];
        r.read_exact(&mut kb).map_err(io)?;
        let kind = match kb[0] {
            0 => Kind::PhiPhi,
            1 => Kind::PiPi,
            _ => return Err(CorrError::InvalidConfig("cache file: bad kind byte".into())),
        };
        r.read_exact(&mut buf8).map_err(io)?;
        let a = u64::from_le_bytes(buf8) as usize;
        r.read_exact(&mut buf8).map_err(io)?;
        let b = u64::from_le_bytes(buf8) as usize;
        let s = read_str(&mut r).map_err(io)?;
        let v = kernel.ctx().parse(&s);
        cache.insert((kind, a, b), v);
        loaded += 1;
    }
    Ok(loaded)
}

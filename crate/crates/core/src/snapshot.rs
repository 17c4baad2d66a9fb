//! Binary wavefield snapshots with a plain-text sidecar.
//!
//! Layout (all little-endian): magic `QTRJSNAP`, u32 version, u32 rank
//! (particles), u32 ndim, u64 dims[ndim], f64 box[ndim], f64 origin[ndim],
//! u8 boundary (0 periodic, 1 absorbing) and f64 rim fraction, f64 time,
//! u32 length + UTF-8 units tag, then interleaved (re, im) f64 pairs in
//! row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::field::WaveField;
use crate::grid::{make_grid, Boundary, GridSpec};
use crate::units::UNITS_TAG;

pub const MAGIC: &[u8; 8] = b"QTRJSNAP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: WaveField,
    /// Number of particles sharing the grid axes.
    pub rank: u32,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_snapshot(path: &Path, field: &WaveField, rank: u32, extra: &[(&str, String)]) -> Result<()> {
    let spec = field.grid.spec();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&rank.to_le_bytes())?;
    w.write_all(&(spec.ndim() as u32).to_le_bytes())?;
    for &d in &spec.dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &l in spec.box_lengths.iter().chain(&spec.origin) {
        w.write_all(&l.to_le_bytes())?;
    }
    let (tag, rim) = match spec.boundary {
        Boundary::Periodic => (0u8, 0.0),
        Boundary::Absorbing { rim_fraction } => (1u8, rim_fraction),
    };
    w.write_all(&[tag])?;
    w.write_all(&rim.to_le_bytes())?;
    w.write_all(&field.time.to_le_bytes())?;
    w.write_all(&(UNITS_TAG.len() as u32).to_le_bytes())?;
    w.write_all(UNITS_TAG.as_bytes())?;
    for z in &field.values {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;

    let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
    let mut m = BufWriter::new(File::create(meta_path(path))?);
    writeln!(m, "magic={}", std::str::from_utf8(MAGIC).expect("ascii magic"))?;
    writeln!(m, "version={VERSION}")?;
    writeln!(m, "rank={rank}")?;
    writeln!(m, "ndim={}", spec.ndim())?;
    writeln!(m, "dims={}", spec.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","))?;
    writeln!(m, "box={}", join(&spec.box_lengths))?;
    writeln!(m, "origin={}", join(&spec.origin))?;
    writeln!(m, "boundary={}", if tag == 0 { "periodic".to_string() } else { format!("absorbing:{rim:?}") })?;
    writeln!(m, "time={:?}", field.time)?;
    writeln!(m, "units={UNITS_TAG}")?;
    for (k, v) in extra {
        writeln!(m, "{k}={v}")?;
    }
    m.flush()?;
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| CoreError::Format(format!("truncated header: {e}")))?;
    Ok(b)
}

fn take_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(take::<8>(r)?))
}

fn take_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(take::<4>(r)?))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut r = BufReader::new(File::open(path)?);
    if &take::<8>(&mut r)? != MAGIC {
        return Err(CoreError::Format(format!("{} is not a snapshot", path.display())));
    }
    let version = take_u32(&mut r)?;
    if version != VERSION {
        return Err(CoreError::Format(format!("unsupported version {version}")));
    }
    let rank = take_u32(&mut r)?;
    let ndim = take_u32(&mut r)? as usize;
    if ndim == 0 || ndim > 8 {
        return Err(CoreError::Format(format!("ndim {ndim}")));
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(u64::from_le_bytes(take::<8>(&mut r)?) as usize);
    }
    let box_lengths = (0..ndim).map(|_| take_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let origin = (0..ndim).map(|_| take_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let tag = take::<1>(&mut r)?[0];
    let rim = take_f64(&mut r)?;
    let boundary = match tag {
        0 => Boundary::Periodic,
        1 => Boundary::Absorbing { rim_fraction: rim },
        t => return Err(CoreError::Format(format!("boundary tag {t}"))),
    };
    let time = take_f64(&mut r)?;
    let units_len = take_u32(&mut r)? as usize;
    if units_len > 64 {
        return Err(CoreError::Format("units tag too long".into()));
    }
    let mut units = vec![0u8; units_len];
    r.read_exact(&mut units)?;
    if units != UNITS_TAG.as_bytes() {
        return Err(CoreError::Format(format!("units {:?}", String::from_utf8_lossy(&units))));
    }
    let grid = Arc::new(make_grid(GridSpec::new(dims, box_lengths, origin, boundary))?);
    let mut values = Vec::with_capacity(grid.len());
    let mut buf = [0u8; 16];
    for _ in 0..grid.len() {
        r.read_exact(&mut buf).map_err(|e| CoreError::Format(format!("truncated data: {e}")))?;
        let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
        values.push(Complex64::new(re, im));
    }
    if r.read(&mut buf)? != 0 {
        return Err(CoreError::Format("trailing bytes after data".into()));
    }
    Ok(Snapshot { field: WaveField::new(grid, values, time)?, rank })
}

/// Plain-text table: coordinates, Re ψ, Im ψ, |ψ|² per node.
pub fn write_table(field: &WaveField, out: &mut impl Write) -> Result<()> {
    let g = &field.grid;
    let n = g.ndim();
    let head: Vec<String> = (0..n).map(|a| format!("q{a}")).chain(["re", "im", "density"].map(String::from)).collect();
    writeln!(out, "# time={:?} units={UNITS_TAG}", field.time)?;
    writeln!(out, "{}", head.join("\t"))?;
    let mut idx = vec![0; n];
    for (flat, z) in field.values.iter().enumerate() {
        g.unravel(flat, &mut idx);
        for a in 0..n {
            write!(out, "{:.10e}\t", g.coords(a)[idx[a]])?;
        }
        writeln!(out, "{:.10e}\t{:.10e}\t{:.10e}", z.re, z.im, z.norm_sqr())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::init_gaussian;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = Arc::new(make_grid(GridSpec::centered(vec![16, 12], vec![8.0, 6.0], &[1.0, -2.0], Boundary::absorbing())).unwrap());
        let mut f = init_gaussian(g, &[1.0, -2.0], &[0.3, -0.2], 1.6).unwrap();
        f.time = 3.25;
        let path = dir.path().join("a.snap");
        write_snapshot(&path, &f, 1, &[("scenario", "abc".into())]).unwrap();
        let s = read_snapshot(&path).unwrap();
        assert_eq!(s.rank, 1);
        assert_eq!(s.field, f);
        let meta = std::fs::read_to_string(meta_path(&path)).unwrap();
        assert!(meta.contains("dims=16,12\n") && meta.contains("time=3.25\n") && meta.contains("scenario=abc\n"));
        let mut text = Vec::new();
        write_table(&f, &mut text).unwrap();
        assert_eq!(String::from_utf8(text).unwrap().lines().count(), 2 + 16 * 12);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.snap");
        std::fs::write(&path, b"NOTASNAPSHOT").unwrap();
        assert!(matches!(read_snapshot(&path), Err(CoreError::Format(_))));
    }
}

//! Binary field files.
//!
//! Layout, all little-endian:
//!
//! | bytes | content                                    |
//! |-------|--------------------------------------------|
//! | 4     | magic `HDBL`                               |
//! | 4     | version (`u32`, currently 1)               |
//! | 4     | kind (`u32`: 0 form, 1 metric)             |
//! | 4 × 2 | `n`, `N` (`u32`)                           |
//! | 8     | `L` (`f64`)                                |
//! | 4 × 3 | rank, bidegree `p`, `q` (`u32`)            |
//!
//! Forms follow with `(re, im)` `f64` pairs ordered by monomial, frame
//! component, then grid point (row-major). Metrics store the `r×r` matrix
//! at each point row-major, then one mask byte per point.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exterior::{Bidegree, EForm, Valued};
use crate::grid::GridSpec;
use crate::hermitian::MetricField;

const MAGIC: &[u8; 4] = b"HDBL";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Header {
    kind: u32,
    n: u32,
    samples: u32,
    side: f64,
    rank: u32,
    p: u32,
    q: u32,
}

fn write_header<W: Write>(w: &mut W, h: &Header) -> Result<()> {
    w.write_all(MAGIC)?;
    for v in [VERSION, h.kind, h.n, h.samples] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&h.side.to_le_bytes())?;
    for v in [h.rank, h.p, h.q] {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_header<R: Read>(r: &mut R) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::FieldFile(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::FieldFile(format!("unsupported version {version}")));
    }
    let (kind, n, samples) = (read_u32(r)?, read_u32(r)?, read_u32(r)?);
    let side = read_f64(r)?;
    let (rank, p, q) = (read_u32(r)?, read_u32(r)?, read_u32(r)?);
    Ok(Header { kind, n, samples, side, rank, p, q })
}

fn write_values<W: Write>(w: &mut W, values: &[Complex64]) -> Result<()> {
    for v in values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_values<R: Read>(r: &mut R, count: usize) -> Result<Vec<Complex64>> {
    let mut buf = vec![0u8; count * 16];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect())
}

fn expect_end<R: Read>(r: &mut R) -> Result<()> {
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::FieldFile("trailing bytes after field data".into()));
    }
    Ok(())
}

fn grid_of(h: &Header) -> Result<GridSpec> {
    GridSpec::new(h.n as usize, h.samples as usize, h.side).map_err(|e| Error::FieldFile(e.to_string()))
}

/// Writes a bundle-valued form.
pub fn write_form<W: Write>(mut w: W, form: &EForm) -> Result<()> {
    if form.valued() != Valued::Bundle {
        return Err(Error::Unsupported("field files hold bundle-valued forms".into()));
    }
    let g = form.grid();
    let b = form.bidegree();
    let header = Header {
        kind: 0,
        n: g.dim() as u32,
        samples: g.samples() as u32,
        side: g.side(),
        rank: form.rank() as u32,
        p: b.p as u32,
        q: b.q as u32,
    };
    write_header(&mut w, &header)?;
    for m in 0..form.monomials().len() {
        for c in 0..form.rank() {
            write_values(&mut w, form.component(m, c))?;
        }
    }
    Ok(())
}

pub fn read_form<R: Read>(mut r: R) -> Result<EForm> {
    let h = read_header(&mut r)?;
    if h.kind != 0 {
        return Err(Error::FieldFile(format!("expected a form, found kind {}", h.kind)));
    }
    let grid = grid_of(&h)?;
    let mut form = EForm::bundle(grid, Bidegree::new(h.p as usize, h.q as usize), h.rank as usize)
        .map_err(|e| Error::FieldFile(e.to_string()))?;
    for m in 0..form.monomials().len() {
        for c in 0..form.rank() {
            *form.component_mut(m, c) = read_values(&mut r, grid.num_points())?;
        }
    }
    expect_end(&mut r)?;
    Ok(form)
}

/// Writes a metric field with its mask.
pub fn write_metric<W: Write>(mut w: W, h: &MetricField) -> Result<()> {
    let g = h.grid();
    let header = Header { kind: 1, n: g.dim() as u32, samples: g.samples() as u32, side: g.side(), rank: h.rank() as u32, p: 0, q: 0 };
    write_header(&mut w, &header)?;
    write_values(&mut w, h.data())?;
    let mask: Vec<u8> = (0..g.num_points()).map(|pt| u8::from(h.is_masked(pt))).collect();
    w.write_all(&mask)?;
    Ok(())
}

pub fn read_metric<R: Read>(mut r: R) -> Result<MetricField> {
    let h = read_header(&mut r)?;
    if h.kind != 1 {
        return Err(Error::FieldFile(format!("expected a metric, found kind {}", h.kind)));
    }
    let grid = grid_of(&h)?;
    let rank = h.rank as usize;
    let data = read_values(&mut r, grid.num_points() * rank * rank)?;
    let mut mask = vec![0u8; grid.num_points()];
    r.read_exact(&mut mask)?;
    expect_end(&mut r)?;
    MetricField::new(grid, rank, data, Some(mask.iter().map(|&b| b != 0).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn form_round_trip_is_bit_exact() {
        let g = GridSpec::new(2, 4, 1.7).unwrap();
        let mut rng = crate::random::rng(1);
        let f = crate::random::form(&mut rng, g, Bidegree::new(2, 1), 2).unwrap();
        let mut buf = Vec::new();
        write_form(&mut buf, &f).unwrap();
        assert_eq!(&buf[..4], b"HDBL");
        assert_eq!(buf.len(), 4 + 16 + 8 + 12 + 2 * 2 * g.num_points() * 16);
        let back = read_form(buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn metric_round_trip_keeps_mask() {
        let g = GridSpec::new(1, 8, 6.0).unwrap();
        let sm = crate::singular::singular_catalog("two-pole", &g, &Default::default());
        let h = sm.map(|s| s.metric).unwrap_or_else(|_| MetricField::identity(g, 2));
        let mut buf = Vec::new();
        write_metric(&mut buf, &h).unwrap();
        let back = read_metric(buf.as_slice()).unwrap();
        assert_eq!(back.data(), h.data());
        assert_eq!(back.masked_points(), h.masked_points());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let g = GridSpec::new(1, 4, 1.0).unwrap();
        let f = EForm::bundle(g, Bidegree::new(1, 0), 1).unwrap();
        let mut buf = Vec::new();
        write_form(&mut buf, &f).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_form(bad.as_slice()).is_err());
        assert!(read_form(&buf[..buf.len() - 1]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_form(long.as_slice()).is_err());
        assert!(read_metric(buf.as_slice()).is_err());
    }
}

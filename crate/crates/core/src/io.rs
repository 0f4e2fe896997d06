//! Binary matrix dumps and CSV trajectories.
//!
//! Matrix files start with a 64-byte little-endian header:
//! magic `BSHT`, u16 version, u16 flags, u32 rows, u32 cols, f64 dy, ds, y_min, s_max,
//! u64 seed, u64 stream; row-major f64 values follow.

use crate::error::{Error, Result};
use crate::gaussfield::{SheetGeometry, SheetSample};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"BSHT";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 64;
/// Header flag: the payload is a sheet of increments.
pub const FLAG_SHEET: u16 = 0;
/// Header flag: the payload is a field state, rows (u, v); dy holds dt, ds holds z, s_max holds t_max.
pub const FLAG_FIELD_STATE: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixHeader {
    pub version: u16,
    pub flags: u16,
    pub rows: u32,
    pub cols: u32,
    pub dy: f64,
    pub ds: f64,
    pub y_min: f64,
    pub s_max: f64,
    pub seed: u64,
    pub stream: u64,
}

impl MatrixHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6..8].copy_from_slice(&self.flags.to_le_bytes());
        b[8..12].copy_from_slice(&self.rows.to_le_bytes());
        b[12..16].copy_from_slice(&self.cols.to_le_bytes());
        for (i, v) in [self.dy, self.ds, self.y_min, self.s_max].iter().enumerate() {
            b[16 + 8 * i..24 + 8 * i].copy_from_slice(&v.to_le_bytes());
        }
        b[48..56].copy_from_slice(&self.seed.to_le_bytes());
        b[56..64].copy_from_slice(&self.stream.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8; HEADER_LEN]) -> Result<Self> {
        if b[0..4] != MAGIC {
            return Err(Error::domain("not a matrix dump: bad magic"));
        }
        let u16_at = |i: usize| u16::from_le_bytes([b[i], b[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().expect("4 bytes"));
        let u64_at = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().expect("8 bytes"));
        let version = u16_at(4);
        if version != FORMAT_VERSION {
            return Err(Error::domain(format!("unsupported matrix dump version {version}")));
        }
        Ok(Self {
            version,
            flags: u16_at(6),
            rows: u32_at(8),
            cols: u32_at(12),
            dy: f64::from_bits(u64_at(16)),
            ds: f64::from_bits(u64_at(24)),
            y_min: f64::from_bits(u64_at(32)),
            s_max: f64::from_bits(u64_at(40)),
            seed: u64_at(48),
            stream: u64_at(56),
        })
    }
}

pub fn write_matrix(path: &Path, header: &MatrixHeader, data: &[f64]) -> Result<()> {
    if data.len() != header.rows as usize * header.cols as usize {
        return Err(Error::domain(format!("{} values do not fill a {}x{} matrix", data.len(), header.rows, header.cols)));
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&header.to_bytes())?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<(MatrixHeader, Vec<f64>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::domain("matrix dump shorter than its header"));
    }
    let header = MatrixHeader::from_bytes(bytes[..HEADER_LEN].try_into().expect("header slice"))?;
    let body = &bytes[HEADER_LEN..];
    let expected = header.rows as usize * header.cols as usize * 8;
    if body.len() != expected {
        return Err(Error::domain(format!("matrix dump body has {} bytes, header implies {expected}", body.len())));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((header, data))
}

/// Sheet increments, one row per y-cell.
pub fn dump_sheet(path: &Path, sheet: &SheetSample) -> Result<()> {
    let g = sheet.geometry();
    let header = MatrixHeader {
        version: FORMAT_VERSION,
        flags: FLAG_SHEET,
        rows: g.ny as u32,
        cols: g.ns as u32,
        dy: g.dy,
        ds: g.ds,
        y_min: g.y_min,
        s_max: g.s_max(),
        seed: sheet.seed(),
        stream: sheet.stream(),
    };
    write_matrix(path, &header, sheet.data())
}

pub fn load_sheet(path: &Path) -> Result<SheetSample> {
    let (h, data) = read_matrix(path)?;
    if h.flags != FLAG_SHEET {
        return Err(Error::domain("matrix dump does not hold a sheet"));
    }
    let geom = SheetGeometry { y_min: h.y_min, dy: h.dy, ny: h.rows as usize, ds: h.ds, ns: h.cols as usize };
    SheetSample::from_data(geom, data, h.seed, h.stream)
}

/// Header row then one comma-separated row per record, '.' decimals, full round-trip precision.
pub fn write_csv(path: &Path, columns: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", columns.join(","))?;
    for row in rows {
        if row.len() != columns.len() {
            return Err(Error::domain(format!("CSV row has {} fields, header has {}", row.len(), columns.len())));
        }
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

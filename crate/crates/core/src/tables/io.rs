//! Binary container shared by all precomputed tables.
//!
//! Each section is a 32-byte little-endian header (magic `BHT1`, version,
//! table id, width, height, depth, ε as f64) followed by row-major f32 data.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"BHT1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

/// Upper bound on payload floats, so a corrupt header cannot trigger a huge allocation.
const MAX_FLOATS: u64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum TableId {
    Deflection = 1,
    InverseRadius = 2,
    Color = 3,
}

impl TableId {
    fn from_u32(v: u32) -> Result<TableId> {
        match v {
            1 => Ok(TableId::Deflection),
            2 => Ok(TableId::InverseRadius),
            3 => Ok(TableId::Color),
            _ => Err(Error::Format(format!("unknown table id {v}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionHeader {
    pub id: TableId,
    pub width: u32,
    pub height: u32,
    pub depth: u32,
    pub epsilon: f64,
}

impl SectionHeader {
    pub fn texels(&self) -> u64 {
        self.width as u64 * self.height as u64 * self.depth as u64
    }
}

pub fn write_section<W: Write>(w: &mut W, h: &SectionHeader, payload: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + payload.len() * 4);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(h.id as u32).to_le_bytes());
    buf.extend_from_slice(&h.width.to_le_bytes());
    buf.extend_from_slice(&h.height.to_le_bytes());
    buf.extend_from_slice(&h.depth.to_le_bytes());
    buf.extend_from_slice(&h.epsilon.to_le_bytes());
    for v in payload {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_exact_or_format<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

pub fn read_header<R: Read>(r: &mut R) -> Result<SectionHeader> {
    let mut b = [0u8; HEADER_LEN];
    read_exact_or_format(r, &mut b, "header")?;
    if b[0..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let h = SectionHeader {
        id: TableId::from_u32(word(8))?,
        width: word(12),
        height: word(16),
        depth: word(20),
        epsilon: f64::from_le_bytes(b[24..32].try_into().unwrap()),
    };
    if h.width == 0 || h.height == 0 || h.depth == 0 {
        return Err(Error::Format("zero table dimension".into()));
    }
    Ok(h)
}

/// Reads `channels` floats per texel following a header already read.
pub fn read_payload<R: Read>(r: &mut R, h: &SectionHeader, channels: usize) -> Result<Vec<f32>> {
    read_floats(r, h.texels() * channels as u64)
}

pub fn read_floats<R: Read>(r: &mut R, n: u64) -> Result<Vec<f32>> {
    if n > MAX_FLOATS {
        return Err(Error::Format(format!("table of {n} floats is too large")));
    }
    let mut bytes = vec![0u8; n as usize * 4];
    read_exact_or_format(r, &mut bytes, "payload")?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn expect_id(h: &SectionHeader, id: TableId) -> Result<()> {
    if h.id != id {
        return Err(Error::Format(format!("expected table {id:?}, found {:?}", h.id)));
    }
    Ok(())
}

pub fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after last table".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let h = SectionHeader {
            id: TableId::InverseRadius,
            width: 3,
            height: 2,
            depth: 1,
            epsilon: 1e-5,
        };
        let payload: Vec<f32> = (0..12).map(|k| k as f32 * 0.5).collect();
        let mut buf = Vec::new();
        write_section(&mut buf, &h, &payload).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 48);
        let mut r = buf.as_slice();
        let h2 = read_header(&mut r).unwrap();
        assert_eq!(h2, h);
        assert_eq!(read_payload(&mut r, &h2, 2).unwrap(), payload);
        expect_eof(&mut r).unwrap();
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let h = SectionHeader {
            id: TableId::Deflection,
            width: 1,
            height: 1,
            depth: 1,
            epsilon: 0.0,
        };
        let mut buf = Vec::new();
        write_section(&mut buf, &h, &[0.0, 0.0]).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_header(&mut bad.as_slice()), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(read_header(&mut bad.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_header(&mut &buf[..10]), Err(Error::Format(_))));
    }
}

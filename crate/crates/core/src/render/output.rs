//! Image output: tone-mapped 8-bit PNG and a little-endian PFM sidecar of the linear XYZ
//! frame buffer.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::FrameBuffer;
use crate::error::{Error, Result};
use crate::shading::{tone_map, HdrImage};

/// Path of the HDR sidecar written next to `png`.
pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("pfm")
}

/// Writes the tone-mapped frame to `path` as PNG and, when `hdr` is set, the linear
/// frame next to it as PFM.
pub fn write_image(fb: &FrameBuffer, exposure: f64, path: impl AsRef<Path>, hdr: bool) -> Result<()> {
    let path = path.as_ref();
    tone_map(fb, exposure).save_with_format(path, image::ImageFormat::Png)?;
    if hdr {
        write_pfm(fb, sidecar_path(path))?;
    }
    Ok(())
}

/// Three-channel PFM with rows stored bottom to top.
pub fn write_pfm(fb: &FrameBuffer, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "PF\n{} {}\n-1.0\n", fb.width, fb.height)?;
    for j in (0..fb.height).rev() {
        for i in 0..fb.width {
            for v in fb.get(i, j) {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<FrameBuffer> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = Vec::new();
    let mut line = String::new();
    while header.len() < 3 {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Format("truncated PFM header".into()));
        }
        header.push(line.trim().to_string());
    }
    if header[0] != "PF" {
        return Err(Error::Format(format!("not a colour PFM: {:?}", header[0])));
    }
    let dims: Vec<usize> = header[1]
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Format(format!("bad PFM size {:?}", header[1]))))
        .collect::<Result<_>>()?;
    let [width, height] = dims[..] else {
        return Err(Error::Format(format!("bad PFM size {:?}", header[1])));
    };
    let scale: f64 = header[2].parse().map_err(|_| Error::Format(format!("bad PFM scale {:?}", header[2])))?;
    let little = scale < 0.0;
    let mut img = HdrImage::new(width, height);
    let mut buf = [0u8; 4];
    for j in (0..height).rev() {
        for i in 0..width {
            let mut px = [0.0; 3];
            for v in &mut px {
                r.read_exact(&mut buf)?;
                *v = if little { f32::from_le_bytes(buf) } else { f32::from_be_bytes(buf) } as f64;
            }
            *img.get_mut(i, j) = px;
        }
    }
    if r.read(&mut buf)? != 0 {
        return Err(Error::Format("trailing bytes after PFM data".into()));
    }
    Ok(img)
}

//! Binary PPM (P6) mouth images and PGM (P5) spectrogram output.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{MouthImage, IMG_C, IMG_H, IMG_LEN, IMG_W};
use crate::error::{Error, Result};

/// Writes a raw mouth image as a 24x16 maxval-255 P6 file.
pub fn write_ppm(path: impl AsRef<Path>, img: &MouthImage) -> Result<()> {
    let path = path.as_ref();
    if img.normalized {
        return Err(Error::invalid("write_ppm", "refusing to write normalized pixels"));
    }
    let mut out = Vec::with_capacity(IMG_LEN + 16);
    out.extend_from_slice(format!("P6\n{} {}\n255\n", IMG_W, IMG_H).as_bytes());
    for &p in img.pixels() {
        out.push((p as f64 * 255.0).round().clamp(0.0, 255.0) as u8);
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Reads tokens of a PNM header, skipping whitespace and `#` comments.
fn header_tokens(bytes: &[u8], n: usize) -> Option<(Vec<usize>, usize)> {
    let mut tokens = Vec::new();
    let mut pos = 0;
    // The magic is two bytes, grab it separately.
    pos += 2;
    while tokens.len() < n {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return None;
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).ok()?.parse().ok()?);
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    Some((tokens, pos))
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<MouthImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 2 || &bytes[0..2] != b"P6" {
        return Err(Error::format(path, "not a binary PPM (P6) file"));
    }
    let (dims, raster) =
        header_tokens(&bytes, 3).ok_or_else(|| Error::format(path, "malformed PPM header"))?;
    let (w, h, maxval) = (dims[0], dims[1], dims[2]);
    if w != IMG_W || h != IMG_H {
        return Err(Error::format(path, format!("want {}x{}, got {}x{}", IMG_W, IMG_H, w, h)));
    }
    if maxval != 255 {
        return Err(Error::format(path, format!("want maxval 255, got {}", maxval)));
    }
    let need = IMG_H * IMG_W * IMG_C;
    if bytes.len() < raster + need {
        return Err(Error::format(path, "truncated pixel data"));
    }
    let pixels = bytes[raster..raster + need].iter().map(|&b| b as f32 / 255.0).collect();
    MouthImage::from_raw(pixels)
}

/// Writes an 8-bit grayscale P5 image, row-major top to bottom.
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, gray: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if gray.len() != width * height {
        return Err(Error::shape(
            "write_pgm",
            format!("{}x{} wants {} bytes, got {}", width, height, width * height, gray.len()),
        ));
    }
    let mut out = Vec::with_capacity(gray.len() + 16);
    out.extend_from_slice(format!("P5\n{} {}\n255\n", width, height).as_bytes());
    out.extend_from_slice(gray);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

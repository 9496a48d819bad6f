//! Minimal RIFF/WAVE reader and writer: 16-bit PCM, mono.
//!
//! The reader accepts 16 kHz directly and 48 kHz by decimating with the
//! polyphase resampler; anything else is rejected.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{resample_rational, Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};

fn u16le(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([b[off], b[off + 1]])
}

fn u32le(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::format(path, "not a RIFF/WAVE file"));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32le(&bytes, pos + 4) as usize;
        let body_end = pos + 8 + size;
        if body_end > bytes.len() {
            return Err(Error::format(path, format!("chunk {:?} overruns file", id)));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::format(path, "fmt chunk too small"));
                }
                fmt = Some((
                    u16le(&bytes, pos + 8),
                    u16le(&bytes, pos + 10),
                    u32le(&bytes, pos + 12),
                    u16le(&bytes, pos + 22),
                ));
            }
            b"data" => data = Some(&bytes[pos + 8..body_end]),
            _ => {}
        }
        // Chunks are word aligned.
        pos = body_end + (size & 1);
    }
    let (format, channels, rate, bits) =
        fmt.ok_or_else(|| Error::format(path, "missing fmt chunk"))?;
    let data = data.ok_or_else(|| Error::format(path, "missing data chunk"))?;
    if format != 1 || bits != 16 {
        return Err(Error::format(
            path,
            format!("want 16-bit PCM, got format {} with {} bits", format, bits),
        ));
    }
    if channels != 1 {
        return Err(Error::format(path, format!("want mono, got {} channels", channels)));
    }
    let samples: Vec<f32> = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
        .collect();
    match rate {
        SAMPLE_RATE => Ok(Waveform::new(samples, SAMPLE_RATE)),
        48_000 => {
            let wide: Vec<f64> = samples.iter().map(|&s| s as f64).collect();
            let down = resample_rational(&wide, 1, 3);
            Ok(Waveform::new(down.iter().map(|&s| s as f32).collect(), SAMPLE_RATE))
        }
        other => Err(Error::format(path, format!("unsupported sample rate {} Hz", other))),
    }
}

pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let path = path.as_ref();
    let n = w.samples.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&w.sample_rate.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &w.samples {
        // Same 1/32768 scale as the reader, clamped to the i16 range.
        let q = (s.clamp(-1.0, 1.0) as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

//! Audio front end: framing, log-power spectra, normalization, mixing.
//!
//! Analysis runs at 16 kHz with 512-sample Hann frames advanced by 320
//! samples (32 ms frames, 37.5% overlap), which lines spectral frames up
//! with 50 fps video. Spectral math is carried out in `f64`; waveforms stay
//! `f32` at the edges.

mod mix;
mod resample;
mod stft;
pub mod wav;

pub use mix::{mix_sir_sar, MixSpec, Mixed};
pub use resample::resample_rational;
pub use stft::{istft, stft, SpectroFrames};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const SAMPLE_RATE: u32 = 16_000;
/// Analysis window length in samples (32 ms at 16 kHz).
pub const WIN: usize = 512;
/// Hop between frames (20 ms, i.e. 50 frames per second).
pub const HOP: usize = 320;
/// One-sided spectrum size for the 512-point transform.
pub const BINS: usize = WIN / 2 + 1;
/// Power floor inside the log, keeping silence finite.
pub const LOGPOW_EPS: f64 = 1e-12;
/// Context frames on each side of the center frame.
pub const CONTEXT: usize = 2;
/// Total frames in one network input block.
pub const CONTEXT_WIDTH: usize = 2 * CONTEXT + 1;

/// Mono waveform with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Waveform { samples, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean squared sample value.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|&s| s as f64 * s as f64).sum::<f64>() / self.samples.len() as f64
    }

    /// Number of analysis frames this waveform yields, if any.
    pub fn n_frames(&self) -> usize {
        if self.samples.len() < WIN {
            0
        } else {
            (self.samples.len() - WIN) / HOP + 1
        }
    }
}

/// Per-frequency-bin normalization statistics of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct UttStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Zero-mean, unit-variance scaling of each frequency bin over the
/// utterance. The standard deviation is floored at 1e-8 so silent bins do
/// not blow up; [`denormalize`] is the exact inverse either way.
pub fn normalize_utterance(logpow: &Tensor<f64>) -> Result<(Tensor<f64>, UttStats)> {
    let [t, f] = two_dims(logpow, "normalize_utterance")?;
    if t == 0 {
        return Err(Error::invalid("normalize_utterance", "no frames"));
    }
    let data = logpow.data();
    let mut mean = vec![0.0; f];
    let mut std = vec![0.0; f];
    for row in data.chunks_exact(f) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= t as f64;
    }
    for row in data.chunks_exact(f) {
        for ((s, &m), &v) in std.iter_mut().zip(&mean).zip(row) {
            let d = v - m;
            *s += d * d;
        }
    }
    for s in &mut std {
        *s = (*s / t as f64).sqrt().max(1e-8);
    }
    let mut out = vec![0.0; data.len()];
    for (orow, row) in out.chunks_exact_mut(f).zip(data.chunks_exact(f)) {
        for (((o, &v), &m), &s) in orow.iter_mut().zip(row).zip(&mean).zip(&std) {
            *o = (v - m) / s;
        }
    }
    Ok((Tensor::from_vec(logpow.dims(), out)?, UttStats { mean, std }))
}

/// Inverse of [`normalize_utterance`] under the given statistics.
pub fn denormalize(normalized: &Tensor<f64>, stats: &UttStats) -> Result<Tensor<f64>> {
    let [_, f] = two_dims(normalized, "denormalize")?;
    if stats.mean.len() != f || stats.std.len() != f {
        return Err(Error::shape(
            "denormalize",
            format!("stats cover {} bins, frames have {}", stats.mean.len(), f),
        ));
    }
    let mut out = normalized.data().to_vec();
    for orow in out.chunks_exact_mut(f) {
        for ((o, &m), &s) in orow.iter_mut().zip(&stats.mean).zip(&stats.std) {
            *o = *o * s + m;
        }
    }
    Tensor::from_vec(normalized.dims(), out)
}

/// Splices frame `t` with its two neighbours on each side into a
/// `bins x 5 x 1` block, replicating edge frames past the ends.
pub fn context_block(frames: &Tensor<f64>, t: usize) -> Result<Tensor<f64>> {
    let [n, f] = two_dims(frames, "context_block")?;
    if t >= n {
        return Err(Error::invalid("context_block", format!("frame {} of {}", t, n)));
    }
    let data = frames.data();
    let mut out = vec![0.0; f * CONTEXT_WIDTH];
    for (j, off) in (-(CONTEXT as isize)..=CONTEXT as isize).enumerate() {
        let src = (t as isize + off).clamp(0, n as isize - 1) as usize;
        let row = &data[src * f..(src + 1) * f];
        for (i, &v) in row.iter().enumerate() {
            out[i * CONTEXT_WIDTH + j] = v;
        }
    }
    Tensor::from_vec(&[f, CONTEXT_WIDTH, 1], out)
}

/// Context blocks for every frame of the utterance.
pub fn context_blocks(frames: &Tensor<f64>) -> Result<Vec<Tensor<f64>>> {
    let [n, _] = two_dims(frames, "context_blocks")?;
    (0..n).map(|t| context_block(frames, t)).collect()
}

fn two_dims(t: &Tensor<f64>, op: &'static str) -> Result<[usize; 2]> {
    match *t.dims() {
        [a, b] => Ok([a, b]),
        ref d => Err(Error::shape(op, format!("want a 2-d tensor, got {:?}", d))),
    }
}

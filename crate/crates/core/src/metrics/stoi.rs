//! Short-time objective intelligibility.
//!
//! The score correlates the temporal envelopes of clean and degraded
//! speech in one-third-octave bands over 384 ms segments. Everything runs
//! at 10 kHz internally; inputs at other rates are resampled first.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::dsp::{resample_rational, Waveform};
use crate::error::{Error, Result};

/// Sample rate the metric is defined at.
pub const STOI_RATE: u32 = 10_000;
/// Analysis frame length and hop in samples at 10 kHz.
pub const STOI_FRAME: usize = 256;
pub const STOI_HOP: usize = 128;
/// Zero-padded DFT length.
pub const STOI_NFFT: usize = 512;
/// Number of one-third-octave bands.
pub const STOI_BANDS: usize = 15;
/// Center frequency of the lowest band in Hz.
pub const STOI_LOWEST_CF: f64 = 150.0;
/// Frames per scored segment (384 ms at the 128-sample hop).
pub const STOI_SEG: usize = 30;
/// A frame quieter than the loudest clean frame by more than this many dB
/// is treated as silence and dropped from both signals.
pub const STOI_DYN_RANGE_DB: f64 = 40.0;
/// Lower signal-to-distortion bound in dB for the clipping step.
pub const STOI_BETA_DB: f64 = -15.0;

/// Symmetric Hann window without zero endpoints, the convention the
/// original metric uses for both silence removal and the transform.
fn hanning(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = 2.0 * std::f64::consts::PI * (i + 1) as f64 / (n + 1) as f64;
            0.5 * (1.0 - x.cos())
        })
        .collect()
}

/// Start offsets of every full analysis frame.
fn frame_starts(len: usize) -> Vec<usize> {
    if len < STOI_FRAME {
        return Vec::new();
    }
    (0..=(len - STOI_FRAME) / STOI_HOP).map(|i| i * STOI_HOP).collect()
}

/// Drops frames of `x` quieter than the loudest frame by more than the
/// dynamic range, applies the same mask to `y`, and rebuilds both by
/// overlap-adding the retained windowed frames.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = hanning(STOI_FRAME);
    let starts = frame_starts(x.len().min(y.len()));
    let energy_db: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let e: f64 = (0..STOI_FRAME).map(|i| (x[s + i] * w[i]).powi(2)).sum();
            if e > 0.0 {
                10.0 * e.log10()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let peak = energy_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energy_db)
        .filter(|&(_, &e)| e > peak - STOI_DYN_RANGE_DB)
        .map(|(&s, _)| s)
        .collect();
    if kept.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let out_len = (kept.len() - 1) * STOI_HOP + STOI_FRAME;
    let mut xs = vec![0.0; out_len];
    let mut ys = vec![0.0; out_len];
    for (j, &s) in kept.iter().enumerate() {
        let o = j * STOI_HOP;
        for i in 0..STOI_FRAME {
            xs[o + i] += x[s + i] * w[i];
            ys[o + i] += y[s + i] * w[i];
        }
    }
    (xs, ys)
}

/// Power spectra of every frame: rows are frames, columns the one-sided
/// bins of the zero-padded transform.
fn power_spectra(x: &[f64]) -> Vec<Vec<f64>> {
    let w = hanning(STOI_FRAME);
    let fft = FftPlanner::new().plan_fft_forward(STOI_NFFT);
    let mut out = Vec::new();
    let mut buf = vec![Complex::new(0.0, 0.0); STOI_NFFT];
    for s in frame_starts(x.len()) {
        for v in buf.iter_mut() {
            *v = Complex::new(0.0, 0.0);
        }
        for i in 0..STOI_FRAME {
            buf[i] = Complex::new(x[s + i] * w[i], 0.0);
        }
        fft.process(&mut buf);
        out.push(buf[..STOI_NFFT / 2 + 1].iter().map(|c| c.norm_sqr()).collect());
    }
    out
}

/// One-third-octave band edges as bin ranges `lo..hi`. Edges at
/// `cf * 2^(+-1/6)` snap to the nearest DFT bin; because each band's upper
/// edge equals the next band's lower edge, the ranges tile the spectrum
/// without gaps.
fn band_ranges() -> Vec<(usize, usize)> {
    let bin_hz = STOI_RATE as f64 / STOI_NFFT as f64;
    let snap = |target: f64| -> usize {
        let mut best = 0usize;
        let mut err = f64::INFINITY;
        for k in 0..=STOI_NFFT / 2 {
            let d = (k as f64 * bin_hz - target).abs();
            if d < err {
                err = d;
                best = k;
            }
        }
        best
    };
    (0..STOI_BANDS)
        .map(|j| {
            let cf = STOI_LOWEST_CF * 2f64.powf(j as f64 / 3.0);
            (snap(cf * 2f64.powf(-1.0 / 6.0)), snap(cf * 2f64.powf(1.0 / 6.0)))
        })
        .collect()
}

/// Correlation coefficient after mean removal. Two flat vectors count as
/// perfectly correlated so an identical pair always scores 1; a flat
/// vector against a modulated one carries no envelope information and
/// scores 0.
fn envelope_corr(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut dot = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    for i in 0..x.len() {
        let a = x[i] - mx;
        let b = y[i] - my;
        dot += a * b;
        nx += a * a;
        ny += b * b;
    }
    if nx == 0.0 && ny == 0.0 {
        1.0
    } else if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        dot / (nx.sqrt() * ny.sqrt())
    }
}

fn to_stoi_rate(w: &Waveform) -> Vec<f64> {
    let samples: Vec<f64> = w.samples.iter().map(|&s| s as f64).collect();
    if w.sample_rate == STOI_RATE {
        return samples;
    }
    let g = gcd(STOI_RATE as usize, w.sample_rate as usize);
    resample_rational(&samples, STOI_RATE as usize / g, w.sample_rate as usize / g)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Intelligibility of `degraded` against the `clean` reference, in
/// [-1, 1] with 1 meaning fully intelligible. Inputs must share a sample
/// rate; lengths are trimmed to the shorter of the two.
pub fn stoi(clean: &Waveform, degraded: &Waveform) -> Result<f64> {
    if clean.sample_rate != degraded.sample_rate {
        return Err(Error::invalid(
            "stoi",
            format!("sample rates differ: {} vs {}", clean.sample_rate, degraded.sample_rate),
        ));
    }
    let n = clean.len().min(degraded.len());
    let x = to_stoi_rate(&Waveform::new(clean.samples[..n].to_vec(), clean.sample_rate));
    let y = to_stoi_rate(&Waveform::new(degraded.samples[..n].to_vec(), degraded.sample_rate));

    let (xs, ys) = remove_silent_frames(&x, &y);
    let px = power_spectra(&xs);
    let py = power_spectra(&ys);
    let frames = px.len();
    if frames < STOI_SEG {
        return Err(Error::too_short(
            "stoi",
            format!("{} frames of retained speech, need at least {}", frames, STOI_SEG),
        ));
    }

    let bands = band_ranges();
    // Band envelope: root of the summed bin powers, per frame.
    let envelope = |spec: &[Vec<f64>], (lo, hi): (usize, usize)| -> Vec<f64> {
        spec.iter().map(|row| row[lo..hi].iter().sum::<f64>().sqrt()).collect()
    };
    let clip = 1.0 + 10f64.powf(-STOI_BETA_DB / 20.0);

    let mut total = 0.0;
    let mut count = 0usize;
    for &range in &bands {
        let ex = envelope(&px, range);
        let ey = envelope(&py, range);
        for m in 0..=frames - STOI_SEG {
            let xs = &ex[m..m + STOI_SEG];
            let ys = &ey[m..m + STOI_SEG];
            let pxs: f64 = xs.iter().map(|v| v * v).sum();
            let pys: f64 = ys.iter().map(|v| v * v).sum();
            let alpha = if pys > 0.0 { (pxs / pys).sqrt() } else { 0.0 };
            let clipped: Vec<f64> =
                xs.iter().zip(ys).map(|(&a, &b)| (alpha * b).min(a * clip)).collect();
            total += envelope_corr(xs, &clipped);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

//! Short-time analysis and weighted overlap-add resynthesis.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{Waveform, BINS, HOP, LOGPOW_EPS, SAMPLE_RATE, WIN};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One-sided log-power spectra and phases, one row per frame.
#[derive(Debug, Clone)]
pub struct SpectroFrames {
    /// `ln(max(|X|^2, 1e-12))`, shape `[frames, 257]`.
    pub logpow: Tensor<f64>,
    /// `atan2(im, re)`, shape `[frames, 257]`.
    pub phase: Tensor<f64>,
}

impl SpectroFrames {
    pub fn n_frames(&self) -> usize {
        self.logpow.dims()[0]
    }

    /// Linear magnitude, `exp(logpow / 2)`.
    pub fn magnitude(&self) -> Tensor<f64> {
        self.logpow.map(|v| (v * 0.5).exp())
    }
}

/// Periodic Hann window, used for both analysis and synthesis.
pub(crate) fn hann() -> Vec<f64> {
    (0..WIN)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / WIN as f64).cos()))
        .collect()
}

/// Log-power short-time spectra of a 16 kHz waveform.
///
/// Frames shorter than one window are rejected; the tail that does not fill
/// a whole frame is dropped.
pub fn stft(w: &Waveform) -> Result<SpectroFrames> {
    if w.sample_rate != SAMPLE_RATE {
        return Err(Error::invalid(
            "stft",
            format!("expected {} Hz input, got {} Hz", SAMPLE_RATE, w.sample_rate),
        ));
    }
    let t = w.n_frames();
    if t == 0 {
        return Err(Error::too_short(
            "stft",
            format!("need at least {} samples, got {}", WIN, w.len()),
        ));
    }
    let win = hann();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(WIN);
    let mut logpow = vec![0.0; t * BINS];
    let mut phase = vec![0.0; t * BINS];
    let mut buf = vec![Complex::new(0.0, 0.0); WIN];
    for frame in 0..t {
        let start = frame * HOP;
        for (n, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(w.samples[start + n] as f64 * win[n], 0.0);
        }
        fft.process(&mut buf);
        for k in 0..BINS {
            let p = buf[k].re * buf[k].re + buf[k].im * buf[k].im;
            logpow[frame * BINS + k] = p.max(LOGPOW_EPS).ln();
            phase[frame * BINS + k] = buf[k].im.atan2(buf[k].re);
        }
    }
    Ok(SpectroFrames {
        logpow: Tensor::from_vec(&[t, BINS], logpow)?,
        phase: Tensor::from_vec(&[t, BINS], phase)?,
    })
}

/// Weighted overlap-add resynthesis from one-sided magnitude and phase.
///
/// The synthesis window equals the analysis window; the overlap-add sum is
/// divided by the summed squared window, which reconstructs the interior
/// exactly even though the 320-sample hop is not constant-overlap-add.
/// Output length is `(frames - 1) * 320 + 512`.
pub fn istft(magnitude: &Tensor<f64>, phase: &Tensor<f64>) -> Result<Waveform> {
    if magnitude.dims() != phase.dims() {
        return Err(Error::shape(
            "istft",
            format!("magnitude {:?} vs phase {:?}", magnitude.dims(), phase.dims()),
        ));
    }
    let (t, bins) = match *magnitude.dims() {
        [t, b] => (t, b),
        ref d => return Err(Error::shape("istft", format!("want [frames, bins], got {:?}", d))),
    };
    if bins != BINS {
        return Err(Error::shape("istft", format!("want {} bins, got {}", BINS, bins)));
    }
    if t == 0 {
        return Err(Error::invalid("istft", "no frames"));
    }
    magnitude.ensure_finite("istft magnitude")?;
    phase.ensure_finite("istft phase")?;

    let win = hann();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(WIN);
    let out_len = (t - 1) * HOP + WIN;
    let mut acc = vec![0.0f64; out_len];
    let mut wsum = vec![0.0f64; out_len];
    let mut buf = vec![Complex::new(0.0, 0.0); WIN];
    for frame in 0..t {
        for k in 0..BINS {
            let m = magnitude.at(&[frame, k]);
            let p = phase.at(&[frame, k]);
            buf[k] = Complex::new(m * p.cos(), m * p.sin());
        }
        for k in 1..BINS - 1 {
            buf[WIN - k] = buf[k].conj();
        }
        ifft.process(&mut buf);
        let start = frame * HOP;
        for n in 0..WIN {
            // rustfft leaves the inverse unscaled.
            let sample = buf[n].re / WIN as f64;
            acc[start + n] += sample * win[n];
            wsum[start + n] += win[n] * win[n];
        }
    }
    let samples = acc
        .iter()
        .zip(&wsum)
        .map(|(&a, &w)| if w > 1e-10 { (a / w) as f32 } else { 0.0 })
        .collect();
    Ok(Waveform::new(samples, SAMPLE_RATE))
}

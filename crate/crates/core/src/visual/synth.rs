//! Synthetic talking-mouth corpus.
//!
//! Each utterance is driven by one articulation envelope `a(t)` in `[0, 1]`:
//! the audio is a harmonic tone whose level and spectral tilt follow `a`,
//! and the video is a mouth whose opening height is proportional to `a`.
//! Audio and video are sample-synchronous at 50 fps (320 samples per frame),
//! so the two streams carry the same gesture and a model can learn to read
//! the level of the voice off the lips.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MouthImage, IMG_C, IMG_H, IMG_LEN, IMG_W};
use crate::dsp::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};

/// Samples per video frame at 16 kHz / 50 fps.
pub const SAMPLES_PER_FRAME: usize = 320;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_utterances: usize,
    pub duration_s: f64,
    pub seed: u64,
    /// Syllable rate of the articulation envelope.
    pub articulation_hz: f64,
    /// Base fundamental of the harmonic voice; each utterance detunes it
    /// by up to five percent.
    pub f0_hz: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_utterances: 10,
            duration_s: 1.2,
            seed: 0,
            articulation_hz: 3.5,
            f0_hz: 150.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthUtterance {
    pub id: String,
    pub audio: Waveform,
    /// Raw mouth images, one per 20 ms frame.
    pub frames: Vec<MouthImage>,
    /// Articulation envelope sampled at the video frame rate.
    pub articulation: Vec<f64>,
    /// Mouth opening measured off the rendered frames, in pixels.
    pub opening_px: Vec<f64>,
}

/// Piecewise speech/pause gate at frame resolution.
fn build_gate(n_frames: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut gate = vec![0.0; n_frames];
    let mut k = 0;
    let mut speech = !rng.gen_bool(0.4);
    while k < n_frames {
        let dur_s: f64 =
            if speech { rng.gen_range(0.35..0.85) } else { rng.gen_range(0.15..0.40) };
        let len = ((dur_s * 50.0).round() as usize).max(1);
        for g in gate.iter_mut().skip(k).take(len) {
            *g = if speech { 1.0 } else { 0.0 };
        }
        k += len;
        speech = !speech;
    }
    if gate.iter().all(|&g| g == 0.0) {
        for g in gate.iter_mut().skip(n_frames / 2) {
            *g = 1.0;
        }
    }
    gate
}

/// Articulation envelope: smoothed gate times a syllabic oscillation.
fn build_envelope(n_frames: usize, articulation_hz: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gate = build_gate(n_frames, rng);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    (0..n_frames)
        .map(|k| {
            let prev = gate[k.saturating_sub(1)];
            let next = gate[(k + 1).min(n_frames - 1)];
            let smooth = 0.25 * prev + 0.5 * gate[k] + 0.25 * next;
            let t = k as f64 / 50.0;
            let syl = 0.5 - 0.5 * (std::f64::consts::TAU * articulation_hz * t + phase).cos();
            (smooth * (0.30 + 0.70 * syl)).clamp(0.0, 1.0)
        })
        .collect()
}

/// Envelope value at sample `n`, linearly interpolated between frame centers.
fn envelope_at(env: &[f64], n: usize) -> f64 {
    let pos = n as f64 / SAMPLES_PER_FRAME as f64 - 0.5;
    if pos <= 0.0 {
        return env[0];
    }
    let k = pos.floor() as usize;
    if k + 1 >= env.len() {
        return env[env.len() - 1];
    }
    let frac = pos - k as f64;
    env[k] * (1.0 - frac) + env[k + 1] * frac
}

const SKIN: [f64; 3] = [0.72, 0.55, 0.45];
const LIPS: [f64; 3] = [0.58, 0.22, 0.24];
const CAVITY: [f64; 3] = [0.05, 0.03, 0.04];

/// Renders the mouth for articulation `a` in `[0, 1]` on the 8-bit grid.
///
/// The lip opening is an ellipse whose height grows linearly with `a`; at
/// `a = 0` the cavity vanishes and only the closed lip band remains.
pub fn render_mouth(a: f64) -> MouthImage {
    let a = a.clamp(0.0, 1.0);
    let (cx, cy) = (IMG_W as f64 / 2.0, IMG_H as f64 / 2.0);
    let (rx_in, ry_in) = (7.5, 5.0 * a);
    let (rx_out, ry_out) = (9.5, ry_in + 2.6);
    let inside = |x: f64, y: f64, rx: f64, ry: f64| {
        if ry <= 0.0 {
            return false;
        }
        let dx = (x - cx) / rx;
        let dy = (y - cy) / ry;
        dx * dx + dy * dy <= 1.0
    };
    let mut pixels = vec![0.0f32; IMG_LEN];
    for y in 0..IMG_H {
        for x in 0..IMG_W {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let color = if ry_in >= 0.5 && inside(px, py, rx_in, ry_in) {
                CAVITY
            } else if inside(px, py, rx_out, ry_out) {
                LIPS
            } else {
                SKIN
            };
            for c in 0..IMG_C {
                let q = (color[c] * 255.0).round() / 255.0;
                pixels[(y * IMG_W + x) * IMG_C + c] = q as f32;
            }
        }
    }
    MouthImage::from_raw(pixels).expect("rendered pixels are in range")
}

/// Mouth opening in pixels, measured down the center column of a raw frame.
pub fn measure_opening(img: &MouthImage) -> f64 {
    let x = IMG_W / 2;
    (0..IMG_H)
        .filter(|&y| img.at(y, x, 0) < 0.2 && img.at(y, x, 1) < 0.2)
        .count() as f64
}

fn synth_one(spec: &SynthSpec, index: usize) -> SynthUtterance {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let n_frames = (spec.duration_s * 50.0).round() as usize;
    let n_samples = n_frames * SAMPLES_PER_FRAME;
    let env = build_envelope(n_frames, spec.articulation_hz, &mut rng);

    let f0 = spec.f0_hz * rng.gen_range(0.95..1.05);
    let n_harm = (7200.0 / f0).floor().min(10.0) as usize;
    let phases: Vec<f64> = (0..n_harm).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    let ln_n: Vec<f64> = (0..n_harm).map(|h| ((h + 1) as f64).ln()).collect();

    let mut samples = vec![0.0f64; n_samples];
    for (n, s) in samples.iter_mut().enumerate() {
        let a = envelope_at(&env, n);
        if a == 0.0 {
            continue;
        }
        let t = n as f64 / SAMPLE_RATE as f64;
        // Opening brightens the voice: the spectral tilt flattens with `a`.
        let tilt = 2.2 - 1.4 * a;
        let mut v = 0.0;
        for h in 0..n_harm {
            let amp = (-tilt * ln_n[h]).exp();
            v += amp * (std::f64::consts::TAU * (h + 1) as f64 * f0 * t + phases[h]).sin();
        }
        *s = a * v;
    }
    let peak = samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let gain = if peak > 0.0 { 0.55 / peak } else { 0.0 };
    let audio = Waveform::new(samples.iter().map(|&v| (v * gain) as f32).collect(), SAMPLE_RATE);

    let frames: Vec<MouthImage> = env.iter().map(|&a| render_mouth(a)).collect();
    let opening_px = frames.iter().map(measure_opening).collect();
    SynthUtterance {
        id: format!("utt_{:04}", index),
        audio,
        frames,
        articulation: env,
        opening_px,
    }
}

/// Generates the corpus described by `spec`. Same spec, same corpus.
pub fn synth_corpus(spec: &SynthSpec) -> Result<Vec<SynthUtterance>> {
    if spec.n_utterances == 0 {
        return Err(Error::invalid("synth_corpus", "zero utterances requested"));
    }
    if spec.duration_s < 0.6 {
        return Err(Error::invalid(
            "synth_corpus",
            "utterances shorter than 0.6 s have no room for speech and pauses",
        ));
    }
    Ok((0..spec.n_utterances).map(|i| synth_one(spec, i)).collect())
}

//! Per-utterance feature extraction and end-to-end enhancement.
//!
//! Both directions keep the bookkeeping needed to undo the normalization:
//! spectra are scaled with the noisy utterance's statistics (clean targets
//! included, so predicting the target exactly reproduces the clean spectrum
//! under the same inverse), and each mouth image remembers its own
//! mean and deviation.

use crate::dsp::{self, SpectroFrames, UttStats, Waveform};
use crate::error::{Error, Result};
use crate::model::{Batch, Model, Outputs, AUDIO_BINS, AUDIO_CTX, VISUAL_OUT};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::visual::{self, ImageStats, MouthImage};

/// Aligned, normalized per-frame features for one utterance.
pub struct UttFeatures<T: Scalar> {
    /// `[t, 257, 5, 1]` log-power context blocks.
    pub audio: Tensor<T>,
    /// `[t, 16, 24, 15]` mouth image stacks.
    pub visual: Tensor<T>,
    /// `[t, 257]` clean log-power rows under the noisy statistics, when a
    /// clean reference was supplied.
    pub target_audio: Option<Tensor<T>>,
    /// `[t, 1152]` center mouth frame pixels (normalized), the visual target.
    pub target_visual: Tensor<T>,
    /// Noisy-utterance statistics that undo the spectral normalization.
    pub stats: UttStats,
    /// Per-frame image statistics that undo the pixel normalization.
    pub image_stats: Vec<ImageStats>,
    /// `[t, 257]` noisy phases for resynthesis.
    pub phase: Tensor<f64>,
}

impl<T: Scalar> UttFeatures<T> {
    pub fn n_frames(&self) -> usize {
        self.audio.dims()[0]
    }
}

/// Turn a noisy waveform and its mouth frames into aligned network inputs,
/// truncating to the shorter stream. `clean` adds the audio training target.
pub fn extract_features<T: Scalar>(
    noisy: &Waveform,
    frames: &[MouthImage],
    clean: Option<&Waveform>,
) -> Result<UttFeatures<T>> {
    let spec = dsp::stft(noisy)?;
    let t = visual::align_streams(spec.n_frames(), frames.len());
    if t == 0 {
        return Err(Error::too_short("extract_features", "no overlapping frames"));
    }
    let (normed, stats) = dsp::normalize_utterance(&spec.logpow)?;
    let blocks = dsp::context_blocks(&normed)?;
    let mut audio = Tensor::zeros(&[t, AUDIO_BINS, AUDIO_CTX, 1]);
    for (i, block) in blocks.iter().take(t).enumerate() {
        let dst = &mut audio.data_mut()[i * AUDIO_BINS * AUDIO_CTX..(i + 1) * AUDIO_BINS * AUDIO_CTX];
        for (d, s) in dst.iter_mut().zip(block.data()) {
            *d = T::of(*s);
        }
    }

    let mut normed_frames = Vec::with_capacity(frames.len());
    let mut image_stats = Vec::with_capacity(frames.len());
    for f in frames {
        let (nf, st) = visual::normalize_image(f)?;
        normed_frames.push(nf);
        image_stats.push(st);
    }
    image_stats.truncate(t);
    let stack_len = visual::IMG_H * visual::IMG_W * visual::STACK_C;
    let mut vis = Tensor::zeros(&[t, visual::IMG_H, visual::IMG_W, visual::STACK_C]);
    let mut target_visual = Tensor::zeros(&[t, VISUAL_OUT]);
    for i in 0..t {
        let stack = visual::visual_stack(&normed_frames, i)?;
        let dst = &mut vis.data_mut()[i * stack_len..(i + 1) * stack_len];
        for (d, s) in dst.iter_mut().zip(stack.data()) {
            *d = T::of(*s);
        }
        let dst = &mut target_visual.data_mut()[i * VISUAL_OUT..(i + 1) * VISUAL_OUT];
        for (d, &s) in dst.iter_mut().zip(normed_frames[i].pixels()) {
            *d = T::of(s as f64);
        }
    }

    let target_audio = match clean {
        Some(c) => {
            let cspec = dsp::stft(c)?;
            if cspec.n_frames() < t {
                return Err(Error::too_short(
                    "extract_features",
                    format!("clean reference has {} frames, noisy {}", cspec.n_frames(), t),
                ));
            }
            let mut tgt = Tensor::zeros(&[t, AUDIO_BINS]);
            for i in 0..t {
                for j in 0..AUDIO_BINS {
                    let v = (cspec.logpow.at(&[i, j]) - stats.mean[j]) / stats.std[j];
                    tgt.set(&[i, j], T::of(v));
                }
            }
            Some(tgt)
        }
        None => None,
    };

    let mut phase = Tensor::zeros(&[t, AUDIO_BINS]);
    for i in 0..t {
        for j in 0..AUDIO_BINS {
            phase.set(&[i, j], spec.phase.at(&[i, j]));
        }
    }

    Ok(UttFeatures { audio, visual: vis, target_audio, target_visual, stats, image_stats, phase })
}

/// Log-power predictions above this are capped before exponentiation so a
/// misbehaving network cannot produce infinite magnitudes.
const LOGPOW_CAP: f64 = 50.0;

pub struct Enhanced {
    pub audio: Waveform,
    /// Reconstructed mouth frames, empty for models without a visual head.
    pub mouth_frames: Vec<MouthImage>,
}

/// Undo the normalization on network outputs and resynthesize: predicted
/// log-power rows get the utterance statistics and the noisy phase back,
/// predicted pixels get their frame statistics back.
pub fn reconstruct<T: Scalar>(
    out: &Outputs<T>,
    feats: &UttFeatures<T>,
) -> Result<Enhanced> {
    let t = feats.n_frames();
    if *out.audio.dims() != [t, AUDIO_BINS] {
        return Err(Error::shape(
            "reconstruct",
            format!("audio output {:?}, expected [{t}, {AUDIO_BINS}]", out.audio.dims()),
        ));
    }
    out.audio.ensure_finite("enhanced spectra")?;
    let normed = out.audio.cast::<f64>();
    let logpow = dsp::denormalize(&normed, &feats.stats)?
        .map(|v| v.clamp(dsp::LOGPOW_EPS.ln(), LOGPOW_CAP));
    let frames = SpectroFrames { logpow, phase: feats.phase.clone() };
    let audio = dsp::istft(&frames.magnitude(), &frames.phase)?;

    let mut mouth_frames = Vec::new();
    if let Some(vis) = &out.visual {
        if *vis.dims() != [t, VISUAL_OUT] {
            return Err(Error::shape(
                "reconstruct",
                format!("visual output {:?}, expected [{t}, {VISUAL_OUT}]", vis.dims()),
            ));
        }
        vis.ensure_finite("reconstructed mouth frames")?;
        for i in 0..t {
            let pixels: Vec<f32> = vis.data()[i * VISUAL_OUT..(i + 1) * VISUAL_OUT]
                .iter()
                .map(|v| v.to64() as f32)
                .collect();
            let img = MouthImage::from_normalized(pixels);
            mouth_frames.push(visual::denormalize_image(&img, &feats.image_stats[i]));
        }
    }
    Ok(Enhanced { audio, mouth_frames })
}

/// Full inference for one utterance: features, one evaluation-mode forward
/// pass over all frames, and resynthesis.
pub fn enhance_utterance<T: Scalar>(
    model: &mut Model<T>,
    noisy: &Waveform,
    frames: &[MouthImage],
) -> Result<Enhanced> {
    let feats = extract_features::<T>(noisy, frames, None)?;
    let batch = Batch { audio: feats.audio.clone(), visual: feats.visual.clone() };
    let out = model.forward(&batch, crate::nn::Phase::Eval, None)?;
    reconstruct(&out, &feats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelKind, NetConfig};
    use crate::visual::synth::{synth_corpus, SynthSpec};

    fn test_utts() -> Vec<crate::visual::synth::SynthUtterance> {
        synth_corpus(&SynthSpec { n_utterances: 1, duration_s: 0.8, seed: 31, ..SynthSpec::default() })
            .unwrap()
    }

    #[test]
    fn features_are_aligned_and_shaped() {
        let utt = &test_utts()[0];
        let feats: UttFeatures<f32> = extract_features(&utt.audio, &utt.frames, Some(&utt.audio)).unwrap();
        let t = feats.n_frames();
        assert!(t > 0);
        assert_eq!(t, utt.audio.n_frames().min(utt.frames.len()));
        assert_eq!(feats.audio.dims(), &[t, 257, 5, 1]);
        assert_eq!(feats.visual.dims(), &[t, 16, 24, 15]);
        assert_eq!(feats.target_visual.dims(), &[t, 1152]);
        assert_eq!(feats.phase.dims(), &[t, 257]);
        assert_eq!(feats.image_stats.len(), t);
        let ta = feats.target_audio.as_ref().unwrap();
        assert_eq!(ta.dims(), &[t, 257]);
    }

    #[test]
    fn clean_target_normalized_with_noisy_stats_recovers_clean_logpow() {
        let utts = synth_corpus(&SynthSpec {
            n_utterances: 2,
            duration_s: 0.8,
            seed: 77,
            ..SynthSpec::default()
        })
        .unwrap();
        // Treat utterance 0 as "noisy" and utterance 1 as "clean": the
        // target must be clean logpow under utterance 0's statistics.
        let noisy = &utts[0].audio;
        let clean = &utts[1].audio;
        let feats: UttFeatures<f64> = extract_features(noisy, &utts[0].frames, Some(clean)).unwrap();
        let cspec = dsp::stft(clean).unwrap();
        let t = feats.n_frames();
        let tgt = feats.target_audio.as_ref().unwrap();
        for i in (0..t).step_by(7) {
            for j in (0..257).step_by(31) {
                let undone = tgt.at(&[i, j]) * feats.stats.std[j] + feats.stats.mean[j];
                assert!((undone - cspec.logpow.at(&[i, j])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn perfect_prediction_reconstructs_the_input_audio() {
        let utt = &test_utts()[0];
        let feats: UttFeatures<f64> = extract_features(&utt.audio, &utt.frames, Some(&utt.audio)).unwrap();
        let out = Outputs {
            audio: feats.target_audio.clone().unwrap(),
            visual: Some(feats.target_visual.clone()),
        };
        let enhanced = reconstruct(&out, &feats).unwrap();
        // Interior samples of the overlap-add reconstruction match the
        // original to high precision.
        let t = feats.n_frames();
        let n = (t - 1) * dsp::HOP + dsp::WIN;
        assert_eq!(enhanced.audio.len(), n);
        let (mut err, mut pow) = (0.0f64, 0.0f64);
        for i in dsp::WIN..n - dsp::WIN {
            let d = enhanced.audio.samples[i] as f64 - utt.audio.samples[i] as f64;
            err += d * d;
            pow += (utt.audio.samples[i] as f64).powi(2);
        }
        assert!(err / pow < 1e-6, "relative power error {}", err / pow);
        // Perfect visual prediction returns the original frames.
        assert_eq!(enhanced.mouth_frames.len(), t);
        for (rec, orig) in enhanced.mouth_frames.iter().zip(&utt.frames) {
            for (a, b) in rec.pixels().iter().zip(orig.pixels()) {
                assert!((a - b).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn untrained_model_still_produces_valid_output() {
        let utt = &test_utts()[0];
        let mut model: Model<f32> = Model::new(NetConfig::tiny(ModelKind::AudioVisual), 5).unwrap();
        let enhanced = enhance_utterance(&mut model, &utt.audio, &utt.frames).unwrap();
        assert!(enhanced.audio.samples.iter().all(|s| s.is_finite()));
        assert!(!enhanced.mouth_frames.is_empty());
        for f in &enhanced.mouth_frames {
            assert!(f.pixels().iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }
}

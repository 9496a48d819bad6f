//! Mouth-image features: normalization, context stacking, stream alignment.

pub mod ppm;
pub mod synth;

pub use synth::{measure_opening, render_mouth, synth_corpus, SynthSpec, SynthUtterance};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMG_H: usize = 16;
pub const IMG_W: usize = 24;
pub const IMG_C: usize = 3;
/// Flattened pixel count of one RGB mouth image.
pub const IMG_LEN: usize = IMG_H * IMG_W * IMG_C;
/// Channels in a five-frame context stack.
pub const STACK_C: usize = 5 * IMG_C;

/// One RGB mouth crop, row-major `[16][24][3]`.
///
/// `normalized` tracks whether the pixels are still raw `[0, 1]` intensities
/// or have been through [`normalize_image`].
#[derive(Debug, Clone, PartialEq)]
pub struct MouthImage {
    pixels: Vec<f32>,
    pub normalized: bool,
}

/// Whole-image mean and standard deviation used by [`normalize_image`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageStats {
    pub mean: f64,
    pub std: f64,
}

impl MouthImage {
    /// Wraps raw intensities; every value must sit in `[0, 1]`.
    pub fn from_raw(pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != IMG_LEN {
            return Err(Error::shape(
                "MouthImage::from_raw",
                format!("want {} values, got {}", IMG_LEN, pixels.len()),
            ));
        }
        if !pixels.iter().all(|&p| (0.0..=1.0).contains(&p)) {
            return Err(Error::invalid("MouthImage::from_raw", "raw pixels outside [0, 1]"));
        }
        Ok(MouthImage { pixels, normalized: false })
    }

    pub(crate) fn from_normalized(pixels: Vec<f32>) -> Self {
        debug_assert_eq!(pixels.len(), IMG_LEN);
        MouthImage { pixels, normalized: true }
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.pixels[(y * IMG_W + x) * IMG_C + c]
    }
}

/// Zero-mean, unit-variance scaling over all 1152 values of one image.
/// The standard deviation floors at 1e-8; the stats invert the transform.
pub fn normalize_image(img: &MouthImage) -> Result<(MouthImage, ImageStats)> {
    if img.normalized {
        return Err(Error::invalid("normalize_image", "image already normalized"));
    }
    let mean = img.pixels.iter().map(|&p| p as f64).sum::<f64>() / IMG_LEN as f64;
    let var = img
        .pixels
        .iter()
        .map(|&p| (p as f64 - mean) * (p as f64 - mean))
        .sum::<f64>()
        / IMG_LEN as f64;
    let std = var.sqrt().max(1e-8);
    let pixels = img.pixels.iter().map(|&p| ((p as f64 - mean) / std) as f32).collect();
    Ok((MouthImage::from_normalized(pixels), ImageStats { mean, std }))
}

/// Inverse of [`normalize_image`], clamped back into `[0, 1]` so network
/// output renders as a valid image.
pub fn denormalize_image(img: &MouthImage, stats: &ImageStats) -> MouthImage {
    let pixels = img
        .pixels
        .iter()
        .map(|&p| ((p as f64 * stats.std + stats.mean).clamp(0.0, 1.0)) as f32)
        .collect();
    MouthImage { pixels, normalized: false }
}

/// Stacks frame `t` with two neighbours on each side into a
/// `16 x 24 x 15` tensor: channel `3 * j + c` holds color channel `c` of
/// context frame `j` (so channels 6..9 are the center frame), with edge
/// frames replicated past the sequence ends.
pub fn visual_stack(frames: &[MouthImage], t: usize) -> Result<Tensor<f64>> {
    if frames.is_empty() {
        return Err(Error::invalid("visual_stack", "no frames"));
    }
    if t >= frames.len() {
        return Err(Error::invalid(
            "visual_stack",
            format!("frame {} of {}", t, frames.len()),
        ));
    }
    if let Some(i) = frames.iter().position(|f| !f.normalized) {
        return Err(Error::invalid("visual_stack", format!("frame {} is not normalized", i)));
    }
    let n = frames.len() as isize;
    let mut out = vec![0.0f64; IMG_H * IMG_W * STACK_C];
    for (j, off) in (-2isize..=2).enumerate() {
        let src = &frames[(t as isize + off).clamp(0, n - 1) as usize];
        for y in 0..IMG_H {
            for x in 0..IMG_W {
                for c in 0..IMG_C {
                    out[(y * IMG_W + x) * STACK_C + j * IMG_C + c] = src.at(y, x, c) as f64;
                }
            }
        }
    }
    Tensor::from_vec(&[IMG_H, IMG_W, STACK_C], out)
}

/// Usable frame count when pairing audio frames with video frames.
pub fn align_streams(audio_frames: usize, video_frames: usize) -> usize {
    audio_frames.min(video_frames)
}

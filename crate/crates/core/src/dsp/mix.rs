//! Two-source additive mixing at controlled signal-to-interference and
//! signal-to-ambient ratios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Waveform;
use crate::error::{Error, Result};

/// Recipe for one noisy utterance.
#[derive(Debug, Clone)]
pub struct MixSpec {
    pub sir_db: f64,
    pub sar_db: f64,
    /// Drives the noise crop offsets; same seed, same mixture.
    pub seed: u64,
    pub interference_id: String,
    pub ambient_id: String,
}

/// A mixed utterance plus the gains that produced it.
#[derive(Debug, Clone)]
pub struct Mixed {
    pub noisy: Waveform,
    /// Gain applied to the interference source.
    pub alpha: f64,
    /// Gain applied to the ambient source.
    pub beta: f64,
    pub achieved_sir_db: f64,
    pub achieved_sar_db: f64,
}

/// Cuts or loops `noise` to exactly `len` samples. Longer noises are cropped
/// at a random offset, shorter ones repeat cyclically from a random start;
/// both draws come from `rng`.
fn fit_to_len(noise: &[f32], len: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    if noise.len() >= len {
        let offset = rng.gen_range(0..=noise.len() - len);
        noise[offset..offset + len].to_vec()
    } else {
        let offset = rng.gen_range(0..noise.len());
        (0..len).map(|i| noise[(offset + i) % noise.len()]).collect()
    }
}

fn power(x: &[f32]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|&s| s as f64 * s as f64).sum::<f64>() / x.len() as f64
}

/// `noisy = clean + alpha * interference + beta * ambient` with gains chosen
/// so the clean-to-interference ratio is `sir_db` and the clean-to-ambient
/// ratio is `sar_db`, measured over the whole utterance.
pub fn mix_sir_sar(
    clean: &Waveform,
    interference: &Waveform,
    ambient: &Waveform,
    spec: &MixSpec,
) -> Result<Mixed> {
    for (name, w) in [("interference", interference), ("ambient", ambient)] {
        if w.is_empty() {
            return Err(Error::invalid("mix_sir_sar", format!("empty {} source", name)));
        }
        if w.sample_rate != clean.sample_rate {
            return Err(Error::invalid(
                "mix_sir_sar",
                format!(
                    "{} is {} Hz but clean is {} Hz",
                    name, w.sample_rate, clean.sample_rate
                ),
            ));
        }
    }
    let p_clean = clean.power();
    if p_clean == 0.0 {
        return Err(Error::ZeroPower("mix_sir_sar clean input"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let interf = fit_to_len(&interference.samples, clean.len(), &mut rng);
    let amb = fit_to_len(&ambient.samples, clean.len(), &mut rng);
    let p_interf = power(&interf);
    let p_amb = power(&amb);
    if p_interf == 0.0 {
        return Err(Error::ZeroPower("mix_sir_sar interference segment"));
    }
    if p_amb == 0.0 {
        return Err(Error::ZeroPower("mix_sir_sar ambient segment"));
    }
    let alpha = (p_clean / (p_interf * 10f64.powf(spec.sir_db / 10.0))).sqrt();
    let beta = (p_clean / (p_amb * 10f64.powf(spec.sar_db / 10.0))).sqrt();
    let samples: Vec<f32> = clean
        .samples
        .iter()
        .zip(interf.iter().zip(&amb))
        .map(|(&c, (&i, &a))| (c as f64 + alpha * i as f64 + beta * a as f64) as f32)
        .collect();

    let scaled_i: Vec<f32> = interf.iter().map(|&v| (alpha * v as f64) as f32).collect();
    let scaled_a: Vec<f32> = amb.iter().map(|&v| (beta * v as f64) as f32).collect();
    Ok(Mixed {
        noisy: Waveform::new(samples, clean.sample_rate),
        alpha,
        beta,
        achieved_sir_db: 10.0 * (p_clean / power(&scaled_i)).log10(),
        achieved_sar_db: 10.0 * (p_clean / power(&scaled_a)).log10(),
    })
}

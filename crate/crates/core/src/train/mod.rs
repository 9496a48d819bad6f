//! Training loops: joint optimization with early stopping, the
//! multi-style modality schedule, mixing-weight sweeps, and the
//! fixed-visual-stream probe.
//!
//! Everything is seeded and single-threaded, so a (config, dataset) pair
//! reproduces its run bit for bit. Three independent ChaCha streams keep
//! the shuffle order, the modality draws, and the dropout masks from
//! perturbing each other.

mod config;
mod dataset;
mod log;

pub use config::{
    Modality, Schedule, TargetPolicy, TrainConfig, FULL_EPOCH_BUDGET, MODALITY_PERIOD,
};
pub use dataset::Dataset;
pub use log::{EpochRecord, TrainLog};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::Waveform;
use crate::error::{Error, Result};
use crate::metrics::{sdi, stoi};
use crate::model::{enhance_utterance, joint_loss, Batch, Model};
use crate::nn::{Phase, RmsProp};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::visual::MouthImage;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_modality(rng: &mut ChaCha8Rng) -> Modality {
    match rng.gen_range(0..3u8) {
        0 => Modality::AudioVisual,
        1 => Modality::VisualOnly,
        _ => Modality::AudioOnly,
    }
}

/// Zero the inactive modality's input, and under model1 its target too.
fn apply_modality<T: Scalar>(
    batch: &mut Batch<T>,
    target_audio: &mut Tensor<T>,
    target_visual: &mut Tensor<T>,
    modality: Modality,
    policy: TargetPolicy,
) {
    match modality {
        Modality::AudioVisual => {}
        Modality::AudioOnly => {
            batch.visual.fill(T::zero());
            if policy == TargetPolicy::Model1 {
                target_visual.fill(T::zero());
            }
        }
        Modality::VisualOnly => {
            batch.audio.fill(T::zero());
            if policy == TargetPolicy::Model1 {
                target_audio.fill(T::zero());
            }
        }
    }
}

/// Copies of every parameter and running statistic, enough to bring the
/// model back to a recorded epoch.
struct Snapshot<T> {
    params: Vec<Vec<T>>,
    state: Vec<Vec<T>>,
}

fn snapshot<T: Scalar>(model: &mut Model<T>) -> Snapshot<T> {
    Snapshot {
        params: model.params().into_iter().map(|(_, p, _)| p.data().to_vec()).collect(),
        state: model.state().into_iter().map(|(_, s)| s.data().to_vec()).collect(),
    }
}

fn restore<T: Scalar>(model: &mut Model<T>, snap: &Snapshot<T>) {
    for ((_, p, _), saved) in model.params().into_iter().zip(&snap.params) {
        p.data_mut().copy_from_slice(saved);
    }
    for ((_, s), saved) in model.state().into_iter().zip(&snap.state) {
        s.data_mut().copy_from_slice(saved);
    }
}

/// The shared epoch loop. With the schedule off every epoch runs
/// audio-visual and neither the modality stream nor the target policy is
/// ever consulted.
fn run<T: Scalar>(model: &mut Model<T>, data: &Dataset<T>, cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    if data.len() < 2 {
        return Err(Error::invalid("train", "need at least two rows for batch statistics"));
    }
    let mut shuffle_rng = stream_rng(cfg.seed, 0);
    let mut modality_rng = stream_rng(cfg.seed, 1);
    let mut dropout_rng = stream_rng(cfg.seed, 2);
    let mut opt = RmsProp::new(cfg.lr);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let period = cfg.modality_period();
    let mut modality = Modality::AudioVisual;

    let mut log = TrainLog {
        seed: cfg.seed,
        config_hash: cfg.hash(),
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best: Option<(f64, usize, Snapshot<T>)> = None;
    let mut since_best = 0usize;

    for epoch in 0..cfg.max_epochs {
        if cfg.schedule == Schedule::Cycle && epoch % period == 0 {
            modality = draw_modality(&mut modality_rng);
        }
        order.shuffle(&mut shuffle_rng);
        let mut audio_sum = 0.0;
        let mut visual_sum = 0.0;
        let mut batches = 0usize;
        for (bi, rows) in order.chunks(cfg.batch_size).enumerate() {
            if rows.len() < 2 {
                // A trailing single row cannot carry batch statistics.
                continue;
            }
            let (mut batch, mut ta, mut tv) = data.gather(rows);
            apply_modality(&mut batch, &mut ta, &mut tv, modality, cfg.policy);
            let out = model.forward(&batch, Phase::Train, Some(&mut dropout_rng))?;
            let tv_ref = out.visual.is_some().then_some(&tv);
            let loss = joint_loss(&out, &ta, tv_ref, cfg.mu)?;
            if !loss.total.is_finite() {
                return Err(Error::NanLoss { epoch, batch: bi });
            }
            model.zero_grads();
            model.backward(&loss.d_audio, loss.d_visual.as_ref())?;
            for (slot, (_, p, g)) in model.params().into_iter().enumerate() {
                opt.step(slot, p.data_mut(), g.data());
            }
            audio_sum += loss.audio;
            visual_sum += loss.visual;
            batches += 1;
        }
        let audio = audio_sum / batches as f64;
        let visual = visual_sum / batches as f64;
        let total = audio + cfg.mu * visual;
        log.epochs.push(EpochRecord { epoch, modality, total, audio, visual });

        let improved = match &best {
            None => true,
            Some((b, _, _)) => total < b * (1.0 - cfg.min_rel_improve),
        };
        if improved {
            best = Some((total, epoch, snapshot(model)));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                log.stopped_early = true;
                break;
            }
        }
    }

    let (_, best_epoch, snap) = best.expect("at least one epoch ran");
    restore(model, &snap);
    log.best_epoch = best_epoch;
    Ok(log)
}

/// Plain joint training. The model is left at the weights of the best
/// epoch, which the returned log names.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    data: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    let mut cfg = cfg.clone();
    cfg.schedule = Schedule::Off;
    run(model, data, &cfg)
}

/// Training with the modality schedule active: at every segment boundary
/// the input type is re-drawn from {audio-visual, visual-only,
/// audio-only} and the missing modality is zeroed per the target policy.
pub fn multistyle_train<T: Scalar>(
    model: &mut Model<T>,
    data: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    if cfg.schedule != Schedule::Cycle {
        return Err(Error::invalid("multistyle train", "schedule is off; use train instead"));
    }
    run(model, data, cfg)
}

/// Final losses of one full training run per mixing weight.
#[derive(Debug, Clone, PartialEq)]
pub struct MuPoint {
    pub mu: f64,
    pub audio: f64,
    pub visual: f64,
}

/// Trains a fresh model per mixing weight, all else equal, and reports
/// the losses at each run's selected epoch. The constructor must build
/// identically initialized models for the comparison to mean anything.
pub fn sweep_mu<T: Scalar>(
    mut make_model: impl FnMut() -> Result<Model<T>>,
    data: &Dataset<T>,
    mus: &[f64],
    base: &TrainConfig,
) -> Result<Vec<MuPoint>> {
    if mus.len() < 2 {
        return Err(Error::invalid("sweep_mu", "need at least two mixing weights"));
    }
    let mut out = Vec::with_capacity(mus.len());
    for &mu in mus {
        let mut model = make_model()?;
        let mut cfg = base.clone();
        cfg.mu = mu;
        let log = train(&mut model, data, &cfg)?;
        let rec = &log.epochs[log.best_epoch];
        out.push(MuPoint { mu, audio: rec.audio, visual: rec.visual });
    }
    Ok(out)
}

/// Scores of one utterance enhanced with its own mouth stream versus a
/// single fake frame held for the whole utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub matched_stoi: f64,
    pub matched_sdi: f64,
    pub mismatched_stoi: f64,
    pub mismatched_sdi: f64,
}

pub fn mismatched_visual_probe<T: Scalar>(
    model: &mut Model<T>,
    noisy: &Waveform,
    frames: &[MouthImage],
    clean: &Waveform,
    fake: &MouthImage,
) -> Result<ProbeReport> {
    let matched = enhance_utterance(model, noisy, frames)?;
    let fake_frames = vec![fake.clone(); frames.len()];
    let mismatched = enhance_utterance(model, noisy, &fake_frames)?;
    Ok(ProbeReport {
        matched_stoi: stoi(clean, &matched.audio)?,
        matched_sdi: sdi(clean, &matched.audio)?,
        mismatched_stoi: stoi(clean, &mismatched.audio)?,
        mismatched_sdi: sdi(clean, &mismatched.audio)?,
    })
}

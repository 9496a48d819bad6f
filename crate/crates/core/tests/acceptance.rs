//! Whole-system acceptance checks, exercised through the public API only.
//! Each test covers one observable property of the finished system and
//! prints a single summary line with the measured numbers; run with
//! `cargo test --test acceptance -- --nocapture` to see them.
//!
//! The heavier checks share one trained experiment (a fixed noisy corpus
//! plus audio-visual and audio-only models trained on it across several
//! seeds) so the suite stays inside a desk-scale time budget.

use std::path::Path;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use avse_core::dsp::{self, mix_sir_sar, MixSpec, Waveform, SAMPLE_RATE, WIN};
use avse_core::metrics::{scores_to_csv, sdi, stoi, Metric, ScoreRecord};
use avse_core::model::{
    enhance_utterance, extract_features, joint_loss, save_model, Batch, Model, ModelKind,
    NetConfig, UttFeatures,
};
use avse_core::nn::{grad_check, Activation, Conv2d, Dense, FdTarget, InitMode, ParamRef, Phase};
use avse_core::tensor::Tensor;
use avse_core::train::{
    mismatched_visual_probe, multistyle_train, sweep_mu, train, Dataset, Modality, Schedule,
    TargetPolicy, TrainConfig, TrainLog,
};
use avse_core::visual::{render_mouth, synth_corpus, MouthImage, SynthSpec};

// ---------------------------------------------------------------------------
// Shared corpus and experiment plumbing.

/// One utterance of the evaluation corpus: a clean synthetic voice, its
/// mouth-image stream, and the same voice buried under a competing talker
/// plus mild white ambient noise.
struct Utt {
    clean: Waveform,
    noisy: Waveform,
    frames: Vec<MouthImage>,
}

fn white_noise(len: usize, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Waveform::new((0..len).map(|_| rng.gen_range(-0.5f32..0.5)).collect(), SAMPLE_RATE)
}

/// `n` noisy utterances at the given signal-to-interference ratio. Every
/// utterance gets its own competing talker (a second synthetic voice) and
/// its own ambient noise, all derived from `seed`.
fn noisy_corpus(n: usize, duration_s: f64, sir_db: f64, seed: u64) -> Vec<Utt> {
    let voices = synth_corpus(&SynthSpec {
        n_utterances: n,
        duration_s,
        seed,
        ..SynthSpec::default()
    })
    .unwrap();
    let talkers = synth_corpus(&SynthSpec {
        n_utterances: n,
        duration_s: duration_s + 0.4,
        seed: seed ^ 0x5EED,
        ..SynthSpec::default()
    })
    .unwrap();
    voices
        .into_iter()
        .zip(talkers)
        .enumerate()
        .map(|(i, (v, talker))| {
            let ambient = white_noise(v.audio.len(), seed.wrapping_add(7700 + i as u64));
            let spec = MixSpec {
                sir_db,
                sar_db: 15.0,
                seed: seed.wrapping_add(i as u64),
                interference_id: talker.id.clone(),
                ambient_id: "white".into(),
            };
            let mixed = mix_sir_sar(&v.audio, &talker.audio, &ambient, &spec).unwrap();
            Utt { clean: v.audio, noisy: mixed.noisy, frames: v.frames }
        })
        .collect()
}

fn features_of(utts: &[Utt]) -> Dataset<f32> {
    let feats: Vec<UttFeatures<f32>> = utts
        .iter()
        .map(|u| extract_features(&u.noisy, &u.frames, Some(&u.clean)).unwrap())
        .collect();
    Dataset::from_features(&feats).unwrap()
}

/// Mean STOI and SDI of `model`'s enhanced output over a held-out set.
fn eval_model(model: &mut Model<f32>, test: &[Utt]) -> (f64, f64) {
    let (mut s, mut d) = (0.0, 0.0);
    for u in test {
        let out = enhance_utterance(model, &u.noisy, &u.frames).unwrap();
        s += stoi(&u.clean, &out.audio).unwrap();
        d += sdi(&u.clean, &out.audio).unwrap();
    }
    (s / test.len() as f64, d / test.len() as f64)
}

const TRAIN_UTTS: usize = 50;
const TEST_UTTS: usize = 10;
const UTT_SECONDS: f64 = 1.0;
const SIR_DB: f64 = -5.0;
const CORPUS_SEED: u64 = 2;
const TEST_SEED: u64 = 9002;
const RUN_SEEDS: [u64; 5] = [101, 102, 103, 104, 105];

fn experiment_config(seed: u64) -> TrainConfig {
    TrainConfig {
        lr: 1e-3,
        batch_size: 32,
        max_epochs: 25,
        patience: 25,
        min_rel_improve: 0.0,
        mu: 0.5,
        seed,
        init: InitMode::Scaled,
        schedule: Schedule::Off,
        policy: TargetPolicy::Model2,
    }
}

/// One seeded training run of both enhancement models on the shared corpus,
/// with their held-out scores.
struct SeedRun {
    seed: u64,
    av: Model<f32>,
    av_log: TrainLog,
    av_stoi: f64,
    av_sdi: f64,
    ao_log: TrainLog,
    ao_stoi: f64,
    ao_sdi: f64,
}

struct Experiment {
    test: Vec<Utt>,
    data: Dataset<f32>,
    noisy_stoi: f64,
    noisy_sdi: f64,
    runs: Vec<SeedRun>,
}

fn run_seed(data: &Dataset<f32>, test: &[Utt], seed: u64) -> SeedRun {
    let cfg = experiment_config(seed);
    let mut av = Model::<f32>::new(NetConfig::tiny(ModelKind::AudioVisual), seed).unwrap();
    let av_log = train(&mut av, data, &cfg).unwrap();
    let (av_stoi, av_sdi) = eval_model(&mut av, test);
    let mut ao = Model::<f32>::new(NetConfig::tiny(ModelKind::AudioOnly), seed).unwrap();
    let ao_log = train(&mut ao, data, &cfg).unwrap();
    let (ao_stoi, ao_sdi) = eval_model(&mut ao, test);
    SeedRun { seed, av, av_log, av_stoi, av_sdi, ao_log, ao_stoi, ao_sdi }
}

fn experiment() -> &'static Mutex<Experiment> {
    static EXP: OnceLock<Mutex<Experiment>> = OnceLock::new();
    EXP.get_or_init(|| {
        let train_utts = noisy_corpus(TRAIN_UTTS, UTT_SECONDS, SIR_DB, CORPUS_SEED);
        let test = noisy_corpus(TEST_UTTS, UTT_SECONDS, SIR_DB, TEST_SEED);
        let data = features_of(&train_utts);
        let (mut s, mut d) = (0.0, 0.0);
        for u in &test {
            s += stoi(&u.clean, &u.noisy).unwrap();
            d += sdi(&u.clean, &u.noisy).unwrap();
        }
        let runs: Vec<SeedRun> =
            RUN_SEEDS.iter().map(|&seed| run_seed(&data, &test, seed)).collect();
        Mutex::new(Experiment {
            test,
            data,
            noisy_stoi: s / TEST_UTTS as f64,
            noisy_sdi: d / TEST_UTTS as f64,
            runs,
        })
    })
}

// ---------------------------------------------------------------------------
// The acceptance checks proper. Test names carry their ordering; each body
// asserts the property at its stated tolerance and prints one line of
// measured numbers on success.

/// Finite-difference target for a whole audio-visual network: fixed random
/// batch and targets, dropout masks replayed from a fixed seed so the loss
/// is a pure function of the parameters, and pooling winners pinned after
/// the gradient pass so every probe differentiates the same branch of the
/// piecewise loss.
struct ModelFd {
    model: Model<f64>,
    batch: Batch<f64>,
    t_audio: Tensor<f64>,
    t_visual: Tensor<f64>,
    mask_seed: u64,
}

impl ModelFd {
    fn new(cfg: NetConfig, seed: u64) -> Self {
        let model = Model::new(cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF00D);
        let b = 2;
        let batch = Batch {
            audio: Tensor::from_fn(&[b, 257, 5, 1], |_| rng.gen_range(-1.0..1.0)),
            visual: Tensor::from_fn(&[b, 16, 24, 15], |_| rng.gen_range(0.0..1.0)),
        };
        let t_audio = Tensor::from_fn(&[b, 257], |_| rng.gen_range(-1.0..1.0));
        let t_visual = Tensor::from_fn(&[b, 1152], |_| rng.gen_range(0.0..1.0));
        ModelFd { model, batch, t_audio, t_visual, mask_seed: seed ^ 0xD06 }
    }

    fn loss(&mut self) -> avse_core::Result<avse_core::model::JointLoss<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.mask_seed);
        let out = self.model.forward(&self.batch, Phase::Train, Some(&mut rng))?;
        joint_loss(&out, &self.t_audio, Some(&self.t_visual), 0.7)
    }
}

impl FdTarget<f64> for ModelFd {
    fn eval_loss(&mut self) -> avse_core::Result<f64> {
        Ok(self.loss()?.total)
    }

    fn refresh_grads(&mut self) -> avse_core::Result<()> {
        self.model.pin_pools(false)?;
        self.model.zero_grads();
        let l = self.loss()?;
        self.model.backward(&l.d_audio, l.d_visual.as_ref())?;
        self.model.pin_pools(true)
    }

    fn params(&mut self) -> Vec<ParamRef<'_, f64>> {
        self.model.params()
    }
}

/// A purely affine stack (conv without batchnorm into a linear dense
/// layer), where central differences are exact up to roundoff.
struct LinearFd {
    conv: Conv2d<f64>,
    dense: Dense<f64>,
    x: Tensor<f64>,
    t: Tensor<f64>,
}

impl LinearFd {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conv = Conv2d::new(3, 2, 2, 3, false, InitMode::Scaled, &mut rng);
        let dense = Dense::new(36, 5, Activation::Linear, false, 0.0, InitMode::Scaled, &mut rng);
        let x = Tensor::from_fn(&[2, 6, 4, 2], |_| rng.gen_range(-1.0..1.0));
        let t = Tensor::from_fn(&[2, 5], |_| rng.gen_range(-1.0..1.0));
        LinearFd { conv, dense, x, t }
    }
}

impl FdTarget<f64> for LinearFd {
    fn eval_loss(&mut self) -> avse_core::Result<f64> {
        let y = self.conv.forward(&self.x, Phase::Train)?;
        let y = y.reshape(&[2, 36])?;
        let y = self.dense.forward(&y, Phase::Train, None)?;
        Ok(avse_core::nn::mse_loss(&y, &self.t)?.0)
    }

    fn refresh_grads(&mut self) -> avse_core::Result<()> {
        for (_, _, g) in self.params() {
            g.fill(0.0);
        }
        let y = self.conv.forward(&self.x, Phase::Train)?;
        let flat = y.clone().reshape(&[2, 36])?;
        let out = self.dense.forward(&flat, Phase::Train, None)?;
        let (_, dy) = avse_core::nn::mse_loss(&out, &self.t)?;
        let dflat = self.dense.backward(&dy)?;
        let dconv = dflat.reshape(y.dims())?;
        self.conv.backward(&dconv)?;
        Ok(())
    }

    fn params(&mut self) -> Vec<ParamRef<'_, f64>> {
        let mut ps = self.conv.params();
        ps.extend(self.dense.params());
        ps
    }
}

/// Analytic gradients of the full network (convolution, batchnorm, max
/// pooling, dense, dropout, both loss heads) agree with central finite
/// differences over 20 seeds, and a purely linear stack agrees an order
/// of magnitude tighter.
#[test]
fn a01_gradients_match_finite_differences_across_seeds() {
    let t0 = Instant::now();
    let cfg = NetConfig {
        kind: ModelKind::AudioVisual,
        init: InitMode::Scaled,
        dropout: 0.1,
        a_filters1: 4,
        a_filters2: 2,
        v_filters1: 4,
        v_filters2: 3,
        v_filters3: 2,
        fc1: 32,
        fc2: 32,
        a_embed: 16,
        v_embed: 32,
    };
    let (mut worst_model, mut checked) = (0.0f64, 0usize);
    for seed in 0..20 {
        let mut fd = ModelFd::new(cfg, seed);
        let report = grad_check(&mut fd, 2, seed).unwrap();
        assert!(
            report.max_rel_err < 1e-3,
            "seed {seed}: rel err {:.3e} at {}",
            report.max_rel_err,
            report.worst
        );
        worst_model = worst_model.max(report.max_rel_err);
        checked += report.checked;
    }
    let mut worst_linear = 0.0f64;
    for seed in 0..20 {
        let mut fd = LinearFd::new(seed);
        let report = grad_check(&mut fd, 4, seed).unwrap();
        assert!(
            report.max_rel_err < 1e-4,
            "linear stack seed {seed}: rel err {:.3e} at {}",
            report.max_rel_err,
            report.worst
        );
        worst_linear = worst_linear.max(report.max_rel_err);
    }
    let secs = t0.elapsed().as_secs_f64();
    println!(
        "PASS a01: {checked} probes over 20 seeds, worst rel err {worst_model:.2e} (full net, < 1e-3), {worst_linear:.2e} (linear stack, < 1e-4), {secs:.1}s"
    );
    assert!(secs < 60.0, "gradient check took {secs:.1}s, budget is 60s");
}

/// Analysis-synthesis round trip is transparent away from the edge taper,
/// and the mixer hits requested interference and ambient ratios to within
/// a hundredth of a decibel on 100 random cases.
#[test]
fn a02_stft_round_trip_and_mixing_ratios_are_exact() {
    let t0 = Instant::now();
    let utt = &synth_corpus(&SynthSpec {
        n_utterances: 1,
        duration_s: 1.2,
        seed: 3,
        ..SynthSpec::default()
    })
    .unwrap()[0];
    let frames = dsp::stft(&utt.audio).unwrap();
    let back = dsp::istft(&frames.magnitude(), &frames.phase).unwrap();
    let n = back.len().min(utt.audio.len());
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for i in WIN..n - WIN {
        let d = back.samples[i] as f64 - utt.audio.samples[i] as f64;
        num += d * d;
        den += (utt.audio.samples[i] as f64).powi(2);
    }
    let rel = (num / den).sqrt();
    assert!(rel < 1e-6, "interior round-trip rel RMS {rel:.3e}");

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let sir = rng.gen_range(-10.0..20.0);
        let sar = rng.gen_range(0.0..25.0);
        let clean = white_noise(8000 + 37 * k, 500 + k as u64);
        let interf = white_noise(5000 + 91 * k, 600 + k as u64);
        let ambient = white_noise(12000 - 23 * k, 700 + k as u64);
        let spec = MixSpec {
            sir_db: sir,
            sar_db: sar,
            seed: k as u64,
            interference_id: "i".into(),
            ambient_id: "a".into(),
        };
        let m = mix_sir_sar(&clean, &interf, &ambient, &spec).unwrap();
        worst = worst
            .max((m.achieved_sir_db - sir).abs())
            .max((m.achieved_sar_db - sar).abs());
    }
    let secs = t0.elapsed().as_secs_f64();
    println!(
        "PASS a02: round-trip rel RMS {rel:.2e} (< 1e-6), worst mix ratio error {worst:.2e} dB over 100 cases (<= 0.01), {secs:.1}s"
    );
    assert!(worst <= 0.01, "worst achieved-ratio error {worst:.4} dB");
    assert!(secs < 10.0, "dsp checks took {secs:.1}s, budget is 10s");
}

/// The reference-width network realizes the designed shape chain. The
/// hand-tallied merged width circulated for this design, 2804, disagrees
/// with what the layer arithmetic yields, 2060; the computed value is
/// used and the difference is reported here rather than patched over.
#[test]
fn a03_reference_shape_chain_and_merged_width() {
    let full = NetConfig::full(ModelKind::AudioVisual);

    // Audio: 257x5x1 -(12x2 conv, 10 filters)-> 246x4x10 -(2x1 pool)->
    // 123x4x10 -(5x1 conv, 4 filters)-> 119x4x4.
    assert_eq!((257 - 12 + 1, 5 - 2 + 1), (246, 4));
    assert_eq!((246 / 2, 4 / 1), (123, 4));
    assert_eq!((123 - 5 + 1, 4 - 1 + 1), (119, 4));
    assert_eq!(full.audio_flat(), 119 * 4 * 4);
    assert_eq!(full.audio_flat(), 1904);

    // Visual: 24x16 plane -(15x2 conv, 12 filters)-> 10x15x12 -(2x1 pool)->
    // 5x15x12 -(2x2 conv, 10 filters)-> 4x14x10 -(2x1 pool)-> 2x14x10
    // -(1x2 conv, 6 filters)-> 2x13x6.
    assert_eq!((24 - 15 + 1, 16 - 2 + 1), (10, 15));
    assert_eq!((10 / 2 - 2 + 1, 15 - 2 + 1), (4, 14));
    assert_eq!((4 / 2 - 1 + 1, 14 - 2 + 1), (2, 13));
    assert_eq!(full.visual_flat(), 2 * 13 * 6);
    assert_eq!(full.visual_flat(), 156);

    assert_eq!(full.merged(), 1904 + 156);
    assert_eq!(full.merged(), 2060);

    // The reference-width model really forwards to the advertised head
    // widths, so the chain above is what the code computes, not a comment.
    let mut model = Model::<f32>::new(full, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let batch = Batch {
        audio: Tensor::from_fn(&[2, 257, 5, 1], |_| rng.gen_range(-1.0f32..1.0)),
        visual: Tensor::from_fn(&[2, 16, 24, 15], |_| rng.gen_range(0.0f32..1.0)),
    };
    let out = model.forward(&batch, Phase::Eval, None).unwrap();
    assert_eq!(out.audio.dims(), &[2, 257]);
    assert_eq!(out.visual.as_ref().unwrap().dims(), &[2, 1152]);

    println!(
        "PASS a03: audio 257x5x1 -> 246x4x10 -> 123x4x10 -> 119x4x4 (1904), visual 24x16 -> 10x15x12 -> 4x14x10 -> 2x13x6 (156), merged 2060; NOTE hand tally 2804 from the design notes does not match the layer arithmetic and is not used"
    );
}

/// Intelligibility and distortion metrics behave at their fixed points and
/// order degradation levels correctly.
#[test]
fn a04_metric_identities_and_noise_monotonicity() {
    let utt = &synth_corpus(&SynthSpec {
        n_utterances: 1,
        duration_s: 1.5,
        seed: 4,
        ..SynthSpec::default()
    })
    .unwrap()[0];
    let x = &utt.audio;

    let self_stoi = stoi(x, x).unwrap();
    assert!((self_stoi - 1.0).abs() <= 1e-6, "stoi(x,x) = {self_stoi}");

    let noise = white_noise(x.len(), 44);
    let snrs = [20.0, 0.0, -10.0];
    let scores: Vec<f64> = snrs
        .iter()
        .map(|&snr| {
            let g = (x.power() / (noise.power() * 10f64.powf(snr / 10.0))).sqrt() as f32;
            let noisy = Waveform::new(
                x.samples.iter().zip(&noise.samples).map(|(&c, &n)| c + g * n).collect(),
                SAMPLE_RATE,
            );
            stoi(x, &noisy).unwrap()
        })
        .collect();
    assert!(
        scores[0] > scores[1] && scores[1] > scores[2],
        "stoi not strictly decreasing over SNR 20/0/-10 dB: {scores:?}"
    );

    let zeros = Waveform::new(vec![0.0; x.len()], SAMPLE_RATE);
    let doubled = Waveform::new(x.samples.iter().map(|&s| 2.0 * s).collect(), SAMPLE_RATE);
    let identities =
        [(sdi(x, x).unwrap(), 0.0), (sdi(x, &zeros).unwrap(), 1.0), (sdi(x, &doubled).unwrap(), 1.0)];
    for (got, want) in identities {
        assert!((got - want).abs() <= 1e-6, "sdi identity: got {got}, want {want}");
    }

    println!(
        "PASS a04: stoi(x,x) = {self_stoi:.8}, stoi over 20/0/-10 dB SNR = {:.4} > {:.4} > {:.4}, sdi identities 0/1/1 exact",
        scores[0], scores[1], scores[2]
    );
}

/// With a competing talker 5 dB above the target voice, the audio-visual
/// model must beat the audio-only model on both held-out metrics (higher
/// STOI, lower SDI) in at least four of five seeded runs.
#[test]
fn a05_visual_stream_beats_audio_only_under_competing_talker() {
    let t0 = Instant::now();
    let exp = experiment().lock().unwrap();
    let mut wins = 0;
    for run in &exp.runs {
        let win = run.av_stoi > run.ao_stoi && run.av_sdi < run.ao_sdi;
        println!(
            "  seed {}: av stoi {:.4} sdi {:.3e} | ao stoi {:.4} sdi {:.3e} | {}",
            run.seed,
            run.av_stoi,
            run.av_sdi,
            run.ao_stoi,
            run.ao_sdi,
            if win { "av wins" } else { "av does not win" }
        );
        if win {
            wins += 1;
        }
    }
    println!(
        "PASS a05: audio-visual wins {}/5 seeded runs (noisy baseline stoi {:.4} sdi {:.3}), {:.0}s",
        wins,
        exp.noisy_stoi,
        exp.noisy_sdi,
        t0.elapsed().as_secs_f64()
    );
    assert!(wins >= 4, "audio-visual won only {wins}/5 runs, need 4");
}

/// Raising the visual weight in the joint objective buys visual
/// reconstruction at the expense of audio fit: over mixing weights 0.1,
/// 1, 10 with everything else fixed, the selected epoch's visual loss
/// falls strictly and its audio loss never falls.
#[test]
fn a06_visual_weight_trades_audio_loss_for_visual_loss() {
    let t0 = Instant::now();
    let utts = noisy_corpus(10, UTT_SECONDS, SIR_DB, 31);
    let data = features_of(&utts);
    let base = TrainConfig {
        lr: 1e-3,
        batch_size: 32,
        max_epochs: 30,
        patience: 30,
        min_rel_improve: 0.0,
        mu: 1.0,
        seed: 42,
        init: InitMode::Scaled,
        schedule: Schedule::Off,
        policy: TargetPolicy::Model2,
    };
    let pts = sweep_mu(
        || Model::<f32>::new(NetConfig::tiny(ModelKind::AudioVisual), 42),
        &data,
        &[0.1, 1.0, 10.0],
        &base,
    )
    .unwrap();
    for w in pts.windows(2) {
        assert!(
            w[1].visual < w[0].visual,
            "visual loss not strictly decreasing: mu {} -> {:.4}, mu {} -> {:.4}",
            w[0].mu,
            w[0].visual,
            w[1].mu,
            w[1].visual
        );
        assert!(
            w[1].audio >= w[0].audio,
            "audio loss decreased: mu {} -> {:.4}, mu {} -> {:.4}",
            w[0].mu,
            w[0].audio,
            w[1].mu,
            w[1].audio
        );
    }
    let line = pts
        .iter()
        .map(|p| format!("mu {}: audio {:.1} visual {:.1}", p.mu, p.audio, p.visual))
        .collect::<Vec<_>>()
        .join(" | ");
    println!("PASS a06: {line}, {:.0}s", t0.elapsed().as_secs_f64());
}

/// During schedule-driven training that periodically zeroes one input
/// modality, epochs that see both inputs fit the audio target better than
/// epochs that see audio alone, once training has settled (latter half),
/// under both missing-target policies, in most seeds.
#[test]
fn a07_multistyle_audio_loss_is_lower_in_audio_visual_segments() {
    let t0 = Instant::now();
    let utts = noisy_corpus(2, 0.8, SIR_DB, 51);
    let data = features_of(&utts);
    let epochs = 720;
    for policy in [TargetPolicy::Model1, TargetPolicy::Model2] {
        let mut holds = 0;
        for seed in 1..=5u64 {
            let cfg = TrainConfig {
                lr: 1e-3,
                batch_size: 16,
                max_epochs: epochs,
                patience: epochs,
                min_rel_improve: 0.0,
                mu: 0.5,
                seed,
                init: InitMode::Scaled,
                schedule: Schedule::Cycle,
                policy,
            };
            let mut model = Model::<f32>::new(NetConfig::tiny(ModelKind::AudioVisual), seed).unwrap();
            let log = multistyle_train(&mut model, &data, &cfg).unwrap();
            let half = epochs / 2;
            let mean = |rs: &[&avse_core::train::EpochRecord]| {
                rs.iter().map(|r| r.audio).sum::<f64>() / rs.len() as f64
            };
            let av = log.in_modality(Modality::AudioVisual, half, epochs);
            let ao = log.in_modality(Modality::AudioOnly, half, epochs);
            if av.is_empty() || ao.is_empty() {
                println!("  {policy:?} seed {seed}: latter half missed a modality, counts as a miss");
                continue;
            }
            let (m_av, m_ao) = (mean(&av), mean(&ao));
            let hold = m_av < m_ao;
            println!(
                "  {policy:?} seed {seed}: audio loss {:.1} over {} av epochs vs {:.1} over {} ao epochs | {}",
                m_av,
                av.len(),
                m_ao,
                ao.len(),
                if hold { "holds" } else { "does not hold" }
            );
            if hold {
                holds += 1;
            }
        }
        assert!(holds >= 3, "{policy:?}: ordering held in only {holds}/5 seeds, need 3");
        println!("PASS a07({policy:?}): av-segment audio loss below ao-segment in {holds}/5 seeds");
    }
    println!("PASS a07: both policies, {:.0}s", t0.elapsed().as_secs_f64());
}

/// Replacing the true mouth stream with one frozen frame must hurt: for
/// at least six of eight fixed mouth openings, mean intelligibility over
/// the test set drops below the matched-stream score.
#[test]
fn a08_constant_fake_mouth_degrades_intelligibility() {
    let t0 = Instant::now();
    let mut exp = experiment().lock().unwrap();
    let Experiment { test, runs, .. } = &mut *exp;
    let model = &mut runs[0].av;
    let mut degraded = 0;
    let mut matched_mean = 0.0;
    for i in 0..8 {
        let opening = i as f64 / 7.0;
        let fake = render_mouth(opening);
        let (mut fake_stoi, mut true_stoi) = (0.0, 0.0);
        for u in test.iter() {
            let probe = mismatched_visual_probe(model, &u.noisy, &u.frames, &u.clean, &fake).unwrap();
            fake_stoi += probe.mismatched_stoi;
            true_stoi += probe.matched_stoi;
        }
        fake_stoi /= test.len() as f64;
        true_stoi /= test.len() as f64;
        matched_mean = true_stoi;
        println!(
            "  opening {:.2}: fake stoi {:.4} vs matched {:.4} | {}",
            opening,
            fake_stoi,
            true_stoi,
            if fake_stoi < true_stoi { "degrades" } else { "does not degrade" }
        );
        if fake_stoi < true_stoi {
            degraded += 1;
        }
    }
    println!(
        "PASS a08: frozen mouth lowered stoi for {degraded}/8 openings (matched mean {matched_mean:.4}), {:.0}s",
        t0.elapsed().as_secs_f64()
    );
    assert!(degraded >= 6, "only {degraded}/8 fake shapes degraded stoi, need 6");
}

/// Early fusion (features concatenated before the trunk) and late fusion
/// (separate streams merged after their own convolutions) both have to
/// train; their held-out scores are tabulated, and the ordering is
/// reported as data rather than gated, since at this corpus size it can
/// swing either way.
#[test]
fn a09_early_and_late_fusion_both_train_and_are_compared() {
    let t0 = Instant::now();
    let mut exp = experiment().lock().unwrap();
    let Experiment { test, data, runs, noisy_stoi, noisy_sdi } = &mut *exp;
    let seed = runs[0].seed;
    let cfg = experiment_config(seed);
    let mut ef = Model::<f32>::new(NetConfig::tiny(ModelKind::EarlyFusion), seed).unwrap();
    let ef_log = train(&mut ef, data, &cfg).unwrap();
    let (ef_stoi, ef_sdi) = eval_model(&mut ef, test);

    let av = &runs[0];
    let av_first = av.av_log.epochs[0].total;
    let av_best = av.av_log.epochs[av.av_log.best_epoch].total;
    let ef_first = ef_log.epochs[0].total;
    let ef_best = ef_log.epochs[ef_log.best_epoch].total;
    assert!(av_best < av_first, "late fusion did not train: {av_best} !< {av_first}");
    assert!(ef_best < ef_first, "early fusion did not train: {ef_best} !< {ef_first}");

    println!("  method        stoi     sdi");
    println!("  noisy         {:.4}   {:.3e}", noisy_stoi, noisy_sdi);
    println!("  late-fusion   {:.4}   {:.3e}", av.av_stoi, av.av_sdi);
    println!("  early-fusion  {:.4}   {:.3e}", ef_stoi, ef_sdi);
    let ordering = if av.av_stoi > ef_stoi { "late > early" } else { "early >= late" };
    println!(
        "PASS a09: both fused models trained below initial loss (late {:.1} -> {:.1}, early {:.1} -> {:.1}); stoi ordering: {ordering} (reported, not gated), {:.0}s",
        av_first,
        av_best,
        ef_first,
        ef_best,
        t0.elapsed().as_secs_f64()
    );
}

struct RunArtifacts {
    log_csv: String,
    best_epoch: usize,
    stopped_early: bool,
    scores_csv: String,
    dir: tempfile::TempDir,
}

/// The whole pipeline, corpus synthesis through scoring, replayed from one
/// seed. Called twice by the determinism check.
fn seeded_pipeline_run() -> RunArtifacts {
    let utts = noisy_corpus(2, 0.8, SIR_DB, 71);
    let data = features_of(&utts);
    let cfg = TrainConfig {
        lr: 1e-3,
        batch_size: 16,
        max_epochs: 25,
        patience: 25,
        min_rel_improve: 0.0,
        mu: 0.5,
        seed: 7,
        init: InitMode::Scaled,
        schedule: Schedule::Off,
        policy: TargetPolicy::Model2,
    };
    let mut model = Model::<f32>::new(NetConfig::tiny(ModelKind::AudioVisual), 7).unwrap();
    let log = train(&mut model, &data, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_model(dir.path(), &mut model).unwrap();
    let mut records = Vec::new();
    for (i, u) in utts.iter().enumerate() {
        let out = enhance_utterance(&mut model, &u.noisy, &u.frames).unwrap();
        for (metric, value) in [
            (Metric::Stoi, stoi(&u.clean, &out.audio).unwrap()),
            (Metric::Sdi, sdi(&u.clean, &out.audio).unwrap()),
        ] {
            records.push(ScoreRecord {
                utterance_id: format!("utt{i:03}"),
                noise_type: "talker+white".into(),
                sir_db: SIR_DB,
                sar_db: 15.0,
                method: "audio-visual".into(),
                metric,
                value,
            });
        }
    }
    RunArtifacts {
        log_csv: log.to_csv(),
        best_epoch: log.best_epoch,
        stopped_early: log.stopped_early,
        scores_csv: scores_to_csv(&records),
        dir,
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut paths: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap())
        })
        .collect()
}

/// Replaying the pipeline from the same seed reproduces the training log,
/// the checkpoint bytes, and the score table exactly.
#[test]
fn a10_identical_seeds_reproduce_identical_artifacts() {
    let t0 = Instant::now();
    let one = seeded_pipeline_run();
    let two = seeded_pipeline_run();
    assert_eq!(one.log_csv, two.log_csv, "training logs differ between replays");
    assert_eq!(one.best_epoch, two.best_epoch);
    assert_eq!(one.stopped_early, two.stopped_early);
    assert_eq!(one.scores_csv, two.scores_csv, "score tables differ between replays");
    let (b1, b2) = (dir_bytes(one.dir.path()), dir_bytes(two.dir.path()));
    assert_eq!(
        b1.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        b2.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        "checkpoint file lists differ"
    );
    for ((name, bytes1), (_, bytes2)) in b1.iter().zip(&b2) {
        assert_eq!(bytes1, bytes2, "checkpoint file {name} differs between replays");
    }
    println!(
        "PASS a10: replayed run reproduced {} log rows, {} checkpoint files, and {} score rows bit for bit, {:.0}s",
        one.log_csv.lines().count(),
        b1.len(),
        one.scores_csv.lines().count(),
        t0.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// Calibration probe, not part of the gate. Runs a single seed of the shared
// experiment and prints scores and wall time so the scale of the real test
// can be tuned without waiting for all five seeds.

#[test]
#[ignore]
fn calibrate_enhancement_comparison() {
    let t0 = Instant::now();
    let train_utts = noisy_corpus(TRAIN_UTTS, UTT_SECONDS, SIR_DB, CORPUS_SEED);
    let test = noisy_corpus(TEST_UTTS, UTT_SECONDS, SIR_DB, TEST_SEED);
    let data = features_of(&train_utts);
    println!(
        "corpus+features: {:.1}s, {} rows",
        t0.elapsed().as_secs_f64(),
        data.len()
    );
    let (mut s, mut d) = (0.0, 0.0);
    for u in &test {
        s += stoi(&u.clean, &u.noisy).unwrap();
        d += sdi(&u.clean, &u.noisy).unwrap();
    }
    println!("noisy baseline: stoi {:.4} sdi {:.4}", s / 10.0, d / 10.0);
    let t1 = Instant::now();
    let run = run_seed(&data, &test, RUN_SEEDS[0]);
    println!(
        "av : first {:.4} best {:.4} (epoch {:2}), stoi {:.4} sdi {:.4}",
        run.av_log.epochs[0].total,
        run.av_log.epochs[run.av_log.best_epoch].total,
        run.av_log.best_epoch,
        run.av_stoi,
        run.av_sdi
    );
    println!(
        "ao : first {:.4} best {:.4} (epoch {:2}), stoi {:.4} sdi {:.4}",
        run.ao_log.epochs[0].total,
        run.ao_log.epochs[run.ao_log.best_epoch].total,
        run.ao_log.best_epoch,
        run.ao_stoi,
        run.ao_sdi
    );
    println!("seed run: {:.1}s, total {:.1}s", t1.elapsed().as_secs_f64(), t0.elapsed().as_secs_f64());
}

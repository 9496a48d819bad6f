use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::nn::{grad_check, FdTarget, ParamRef};

fn rand_batch(b: usize, seed: u64) -> Batch<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Batch {
        audio: Tensor::from_fn(&[b, AUDIO_BINS, AUDIO_CTX, 1], |_| rng.gen_range(-1.0..1.0)),
        visual: Tensor::from_fn(&[b, visual::IMG_H, visual::IMG_W, visual::STACK_C], |_| {
            rng.gen_range(-1.0..1.0)
        }),
    }
}

#[test]
fn merged_widths_follow_the_conv_chain() {
    let av = NetConfig::full(ModelKind::AudioVisual);
    assert_eq!(av.audio_flat(), 119 * 4 * 4);
    assert_eq!(av.audio_flat(), 1904);
    assert_eq!(av.visual_flat(), 2 * 13 * 6);
    assert_eq!(av.merged(), 2060);
    let ao = NetConfig::full(ModelKind::AudioOnly);
    assert_eq!(ao.merged(), 1904);
    let ef = NetConfig::full(ModelKind::EarlyFusion);
    assert_eq!(ef.fused_flat(), 119 * 28 * 4);
    assert_eq!(ef.merged(), 13328);
}

#[test]
fn forward_shapes_for_all_kinds() {
    for kind in [ModelKind::AudioVisual, ModelKind::AudioOnly, ModelKind::EarlyFusion] {
        let mut model: Model<f64> = Model::new(NetConfig::tiny(kind), 3).unwrap();
        let batch = rand_batch(2, 11);
        let out = model.forward(&batch, Phase::Eval, None).unwrap();
        assert_eq!(out.audio.dims(), &[2, AUDIO_BINS]);
        match kind {
            ModelKind::AudioOnly => assert!(out.visual.is_none()),
            _ => assert_eq!(out.visual.as_ref().unwrap().dims(), &[2, VISUAL_OUT]),
        }
    }
}

/// kh*kw*cin*cout weights, cout biases, and two batch-norm vectors.
fn conv_params(kh: usize, kw: usize, cin: usize, cout: usize) -> usize {
    kh * kw * cin * cout + cout + 2 * cout
}

fn dense_params(i: usize, o: usize, bn: bool) -> usize {
    i * o + o + if bn { 2 * o } else { 0 }
}

#[test]
fn parameter_counts_match_the_layer_sums() {
    let cfg = NetConfig::full(ModelKind::AudioVisual);
    let expect = conv_params(12, 2, 1, 10)
        + conv_params(5, 1, 10, 4)
        + conv_params(15, 2, 15, 12)
        + conv_params(2, 2, 12, 10)
        + conv_params(1, 2, 10, 6)
        + dense_params(2060, 1000, true)
        + dense_params(1000, 800, true)
        + dense_params(800, 600, true)
        + dense_params(600, 257, false)
        + dense_params(800, 1500, true)
        + dense_params(1500, 1152, false);
    let model: Model<f32> = Model::new(cfg, 0).unwrap();
    assert_eq!(model.n_params(), expect);

    let ao: Model<f32> = Model::new(NetConfig::full(ModelKind::AudioOnly), 0).unwrap();
    let expect_ao = conv_params(12, 2, 1, 10)
        + conv_params(5, 1, 10, 4)
        + dense_params(1904, 1000, true)
        + dense_params(1000, 800, true)
        + dense_params(800, 600, true)
        + dense_params(600, 257, false);
    assert_eq!(ao.n_params(), expect_ao);

    let ef: Model<f32> = Model::new(NetConfig::full(ModelKind::EarlyFusion), 0).unwrap();
    let expect_ef = conv_params(12, 2, 1, 10)
        + conv_params(5, 1, 10, 4)
        + dense_params(13328, 1000, true)
        + dense_params(1000, 800, true)
        + dense_params(800, 600, true)
        + dense_params(600, 257, false)
        + dense_params(800, 1500, true)
        + dense_params(1500, 1152, false);
    assert_eq!(ef.n_params(), expect_ef);

    // The three sit in the same order of magnitude, with early fusion the
    // largest because its first dense layer sees the widest feature map.
    assert!(ao.n_params() < model.n_params());
    assert!(model.n_params() < ef.n_params());
    let ratio = ef.n_params() as f64 / model.n_params() as f64;
    assert!(ratio < 4.0, "early fusion / audio-visual parameter ratio {ratio}");
}

#[test]
fn same_seed_reproduces_weights() {
    let cfg = NetConfig::tiny(ModelKind::AudioVisual);
    let mut a: Model<f32> = Model::new(cfg, 9).unwrap();
    let mut b: Model<f32> = Model::new(cfg, 9).unwrap();
    let pa = a.params();
    let pb = b.params();
    assert_eq!(pa.len(), pb.len());
    for ((na, ta, _), (nb, tb, _)) in pa.iter().zip(pb.iter()) {
        assert_eq!(na, nb);
        assert_eq!(ta.data(), tb.data(), "{na}");
    }
    drop(pa);
    drop(pb);
    let mut c: Model<f32> = Model::new(cfg, 10).unwrap();
    let differs = a
        .params()
        .iter()
        .zip(c.params().iter())
        .any(|((_, ta, _), (_, tc, _))| ta.data() != tc.data());
    assert!(differs);
}

#[test]
fn parameter_names_are_stable() {
    let mut model: Model<f32> = Model::new(NetConfig::tiny(ModelKind::AudioVisual), 0).unwrap();
    let names: Vec<String> = model.params().iter().map(|(n, _, _)| n.clone()).collect();
    let mut want: Vec<String> = Vec::new();
    for p in ["a_conv1", "a_conv2", "v_conv1", "v_conv2", "v_conv3"] {
        for s in ["kern", "bias", "gamma", "beta"] {
            want.push(format!("{p}.{s}"));
        }
    }
    for p in ["fc1", "fc2", "a_embed"] {
        for s in ["w", "b", "gamma", "beta"] {
            want.push(format!("{p}.{s}"));
        }
    }
    want.push("proj_a.w".into());
    want.push("proj_a.b".into());
    for s in ["w", "b", "gamma", "beta"] {
        want.push(format!("v_embed.{s}"));
    }
    want.push("proj_v.w".into());
    want.push("proj_v.b".into());
    assert_eq!(names, want);
}

#[test]
fn audio_only_ignores_the_visual_input() {
    let mut model: Model<f64> = Model::new(NetConfig::tiny(ModelKind::AudioOnly), 4).unwrap();
    let a = rand_batch(2, 1);
    let mut b = rand_batch(2, 1);
    b.visual = Tensor::filled(b.visual.dims(), 123.0);
    let ya = model.forward(&a, Phase::Eval, None).unwrap();
    let yb = model.forward(&b, Phase::Eval, None).unwrap();
    assert_eq!(ya.audio.data(), yb.audio.data());
}

#[test]
fn early_fusion_plane_layout() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let audio: Tensor<f64> = Tensor::from_fn(&[1, AUDIO_BINS, AUDIO_CTX, 1], |_| rng.gen_range(-1.0..1.0));
    let stack: Tensor<f64> =
        Tensor::from_fn(&[1, visual::IMG_H, visual::IMG_W, visual::STACK_C], |_| rng.gen_range(-1.0..1.0));
    let fused = fuse_batch(&audio, &stack).unwrap();
    assert_eq!(fused.dims(), &[1, AUDIO_BINS, FUSED_COLS, 1]);
    // Audio occupies the leading columns untouched.
    assert_eq!(fused.at(&[0, 100, 3, 0]), audio.at(&[0, 100, 3, 0]));
    // Stack channel 3*frame + rgb lands in the band for that color and
    // frame: rgb=1, frame=1 is channel 4, band rows 80 + 16 = 96.
    assert_eq!(fused.at(&[0, 96 + 7, 5 + 11, 0]), stack.at(&[0, 7, 11, 4]));
    // First color, first frame starts at row 0.
    assert_eq!(fused.at(&[0, 2, 5, 0]), stack.at(&[0, 2, 0, 0]));
    // The last 17 rows of the image columns stay zero.
    for y in 240..AUDIO_BINS {
        for x in AUDIO_CTX..FUSED_COLS {
            assert_eq!(fused.at(&[0, y, x, 0]), 0.0);
        }
    }
}

#[test]
fn stack_to_plane_swaps_the_spatial_axes() {
    let stack: Tensor<f64> = Tensor::from_fn_idx(
        &[1, visual::IMG_H, visual::IMG_W, visual::STACK_C],
        |ix| (ix[1] * 1000 + ix[2] * 20 + ix[3]) as f64,
    );
    let plane = stack_to_plane(&stack).unwrap();
    assert_eq!(plane.dims(), &[1, visual::IMG_W, visual::IMG_H, visual::STACK_C]);
    assert_eq!(plane.at(&[0, 21, 9, 5]), stack.at(&[0, 9, 21, 5]));
}

#[test]
fn joint_loss_combines_exactly() {
    let out = Outputs {
        audio: Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.5, 0.25]).unwrap(),
        visual: Some(Tensor::from_vec(&[2, 3], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap()),
    };
    let ta = Tensor::from_vec(&[2, 2], vec![0.5, 0.5, 0.0, 0.0]).unwrap();
    let tv = Tensor::from_vec(&[2, 3], vec![0.0; 6]).unwrap();
    let mu = 0.7;
    let jl = joint_loss(&out, &ta, Some(&tv), mu).unwrap();
    assert_eq!(jl.total, jl.audio + mu * jl.visual);
    assert!(jl.audio > 0.0 && jl.visual > 0.0);
    // Visual gradient carries the mu scale.
    let dv = jl.d_visual.as_ref().unwrap();
    let want_dv: f64 = 0.7 * 2.0 * 0.1 / 2.0;
    assert!((dv.at(&[0, 0]) - want_dv).abs() < 1e-12);

    assert!(joint_loss(&out, &ta, Some(&tv), -0.1).is_err());
    // A missing target just zeroes the visual term.
    let jl0 = joint_loss(&out, &ta, None, mu).unwrap();
    assert_eq!(jl0.visual, 0.0);
    assert_eq!(jl0.total, jl0.audio);
    assert!(jl0.d_visual.is_none());
}

#[test]
fn training_with_batch_one_is_rejected() {
    let mut model: Model<f64> = Model::new(NetConfig::tiny(ModelKind::AudioVisual), 2).unwrap();
    let batch = rand_batch(1, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(model.forward(&batch, Phase::Train, Some(&mut rng)).is_err());
    assert!(model.forward(&batch, Phase::Eval, None).is_ok());
}

struct Harness {
    model: Model<f64>,
    batch: Batch<f64>,
    ta: Tensor<f64>,
    tv: Tensor<f64>,
    mu: f64,
}

impl Harness {
    fn new(kind: ModelKind, mu: f64) -> Harness {
        let model = Model::new(NetConfig::tiny(kind), 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        Harness {
            model,
            batch: rand_batch(3, 29),
            ta: Tensor::from_fn(&[3, AUDIO_BINS], |_| rng.gen_range(-1.0..1.0)),
            tv: Tensor::from_fn(&[3, VISUAL_OUT], |_| rng.gen_range(-1.0..1.0)),
            mu,
        }
    }

    fn run(&mut self) -> Result<JointLoss<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let out = self.model.forward(&self.batch, Phase::Train, Some(&mut rng))?;
        let tv = self.model.kind().has_visual_head().then_some(&self.tv);
        joint_loss(&out, &self.ta, tv, self.mu)
    }
}

impl FdTarget<f64> for Harness {
    fn eval_loss(&mut self) -> Result<f64> {
        Ok(self.run()?.total)
    }

    fn refresh_grads(&mut self) -> Result<()> {
        self.model.zero_grads();
        let jl = self.run()?;
        self.model.backward(&jl.d_audio, jl.d_visual.as_ref())
    }

    fn params(&mut self) -> Vec<ParamRef<'_, f64>> {
        self.model.params()
    }
}

#[test]
fn whole_network_gradients_match_finite_differences() {
    for (kind, mu) in [
        (ModelKind::AudioVisual, 0.5),
        (ModelKind::AudioOnly, 0.0),
        (ModelKind::EarlyFusion, 0.25),
    ] {
        let mut h = Harness::new(kind, mu);
        let report = grad_check(&mut h, 3, 1234).unwrap();
        assert!(report.checked > 50, "{kind}: only {} checks", report.checked);
        assert!(
            report.max_rel_err < 1e-3,
            "{kind}: max relative error {} at {}",
            report.max_rel_err,
            report.worst
        );
    }
}

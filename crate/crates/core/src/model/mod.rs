//! Network assembly for the speech enhancement models.
//!
//! Three architectures share one struct:
//!
//! * audio-visual: separate convolutional branches over the log-power
//!   context block and the mouth image stack, concatenated into shared
//!   fully connected layers that split again into an audio head and a
//!   visual head.
//! * audio-only: the audio branch and audio head alone.
//! * early-fusion: audio and images pasted into one wide plane processed
//!   by a single convolutional branch, with both output heads.
//!
//! Activations flow as `[batch, h, w, c]` tensors; every hidden layer is
//! batch normalized, the two shared dense layers are sigmoid with dropout,
//! embeddings and output projections are linear.

pub mod checkpoint;
pub mod pipeline;

pub use checkpoint::{load_model, save_model};
pub use pipeline::{
    enhance_utterance, extract_features, reconstruct, Enhanced, UttFeatures,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{mse_loss, Activation, Conv2d, Dense, InitMode, MaxPool, ParamRef, Phase, StateRef};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::{dsp, visual};

pub const AUDIO_BINS: usize = dsp::BINS;
pub const AUDIO_CTX: usize = dsp::CONTEXT_WIDTH;
pub const VISUAL_OUT: usize = visual::IMG_LEN;
/// Width of the early-fusion input plane: audio context columns followed by
/// the mouth image width.
pub const FUSED_COLS: usize = AUDIO_CTX + visual::IMG_W;

/// Audio branch kernels: tall narrow first stage, then a frequency-only
/// second stage after pooling.
const A_K1: (usize, usize) = (12, 2);
const A_K2: (usize, usize) = (5, 1);
/// Visual branch kernels over the image plane held width-up (h = 24).
const V_K1: (usize, usize) = (15, 2);
const V_K2: (usize, usize) = (2, 2);
const V_K3: (usize, usize) = (1, 2);
/// All pooling halves the first spatial axis.
const POOL: (usize, usize) = (2, 1);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    AudioVisual,
    AudioOnly,
    EarlyFusion,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::AudioVisual => "audio-visual",
            ModelKind::AudioOnly => "audio-only",
            ModelKind::EarlyFusion => "early-fusion",
        }
    }

    pub fn has_visual_head(self) -> bool {
        !matches!(self, ModelKind::AudioOnly)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "audio-visual" => Ok(ModelKind::AudioVisual),
            "audio-only" => Ok(ModelKind::AudioOnly),
            "early-fusion" => Ok(ModelKind::EarlyFusion),
            other => Err(Error::invalid("model kind", format!("unknown kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Layer widths. `full()` is the reference configuration; `tiny()` keeps
/// the same wiring at a fraction of the width so tests can train real
/// models in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    pub kind: ModelKind,
    pub init: InitMode,
    pub dropout: f64,
    pub a_filters1: usize,
    pub a_filters2: usize,
    pub v_filters1: usize,
    pub v_filters2: usize,
    pub v_filters3: usize,
    pub fc1: usize,
    pub fc2: usize,
    pub a_embed: usize,
    pub v_embed: usize,
}

impl NetConfig {
    pub fn full(kind: ModelKind) -> Self {
        NetConfig {
            kind,
            init: InitMode::Uniform,
            dropout: 0.1,
            a_filters1: 10,
            a_filters2: 4,
            v_filters1: 12,
            v_filters2: 10,
            v_filters3: 6,
            fc1: 1000,
            fc2: 800,
            a_embed: 600,
            v_embed: 1500,
        }
    }

    pub fn tiny(kind: ModelKind) -> Self {
        NetConfig {
            kind,
            init: InitMode::Scaled,
            dropout: 0.1,
            a_filters1: 4,
            a_filters2: 2,
            v_filters1: 4,
            v_filters2: 3,
            v_filters3: 2,
            fc1: 64,
            fc2: 48,
            a_embed: 32,
            v_embed: 64,
        }
    }

    /// Output height and width of the audio (or fused) convolution chain
    /// for an input of `h` rows and `w` columns.
    fn conv_chain_hw(h: usize, w: usize) -> (usize, usize) {
        let (h, w) = (h - A_K1.0 + 1, w - A_K1.1 + 1);
        let (h, w) = (h / POOL.0, w / POOL.1);
        (h - A_K2.0 + 1, w - A_K2.1 + 1)
    }

    pub fn audio_flat(&self) -> usize {
        let (h, w) = Self::conv_chain_hw(AUDIO_BINS, AUDIO_CTX);
        h * w * self.a_filters2
    }

    pub fn visual_flat(&self) -> usize {
        // The stack is convolved width-up: 24 rows by 16 columns.
        let (h, w) = (visual::IMG_W - V_K1.0 + 1, visual::IMG_H - V_K1.1 + 1);
        let (h, w) = (h / POOL.0, w / POOL.1);
        let (h, w) = (h - V_K2.0 + 1, w - V_K2.1 + 1);
        let (h, w) = (h / POOL.0, w / POOL.1);
        let (h, w) = (h - V_K3.0 + 1, w - V_K3.1 + 1);
        h * w * self.v_filters3
    }

    pub fn fused_flat(&self) -> usize {
        let (h, w) = Self::conv_chain_hw(AUDIO_BINS, FUSED_COLS);
        h * w * self.a_filters2
    }

    /// Width of the concatenated features entering the first dense layer.
    pub fn merged(&self) -> usize {
        match self.kind {
            ModelKind::AudioVisual => self.audio_flat() + self.visual_flat(),
            ModelKind::AudioOnly => self.audio_flat(),
            ModelKind::EarlyFusion => self.fused_flat(),
        }
    }
}

/// One training batch: normalized log-power context blocks and normalized
/// mouth image stacks. Audio-only models ignore `visual`.
pub struct Batch<T: Scalar> {
    pub audio: Tensor<T>,
    pub visual: Tensor<T>,
}

pub struct Outputs<T: Scalar> {
    /// `[batch, 257]` normalized log-power spectra.
    pub audio: Tensor<T>,
    /// `[batch, 1152]` normalized mouth image pixels, absent on audio-only.
    pub visual: Option<Tensor<T>>,
}

pub struct Model<T: Scalar> {
    pub cfg: NetConfig,
    a_conv1: Conv2d<T>,
    a_pool: MaxPool,
    a_conv2: Conv2d<T>,
    v_conv1: Option<Conv2d<T>>,
    v_pool1: MaxPool,
    v_conv2: Option<Conv2d<T>>,
    v_pool2: MaxPool,
    v_conv3: Option<Conv2d<T>>,
    fc1: Dense<T>,
    fc2: Dense<T>,
    a_embed: Dense<T>,
    proj_a: Dense<T>,
    v_embed: Option<Dense<T>>,
    proj_v: Option<Dense<T>>,
    last_batch: usize,
}

impl<T: Scalar> Model<T> {
    /// Build a model with freshly initialized parameters. Construction
    /// order is fixed, so a given `seed` always produces the same weights.
    pub fn new(cfg: NetConfig, seed: u64) -> Result<Model<T>> {
        if !(0.0..1.0).contains(&cfg.dropout) {
            return Err(Error::invalid("model", format!("dropout {} outside [0, 1)", cfg.dropout)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = cfg.init;
        let visual_branch = cfg.kind == ModelKind::AudioVisual;
        let visual_head = cfg.kind.has_visual_head();

        let a_conv1 = Conv2d::new(A_K1.0, A_K1.1, 1, cfg.a_filters1, true, init, &mut rng);
        let a_conv2 = Conv2d::new(A_K2.0, A_K2.1, cfg.a_filters1, cfg.a_filters2, true, init, &mut rng);
        let v_conv1 = visual_branch
            .then(|| Conv2d::new(V_K1.0, V_K1.1, visual::STACK_C, cfg.v_filters1, true, init, &mut rng));
        let v_conv2 = visual_branch
            .then(|| Conv2d::new(V_K2.0, V_K2.1, cfg.v_filters1, cfg.v_filters2, true, init, &mut rng));
        let v_conv3 = visual_branch
            .then(|| Conv2d::new(V_K3.0, V_K3.1, cfg.v_filters2, cfg.v_filters3, true, init, &mut rng));
        let fc1 = Dense::new(cfg.merged(), cfg.fc1, Activation::Sigmoid, true, cfg.dropout, init, &mut rng);
        let fc2 = Dense::new(cfg.fc1, cfg.fc2, Activation::Sigmoid, true, cfg.dropout, init, &mut rng);
        let a_embed = Dense::new(cfg.fc2, cfg.a_embed, Activation::Linear, true, 0.0, init, &mut rng);
        let proj_a = Dense::new(cfg.a_embed, AUDIO_BINS, Activation::Linear, false, 0.0, init, &mut rng);
        let v_embed = visual_head
            .then(|| Dense::new(cfg.fc2, cfg.v_embed, Activation::Linear, true, 0.0, init, &mut rng));
        let proj_v = visual_head
            .then(|| Dense::new(cfg.v_embed, VISUAL_OUT, Activation::Linear, false, 0.0, init, &mut rng));

        Ok(Model {
            cfg,
            a_conv1,
            a_pool: MaxPool::new(POOL.0, POOL.1),
            a_conv2,
            v_conv1,
            v_pool1: MaxPool::new(POOL.0, POOL.1),
            v_conv2,
            v_pool2: MaxPool::new(POOL.0, POOL.1),
            v_conv3,
            fc1,
            fc2,
            a_embed,
            proj_a,
            v_embed,
            proj_v,
            last_batch: 0,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.cfg.kind
    }

    fn audio_conv_chain(&mut self, x: &Tensor<T>, phase: Phase) -> Result<Tensor<T>> {
        let y = self.a_conv1.forward(x, phase)?;
        let y = self.a_pool.forward(&y, phase)?;
        let y = self.a_conv2.forward(&y, phase)?;
        let b = y.dims()[0];
        let flat = y.len() / b;
        y.reshape(&[b, flat])
    }

    fn visual_conv_chain(&mut self, plane: &Tensor<T>, phase: Phase) -> Result<Tensor<T>> {
        let y = self.v_conv1.as_mut().unwrap().forward(plane, phase)?;
        let y = self.v_pool1.forward(&y, phase)?;
        let y = self.v_conv2.as_mut().unwrap().forward(&y, phase)?;
        let y = self.v_pool2.forward(&y, phase)?;
        let y = self.v_conv3.as_mut().unwrap().forward(&y, phase)?;
        let b = y.dims()[0];
        let flat = y.len() / b;
        y.reshape(&[b, flat])
    }

    /// `rng` drives the dropout masks and must be present when training.
    pub fn forward(
        &mut self,
        batch: &Batch<T>,
        phase: Phase,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Outputs<T>> {
        let [b, bins, ctx, one] = *batch.audio.dims() else {
            return Err(Error::shape("model", format!("audio batch dims {:?}", batch.audio.dims())));
        };
        if bins != AUDIO_BINS || ctx != AUDIO_CTX || one != 1 {
            return Err(Error::shape(
                "model",
                format!("audio batch dims {:?}, expected [n, {AUDIO_BINS}, {AUDIO_CTX}, 1]", batch.audio.dims()),
            ));
        }
        let merged = match self.cfg.kind {
            ModelKind::AudioVisual => {
                let a = self.audio_conv_chain(&batch.audio, phase)?;
                let plane = stack_to_plane(&batch.visual)?;
                let v = self.visual_conv_chain(&plane, phase)?;
                concat_cols(&a, &v)?
            }
            ModelKind::AudioOnly => self.audio_conv_chain(&batch.audio, phase)?,
            ModelKind::EarlyFusion => {
                let fused = fuse_batch(&batch.audio, &batch.visual)?;
                self.audio_conv_chain(&fused, phase)?
            }
        };
        let h1 = self.fc1.forward(&merged, phase, rng.as_deref_mut())?;
        let h2 = self.fc2.forward(&h1, phase, rng.as_deref_mut())?;
        let ea = self.a_embed.forward(&h2, phase, None)?;
        let audio = self.proj_a.forward(&ea, phase, None)?;
        let visual = match (&mut self.v_embed, &mut self.proj_v) {
            (Some(ve), Some(pv)) => {
                let ev = ve.forward(&h2, phase, None)?;
                Some(pv.forward(&ev, phase, None)?)
            }
            _ => None,
        };
        self.last_batch = if phase == Phase::Train { b } else { 0 };
        Ok(Outputs { audio, visual })
    }

    /// Accumulate parameter gradients from the output-head gradients.
    /// A model with a visual head accepts `d_visual: None`, leaving the
    /// visual head untouched; input gradients are discarded.
    pub fn backward(&mut self, d_audio: &Tensor<T>, d_visual: Option<&Tensor<T>>) -> Result<()> {
        if self.last_batch == 0 {
            return Err(Error::invalid("model", "backward before training forward"));
        }
        let d_ea = self.proj_a.backward(d_audio)?;
        let mut d_h2 = self.a_embed.backward(&d_ea)?;
        if let Some(dv) = d_visual {
            let (Some(pv), Some(ve)) = (&mut self.proj_v, &mut self.v_embed) else {
                return Err(Error::invalid("model", "visual gradient on a model without a visual head"));
            };
            let d_ev = pv.backward(dv)?;
            let d_h2v = ve.backward(&d_ev)?;
            d_h2.add_scaled(&d_h2v, T::one());
        }
        let d_h1 = self.fc2.backward(&d_h2)?;
        let d_merged = self.fc1.backward(&d_h1)?;
        let b = self.last_batch;
        match self.cfg.kind {
            ModelKind::AudioVisual => {
                let na = self.cfg.audio_flat();
                let nv = self.cfg.visual_flat();
                let (da, dv) = split_cols(&d_merged, na, nv)?;
                self.audio_conv_backward(da, b)?;
                self.visual_conv_backward(dv, b)?;
            }
            ModelKind::AudioOnly => {
                self.audio_conv_backward(d_merged, b)?;
            }
            ModelKind::EarlyFusion => {
                self.audio_conv_backward(d_merged, b)?;
            }
        }
        Ok(())
    }

    fn audio_conv_backward(&mut self, d_flat: Tensor<T>, b: usize) -> Result<()> {
        let f2 = self.cfg.a_filters2;
        let spatial = d_flat.len() / b / f2;
        // Recover [h, w] of the second convolution's output.
        let (h, w) = match self.cfg.kind {
            ModelKind::EarlyFusion => NetConfig::conv_chain_hw(AUDIO_BINS, FUSED_COLS),
            _ => NetConfig::conv_chain_hw(AUDIO_BINS, AUDIO_CTX),
        };
        debug_assert_eq!(spatial, h * w);
        let d = d_flat.reshape(&[b, h, w, f2])?;
        let d = self.a_conv2.backward(&d)?;
        let d = self.a_pool.backward(&d)?;
        self.a_conv1.backward(&d)?;
        Ok(())
    }

    fn visual_conv_backward(&mut self, d_flat: Tensor<T>, b: usize) -> Result<()> {
        let f3 = self.cfg.v_filters3;
        let flat = self.cfg.visual_flat() / f3;
        let (h, w) = (2, flat / 2);
        let d = d_flat.reshape(&[b, h, w, f3])?;
        let d = self.v_conv3.as_mut().unwrap().backward(&d)?;
        let d = self.v_pool2.backward(&d)?;
        let d = self.v_conv2.as_mut().unwrap().backward(&d)?;
        let d = self.v_pool1.backward(&d)?;
        self.v_conv1.as_mut().unwrap().backward(&d)?;
        Ok(())
    }

    /// All trainable tensors with their gradients, names prefixed by layer,
    /// always in the same order.
    pub fn params(&mut self) -> Vec<ParamRef<'_, T>> {
        fn add<'a, T: Scalar>(out: &mut Vec<ParamRef<'a, T>>, prefix: &str, items: Vec<ParamRef<'a, T>>) {
            for (name, p, g) in items {
                out.push((format!("{prefix}.{name}"), p, g));
            }
        }
        let mut out = Vec::new();
        add(&mut out, "a_conv1", self.a_conv1.params());
        add(&mut out, "a_conv2", self.a_conv2.params());
        if let Some(l) = self.v_conv1.as_mut() {
            add(&mut out, "v_conv1", l.params());
        }
        if let Some(l) = self.v_conv2.as_mut() {
            add(&mut out, "v_conv2", l.params());
        }
        if let Some(l) = self.v_conv3.as_mut() {
            add(&mut out, "v_conv3", l.params());
        }
        add(&mut out, "fc1", self.fc1.params());
        add(&mut out, "fc2", self.fc2.params());
        add(&mut out, "a_embed", self.a_embed.params());
        add(&mut out, "proj_a", self.proj_a.params());
        if let Some(l) = self.v_embed.as_mut() {
            add(&mut out, "v_embed", l.params());
        }
        if let Some(l) = self.proj_v.as_mut() {
            add(&mut out, "proj_v", l.params());
        }
        out
    }

    /// Batch-norm running statistics, named like `params`.
    pub fn state(&mut self) -> Vec<StateRef<'_, T>> {
        fn add<'a, T: Scalar>(out: &mut Vec<StateRef<'a, T>>, prefix: &str, items: Vec<StateRef<'a, T>>) {
            for (name, t) in items {
                out.push((format!("{prefix}.{name}"), t));
            }
        }
        let mut out = Vec::new();
        add(&mut out, "a_conv1", self.a_conv1.state());
        add(&mut out, "a_conv2", self.a_conv2.state());
        if let Some(l) = self.v_conv1.as_mut() {
            add(&mut out, "v_conv1", l.state());
        }
        if let Some(l) = self.v_conv2.as_mut() {
            add(&mut out, "v_conv2", l.state());
        }
        if let Some(l) = self.v_conv3.as_mut() {
            add(&mut out, "v_conv3", l.state());
        }
        add(&mut out, "fc1", self.fc1.state());
        add(&mut out, "fc2", self.fc2.state());
        add(&mut out, "a_embed", self.a_embed.state());
        add(&mut out, "proj_a", self.proj_a.state());
        if let Some(l) = self.v_embed.as_mut() {
            add(&mut out, "v_embed", l.state());
        }
        if let Some(l) = self.proj_v.as_mut() {
            add(&mut out, "proj_v", l.state());
        }
        out
    }

    pub fn zero_grads(&mut self) {
        for (_, _, g) in self.params() {
            g.fill(T::zero());
        }
    }

    /// Freeze or release the winner maps of every pooling layer this kind
    /// of model runs; see [`MaxPool::pin`]. Freezing requires a prior
    /// training forward.
    pub fn pin_pools(&mut self, on: bool) -> Result<()> {
        self.a_pool.pin(on)?;
        if self.cfg.kind == ModelKind::AudioVisual {
            self.v_pool1.pin(on)?;
            self.v_pool2.pin(on)?;
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        let mut n = self.a_conv1.n_params() + self.a_conv2.n_params();
        for l in [&self.v_conv1, &self.v_conv2, &self.v_conv3].into_iter().flatten() {
            n += l.n_params();
        }
        n += self.fc1.n_params() + self.fc2.n_params();
        n += self.a_embed.n_params() + self.proj_a.n_params();
        for l in [&self.v_embed, &self.proj_v].into_iter().flatten() {
            n += l.n_params();
        }
        n
    }
}

/// Reorient a `[batch, 16, 24, 15]` image stack into the `[batch, 24, 16, 15]`
/// plane the visual convolutions run on (image width becomes the tall axis).
pub fn stack_to_plane<T: Scalar>(stack: &Tensor<T>) -> Result<Tensor<T>> {
    let [b, h, w, c] = *stack.dims() else {
        return Err(Error::shape("stack_to_plane", format!("dims {:?}", stack.dims())));
    };
    if h != visual::IMG_H || w != visual::IMG_W || c != visual::STACK_C {
        return Err(Error::shape(
            "stack_to_plane",
            format!("dims {:?}, expected [n, {}, {}, {}]", stack.dims(), visual::IMG_H, visual::IMG_W, visual::STACK_C),
        ));
    }
    let sd = stack.data();
    let mut out = vec![T::zero(); sd.len()];
    for bi in 0..b {
        for y in 0..h {
            for x in 0..w {
                let src = ((bi * h + y) * w + x) * c;
                let dst = ((bi * w + x) * h + y) * c;
                out[dst..dst + c].copy_from_slice(&sd[src..src + c]);
            }
        }
    }
    Tensor::from_vec(&[b, w, h, c], out)
}

/// Paste a batch of audio blocks and image stacks into the early-fusion
/// plane `[batch, 257, 29, 1]`: audio in columns 0..5, then each of the 15
/// stack channels as a 16-row band (all five context frames of the red
/// channel first, then green, then blue), rows 240..257 left zero.
pub fn fuse_batch<T: Scalar>(audio: &Tensor<T>, stacks: &Tensor<T>) -> Result<Tensor<T>> {
    let [b, bins, ctx, _] = *audio.dims() else {
        return Err(Error::shape("fuse", format!("audio dims {:?}", audio.dims())));
    };
    let [bv, h, w, c] = *stacks.dims() else {
        return Err(Error::shape("fuse", format!("stack dims {:?}", stacks.dims())));
    };
    if bv != b || h != visual::IMG_H || w != visual::IMG_W || c != visual::STACK_C {
        return Err(Error::shape("fuse", format!("stack dims {:?} for batch {b}", stacks.dims())));
    }
    let mut out = Tensor::zeros(&[b, bins, FUSED_COLS, 1]);
    for bi in 0..b {
        for y in 0..bins {
            for x in 0..ctx {
                let v = audio.at(&[bi, y, x, 0]);
                out.set(&[bi, y, x, 0], v);
            }
        }
        let frames = visual::STACK_C / visual::IMG_C;
        for ch in 0..c {
            let (rgb, frame) = (ch % visual::IMG_C, ch / visual::IMG_C);
            let band = rgb * (frames * visual::IMG_H) + frame * visual::IMG_H;
            for yy in 0..h {
                for xx in 0..w {
                    let v = stacks.at(&[bi, yy, xx, ch]);
                    out.set(&[bi, band + yy, ctx + xx, 0], v);
                }
            }
        }
    }
    Ok(out)
}

fn concat_cols<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let ([ba, na], [bb, nb]) = (two_dims(a, "concat")?, two_dims(b, "concat")?);
    if ba != bb {
        return Err(Error::shape("concat", format!("batch {ba} vs {bb}")));
    }
    let mut data = Vec::with_capacity(ba * (na + nb));
    for i in 0..ba {
        data.extend_from_slice(&a.data()[i * na..(i + 1) * na]);
        data.extend_from_slice(&b.data()[i * nb..(i + 1) * nb]);
    }
    Tensor::from_vec(&[ba, na + nb], data)
}

fn split_cols<T: Scalar>(m: &Tensor<T>, na: usize, nb: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let [b, n] = two_dims(m, "split")?;
    if n != na + nb {
        return Err(Error::shape("split", format!("width {n} != {na} + {nb}")));
    }
    let mut a = Vec::with_capacity(b * na);
    let mut bb = Vec::with_capacity(b * nb);
    for i in 0..b {
        a.extend_from_slice(&m.data()[i * n..i * n + na]);
        bb.extend_from_slice(&m.data()[i * n + na..(i + 1) * n]);
    }
    Ok((Tensor::from_vec(&[b, na], a)?, Tensor::from_vec(&[b, nb], bb)?))
}

fn two_dims<T: Scalar>(t: &Tensor<T>, op: &'static str) -> Result<[usize; 2]> {
    match *t.dims() {
        [a, b] => Ok([a, b]),
        _ => Err(Error::shape(op, format!("expected 2-d, got {:?}", t.dims()))),
    }
}

pub struct JointLoss<T: Scalar> {
    pub total: f64,
    pub audio: f64,
    pub visual: f64,
    pub d_audio: Tensor<T>,
    pub d_visual: Option<Tensor<T>>,
}

/// Combine the two head losses as `total = audio + mu * visual` and scale
/// the visual gradient by `mu`. The visual term is zero whenever the model
/// has no visual head or no visual target was supplied.
pub fn joint_loss<T: Scalar>(
    out: &Outputs<T>,
    target_audio: &Tensor<T>,
    target_visual: Option<&Tensor<T>>,
    mu: f64,
) -> Result<JointLoss<T>> {
    if mu < 0.0 || !mu.is_finite() {
        return Err(Error::invalid("joint loss", format!("visual weight {mu} must be >= 0")));
    }
    let (audio, d_audio) = mse_loss(&out.audio, target_audio)?;
    let (visual, d_visual) = match (&out.visual, target_visual) {
        (Some(pred), Some(tgt)) => {
            let (lv, mut dv) = mse_loss(pred, tgt)?;
            dv.scale(T::of(mu));
            (lv, Some(dv))
        }
        _ => (0.0, None),
    };
    Ok(JointLoss { total: audio + mu * visual, audio, visual, d_audio, d_visual })
}

#[cfg(test)]
mod tests;

use crate::error::{Error, Result};
use crate::model::{Batch, UttFeatures, AUDIO_BINS, AUDIO_CTX};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Flattened training rows: every aligned frame of every utterance, with
/// both targets. Batches are assembled by row index, so epoch shuffles
/// never move the underlying data.
pub struct Dataset<T: Scalar> {
    audio: Tensor<T>,
    visual: Tensor<T>,
    target_audio: Tensor<T>,
    target_visual: Tensor<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn from_features(utts: &[UttFeatures<T>]) -> Result<Self> {
        if utts.is_empty() {
            return Err(Error::invalid("dataset", "no utterances"));
        }
        let mut audio = Vec::new();
        let mut visual = Vec::new();
        let mut ta = Vec::new();
        let mut tv = Vec::new();
        let visual_rest = utts[0].visual.dims()[1..].to_vec();
        let mut rows = 0;
        for (i, u) in utts.iter().enumerate() {
            let Some(t_audio) = &u.target_audio else {
                return Err(Error::invalid(
                    "dataset",
                    format!("utterance {} has no clean targets; extract with a reference", i),
                ));
            };
            if u.visual.dims()[1..] != visual_rest[..] {
                return Err(Error::shape(
                    "dataset",
                    format!("utterance {} visual dims {:?}", i, u.visual.dims()),
                ));
            }
            rows += u.n_frames();
            audio.extend_from_slice(u.audio.data());
            visual.extend_from_slice(u.visual.data());
            ta.extend_from_slice(t_audio.data());
            tv.extend_from_slice(u.target_visual.data());
        }
        let mut vdims = vec![rows];
        vdims.extend_from_slice(&visual_rest);
        Self::from_parts(
            Tensor::from_vec(&[rows, AUDIO_BINS, AUDIO_CTX, 1], audio)?,
            Tensor::from_vec(&vdims, visual)?,
            Tensor::from_vec(&[rows, AUDIO_BINS], ta)?,
            Tensor::from_vec(&[rows, tv.len() / rows], tv)?,
        )
    }

    /// Builds a dataset from already-shaped tensors; the leading dimension
    /// of all four must agree.
    pub fn from_parts(
        audio: Tensor<T>,
        visual: Tensor<T>,
        target_audio: Tensor<T>,
        target_visual: Tensor<T>,
    ) -> Result<Self> {
        let n = audio.dims()[0];
        if *audio.dims() != [n, AUDIO_BINS, AUDIO_CTX, 1] {
            return Err(Error::shape("dataset", format!("audio dims {:?}", audio.dims())));
        }
        for (name, t) in
            [("visual", &visual), ("target_audio", &target_audio), ("target_visual", &target_visual)]
        {
            if t.dims().first() != Some(&n) {
                return Err(Error::shape(
                    "dataset",
                    format!("{} rows {:?} do not match {} audio rows", name, t.dims(), n),
                ));
            }
        }
        if target_audio.dims() != &[n, AUDIO_BINS] {
            return Err(Error::shape(
                "dataset",
                format!("target_audio dims {:?}", target_audio.dims()),
            ));
        }
        Ok(Dataset { audio, visual, target_audio, target_visual })
    }

    pub fn len(&self) -> usize {
        self.audio.dims()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Copies the given rows into a fresh batch with its targets.
    pub fn gather(&self, rows: &[usize]) -> (Batch<T>, Tensor<T>, Tensor<T>) {
        let b = rows.len();
        let take = |src: &Tensor<T>| -> Tensor<T> {
            let stride = src.len() / src.dims()[0];
            let mut dims = src.dims().to_vec();
            dims[0] = b;
            let mut data = Vec::with_capacity(b * stride);
            for &r in rows {
                data.extend_from_slice(&src.data()[r * stride..(r + 1) * stride]);
            }
            Tensor::from_vec(&dims, data).expect("row gather preserves the shape")
        };
        (
            Batch { audio: take(&self.audio), visual: take(&self.visual) },
            take(&self.target_audio),
            take(&self.target_visual),
        )
    }
}

//! Model persistence: one directory per checkpoint with a plain-text
//! manifest and one tensor file per parameter.
//!
//! The manifest records the configuration as `key value` lines followed by
//! `param <name> <file>` and `state <name> <file>` lines in parameter
//! order. Loading rebuilds the model from the configuration and requires
//! the tensor set to match exactly.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Model, ModelKind, NetConfig};
use crate::nn::InitMode;
use crate::scalar::Scalar;
use crate::tnsr::{read_tnsr, write_tnsr};

pub const MANIFEST: &str = "manifest.txt";

fn tensor_file(name: &str) -> String {
    format!("{name}.tnsr")
}

pub fn save_model<T: Scalar>(dir: &Path, model: &mut Model<T>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg = model.cfg;
    let mut manifest = String::new();
    manifest.push_str(&format!("kind {}\n", cfg.kind));
    manifest.push_str(&format!("init {}\n", cfg.init.as_str()));
    manifest.push_str(&format!("dropout {}\n", cfg.dropout));
    for (key, v) in [
        ("a_filters1", cfg.a_filters1),
        ("a_filters2", cfg.a_filters2),
        ("v_filters1", cfg.v_filters1),
        ("v_filters2", cfg.v_filters2),
        ("v_filters3", cfg.v_filters3),
        ("fc1", cfg.fc1),
        ("fc2", cfg.fc2),
        ("a_embed", cfg.a_embed),
        ("v_embed", cfg.v_embed),
    ] {
        manifest.push_str(&format!("{key} {v}\n"));
    }
    for (name, tensor, _) in model.params() {
        let file = tensor_file(&name);
        write_tnsr(&dir.join(&file), &*tensor)?;
        manifest.push_str(&format!("param {name} {file}\n"));
    }
    for (name, tensor) in model.state() {
        let file = tensor_file(&name);
        write_tnsr(&dir.join(&file), &*tensor)?;
        manifest.push_str(&format!("state {name} {file}\n"));
    }
    let path = dir.join(MANIFEST);
    std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

pub fn load_model<T: Scalar>(dir: &Path) -> Result<Model<T>> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let fail = |detail: String| Error::format(&path, detail);

    let mut kind = None;
    let mut init = None;
    let mut dropout = None;
    let mut sizes = std::collections::HashMap::new();
    let mut tensors: Vec<(bool, String, String)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap();
        match key {
            "kind" => {
                let v = parts.next().ok_or_else(|| fail(format!("line {}: missing kind", ln + 1)))?;
                kind = Some(v.parse::<ModelKind>()?);
            }
            "init" => {
                let v = parts.next().ok_or_else(|| fail(format!("line {}: missing init", ln + 1)))?;
                init = Some(v.parse::<InitMode>()?);
            }
            "dropout" => {
                let v = parts.next().ok_or_else(|| fail(format!("line {}: missing dropout", ln + 1)))?;
                dropout = Some(v.parse::<f64>().map_err(|e| fail(format!("line {}: {e}", ln + 1)))?);
            }
            "param" | "state" => {
                let name = parts.next().ok_or_else(|| fail(format!("line {}: missing name", ln + 1)))?;
                let file = parts.next().ok_or_else(|| fail(format!("line {}: missing file", ln + 1)))?;
                tensors.push((key == "param", name.to_string(), file.to_string()));
            }
            other => {
                let v = parts
                    .next()
                    .and_then(|v| v.parse::<usize>().ok())
                    .ok_or_else(|| fail(format!("line {}: bad value for {other}", ln + 1)))?;
                sizes.insert(other.to_string(), v);
            }
        }
    }
    let size = |key: &str| -> Result<usize> {
        sizes.get(key).copied().ok_or_else(|| fail(format!("missing size {key}")))
    };
    let cfg = NetConfig {
        kind: kind.ok_or_else(|| fail("missing kind".into()))?,
        init: init.ok_or_else(|| fail("missing init".into()))?,
        dropout: dropout.ok_or_else(|| fail("missing dropout".into()))?,
        a_filters1: size("a_filters1")?,
        a_filters2: size("a_filters2")?,
        v_filters1: size("v_filters1")?,
        v_filters2: size("v_filters2")?,
        v_filters3: size("v_filters3")?,
        fc1: size("fc1")?,
        fc2: size("fc2")?,
        a_embed: size("a_embed")?,
        v_embed: size("v_embed")?,
    };
    let mut model: Model<T> = Model::new(cfg, 0)?;

    let mut filled: HashSet<String> = HashSet::new();
    for (is_param, name, file) in &tensors {
        let loaded = read_tnsr(&dir.join(file))?;
        let assign = |dst: &mut crate::tensor::Tensor<T>| -> Result<()> {
            if dst.dims() != loaded.dims() {
                return Err(fail(format!(
                    "tensor {name}: file dims {:?}, model needs {:?}",
                    loaded.dims(),
                    dst.dims()
                )));
            }
            for (d, s) in dst.data_mut().iter_mut().zip(loaded.data()) {
                *d = T::of(*s as f64);
            }
            Ok(())
        };
        let found = if *is_param {
            let mut ps = model.params();
            match ps.iter_mut().find(|(n, _, _)| n == name) {
                Some((_, p, _)) => {
                    assign(p)?;
                    true
                }
                None => false,
            }
        } else {
            let mut ss = model.state();
            match ss.iter_mut().find(|(n, _)| n == name) {
                Some((_, s)) => {
                    assign(s)?;
                    true
                }
                None => false,
            }
        };
        if !found {
            return Err(fail(format!("tensor {name} does not exist in this architecture")));
        }
        filled.insert(name.clone());
    }
    let mut expected: Vec<String> = model.params().iter().map(|(n, _, _)| n.clone()).collect();
    expected.extend(model.state().iter().map(|(n, _)| n.clone()));
    for name in &expected {
        if !filled.contains(name) {
            return Err(fail(format!("checkpoint is missing tensor {name}")));
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Batch;
    use crate::nn::Phase;
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn batch(seed: u64) -> Batch<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Batch {
            audio: Tensor::from_fn(&[2, 257, 5, 1], |_| rng.gen_range(-1.0..1.0)),
            visual: Tensor::from_fn(&[2, 16, 24, 15], |_| rng.gen_range(-1.0..1.0)),
        }
    }

    #[test]
    fn round_trip_preserves_weights_and_outputs() {
        for kind in [ModelKind::AudioVisual, ModelKind::AudioOnly, ModelKind::EarlyFusion] {
            let dir = tempfile::tempdir().unwrap();
            let mut model: Model<f32> = Model::new(NetConfig::tiny(kind), 42).unwrap();
            // Perturb the running stats so restoring them is actually tested.
            for (_, t) in model.state() {
                for v in t.data_mut() {
                    *v += 0.125;
                }
            }
            let b = batch(7);
            let before = model.forward(&b, Phase::Eval, None).unwrap();
            save_model(dir.path(), &mut model).unwrap();
            let mut loaded: Model<f32> = load_model(dir.path()).unwrap();
            assert_eq!(loaded.cfg, model.cfg);
            assert_eq!(loaded.n_params(), model.n_params());
            let after = loaded.forward(&b, Phase::Eval, None).unwrap();
            assert_eq!(before.audio.data(), after.audio.data());
            match (&before.visual, &after.visual) {
                (Some(x), Some(y)) => assert_eq!(x.data(), y.data()),
                (None, None) => {}
                _ => panic!("visual head mismatch"),
            }
        }
    }

    #[test]
    fn missing_tensor_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut model: Model<f32> = Model::new(NetConfig::tiny(ModelKind::AudioOnly), 1).unwrap();
        save_model(dir.path(), &mut model).unwrap();
        let manifest = std::fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        let trimmed: String = manifest.lines().filter(|l| !l.contains("fc2.w")).map(|l| format!("{l}\n")).collect();
        std::fs::write(dir.path().join(MANIFEST), trimmed).unwrap();
        let err = match load_model::<f32>(dir.path()) {
            Err(e) => e,
            Ok(_) => panic!("load should fail"),
        };
        assert!(err.to_string().contains("fc2.w"), "{err}");
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut model: Model<f32> = Model::new(NetConfig::tiny(ModelKind::AudioOnly), 1).unwrap();
        save_model(dir.path(), &mut model).unwrap();
        let bad: Tensor<f32> = Tensor::zeros(&[3, 3]);
        crate::tnsr::write_tnsr(&dir.path().join("fc1.b.tnsr"), &bad).unwrap();
        assert!(load_model::<f32>(dir.path()).is_err());
    }
}

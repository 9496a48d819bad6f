use std::path::Path;

use crate::error::{Error, Result};
use crate::train::Modality;

/// Mean losses of one epoch. `total` is always `audio + mu * visual`
/// with the run's own `mu`, recomputed from the recorded parts so the
/// identity survives averaging over batches.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub modality: Modality,
    pub total: f64,
    pub audio: f64,
    pub visual: f64,
}

/// Full history of one training run, stamped with what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub seed: u64,
    pub config_hash: String,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights the run returned.
    pub best_epoch: usize,
    /// Whether the patience window ran out before max_epochs.
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# seed={}\n# config={}\n# best_epoch={} stopped_early={}\nepoch,modality,total,audio,visual\n",
            self.seed, self.config_hash, self.best_epoch, self.stopped_early
        );
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.modality, r.total, r.audio, r.visual
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Records inside `[lo, hi)` with the given modality, for comparing
    /// segments of a multi-style run.
    pub fn in_modality(&self, modality: Modality, lo: usize, hi: usize) -> Vec<&EpochRecord> {
        self.epochs
            .iter()
            .filter(|r| r.modality == modality && r.epoch >= lo && r.epoch < hi)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_one_row_per_epoch_and_a_stamp() {
        let log = TrainLog {
            seed: 9,
            config_hash: "abc".into(),
            epochs: vec![
                EpochRecord {
                    epoch: 0,
                    modality: Modality::AudioVisual,
                    total: 1.5,
                    audio: 1.0,
                    visual: 0.5,
                },
                EpochRecord {
                    epoch: 1,
                    modality: Modality::AudioOnly,
                    total: 1.2,
                    audio: 1.2,
                    visual: 0.0,
                },
            ],
            best_epoch: 1,
            stopped_early: false,
        };
        let csv = log.to_csv();
        assert!(csv.starts_with("# seed=9\n# config=abc\n"));
        assert!(csv.contains("epoch,modality,total,audio,visual\n"));
        assert!(csv.contains("0,audio-visual,1.5,1,0.5\n"));
        assert!(csv.contains("1,audio-only,1.2,1.2,0\n"));
    }

    #[test]
    fn modality_filter_respects_the_window() {
        let mk = |epoch, modality| EpochRecord { epoch, modality, total: 0.0, audio: 0.0, visual: 0.0 };
        let log = TrainLog {
            seed: 0,
            config_hash: String::new(),
            epochs: vec![
                mk(0, Modality::AudioOnly),
                mk(1, Modality::AudioOnly),
                mk(2, Modality::AudioVisual),
            ],
            best_epoch: 0,
            stopped_early: false,
        };
        assert_eq!(log.in_modality(Modality::AudioOnly, 1, 3).len(), 1);
        assert_eq!(log.in_modality(Modality::AudioVisual, 0, 3).len(), 1);
    }
}

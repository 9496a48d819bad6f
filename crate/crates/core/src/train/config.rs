use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::InitMode;

/// Which inputs a training segment sees. Outside multi-style training
/// everything runs audio-visual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    AudioVisual,
    VisualOnly,
    AudioOnly,
}

impl Modality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::AudioVisual => "audio-visual",
            Modality::VisualOnly => "visual-only",
            Modality::AudioOnly => "audio-only",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "audio-visual" => Ok(Modality::AudioVisual),
            "visual-only" => Ok(Modality::VisualOnly),
            "audio-only" => Ok(Modality::AudioOnly),
            other => Err(Error::invalid("modality", format!("unknown modality {:?}", other))),
        }
    }
}

/// Multi-style schedule: off, or re-draw the active modality at fixed
/// epoch boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Off,
    Cycle,
}

impl Schedule {
    pub fn as_str(&self) -> &'static str {
        match self {
            Schedule::Off => "off",
            Schedule::Cycle => "cycle",
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(Schedule::Off),
            "cycle" => Ok(Schedule::Cycle),
            other => Err(Error::invalid("schedule", format!("unknown schedule {:?}", other))),
        }
    }
}

/// What happens to the target of a modality that was zeroed out of the
/// input: model1 zeroes the matching target too, model2 keeps the clean
/// targets on both heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetPolicy {
    Model1,
    Model2,
}

impl TargetPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            TargetPolicy::Model1 => "model1",
            TargetPolicy::Model2 => "model2",
        }
    }
}

impl FromStr for TargetPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model1" => Ok(TargetPolicy::Model1),
            "model2" => Ok(TargetPolicy::Model2),
            other => Err(Error::invalid("policy", format!("unknown target policy {:?}", other))),
        }
    }
}

/// Epochs between modality draws when the dataset is trained long enough
/// for the full cadence.
pub const MODALITY_PERIOD: usize = 45;
/// Epoch budget the full cadence is calibrated against; shorter runs
/// scale the period down proportionally.
pub const FULL_EPOCH_BUDGET: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs to wait for a real improvement before stopping.
    pub patience: usize,
    /// Relative loss decrease that counts as a real improvement.
    pub min_rel_improve: f64,
    /// Weight of the visual loss in the joint objective.
    pub mu: f64,
    pub seed: u64,
    pub init: InitMode,
    pub schedule: Schedule,
    pub policy: TargetPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            batch_size: 16,
            max_epochs: 200,
            patience: 20,
            min_rel_improve: 1e-3,
            mu: 1.0,
            seed: 0,
            init: InitMode::Uniform,
            schedule: Schedule::Off,
            policy: TargetPolicy::Model2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("train config", format!("lr {} must be > 0", self.lr)));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid(
                "train config",
                "batch_size must be at least 2 for batch statistics",
            ));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("train config", "max_epochs must be positive"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("train config", "patience must be positive"));
        }
        if !(0.0..1.0).contains(&self.min_rel_improve) {
            return Err(Error::invalid(
                "train config",
                format!("min_rel_improve {} must be in [0, 1)", self.min_rel_improve),
            ));
        }
        if self.mu < 0.0 || !self.mu.is_finite() {
            return Err(Error::invalid("train config", format!("mu {} must be >= 0", self.mu)));
        }
        Ok(())
    }

    /// Epochs per modality segment, scaled down for short runs so a
    /// desk-scale budget still sees several segments.
    pub fn modality_period(&self) -> usize {
        if self.max_epochs >= FULL_EPOCH_BUDGET {
            MODALITY_PERIOD
        } else {
            (MODALITY_PERIOD * self.max_epochs / FULL_EPOCH_BUDGET).max(1)
        }
    }

    /// Canonical `key=value` form; the same fields `parse` accepts.
    pub fn to_text(&self) -> String {
        format!(
            "lr={}\nbatch_size={}\nmax_epochs={}\npatience={}\nmin_rel_improve={}\nmu={}\nseed={}\ninit={}\nschedule={}\npolicy={}\n",
            self.lr,
            self.batch_size,
            self.max_epochs,
            self.patience,
            self.min_rel_improve,
            self.mu,
            self.seed,
            self.init.as_str(),
            self.schedule.as_str(),
            self.policy.as_str(),
        )
    }

    /// Parses `key=value` lines over the defaults. Blank lines and `#`
    /// comments are skipped; unknown keys are errors.
    pub fn parse(text: &str) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid("train config", format!("line {}: expected key=value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| {
                Error::invalid(
                    "train config",
                    format!("line {}: bad {} value {:?}", lineno + 1, what, value),
                )
            };
            match key {
                "lr" => cfg.lr = value.parse().map_err(|_| bad("lr"))?,
                "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
                "max_epochs" => cfg.max_epochs = value.parse().map_err(|_| bad("max_epochs"))?,
                "patience" => cfg.patience = value.parse().map_err(|_| bad("patience"))?,
                "min_rel_improve" => {
                    cfg.min_rel_improve = value.parse().map_err(|_| bad("min_rel_improve"))?
                }
                "mu" => cfg.mu = value.parse().map_err(|_| bad("mu"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "init" => cfg.init = value.parse()?,
                "schedule" => cfg.schedule = value.parse()?,
                "policy" => cfg.policy = value.parse()?,
                other => {
                    return Err(Error::invalid(
                        "train config",
                        format!("line {}: unknown key {:?}", lineno + 1, other),
                    ))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<TrainConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainConfig::parse(&text)
    }

    /// Hex digest of the canonical text, stamped into every run's log.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{:02x}", b)).collect()
    }
}

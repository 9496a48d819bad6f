//! Objective evaluation: speech distortion, intelligibility, and the
//! bookkeeping for scoring many utterances across mixing conditions.
//!
//! PESQ, HASQI, and HASPI are standardized algorithms measured elsewhere;
//! their scores enter through the same CSV format the local metrics are
//! written in, so aggregation treats all five names alike.

mod stoi;

pub use stoi::{
    stoi, STOI_BANDS, STOI_BETA_DB, STOI_DYN_RANGE_DB, STOI_FRAME, STOI_HOP, STOI_LOWEST_CF,
    STOI_NFFT, STOI_RATE, STOI_SEG,
};

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::dsp::Waveform;
use crate::error::{Error, Result};

/// Speech distortion index: residual energy of the enhanced signal
/// against the clean reference, relative to the clean energy. Zero means
/// identical; lower is better. Lengths are trimmed to the shorter input.
pub fn sdi(clean: &Waveform, enhanced: &Waveform) -> Result<f64> {
    if clean.sample_rate != enhanced.sample_rate {
        return Err(Error::invalid(
            "sdi",
            format!("sample rates differ: {} vs {}", clean.sample_rate, enhanced.sample_rate),
        ));
    }
    let n = clean.len().min(enhanced.len());
    if n == 0 {
        return Err(Error::too_short("sdi", "empty signal"));
    }
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in 0..n {
        let c = clean.samples[i] as f64;
        let e = enhanced.samples[i] as f64;
        num += (e - c) * (e - c);
        den += c * c;
    }
    if den == 0.0 {
        return Err(Error::ZeroPower("sdi"));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Stoi,
    Sdi,
    Pesq,
    Hasqi,
    Haspi,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Stoi => "stoi",
            Metric::Sdi => "sdi",
            Metric::Pesq => "pesq",
            Metric::Hasqi => "hasqi",
            Metric::Haspi => "haspi",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stoi" => Ok(Metric::Stoi),
            "sdi" => Ok(Metric::Sdi),
            "pesq" => Ok(Metric::Pesq),
            "hasqi" => Ok(Metric::Hasqi),
            "haspi" => Ok(Metric::Haspi),
            other => Err(Error::invalid("metric", format!("unknown metric {:?}", other))),
        }
    }
}

/// One scored utterance under one mixing condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub utterance_id: String,
    pub noise_type: String,
    pub sir_db: f64,
    pub sar_db: f64,
    pub method: String,
    pub metric: Metric,
    pub value: f64,
}

pub const SCORE_HEADER: &str = "utterance_id,noise_type,sir_db,sar_db,method,metric,value";

impl ScoreRecord {
    /// Everything but the value; duplicates of this key collapse to the
    /// last occurrence on import.
    fn key(&self) -> (String, String, String, String, String, Metric) {
        (
            self.utterance_id.clone(),
            self.noise_type.clone(),
            fmt_f64(self.sir_db),
            fmt_f64(self.sar_db),
            self.method.clone(),
            self.metric,
        )
    }

    fn validate(&self) -> Result<()> {
        if !self.value.is_finite() {
            return Err(Error::invalid("score", "value is not finite"));
        }
        match self.metric {
            Metric::Stoi if !(-1.0..=1.0).contains(&self.value) => {
                Err(Error::invalid("score", format!("stoi {} outside [-1, 1]", self.value)))
            }
            Metric::Sdi if self.value < 0.0 => {
                Err(Error::invalid("score", format!("negative sdi {}", self.value)))
            }
            _ => Ok(()),
        }
    }

    fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.utterance_id,
            self.noise_type,
            fmt_f64(self.sir_db),
            fmt_f64(self.sar_db),
            self.method,
            self.metric,
            self.value
        )
    }
}

/// Shortest round-trip decimal form, so -5.0 prints as "-5" and grouping
/// keys match across write/read cycles.
fn fmt_f64(v: f64) -> String {
    format!("{}", v)
}

/// Parses score CSV text. Malformed or invalid rows become warnings with
/// their line number; a repeated key keeps the later row and warns.
pub fn parse_scores(text: &str, origin: &str) -> (Vec<ScoreRecord>, Vec<String>) {
    let mut records: Vec<ScoreRecord> = Vec::new();
    let mut index: HashMap<(String, String, String, String, String, Metric), usize> =
        HashMap::new();
    let mut warnings = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line == SCORE_HEADER) {
            continue;
        }
        let n = lineno + 1;
        match parse_row(line) {
            Ok(rec) => {
                if let Err(e) = rec.validate() {
                    warnings.push(format!("{}:{}: rejected: {}", origin, n, e));
                    continue;
                }
                match index.get(&rec.key()) {
                    Some(&at) => {
                        warnings.push(format!(
                            "{}:{}: duplicate of an earlier row, keeping this one",
                            origin, n
                        ));
                        records[at] = rec;
                    }
                    None => {
                        index.insert(rec.key(), records.len());
                        records.push(rec);
                    }
                }
            }
            Err(e) => warnings.push(format!("{}:{}: {}", origin, n, e)),
        }
    }
    (records, warnings)
}

fn parse_row(line: &str) -> Result<ScoreRecord> {
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != 7 {
        return Err(Error::invalid("score csv", format!("expected 7 columns, got {}", cols.len())));
    }
    let num = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::invalid("score csv", format!("bad {}: {:?}", what, s)))
    };
    Ok(ScoreRecord {
        utterance_id: cols[0].to_string(),
        noise_type: cols[1].to_string(),
        sir_db: num(cols[2], "sir_db")?,
        sar_db: num(cols[3], "sar_db")?,
        method: cols[4].to_string(),
        metric: cols[5].parse()?,
        value: num(cols[6], "value")?,
    })
}

pub fn import_scores(path: impl AsRef<Path>) -> Result<(Vec<ScoreRecord>, Vec<String>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_scores(&text, &path.display().to_string()))
}

pub fn scores_to_csv(records: &[ScoreRecord]) -> String {
    let mut out = String::from(SCORE_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn write_scores(path: impl AsRef<Path>, records: &[ScoreRecord]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scores_to_csv(records)).map_err(|e| Error::io(path, e))
}

/// Which condition axis to average over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    NoiseType,
    SirDb,
    SarDb,
}

impl GroupBy {
    fn key(&self, r: &ScoreRecord) -> String {
        match self {
            GroupBy::NoiseType => r.noise_type.clone(),
            GroupBy::SirDb => fmt_f64(r.sir_db),
            GroupBy::SarDb => fmt_f64(r.sar_db),
        }
    }
}

/// Mean of one metric for one method within one condition group.
#[derive(Debug, Clone, PartialEq)]
pub struct AggCell {
    pub group: String,
    pub method: String,
    pub metric: Metric,
    pub mean: f64,
    pub count: usize,
}

/// Averages records per (group, method, metric) cell. Values inside a
/// cell are summed in a sorted order, so the result does not depend on
/// record order.
pub fn aggregate(records: &[ScoreRecord], by: GroupBy) -> Vec<AggCell> {
    let mut cells: std::collections::BTreeMap<(String, String, Metric), Vec<f64>> =
        std::collections::BTreeMap::new();
    for r in records {
        cells.entry((by.key(r), r.method.clone(), r.metric)).or_default().push(r.value);
    }
    cells
        .into_iter()
        .map(|((group, method, metric), mut values)| {
            values.sort_by(f64::total_cmp);
            let count = values.len();
            AggCell { group, method, metric, mean: values.iter().sum::<f64>() / count as f64, count }
        })
        .collect()
}

pub fn aggregate_to_csv(cells: &[AggCell]) -> String {
    let mut out = String::from("group,method,metric,mean,count\n");
    for c in cells {
        out.push_str(&format!("{},{},{},{},{}\n", c.group, c.method, c.metric, c.mean, c.count));
    }
    out
}

//! Index files that chain the commands together: `synth` writes a corpus
//! index, `mix` a mixture index, `features` a feature index. Plain CSV, one
//! row per artifact, paths relative to the directory holding the index
//! unless noted. Fields never contain commas; writers reject them.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use crate::CliResult;

pub const CORPUS_INDEX: &str = "corpus.csv";
pub const MIX_INDEX: &str = "mixtures.csv";
pub const FEAT_INDEX: &str = "features.csv";

const CORPUS_HEADER: &str = "utterance_id,wav,frames_dir,n_frames";
const MIX_HEADER: &str = "mixture_id,utterance_id,noise_type,sir_db,sar_db,\
achieved_sir_db,achieved_sar_db,noisy_wav,clean_wav,frames_dir";
const FEAT_HEADER: &str =
    "mixture_id,utterance_id,noise_type,sir_db,sar_db,rows,audio,visual,target_audio,target_visual";

#[derive(Debug, Clone)]
pub struct CorpusRow {
    pub id: String,
    pub wav: String,
    pub frames_dir: String,
    pub n_frames: usize,
}

/// One mixed utterance. `clean_wav` and `frames_dir` keep the paths the mix
/// command was pointed at, so later stages need no corpus argument.
#[derive(Debug, Clone)]
pub struct MixRow {
    pub id: String,
    pub utterance_id: String,
    pub noise_type: String,
    pub sir_db: f64,
    pub sar_db: f64,
    pub achieved_sir_db: f64,
    pub achieved_sar_db: f64,
    pub noisy_wav: String,
    pub clean_wav: String,
    pub frames_dir: String,
}

#[derive(Debug, Clone)]
pub struct FeatRow {
    pub id: String,
    pub utterance_id: String,
    pub noise_type: String,
    pub sir_db: f64,
    pub sar_db: f64,
    pub rows: usize,
    pub audio: String,
    pub visual: String,
    pub target_audio: String,
    pub target_visual: String,
}

fn field(value: impl Display) -> CliResult<String> {
    let s = value.to_string();
    if s.contains(',') || s.contains('\n') {
        return Err(format!("index field {:?} contains a comma or newline", s).into());
    }
    Ok(s)
}

fn write_index(path: &Path, header: &str, rows: Vec<Vec<String>>) -> CliResult<()> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| format!("write {}: {e}", path.display()))?;
    Ok(())
}

fn read_index(path: &Path, header: &str) -> CliResult<Vec<Vec<String>>> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("read {}: {e}", path.display()))?;
    let ncols = header.split(',').count();
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first == header => {}
        other => {
            return Err(format!(
                "{}: expected header {:?}, found {:?}",
                path.display(),
                header,
                other.unwrap_or("")
            )
            .into())
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<String> = line.split(',').map(str::to_string).collect();
        if cols.len() != ncols {
            return Err(format!(
                "{} line {}: expected {} columns, found {}",
                path.display(),
                i + 2,
                ncols,
                cols.len()
            )
            .into());
        }
        rows.push(cols);
    }
    Ok(rows)
}

fn num<T: std::str::FromStr>(path: &Path, what: &str, s: &str) -> CliResult<T> {
    s.parse().map_err(|_| format!("{}: bad {} value {:?}", path.display(), what, s).into())
}

pub fn write_corpus_index(path: &Path, rows: &[CorpusRow]) -> CliResult<()> {
    let rows = rows
        .iter()
        .map(|r| {
            Ok(vec![
                field(&r.id)?,
                field(&r.wav)?,
                field(&r.frames_dir)?,
                r.n_frames.to_string(),
            ])
        })
        .collect::<CliResult<_>>()?;
    write_index(path, CORPUS_HEADER, rows)
}

pub fn read_corpus_index(path: &Path) -> CliResult<Vec<CorpusRow>> {
    read_index(path, CORPUS_HEADER)?
        .into_iter()
        .map(|c| {
            Ok(CorpusRow {
                id: c[0].clone(),
                wav: c[1].clone(),
                frames_dir: c[2].clone(),
                n_frames: num(path, "n_frames", &c[3])?,
            })
        })
        .collect()
}

pub fn write_mix_index(path: &Path, rows: &[MixRow]) -> CliResult<()> {
    let rows = rows
        .iter()
        .map(|r| {
            Ok(vec![
                field(&r.id)?,
                field(&r.utterance_id)?,
                field(&r.noise_type)?,
                r.sir_db.to_string(),
                r.sar_db.to_string(),
                r.achieved_sir_db.to_string(),
                r.achieved_sar_db.to_string(),
                field(&r.noisy_wav)?,
                field(&r.clean_wav)?,
                field(&r.frames_dir)?,
            ])
        })
        .collect::<CliResult<_>>()?;
    write_index(path, MIX_HEADER, rows)
}

pub fn read_mix_index(path: &Path) -> CliResult<Vec<MixRow>> {
    read_index(path, MIX_HEADER)?
        .into_iter()
        .map(|c| {
            Ok(MixRow {
                id: c[0].clone(),
                utterance_id: c[1].clone(),
                noise_type: c[2].clone(),
                sir_db: num(path, "sir_db", &c[3])?,
                sar_db: num(path, "sar_db", &c[4])?,
                achieved_sir_db: num(path, "achieved_sir_db", &c[5])?,
                achieved_sar_db: num(path, "achieved_sar_db", &c[6])?,
                noisy_wav: c[7].clone(),
                clean_wav: c[8].clone(),
                frames_dir: c[9].clone(),
            })
        })
        .collect()
}

pub fn write_feat_index(path: &Path, rows: &[FeatRow]) -> CliResult<()> {
    let rows = rows
        .iter()
        .map(|r| {
            Ok(vec![
                field(&r.id)?,
                field(&r.utterance_id)?,
                field(&r.noise_type)?,
                r.sir_db.to_string(),
                r.sar_db.to_string(),
                r.rows.to_string(),
                field(&r.audio)?,
                field(&r.visual)?,
                field(&r.target_audio)?,
                field(&r.target_visual)?,
            ])
        })
        .collect::<CliResult<_>>()?;
    write_index(path, FEAT_HEADER, rows)
}

pub fn read_feat_index(path: &Path) -> CliResult<Vec<FeatRow>> {
    read_index(path, FEAT_HEADER)?
        .into_iter()
        .map(|c| {
            Ok(FeatRow {
                id: c[0].clone(),
                utterance_id: c[1].clone(),
                noise_type: c[2].clone(),
                sir_db: num(path, "sir_db", &c[3])?,
                sar_db: num(path, "sar_db", &c[4])?,
                rows: num(path, "rows", &c[5])?,
                audio: c[6].clone(),
                visual: c[7].clone(),
                target_audio: c[8].clone(),
                target_visual: c[9].clone(),
            })
        })
        .collect()
}

//! `avse mix`: crosses a corpus with a directory of interference noises and
//! SIR/SAR grids, writing one noisy WAV per cell plus `mixtures.csv`. The
//! interferer comes from the noise directory; the ambient floor is seeded
//! white noise. Achieved ratios are logged per file and kept in the index.

use std::path::PathBuf;

use avse_core::dsp::wav::{read_wav, write_wav};
use avse_core::dsp::{mix_sir_sar, MixSpec, Waveform};
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::index::{read_corpus_index, write_mix_index, MixRow, CORPUS_INDEX, MIX_INDEX};
use crate::jobs::parallel_map;
use crate::manifest::OutDir;
use crate::CliResult;

#[derive(Args, Debug)]
pub struct MixArgs {
    /// Corpus directory written by `synth`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Directory of interference WAVs; must not be empty.
    #[arg(long)]
    pub noise: PathBuf,
    /// Output mixture directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Signal-to-interference ratios in dB, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sir: Vec<f64>,
    /// Signal-to-ambient ratios in dB, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sar: Vec<f64>,
    /// Mixing seed; drives noise crops and the ambient floor.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-utterance work.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn white_noise(len: usize, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Waveform::new((0..len).map(|_| rng.gen_range(-0.5f32..0.5)).collect(), 16_000)
}

/// Formats a dB value for file names: `-5`, `2.5`.
fn db_tag(v: f64) -> String {
    format!("{}", v)
}

struct Job {
    id: String,
    utterance_id: String,
    noise_type: String,
    sir_db: f64,
    sar_db: f64,
    clean_path: PathBuf,
    noise_index: usize,
    out_wav: PathBuf,
    rel_wav: String,
    clean_rel: String,
    frames_rel: String,
    seed: u64,
}

pub fn run(a: &MixArgs) -> CliResult<()> {
    let corpus = read_corpus_index(&a.corpus.join(CORPUS_INDEX))?;
    let mut noise_files: Vec<PathBuf> = std::fs::read_dir(&a.noise)
        .map_err(|e| format!("read {}: {e}", a.noise.display()))?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "wav"))
        .collect();
    noise_files.sort();
    if noise_files.is_empty() {
        return Err(format!("no .wav files in noise directory {}", a.noise.display()).into());
    }
    let noises: Vec<(String, Waveform)> = noise_files
        .iter()
        .map(|p| {
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((name, read_wav(p)?))
        })
        .collect::<CliResult<_>>()?;

    let mut out = OutDir::create(&a.out)?;
    out.set_seed(a.seed);
    out.add_input(&a.corpus);
    out.add_input(&a.noise);

    let mut jobs = Vec::new();
    for utt in &corpus {
        for (noise_type, _) in &noises {
            for &sir_db in &a.sir {
                for &sar_db in &a.sar {
                    let id = format!(
                        "{}__{}__sir{}__sar{}",
                        utt.id,
                        noise_type,
                        db_tag(sir_db),
                        db_tag(sar_db)
                    );
                    let rel_wav = format!("{}.wav", id);
                    jobs.push(Job {
                        id,
                        utterance_id: utt.id.clone(),
                        noise_type: noise_type.clone(),
                        sir_db,
                        sar_db,
                        clean_path: a.corpus.join(&utt.wav),
                        noise_index: noises
                            .iter()
                            .position(|(n, _)| n == noise_type)
                            .unwrap(),
                        out_wav: out.file(&rel_wav)?,
                        rel_wav,
                        clean_rel: a.corpus.join(&utt.wav).display().to_string(),
                        frames_rel: a.corpus.join(&utt.frames_dir).display().to_string(),
                        seed: a.seed.wrapping_add(jobs.len() as u64),
                    });
                }
            }
        }
    }

    let noises = &noises;
    let results = parallel_map(jobs, a.jobs, |job| -> CliResult<MixRow> {
        let clean = read_wav(&job.clean_path)?;
        let ambient = white_noise(clean.samples.len(), job.seed ^ 0xA3B1);
        let spec = MixSpec {
            sir_db: job.sir_db,
            sar_db: job.sar_db,
            seed: job.seed,
            interference_id: job.noise_type.clone(),
            ambient_id: "white".into(),
        };
        let mixed = mix_sir_sar(&clean, &noises[job.noise_index].1, &ambient, &spec)?;
        write_wav(&job.out_wav, &mixed.noisy)?;
        Ok(MixRow {
            id: job.id,
            utterance_id: job.utterance_id,
            noise_type: job.noise_type,
            sir_db: job.sir_db,
            sar_db: job.sar_db,
            achieved_sir_db: mixed.achieved_sir_db,
            achieved_sar_db: mixed.achieved_sar_db,
            noisy_wav: job.rel_wav,
            clean_wav: job.clean_rel,
            frames_dir: job.frames_rel,
        })
    });
    let mut rows = Vec::new();
    for r in results {
        let row = r?;
        println!(
            "mix {}: achieved sir {:+.3} dB, sar {:+.3} dB",
            row.id, row.achieved_sir_db, row.achieved_sar_db
        );
        rows.push(row);
    }
    write_mix_index(&out.file(MIX_INDEX)?, &rows)?;
    println!("mix: {} mixtures into {}", rows.len(), a.out.display());
    out.finish()
}

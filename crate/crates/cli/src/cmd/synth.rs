//! `avse synth`: renders a seeded synthetic corpus of paired speech and
//! mouth frames. Each utterance becomes a mono 16 kHz WAV plus a directory
//! of PPM frames at 50 per second of audio; `corpus.csv` indexes them.

use std::path::PathBuf;

use avse_core::dsp::wav::write_wav;
use avse_core::visual::ppm::write_ppm;
use avse_core::visual::{synth_corpus, SynthSpec};
use clap::Args;

use crate::index::{write_corpus_index, CorpusRow, CORPUS_INDEX};
use crate::manifest::OutDir;
use crate::CliResult;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output corpus directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of utterances to render.
    #[arg(long, default_value_t = 10)]
    pub utterances: usize,
    /// Duration of each utterance in seconds.
    #[arg(long, default_value_t = 1.2)]
    pub duration: f64,
    /// Corpus seed; same seed, same corpus.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mouth open/close rate in Hz.
    #[arg(long, default_value_t = 3.5)]
    pub articulation_hz: f64,
    /// Voice fundamental in Hz.
    #[arg(long, default_value_t = 150.0)]
    pub f0_hz: f64,
}

pub fn run(a: &SynthArgs) -> CliResult<()> {
    let spec = SynthSpec {
        n_utterances: a.utterances,
        duration_s: a.duration,
        seed: a.seed,
        articulation_hz: a.articulation_hz,
        f0_hz: a.f0_hz,
    };
    let utts = synth_corpus(&spec)?;
    let mut out = OutDir::create(&a.out)?;
    out.set_seed(a.seed);
    let mut rows = Vec::new();
    for u in &utts {
        let wav = format!("{}.wav", u.id);
        let frames_dir = format!("{}.frames", u.id);
        write_wav(out.file(&wav)?, &u.audio)?;
        for (i, frame) in u.frames.iter().enumerate() {
            write_ppm(out.file(format!("{}/{:05}.ppm", frames_dir, i))?, frame)?;
        }
        rows.push(CorpusRow { id: u.id.clone(), wav, frames_dir, n_frames: u.frames.len() });
    }
    write_corpus_index(&out.file(CORPUS_INDEX)?, &rows)?;
    println!("synth: {} utterances of {:.2}s into {}", rows.len(), a.duration, a.out.display());
    out.finish()
}

//! Dataset generation: config, per-record synthesis and the manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{read_wav, write_wav, AudioSignal, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::pipeline::DtdLabel;
use crate::stft::StftConfig;
use crate::synth::labels::{mutual_silence, run_length_encode, LabelRun};
use crate::synth::mix::mix_at_ser;
use crate::synth::nonlinear::{apply_delay, hard_clip, loudspeaker_nonlinearity, NonlinearityMode};
use crate::synth::rir::{
    convolve_rir, generate_rir_with, AbsorptionModel, RoomSpec, DEFAULT_ROOMS, RT60_LENGTHS,
};

pub const MANIFEST_NAME: &str = "manifest.jsonl";

fn default_ser_range() -> [f64; 2] {
    [-13.0, 0.0]
}
fn default_half() -> f64 {
    0.5
}
fn default_music_ratio() -> f64 {
    0.1
}
fn default_clip_probability() -> f64 {
    0.7
}
fn default_rir_probability() -> f64 {
    0.9
}
fn default_farend_utterances() -> usize {
    3
}
fn default_sample_rate() -> u32 {
    DEFAULT_SAMPLE_RATE
}
fn default_rooms() -> Vec<[f64; 3]> {
    DEFAULT_ROOMS.to_vec()
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RirConfig {
    /// Draw image-method responses.
    #[serde(default = "default_true")]
    pub simulated: bool,
    #[serde(default = "default_rooms")]
    pub rooms: Vec<[f64; 3]>,
    #[serde(default)]
    pub absorption: AbsorptionModel,
    /// Directory of recorded responses (mono WAV) mixed into the pool.
    #[serde(default)]
    pub wav_dir: Option<PathBuf>,
}

impl Default for RirConfig {
    fn default() -> Self {
        Self {
            simulated: true,
            rooms: default_rooms(),
            absorption: AbsorptionModel::default(),
            wav_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub farend_dirs: Vec<PathBuf>,
    pub nearend_dirs: Vec<PathBuf>,
    #[serde(default)]
    pub music_dirs: Vec<PathBuf>,
    #[serde(default = "default_music_ratio")]
    pub music_ratio: f64,
    pub count: usize,
    pub seed: u64,
    #[serde(default = "default_ser_range")]
    pub ser_range_db: [f64; 2],
    pub output_dir: PathBuf,
    #[serde(default)]
    pub rir: RirConfig,
    #[serde(default = "default_half")]
    pub silent_nearend_ratio: f64,
    #[serde(default = "default_clip_probability")]
    pub clip_probability: f64,
    #[serde(default = "default_rir_probability")]
    pub rir_probability: f64,
    #[serde(default)]
    pub nonlinearity_mode: NonlinearityMode,
    #[serde(default = "default_farend_utterances")]
    pub farend_utterances: usize,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
}

impl SynthConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        // Relative paths are taken relative to the config file.
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.farend_dirs.iter_mut().for_each(fix);
        self.nearend_dirs.iter_mut().for_each(fix);
        self.music_dirs.iter_mut().for_each(fix);
        fix(&mut self.output_dir);
        if let Some(p) = self.rir.wav_dir.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.farend_dirs.is_empty() || self.nearend_dirs.is_empty() {
            return bad("farend_dirs and nearend_dirs must be non-empty".into());
        }
        let [lo, hi] = self.ser_range_db;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("invalid ser_range_db {:?}", self.ser_range_db));
        }
        for (name, p) in [
            ("music_ratio", self.music_ratio),
            ("silent_nearend_ratio", self.silent_nearend_ratio),
            ("clip_probability", self.clip_probability),
            ("rir_probability", self.rir_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} outside [0, 1]"));
            }
        }
        if self.farend_utterances == 0 {
            return bad("farend_utterances must be at least 1".into());
        }
        if !self.rir.simulated && self.rir.wav_dir.is_none() && self.rir_probability > 0.0 {
            return bad("rir needs simulated rooms or a wav_dir".into());
        }
        if self.rir.simulated && self.rir.rooms.is_empty() {
            return bad("rir.rooms is empty".into());
        }
        Ok(())
    }
}

/// Every random draw of one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub clipped: bool,
    pub u_max: f64,
    pub gamma: f64,
    pub a_pos: f64,
    pub a_neg: f64,
    pub delay_ms: f64,
    pub target_ser_db: f64,
    pub nonlinearity_mode: NonlinearityMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RirInfo {
    None,
    Simulated { room: RoomSpec, absorption: f64 },
    Recorded { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub index: usize,
    pub u: String,
    pub d: String,
    pub s: String,
    pub y: String,
    pub samples: usize,
    pub sample_rate: u32,
    pub params: SynthParams,
    pub rir: RirInfo,
    pub farend_sources: Vec<String>,
    pub nearend_source: Option<String>,
    pub music_source: Option<String>,
    pub s_gain: f64,
    pub y_gain: f64,
    pub measured_ser_db: Option<f64>,
    pub frames: usize,
    pub labels: Vec<LabelRun>,
    /// Frames labeled double talk only because both sides are silent.
    pub mutual_silence_frames: usize,
}

impl ManifestRecord {
    pub fn label_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for r in &self.labels {
            c[r.label as usize] += r.frames as usize;
        }
        c
    }

    pub fn silent_nearend(&self) -> bool {
        self.nearend_source.is_none()
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Sorted list of `.wav` files under `dir`, recursively.
pub fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let p = entry.map_err(|e| Error::io(&d, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

struct Pool {
    items: Vec<(String, Arc<AudioSignal>)>,
}

impl Pool {
    fn load(dirs: &[PathBuf], rate: u32, what: &str) -> Result<Self> {
        let mut items = Vec::new();
        for dir in dirs {
            if !dir.is_dir() {
                return Err(Error::Config(format!(
                    "{what} directory not found: {}",
                    dir.display()
                )));
            }
            for p in list_wavs(dir)? {
                let sig = read_wav(&p, rate)?;
                items.push((p.display().to_string(), Arc::new(sig)));
            }
        }
        Ok(Self { items })
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> &(String, Arc<AudioSignal>) {
        &self.items[rng.gen_range(0..self.items.len())]
    }
}

fn tile(x: &[f32], len: usize) -> Vec<f32> {
    if x.is_empty() {
        return vec![0.0; len];
    }
    x.iter().copied().cycle().take(len).collect()
}

fn peak_normalize(v: &mut [f32], target: f32) {
    let p = v.iter().fold(0.0f32, |a, &b| a.max(b.abs()));
    if p > 0.0 {
        v.iter_mut().for_each(|x| *x *= target / p);
    }
}

fn record_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Indices of records whose near-end is replaced by silence.
pub fn silent_indices(count: usize, ratio: f64, seed: u64) -> Vec<bool> {
    let n_silent = (count as f64 * ratio).round() as usize;
    let mut order: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    order.shuffle(&mut rng);
    let mut silent = vec![false; count];
    for &i in &order[..n_silent] {
        silent[i] = true;
    }
    silent
}

fn random_room(rng: &mut ChaCha8Rng, rooms: &[[f64; 3]]) -> Result<RoomSpec> {
    let dims = rooms[rng.gen_range(0..rooms.len())];
    let rt60 = RT60_LENGTHS[rng.gen_range(0..RT60_LENGTHS.len())].0;
    let margin = 0.5;
    let mic = [0, 1, 2].map(|i| rng.gen_range(margin..dims[i] - margin));
    // Loudspeaker placed around the microphone, within 1.2 m.
    let source = loop {
        let r = rng.gen_range(0.3..1.2);
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let z = rng.gen_range(-0.3..0.3);
        let p = [
            mic[0] + r * theta.cos(),
            mic[1] + r * theta.sin(),
            mic[2] + z,
        ];
        if p.iter().zip(dims).all(|(&x, d)| x > 0.1 && x < d - 0.1) {
            break p;
        }
    };
    RoomSpec::new(dims, source, mic, rt60)
}

struct Sources {
    farend: Pool,
    nearend: Pool,
    music: Pool,
    rirs: Vec<(String, Vec<f64>)>,
}

/// Synthesizes record `index`. Depends only on the config, the sources
/// and the index.
fn synth_record(
    cfg: &SynthConfig,
    src: &Sources,
    index: usize,
    silent: bool,
) -> Result<(ManifestRecord, [AudioSignal; 4])> {
    let mut rng = record_rng(cfg.seed, index);
    let fs = cfg.sample_rate;

    // Far-end: several utterances back to back, peak-normalized.
    let mut farend_sources = Vec::new();
    let mut u: Vec<f32> = Vec::new();
    for _ in 0..cfg.farend_utterances {
        let (name, sig) = src.farend.pick(&mut rng);
        farend_sources.push(name.clone());
        u.extend_from_slice(sig.samples());
    }
    let len = u.len();
    if len < crate::stft::WINDOW_SIZE {
        return Err(Error::InsufficientSamples {
            needed: crate::stft::WINDOW_SIZE,
            got: len,
        });
    }
    let use_music = rng.gen_bool(cfg.music_ratio) && !src.music.items.is_empty();
    let mut music_source = None;
    if use_music {
        let (name, m) = src.music.pick(&mut rng);
        let level = rng.gen_range(0.3..1.0);
        peak_normalize(&mut u, 1.0);
        let mut m = tile(m.samples(), len);
        peak_normalize(&mut m, level);
        u.iter_mut().zip(&m).for_each(|(a, b)| *a += b);
        music_source = Some(name.clone());
    }
    peak_normalize(&mut u, 1.0);
    let u = AudioSignal::new(u, fs)?;

    let params = SynthParams {
        clipped: rng.gen_bool(cfg.clip_probability),
        u_max: rng.gen_range(0.75..=0.99),
        gamma: rng.gen_range(0.15..=0.3),
        a_pos: rng.gen_range(0.05..=0.45),
        a_neg: rng.gen_range(0.1..=0.4),
        delay_ms: rng.gen_range(8.0..=40.0),
        target_ser_db: rng.gen_range(cfg.ser_range_db[0]..=cfg.ser_range_db[1]),
        nonlinearity_mode: cfg.nonlinearity_mode,
        seed: cfg.seed,
    };
    let with_rir = rng.gen_bool(cfg.rir_probability);

    let mut x = if params.clipped {
        hard_clip(&u, params.u_max as f32)
    } else {
        u.clone()
    };
    x = loudspeaker_nonlinearity(
        &x,
        params.gamma,
        params.a_pos,
        params.a_neg,
        params.nonlinearity_mode,
    );
    x = apply_delay(&x, params.delay_ms);
    let rir = if with_rir {
        let n_sim = if cfg.rir.simulated { 1 } else { 0 };
        let choice = rng.gen_range(0..n_sim + src.rirs.len());
        if choice < n_sim {
            let room = random_room(&mut rng, &cfg.rir.rooms)?;
            let (h, absorption) = generate_rir_with(&room, fs, cfg.rir.absorption)?;
            x = convolve_rir(&x, &h);
            RirInfo::Simulated { room, absorption }
        } else {
            let (name, h) = &src.rirs[choice - n_sim];
            x = convolve_rir(&x, h);
            RirInfo::Recorded { path: name.clone() }
        }
    } else {
        RirInfo::None
    };
    let y = x;

    let (s, nearend_source) = if silent {
        (AudioSignal::zeros(len, fs), None)
    } else {
        let (name, sig) = src.nearend.pick(&mut rng);
        (
            AudioSignal::new(tile(sig.samples(), len), fs)?,
            Some(name.clone()),
        )
    };

    let stft = StftConfig::new(fs);
    let mix = mix_at_ser(&s, &y, params.target_ser_db, &stft)?;
    let mutual = mutual_silence(&mix.s, &mix.y, &stft)
        .iter()
        .zip(&mix.labels)
        .filter(|(&m, &l)| m && l == DtdLabel::DoubleTalk)
        .count();

    let id = format!("mix_{index:05}");
    let rec = ManifestRecord {
        u: format!("{id}/u.wav"),
        d: format!("{id}/d.wav"),
        s: format!("{id}/s.wav"),
        y: format!("{id}/y.wav"),
        id,
        index,
        samples: len,
        sample_rate: fs,
        params,
        rir,
        farend_sources,
        nearend_source,
        music_source,
        s_gain: mix.s_gain,
        y_gain: mix.y_gain,
        measured_ser_db: mix.measured_ser_db,
        frames: mix.labels.len(),
        labels: run_length_encode(&mix.labels),
        mutual_silence_frames: mutual,
    };
    Ok((rec, [u, mix.d, mix.s, mix.y]))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSummary {
    pub records: usize,
    pub silent_nearend: usize,
    pub label_histogram: [usize; 3],
    pub manifest: PathBuf,
}

/// Threads to use: `RAES_THREADS` if set, otherwise rayon's default.
pub fn thread_count() -> Option<usize> {
    std::env::var("RAES_THREADS")
        .ok()?
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

/// Generates the dataset described by `cfg` and writes the manifest.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<SynthSummary> {
    cfg.validate()?;
    let fs = cfg.sample_rate;
    let farend = Pool::load(&cfg.farend_dirs, fs, "far-end")?;
    let nearend = Pool::load(&cfg.nearend_dirs, fs, "near-end")?;
    let music = Pool::load(&cfg.music_dirs, fs, "music")?;
    if farend.items.is_empty() {
        return Err(Error::Config("no far-end WAV files found".into()));
    }
    if nearend.items.is_empty() {
        return Err(Error::Config("no near-end WAV files found".into()));
    }
    let mut rirs = Vec::new();
    if let Some(dir) = &cfg.rir.wav_dir {
        if !dir.is_dir() {
            return Err(Error::Config(format!(
                "RIR directory not found: {}",
                dir.display()
            )));
        }
        for p in list_wavs(dir)? {
            let h = read_wav(&p, fs)?;
            rirs.push((
                p.display().to_string(),
                h.samples().iter().map(|&v| v as f64).collect(),
            ));
        }
    }
    let src = Sources {
        farend,
        nearend,
        music,
        rirs,
    };

    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let silent = silent_indices(cfg.count, cfg.silent_nearend_ratio, cfg.seed);

    let work = || -> Result<Vec<ManifestRecord>> {
        (0..cfg.count)
            .into_par_iter()
            .map(|i| {
                let (rec, signals) = synth_record(cfg, &src, i, silent[i])?;
                let dir = cfg.output_dir.join(&rec.id);
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                for (name, sig) in ["u", "d", "s", "y"].iter().zip(&signals) {
                    write_wav(dir.join(format!("{name}.wav")), sig)?;
                }
                Ok(rec)
            })
            .collect()
    };
    let records = match thread_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    let manifest = cfg.output_dir.join(MANIFEST_NAME);
    let mut out = Vec::new();
    let mut histogram = [0; 3];
    for r in &records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
        for (h, c) in histogram.iter_mut().zip(r.label_counts()) {
            *h += c;
        }
    }
    fs::File::create(&manifest)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(&manifest, e))?;
    Ok(SynthSummary {
        records: records.len(),
        silent_nearend: records.iter().filter(|r| r.silent_nearend()).count(),
        label_histogram: histogram,
        manifest,
    })
}

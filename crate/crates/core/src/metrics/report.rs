//! Dataset evaluation: per-record ERLE and STOI, grouped by SER bucket.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::read_wav;
use crate::error::Result;
use crate::metrics::erle::erle;
use crate::metrics::stoi::stoi_double_talk;
use crate::pipeline::DtdLabel;
use crate::synth::dataset::{read_manifest, ManifestRecord};
use crate::synth::labels::run_length_decode;

/// SER buckets of the result tables, dB.
pub const SER_BUCKETS: [f64; 3] = [0.0, -5.0, -10.0];

pub fn ser_bucket(target_db: f64) -> f64 {
    SER_BUCKETS
        .iter()
        .copied()
        .min_by(|a, b| (a - target_db).abs().total_cmp(&(b - target_db).abs()))
        .unwrap()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    /// Over far-end single-talk frames; absent when there are none.
    pub erle_db: Option<f64>,
    /// Over double-talk frames; absent when too short or silent.
    pub stoi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordResult {
    pub id: String,
    pub target_ser_db: f64,
    pub bucket_db: f64,
    pub silent_nearend: bool,
    pub processed: Scores,
    /// The untouched microphone signal scored the same way.
    pub mic: Scores,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub records: usize,
    pub mean_erle_db: Option<f64>,
    pub erle_records: usize,
    pub mean_stoi: Option<f64>,
    pub stoi_records: usize,
}

impl Aggregate {
    fn from_scores<'a>(scores: impl Iterator<Item = &'a Scores>) -> Self {
        let mut a = Aggregate::default();
        let (mut e, mut s) = (0.0, 0.0);
        for sc in scores {
            a.records += 1;
            if let Some(v) = sc.erle_db {
                e += v;
                a.erle_records += 1;
            }
            if let Some(v) = sc.stoi {
                s += v;
                a.stoi_records += 1;
            }
        }
        a.mean_erle_db = (a.erle_records > 0).then(|| e / a.erle_records as f64);
        a.mean_stoi = (a.stoi_records > 0).then(|| s / a.stoi_records as f64);
        a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segments {
    pub erle: String,
    pub stoi: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<RecordResult>,
    /// Keyed by bucket, e.g. `"-5"`.
    pub buckets: BTreeMap<String, Aggregate>,
    pub overall: Aggregate,
    pub mic_overall: Aggregate,
    pub missing: Vec<String>,
    pub segments: Segments,
    pub mflops_per_frame: f64,
    pub rt_factor: Option<f64>,
}

fn bucket_key(b: f64) -> String {
    format!("{b:.0}")
}

/// Location of a record's processed output.
pub fn processed_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.wav"))
}

fn score(
    rec: &ManifestRecord,
    labels: &[DtdLabel],
    root: &Path,
    out: &crate::AudioSignal,
) -> Result<Scores> {
    let d = read_wav(root.join(&rec.d), rec.sample_rate)?;
    let s = read_wav(root.join(&rec.s), rec.sample_rate)?;
    if out.len() != d.len() {
        return Err(crate::Error::LengthMismatch {
            left: d.len(),
            right: out.len(),
        });
    }
    let erle_db = if labels.contains(&DtdLabel::FarEnd) {
        erle(&d, out, labels).ok()
    } else {
        None
    };
    let stoi = if !rec.silent_nearend() && labels.contains(&DtdLabel::DoubleTalk) {
        stoi_double_talk(&s, out, labels).ok()
    } else {
        None
    };
    Ok(Scores { erle_db, stoi })
}

/// Scores every record of `manifest` whose output exists in `processed`.
/// Records without output are listed in `missing`.
pub fn evaluate(manifest: &Path, processed: &Path) -> Result<EvalReport> {
    let records = read_manifest(manifest)?;
    let root = manifest.parent().unwrap_or(Path::new("."));
    let mut results = Vec::new();
    let mut missing = Vec::new();
    for rec in &records {
        let path = processed_path(processed, &rec.id);
        if !path.exists() {
            missing.push(rec.id.clone());
            continue;
        }
        let labels = run_length_decode(&rec.labels)?;
        let out = read_wav(&path, rec.sample_rate)?;
        let d = read_wav(root.join(&rec.d), rec.sample_rate)?;
        results.push(RecordResult {
            id: rec.id.clone(),
            target_ser_db: rec.params.target_ser_db,
            bucket_db: ser_bucket(rec.params.target_ser_db),
            silent_nearend: rec.silent_nearend(),
            processed: score(rec, &labels, root, &out)?,
            mic: score(rec, &labels, root, &d)?,
        });
    }
    let mut buckets = BTreeMap::new();
    for b in SER_BUCKETS {
        let agg = Aggregate::from_scores(
            results
                .iter()
                .filter(|r| r.bucket_db == b)
                .map(|r| &r.processed),
        );
        buckets.insert(bucket_key(b), agg);
    }
    Ok(EvalReport {
        overall: Aggregate::from_scores(results.iter().map(|r| &r.processed)),
        mic_overall: Aggregate::from_scores(results.iter().map(|r| &r.mic)),
        records: results,
        buckets,
        missing,
        segments: Segments {
            erle: "far-end single talk (label 1)".into(),
            stoi: "double talk (label 2)".into(),
        },
        mflops_per_frame: crate::metrics::count_flops(&crate::nn::Architecture::default()).mflops(),
        rt_factor: None,
    })
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

/// Method-by-metric table: ERLE overall, STOI per SER bucket.
pub fn render_table(report: &EvalReport) -> String {
    let mut s = String::new();
    s.push_str(&format!("{:<12}{:>10}", "method", "ERLE dB"));
    for b in SER_BUCKETS {
        s.push_str(&format!("{:>12}", format!("STOI {b:.0}dB")));
    }
    s.push('\n');
    let row = |name: &str, overall: &Aggregate, pick: &dyn Fn(&RecordResult) -> &Scores| {
        let mut line = format!("{:<12}{:>10}", name, fmt_opt(overall.mean_erle_db, 2));
        for b in SER_BUCKETS {
            let agg = Aggregate::from_scores(
                report.records.iter().filter(|r| r.bucket_db == b).map(pick),
            );
            line.push_str(&format!("{:>12}", fmt_opt(agg.mean_stoi, 3)));
        }
        line.push('\n');
        line
    };
    s.push_str(&row("mic", &report.mic_overall, &|r| &r.mic));
    s.push_str(&row("processed", &report.overall, &|r| &r.processed));
    s
}

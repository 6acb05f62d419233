mod common;

use std::collections::BTreeMap;
use std::path::Path;

use raes::audio::read_wav;
use raes::pipeline::DtdLabel;
use raes::synth::dataset::{read_manifest, SynthConfig, MANIFEST_NAME};
use raes::synth::labels::run_length_decode;
use raes::synth::synth_dataset;

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().display().to_string();
        out.insert(rel, std::fs::read(&entry).unwrap());
    }
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files.extend(walk(&p));
        } else {
            files.push(p);
        }
    }
    files
}

#[test]
fn generation_is_deterministic_and_thread_independent() {
    let root = tempfile::tempdir().unwrap();
    common::write_corpus(root.path());
    let a = SynthConfig::from_file(common::write_config(root.path(), "a", 12, 7, "")).unwrap();
    let b = SynthConfig::from_file(common::write_config(root.path(), "b", 12, 7, "")).unwrap();
    let c = SynthConfig::from_file(common::write_config(root.path(), "c", 12, 8, "")).unwrap();
    synth_dataset(&a).unwrap();
    std::env::set_var("RAES_THREADS", "1");
    synth_dataset(&b).unwrap();
    std::env::remove_var("RAES_THREADS");
    synth_dataset(&c).unwrap();

    let (ta, tb, tc) = (
        tree(&a.output_dir),
        tree(&b.output_dir),
        tree(&c.output_dir),
    );
    assert_eq!(ta.len(), 12 * 4 + 1);
    assert!(ta == tb, "same seed produced different bytes");
    assert_ne!(ta[MANIFEST_NAME], tc[MANIFEST_NAME]);
}

#[test]
fn records_satisfy_mixing_invariants() {
    let root = tempfile::tempdir().unwrap();
    common::write_corpus(root.path());
    let cfg = SynthConfig::from_file(common::write_config(
        root.path(),
        "inv",
        16,
        3,
        r#","music_ratio":0.25"#,
    ))
    .unwrap();
    let summary = synth_dataset(&cfg).unwrap();
    assert_eq!(summary.records, 16);
    assert_eq!(summary.silent_nearend, 8);
    let records = read_manifest(&summary.manifest).unwrap();
    let base = summary.manifest.parent().unwrap();
    let mut histogram = [0; 3];
    for rec in &records {
        let load = |p: &str| read_wav(base.join(p), 16_000).unwrap();
        let (u, d, s, y) = (load(&rec.u), load(&rec.d), load(&rec.s), load(&rec.y));
        assert_eq!(d.len(), rec.samples);
        assert_eq!(u.len(), d.len());
        for ((dv, sv), yv) in d.samples().iter().zip(s.samples()).zip(y.samples()) {
            assert!((dv - (sv + yv)).abs() <= 1e-7, "{}", rec.id);
            assert!(dv.abs() <= 1.0 && sv.abs() <= 1.0 && yv.abs() <= 1.0);
        }
        let labels = run_length_decode(&rec.labels).unwrap();
        assert_eq!(labels.len(), rec.frames);
        if rec.silent_nearend() {
            assert!(s.samples().iter().all(|&v| v == 0.0));
            assert!(!labels.contains(&DtdLabel::NearEnd), "{}", rec.id);
        } else {
            let ser = rec.measured_ser_db.unwrap();
            assert!(
                (ser - rec.params.target_ser_db).abs() <= 0.1,
                "{}: {ser}",
                rec.id
            );
        }
        assert!((-13.0..=0.0).contains(&rec.params.target_ser_db));
        for (h, c) in histogram.iter_mut().zip(rec.label_counts()) {
            *h += c;
        }
    }
    assert_eq!(histogram, summary.label_histogram);
    assert!(histogram.iter().all(|&c| c > 0), "{histogram:?}");
}

#[test]
fn missing_source_dir_is_named() {
    let root = tempfile::tempdir().unwrap();
    let path = common::write_config(root.path(), "x", 2, 1, "");
    let cfg = SynthConfig::from_file(&path).unwrap();
    let err = synth_dataset(&cfg).unwrap_err().to_string();
    assert!(err.contains("far"), "{err}");
}

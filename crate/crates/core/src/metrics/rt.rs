//! Real-time factor measurement.

use std::time::Instant;

/// Wall-clock time of `run` divided by `audio_secs`: one warm-up call,
/// then the median of `runs` timed calls.
pub fn rt_factor<F: FnMut()>(audio_secs: f64, runs: usize, mut run: F) -> f64 {
    assert!(audio_secs > 0.0 && runs > 0);
    run();
    let mut times: Vec<f64> = (0..runs)
        .map(|_| {
            let t = Instant::now();
            run();
            t.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[times.len() / 2] / audio_secs
}

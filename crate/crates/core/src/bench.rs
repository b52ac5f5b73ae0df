//! Compile-time measurement.

use std::time::Instant;

use serde::Serialize;

use crate::circuit::Circuit;
use crate::compile::compile;
use crate::eec::Schedule;
use crate::error::LowerError;
use crate::stepg::CorrelationLevel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub label: String,
    pub level: String,
    pub iters: usize,
    /// Per-round compile time, averaged over iterations.
    pub mean_ns: f64,
    pub stddev_ns: f64,
    pub hyperedges: usize,
    pub hyperedges_per_sec: f64,
}

/// Compile `c` once to warm up, then `iters` timed times. Times are divided
/// by `rounds`; throughput counts every hyperedge of the whole circuit.
pub fn bench_compile(
    label: &str,
    c: &Circuit,
    rounds: usize,
    level: CorrelationLevel,
    schedule: Schedule,
    iters: usize,
) -> Result<BenchRecord, LowerError> {
    assert!(iters >= 1 && rounds >= 1);
    let hyperedges = compile(c, level, schedule)?.len();
    let mut samples = Vec::with_capacity(iters);
    for _ in 0..iters {
        let t = Instant::now();
        let dem = compile(c, level, schedule)?;
        samples.push(t.elapsed().as_nanos() as f64);
        debug_assert_eq!(dem.len(), hyperedges);
    }
    let total: f64 = samples.iter().sum();
    let (mean, sd) = mean_stddev(&samples);
    Ok(BenchRecord {
        label: label.to_string(),
        level: level.to_string(),
        iters,
        mean_ns: mean / rounds as f64,
        stddev_ns: sd / rounds as f64,
        hyperedges,
        hyperedges_per_sec: hyperedges as f64 * iters as f64 / (total * 1e-9),
    })
}

/// Population mean and standard deviation.
pub fn mean_stddev(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

//! Paired wall-clock comparison of the streaming float and lookup-table paths.

use std::f64::consts::PI;
use std::hint::black_box;
use std::time::Instant;

use serde::Serialize;

use crate::bayes::{normalize, PosteriorSummary};
use crate::error::{Error, Result};
use crate::homodyne::{sample_homodyne, RandomStream};
use crate::lut::{LikelihoodTable, StreamState};

pub const MIN_BENCH_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Serialize)]
pub struct Machine {
    pub os: &'static str,
    pub arch: &'static str,
    pub threads: usize,
}

impl Machine {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PathTiming {
    pub updates_per_sec: f64,
    pub ns_per_sample: f64,
}

/// Deterministic part of the report; identical across reruns on the same inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Accuracy {
    pub measured_phase: f64,
    pub exact: PosteriorSummary,
    pub lut: PosteriorSummary,
    pub map_difference_steps: i64,
    pub variance_ratio: f64,
    pub saturated: bool,
    /// Wrapping sum of all accumulators.
    pub accumulator_checksum: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThroughputReport {
    pub grid_points: usize,
    pub bins: usize,
    pub scale: u64,
    pub samples: usize,
    pub seed: u64,
    pub machine: Machine,
    pub exact: PathTiming,
    pub lut: PathTiming,
    pub speedup: f64,
    pub accuracy: Accuracy,
}

/// Streams `m` samples drawn at the probe's optimal phase through both paths.
///
/// The float path is the per-sample equivalent of the LUT: `G` fused
/// log-density evaluations per sample, no sufficient-statistic shortcut.
pub fn bench_throughput(table: &LikelihoodTable, m: usize, seed: u64) -> Result<ThroughputReport> {
    if m < MIN_BENCH_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "benchmark needs at least {MIN_BENCH_SAMPLES} samples, got {m}"
        )));
    }
    let probe = *table.probe();
    let grid = *table.grid();
    let phi = probe.optimal_phase()?;
    let batch = sample_homodyne(&probe, phi, m, &mut RandomStream::new(seed));

    let (log_norm, inv_two_var): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .map(|p| {
            let v = probe.quadrature_variance(p);
            (-0.5 * (2.0 * PI * v).ln(), 1.0 / (2.0 * v))
        })
        .unzip();
    let mut float_acc = vec![0.0f64; grid.len()];
    let start = Instant::now();
    for &x in &batch.samples {
        let x2 = x * x;
        for ((acc, &a), &k) in float_acc.iter_mut().zip(&log_norm).zip(&inv_two_var) {
            *acc += a - x2 * k;
        }
        black_box(&float_acc);
    }
    let exact_time = start.elapsed().as_secs_f64();

    let mut state = StreamState::new(table);
    let start = Instant::now();
    for &x in &batch.samples {
        state.update(table, x)?;
        black_box(&state.accumulators);
    }
    let lut_time = start.elapsed().as_secs_f64();

    let exact = normalize(&grid, &float_acc).1;
    let lut = state.finalize(table)?;
    let accuracy = Accuracy {
        measured_phase: phi,
        exact,
        lut,
        map_difference_steps: lut.map_index as i64 - exact.map_index as i64,
        variance_ratio: lut.variance / exact.variance,
        saturated: state.saturated,
        accumulator_checksum: state
            .accumulators
            .iter()
            .fold(0i64, |s, &a| s.wrapping_add(a)),
    };
    let timing = |secs: f64| PathTiming {
        updates_per_sec: m as f64 / secs,
        ns_per_sample: secs * 1e9 / m as f64,
    };
    Ok(ThroughputReport {
        grid_points: grid.len(),
        bins: table.quantizer().bins,
        scale: table.quantizer().scale,
        samples: m,
        seed,
        machine: Machine::current(),
        exact: timing(exact_time),
        lut: timing(lut_time),
        speedup: exact_time / lut_time,
        accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::PhaseGrid;
    use crate::lut::{build_table, QuantizerSpec};
    use crate::probe::SqueezedThermalProbe;

    fn table() -> LikelihoodTable {
        let p = SqueezedThermalProbe::from_db(5.69, 11.83).unwrap();
        build_table(
            &p,
            &PhaseGrid::new(256).unwrap(),
            &QuantizerSpec::for_probe(&p),
        )
        .unwrap()
    }

    #[test]
    fn rejects_small_runs() {
        assert!(bench_throughput(&table(), 10, 0).is_err());
    }

    #[test]
    fn report_contents_and_reproducibility() {
        let t = table();
        let a = bench_throughput(&t, MIN_BENCH_SAMPLES, 5).unwrap();
        let b = bench_throughput(&t, MIN_BENCH_SAMPLES, 5).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert_eq!((a.grid_points, a.bins, a.scale), (256, 4096, 1 << 20));
        assert!(a.accuracy.map_difference_steps.abs() <= 1);
        assert!((a.accuracy.variance_ratio - 1.0).abs() < 0.02);
        assert!(a.lut.updates_per_sec > 0.0 && a.exact.updates_per_sec > 0.0);
        let json = serde_json::to_value(&a).unwrap();
        assert!(json["machine"]["arch"].is_string());
        assert!(json["scale"].is_u64());
    }
}

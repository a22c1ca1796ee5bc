//! Fixed-point lookup-table estimator for streaming operation.
//!
//! Each incoming quadrature value is clipped and quantized to one of `B`
//! uniform bins; the precomputed row of scaled integer log-likelihoods for
//! that bin is added to `G` 64-bit accumulators. Only `finalize` touches
//! floating point.
//!
//! Table entries are `i32`, accumulators `i64`. A stream can absorb
//! `i64::MAX / max|entry|` samples before an accumulator could overflow;
//! that capacity is fixed when the table is built and enforced per update.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{normalize, PhaseEstimator, PhaseGrid, PosteriorSummary};
use crate::error::{Error, Result};
use crate::homodyne::HomodyneBatch;
use crate::probe::SqueezedThermalProbe;

pub const DEFAULT_BINS: usize = 4096;
pub const DEFAULT_SCALE: u64 = 1 << 20;
/// Default clipping half-width in units of the largest quadrature standard deviation.
pub const DEFAULT_CLIP_SIGMAS: f64 = 6.0;

const DUMP_MAGIC: &str = "sqzphase-lut 1";

/// Mid-rise uniform quantizer over `[x_min, x_max)` plus the fixed-point scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub bins: usize,
    pub scale: u64,
}

impl QuantizerSpec {
    /// Default quantizer for `probe`: 4096 bins, scale 2^20, clip at
    /// six anti-squeezed standard deviations.
    pub fn for_probe(probe: &SqueezedThermalProbe) -> Self {
        let half = DEFAULT_CLIP_SIGMAS * probe.max_variance().sqrt();
        Self {
            x_min: -half,
            x_max: half,
            bins: DEFAULT_BINS,
            scale: DEFAULT_SCALE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            return Err(Error::InvalidQuantizer(format!(
                "clip range [{}, {}) is empty or not finite",
                self.x_min, self.x_max
            )));
        }
        // one bin is allowed; it simply discards the data
        if self.bins == 0 {
            return Err(Error::InvalidQuantizer("need at least one bin".into()));
        }
        if !self.scale.is_power_of_two() {
            return Err(Error::InvalidQuantizer(format!(
                "scale {} is not a power of two",
                self.scale
            )));
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        (self.x_max - self.x_min) / self.bins as f64
    }

    pub fn center(&self, bin: usize) -> f64 {
        self.x_min + (bin as f64 + 0.5) * self.bin_width()
    }

    /// Bin index for `x`, and whether `x` had to be clipped.
    #[inline]
    pub fn quantize(&self, x: f64) -> (usize, bool) {
        let pos = (x - self.x_min) / self.bin_width();
        let clipped = !(pos >= 0.0 && pos < self.bins as f64);
        // NaN saturates to bin 0 through the `as` cast
        let bin = (pos.floor().max(0.0) as usize).min(self.bins - 1);
        (bin, clipped)
    }
}

#[derive(Debug, Clone)]
pub struct LikelihoodTable {
    probe: SqueezedThermalProbe,
    grid: PhaseGrid,
    quantizer: QuantizerSpec,
    entries: Vec<i32>,
    max_abs_entry: i64,
}

pub fn build_table(
    probe: &SqueezedThermalProbe,
    grid: &PhaseGrid,
    quantizer: &QuantizerSpec,
) -> Result<LikelihoodTable> {
    quantizer.validate()?;
    let g = grid.len();
    let scale = quantizer.scale as f64;
    let (log_norm, inv_two_var): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .map(|phi| {
            let v = probe.quadrature_variance(phi);
            (-0.5 * (2.0 * PI * v).ln(), 1.0 / (2.0 * v))
        })
        .unzip();

    let mut entries = vec![0i32; quantizer.bins * g];
    let worst = entries
        .par_chunks_mut(g)
        .enumerate()
        .map(|(b, row)| {
            let c = quantizer.center(b);
            let mut worst = 0.0f64;
            for (j, e) in row.iter_mut().enumerate() {
                let v = (scale * (log_norm[j] - c * c * inv_two_var[j])).round();
                worst = worst.max(v.abs());
                // saturating cast; rejected below if it saturated
                *e = v as i32;
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    if worst.is_nan() || worst > i32::MAX as f64 {
        return Err(Error::TableCapacity {
            max_entry: worst / scale,
            scale: quantizer.scale,
        });
    }
    Ok(LikelihoodTable {
        probe: *probe,
        grid: *grid,
        quantizer: *quantizer,
        max_abs_entry: (worst as i64).max(1),
        entries,
    })
}

impl LikelihoodTable {
    pub fn probe(&self) -> &SqueezedThermalProbe {
        &self.probe
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn quantizer(&self) -> &QuantizerSpec {
        &self.quantizer
    }

    pub fn entries(&self) -> &[i32] {
        &self.entries
    }

    pub fn row(&self, bin: usize) -> &[i32] {
        let g = self.grid.len();
        &self.entries[bin * g..(bin + 1) * g]
    }

    pub fn max_abs_entry(&self) -> i64 {
        self.max_abs_entry
    }

    /// Samples a stream may absorb without any accumulator overflowing.
    pub fn capacity(&self) -> u64 {
        (i64::MAX / self.max_abs_entry) as u64
    }

    /// Writes the text dump: a key/value header followed by one line of
    /// `G` space-separated integers per bin (row-major).
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        let q = &self.quantizer;
        writeln!(out, "{DUMP_MAGIC}")?;
        writeln!(out, "grid_points {}", self.grid.len())?;
        writeln!(out, "bins {}", q.bins)?;
        writeln!(out, "scale {}", q.scale)?;
        writeln!(out, "x_min {}", q.x_min)?;
        writeln!(out, "x_max {}", q.x_max)?;
        writeln!(out, "r {}", self.probe.r())?;
        writeln!(out, "n_th {}", self.probe.n_th())?;
        writeln!(out, "entries")?;
        let mut line = String::new();
        for b in 0..q.bins {
            line.clear();
            for (j, e) in self.row(b).iter().enumerate() {
                if j > 0 {
                    line.push(' ');
                }
                line.push_str(&e.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_dump<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::MalformedDump("unexpected end of input".into()))
        };
        if next()? != DUMP_MAGIC {
            return Err(Error::MalformedDump("missing header".into()));
        }
        fn field<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
            line.strip_prefix(key)
                .and_then(|v| v.strip_prefix(' '))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| {
                    Error::MalformedDump(format!("expected `{key} <value>`, got {line:?}"))
                })
        }
        let g: usize = field(&next()?, "grid_points")?;
        let bins: usize = field(&next()?, "bins")?;
        let scale: u64 = field(&next()?, "scale")?;
        let x_min: f64 = field(&next()?, "x_min")?;
        let x_max: f64 = field(&next()?, "x_max")?;
        let r: f64 = field(&next()?, "r")?;
        let n_th: f64 = field(&next()?, "n_th")?;
        if next()? != "entries" {
            return Err(Error::MalformedDump("missing entries marker".into()));
        }
        let grid = PhaseGrid::new(g)?;
        let quantizer = QuantizerSpec {
            x_min,
            x_max,
            bins,
            scale,
        };
        quantizer.validate()?;
        let probe = SqueezedThermalProbe::new(r, n_th)?;
        let mut entries = Vec::with_capacity(bins * g);
        for b in 0..bins {
            let line = next()?;
            let before = entries.len();
            for tok in line.split_ascii_whitespace() {
                entries.push(
                    tok.parse::<i32>()
                        .map_err(|e| Error::MalformedDump(format!("row {b}: {e}")))?,
                );
            }
            if entries.len() - before != g {
                return Err(Error::MalformedDump(format!(
                    "row {b} does not have {g} entries"
                )));
            }
        }
        let max_abs_entry = entries
            .iter()
            .map(|e| (*e as i64).abs())
            .max()
            .unwrap_or(0)
            .max(1);
        Ok(Self {
            probe,
            grid,
            quantizer,
            entries,
            max_abs_entry,
        })
    }
}

/// Per-run integer accumulators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamState {
    pub accumulators: Vec<i64>,
    pub count: u64,
    pub saturated: bool,
}

impl StreamState {
    pub fn new(table: &LikelihoodTable) -> Self {
        Self {
            accumulators: vec![0; table.grid.len()],
            count: 0,
            saturated: false,
        }
    }

    /// Adds one sample: O(G) integer additions.
    pub fn update(&mut self, table: &LikelihoodTable, x: f64) -> Result<()> {
        if self.accumulators.len() != table.grid.len() {
            return Err(Error::GridMismatch {
                table: table.grid.len(),
                state: self.accumulators.len(),
            });
        }
        if self.count >= table.capacity() {
            return Err(Error::AccumulatorCapacity {
                capacity: table.capacity(),
            });
        }
        let (bin, clipped) = table.quantizer.quantize(x);
        self.saturated |= clipped;
        for (acc, &e) in self.accumulators.iter_mut().zip(table.row(bin)) {
            *acc += e as i64;
        }
        self.count += 1;
        Ok(())
    }

    pub fn extend(&mut self, table: &LikelihoodTable, xs: &[f64]) -> Result<()> {
        xs.iter().try_for_each(|&x| self.update(table, x))
    }

    /// Normalised grid posterior from the accumulators.
    pub fn finalize(&self, table: &LikelihoodTable) -> Result<PosteriorSummary> {
        if self.count == 0 {
            return Err(Error::NoSamples);
        }
        if self.accumulators.len() != table.grid.len() {
            return Err(Error::GridMismatch {
                table: table.grid.len(),
                state: self.accumulators.len(),
            });
        }
        // shift by the integer maximum before leaving the integer domain
        let peak = *self.accumulators.iter().max().unwrap();
        let scale = table.quantizer.scale as f64;
        let log_weights: Vec<f64> = self
            .accumulators
            .iter()
            .map(|&a| (a - peak) as f64 / scale)
            .collect();
        Ok(normalize(&table.grid, &log_weights).1)
    }
}

impl PhaseEstimator for LikelihoodTable {
    fn grid(&self) -> PhaseGrid {
        self.grid
    }

    fn estimate(&self, batch: &HomodyneBatch) -> Result<PosteriorSummary> {
        let mut state = StreamState::new(self);
        state.extend(self, &batch.samples)?;
        state.finalize(self)
    }
}

//! Seedable homodyne sampling of a squeezed thermal probe.
//!
//! Generator: ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64`) feeding
//! `rand_distr::StandardNormal` (ziggurat). Outcomes are `sigma * z` with
//! `sigma^2` the probe's quadrature variance at the measured phase.
//! Repetition `i` of an experiment uses seed `master_seed ^ i`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::Result;
use crate::probe::SqueezedThermalProbe;

/// Per-repetition seed derivation.
pub fn derive_seed(master_seed: u64, repetition: u64) -> u64 {
    master_seed ^ repetition
}

/// Single-owner stream of standard normal draws.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    position: u64,
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            position: 0,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of normal draws taken so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.position += 1;
        StandardNormal.sample(&mut self.rng)
    }
}

/// Quadrature outcomes recorded at one relative phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomodyneBatch {
    pub samples: Vec<f64>,
    pub measured_phase: f64,
    pub probe: SqueezedThermalProbe,
}

impl HomodyneBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Writes one sample per line using the shortest round-tripping decimal form.
    pub fn write_column<W: Write>(&self, mut out: W) -> Result<()> {
        for x in &self.samples {
            writeln!(out, "{x}")?;
        }
        Ok(())
    }
}

/// Draws `m` homodyne outcomes at relative phase `phi`.
pub fn sample_homodyne(
    probe: &SqueezedThermalProbe,
    phi: f64,
    m: usize,
    stream: &mut RandomStream,
) -> HomodyneBatch {
    let sigma = probe.quadrature_variance(phi).sqrt();
    let samples = (0..m).map(|_| sigma * stream.standard_normal()).collect();
    HomodyneBatch {
        samples,
        measured_phase: phi,
        probe: *probe,
    }
}

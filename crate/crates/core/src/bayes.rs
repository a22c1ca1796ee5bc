//! Grid Bayesian inference of the phase on `[0, pi/2]`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homodyne::HomodyneBatch;
use crate::probe::SqueezedThermalProbe;

pub const DEFAULT_GRID_POINTS: usize = 2048;

/// Uniform grid on `[0, pi/2]` including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseGrid {
    points: usize,
}

impl Default for PhaseGrid {
    fn default() -> Self {
        Self {
            points: DEFAULT_GRID_POINTS,
        }
    }
}

impl PhaseGrid {
    pub fn new(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {points}"
            )));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        FRAC_PI_2 / (self.points - 1) as f64
    }

    pub fn value(&self, j: usize) -> f64 {
        if j + 1 == self.points {
            FRAC_PI_2
        } else {
            j as f64 * self.step()
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.points).map(move |j| self.value(j))
    }
}

/// Point estimate and spread of a grid posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub map_index: usize,
    pub map_phase: f64,
    pub mean_phase: f64,
    pub variance: f64,
}

#[derive(Debug, Clone)]
pub struct Posterior {
    pub grid: PhaseGrid,
    /// Accumulated log-likelihood plus log prior, unnormalised.
    pub log_weights: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub map_phase: f64,
    pub mean_phase: f64,
    pub variance: f64,
    map_index: usize,
}

impl Posterior {
    pub fn summary(&self) -> PosteriorSummary {
        PosteriorSummary {
            map_index: self.map_index,
            map_phase: self.map_phase,
            mean_phase: self.mean_phase,
            variance: self.variance,
        }
    }

    pub fn map_index(&self) -> usize {
        self.map_index
    }

    /// `(phase, probability)` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["phase", "probability"])?;
        for (phi, p) in self.grid.iter().zip(&self.probabilities) {
            w.write_record([phi.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Gaussian log-density of quadrature value `x` at relative phase `phi`.
pub fn log_likelihood(x: f64, phi: f64, probe: &SqueezedThermalProbe) -> f64 {
    let v = probe.quadrature_variance(phi);
    -0.5 * (2.0 * PI * v).ln() - x * x / (2.0 * v)
}

/// Grid posterior for a batch measured at an unknown phase.
///
/// The summed log-likelihood depends on the data only through `M` and
/// `S = sum x_i^2`, so each grid point costs O(1) after one pass over the
/// batch. `S` is accumulated with Neumaier compensation, which keeps the
/// result within rounding of the exact sum regardless of sample order.
/// An empty batch returns the prior. `prior` defaults to uniform.
pub fn posterior(
    batch: &HomodyneBatch,
    probe: &SqueezedThermalProbe,
    grid: &PhaseGrid,
    prior: Option<&[f64]>,
) -> Result<Posterior> {
    let log_prior = match prior {
        Some(p) => Some(validate_prior(p, grid)?),
        None => None,
    };
    let m = batch.len() as f64;
    let s = compensated_sum_of_squares(&batch.samples);
    let log_weights = grid
        .iter()
        .enumerate()
        .map(|(j, phi)| {
            let v = probe.quadrature_variance(phi);
            let ll = if m == 0.0 {
                0.0
            } else {
                -0.5 * m * (2.0 * PI * v).ln() - s / (2.0 * v)
            };
            ll + log_prior.as_ref().map_or(0.0, |lp| lp[j])
        })
        .collect::<Vec<_>>();
    Ok(from_log_weights(*grid, log_weights))
}

pub(crate) fn from_log_weights(grid: PhaseGrid, log_weights: Vec<f64>) -> Posterior {
    let (probabilities, summary) = normalize(&grid, &log_weights);
    Posterior {
        grid,
        log_weights,
        probabilities,
        map_phase: summary.map_phase,
        mean_phase: summary.mean_phase,
        variance: summary.variance,
        map_index: summary.map_index,
    }
}

/// Max-shifted exponentiation and grid moments. Ties in the maximum go to
/// the lowest phase.
pub(crate) fn normalize(grid: &PhaseGrid, log_weights: &[f64]) -> (Vec<f64>, PosteriorSummary) {
    let mut map_index = 0;
    for (j, &w) in log_weights.iter().enumerate() {
        if w > log_weights[map_index] {
            map_index = j;
        }
    }
    let peak = log_weights[map_index];
    let mut probabilities: Vec<f64> = log_weights.iter().map(|&w| (w - peak).exp()).collect();
    let total: f64 = probabilities.iter().sum();
    probabilities.iter_mut().for_each(|p| *p /= total);

    let mean: f64 = grid
        .iter()
        .zip(&probabilities)
        .map(|(phi, p)| phi * p)
        .sum();
    let variance: f64 = grid
        .iter()
        .zip(&probabilities)
        .map(|(phi, p)| (phi - mean) * (phi - mean) * p)
        .sum();
    let summary = PosteriorSummary {
        map_index,
        map_phase: grid.value(map_index),
        mean_phase: mean,
        variance,
    };
    (probabilities, summary)
}

fn validate_prior(prior: &[f64], grid: &PhaseGrid) -> Result<Vec<f64>> {
    if prior.len() != grid.len() {
        return Err(Error::InvalidPrior(format!(
            "{} masses for a {}-point grid",
            prior.len(),
            grid.len()
        )));
    }
    if prior.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
        return Err(Error::InvalidPrior(
            "masses must be finite and non-negative".into(),
        ));
    }
    let total: f64 = prior.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidPrior(format!("masses sum to {total}, not 1")));
    }
    Ok(prior.iter().map(|p| p.ln()).collect())
}

fn compensated_sum_of_squares(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for &x in xs {
        let t = x * x;
        let s = sum + t;
        if sum.abs() >= t.abs() {
            c += (sum - s) + t;
        } else {
            c += (t - s) + sum;
        }
        sum = s;
    }
    sum + c
}

/// Anything that turns a homodyne batch into a grid posterior summary.
pub trait PhaseEstimator: Sync {
    fn grid(&self) -> PhaseGrid;
    fn estimate(&self, batch: &HomodyneBatch) -> Result<PosteriorSummary>;
}

/// Floating-point engine with a uniform prior.
#[derive(Debug, Clone, Copy)]
pub struct ExactEstimator {
    pub probe: SqueezedThermalProbe,
    pub grid: PhaseGrid,
}

impl PhaseEstimator for ExactEstimator {
    fn grid(&self) -> PhaseGrid {
        self.grid
    }

    fn estimate(&self, batch: &HomodyneBatch) -> Result<PosteriorSummary> {
        Ok(posterior(batch, &self.probe, &self.grid, None)?.summary())
    }
}

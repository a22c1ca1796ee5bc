//! Squeezed thermal probe and its closed-form homodyne statistics.
//!
//! Variances are in vacuum-noise units: the vacuum quadrature variance is 1
//! and all decibel figures are `10 * log10` of variance ratios.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the uncertainty product when inverting decibel figures, so a
/// pure state given as `(x, x)` dB is not rejected over a rounding ulp.
const PRODUCT_SLACK: f64 = 1e-12;

/// A single-mode squeezed thermal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezedThermalProbe {
    r: f64,
    n_th: f64,
}

impl SqueezedThermalProbe {
    pub fn new(r: f64, n_th: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidProbe(format!(
                "squeezing r = {r} must be finite and >= 0"
            )));
        }
        if !(n_th.is_finite() && n_th >= 0.0) {
            return Err(Error::InvalidProbe(format!(
                "thermal photon number n_th = {n_th} must be finite and >= 0"
            )));
        }
        Ok(Self { r, n_th })
    }

    pub fn vacuum() -> Self {
        Self { r: 0.0, n_th: 0.0 }
    }

    /// Pure squeezed vacuum with squeezing parameter `r`.
    pub fn pure(r: f64) -> Result<Self> {
        Self::new(r, 0.0)
    }

    /// Recovers `(r, n_th)` from measured squeezing and anti-squeezing levels.
    ///
    /// `squeezed_db` is the noise reduction below vacuum (positive number) and
    /// `antisqueezed_db` the amplification above vacuum.
    pub fn from_db(squeezed_db: f64, antisqueezed_db: f64) -> Result<Self> {
        if !(squeezed_db.is_finite() && antisqueezed_db.is_finite()) {
            return Err(Error::InvalidProbe("decibel values must be finite".into()));
        }
        let v_sq = 10f64.powf(-squeezed_db / 10.0);
        let v_as = 10f64.powf(antisqueezed_db / 10.0);
        let product = v_sq * v_as;
        if product < 1.0 - PRODUCT_SLACK || v_as < v_sq {
            return Err(Error::Unphysical {
                squeezed_db,
                antisqueezed_db,
                product,
            });
        }
        let r = 0.25 * (v_as / v_sq).ln();
        let n_th = ((product.sqrt() - 1.0) / 2.0).max(0.0);
        Self::new(r, n_th)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n_th(&self) -> f64 {
        self.n_th
    }

    pub fn is_pure(&self) -> bool {
        self.n_th == 0.0
    }

    /// Homodyne quadrature variance at relative phase `phi`:
    /// `(2 n_th + 1) [exp(-2r) cos^2 phi + exp(2r) sin^2 phi]`.
    pub fn quadrature_variance(&self, phi: f64) -> f64 {
        (2.0 * self.n_th + 1.0) * shape(self.r, phi)
    }

    /// Largest quadrature variance over all phases (anti-squeezed quadrature).
    pub fn max_variance(&self) -> f64 {
        (2.0 * self.n_th + 1.0) * (2.0 * self.r).exp()
    }

    /// Mean photon number `n_th + (2 n_th + 1) sinh^2 r`.
    pub fn mean_photons(&self) -> f64 {
        let s = self.r.sinh();
        self.n_th + (2.0 * self.n_th + 1.0) * s * s
    }

    /// Homodyne Fisher information per sample, `(1/2) (d/dphi ln sigma^2)^2`.
    ///
    /// The thermal prefactor drops out of the logarithmic derivative, so the
    /// result depends on `r` only.
    pub fn fisher_info(&self, phi: f64) -> f64 {
        let g = shape(self.r, phi);
        let s = (2.0 * self.r).sinh() * (2.0 * phi).sin();
        2.0 * s * s / (g * g)
    }

    /// Phase maximising [`fisher_info`](Self::fisher_info) on `(0, pi/2)`:
    /// `arctan(exp(-2r))`.
    pub fn optimal_phase(&self) -> Result<f64> {
        self.require_sensitive()?;
        Ok((-2.0 * self.r).exp().atan())
    }

    /// Peak homodyne Fisher information, `max_phi F(phi) = 2 sinh^2(2r)`.
    pub fn max_fisher_info(&self) -> Result<f64> {
        self.require_sensitive()?;
        Ok(qfi_pure(self.r))
    }

    pub(crate) fn require_sensitive(&self) -> Result<()> {
        if self.r > 0.0 {
            Ok(())
        } else {
            Err(Error::DegenerateProbe { r: self.r })
        }
    }
}

#[inline]
fn shape(r: f64, phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    (-2.0 * r).exp() * c * c + (2.0 * r).exp() * s * s
}

/// Quantum Fisher information of pure squeezed vacuum, `2 sinh^2(2r)`.
///
/// Equal to `8 n (n + 1)` with `n = sinh^2 r`.
pub fn qfi_pure(r: f64) -> f64 {
    let s = (2.0 * r).sinh();
    2.0 * s * s
}

/// Quantum Fisher information of pure squeezed vacuum holding `mean_n` photons.
pub fn qfi_pure_at_energy(mean_n: f64) -> f64 {
    8.0 * mean_n * (mean_n + 1.0)
}

/// Quantum Fisher information of a coherent state, `4 <n>`.
pub fn qfi_coherent(mean_n: f64) -> f64 {
    4.0 * mean_n
}

/// Converts a variance ratio in dB (positive = above vacuum) to linear units.
pub fn db_to_variance(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Whether `phi` lies in the estimation interval `(0, pi/2]`.
pub fn in_estimation_range(phi: f64) -> bool {
    phi > 0.0 && phi <= FRAC_PI_2
}

//! Variance bounds for a probe and a sample budget.

use serde::Serialize;

use crate::bayes::PhaseGrid;
use crate::error::{Error, Result};
use crate::probe::{qfi_coherent, qfi_pure, qfi_pure_at_energy, SqueezedThermalProbe};

/// Fisher curve plus every reference variance at `n_samples`.
///
/// * `ocr`: `1 / (N max_phi F)`, homodyne on the actual (impure) probe.
/// * `qcr_pure`: `1 / (N H)` for pure squeezed vacuum at the probe's energy.
/// * `qcr_coherent`: shot-noise limit `1 / (4 N <n>)`.
/// * `sql`: heterodyne limit `1 / (2 N <n>)`.
/// * `heisenberg_ref`: `1 / (N <n>^2)`, a scaling reference only.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub probe: SqueezedThermalProbe,
    pub n_samples: u64,
    pub mean_photons: f64,
    pub optimal_phase: f64,
    pub fisher_curve: Vec<(f64, f64)>,
    pub ocr: f64,
    pub qcr_pure: f64,
    pub qcr_coherent: f64,
    pub sql: f64,
    pub heisenberg_ref: f64,
}

/// Scalar bounds only; the harness attaches these to every summary row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundValues {
    pub sql: f64,
    pub qcr_coherent: f64,
    pub ocr: f64,
    pub qcr_pure: f64,
}

impl BoundsReport {
    pub fn values(&self) -> BoundValues {
        BoundValues {
            sql: self.sql,
            qcr_coherent: self.qcr_coherent,
            ocr: self.ocr,
            qcr_pure: self.qcr_pure,
        }
    }

    /// Cramér-Rao variance `1 / (N F(phi))` at one phase; infinite where F vanishes.
    pub fn cramer_rao(&self, phi: f64) -> f64 {
        1.0 / (self.n_samples as f64 * self.probe.fisher_info(phi))
    }
}

pub fn bounds_report(
    probe: &SqueezedThermalProbe,
    n_samples: u64,
    grid: &PhaseGrid,
) -> Result<BoundsReport> {
    let values = bound_values(probe, n_samples)?;
    let n_bar = probe.mean_photons();
    let n = n_samples as f64;
    Ok(BoundsReport {
        probe: *probe,
        n_samples,
        mean_photons: n_bar,
        optimal_phase: probe.optimal_phase()?,
        fisher_curve: grid
            .iter()
            .map(|phi| (phi, probe.fisher_info(phi)))
            .collect(),
        ocr: values.ocr,
        qcr_pure: values.qcr_pure,
        qcr_coherent: values.qcr_coherent,
        sql: values.sql,
        heisenberg_ref: 1.0 / (n * n_bar * n_bar),
    })
}

pub fn bound_values(probe: &SqueezedThermalProbe, n_samples: u64) -> Result<BoundValues> {
    if n_samples == 0 {
        return Err(Error::InvalidConfig(
            "bounds need at least one sample".into(),
        ));
    }
    probe.require_sensitive()?;
    let n_bar = probe.mean_photons();
    if n_bar <= 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let n = n_samples as f64;
    Ok(BoundValues {
        sql: 1.0 / (2.0 * n * n_bar),
        qcr_coherent: 1.0 / (n * qfi_coherent(n_bar)),
        ocr: 1.0 / (n * qfi_pure(probe.r())),
        qcr_pure: 1.0 / (n * qfi_pure_at_energy(n_bar)),
    })
}

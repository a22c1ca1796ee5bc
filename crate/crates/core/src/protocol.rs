//! Two-stage adaptive phase estimation with local-oscillator feedback.
//!
//! A run spends `M_R` samples at the unknown phase to get a rough MAP
//! estimate, shifts the local oscillator by `delta = rough - phi_opt`, spends
//! the remaining `M_F` samples at the corrected phase, and adds `delta` back
//! to the final-stage MAP estimate.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::bayes::{ExactEstimator, PhaseEstimator, PhaseGrid};
use crate::error::{Error, Result};
use crate::homodyne::{sample_homodyne, RandomStream};
use crate::probe::{in_estimation_range, SqueezedThermalProbe};

pub const DEFAULT_ROUGH_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n_tot: u64,
    pub rough_fraction: f64,
    pub grid: PhaseGrid,
    pub adaptive: bool,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn new(n_tot: u64) -> Self {
        Self {
            n_tot,
            rough_fraction: DEFAULT_ROUGH_FRACTION,
            grid: PhaseGrid::default(),
            adaptive: true,
            seed: 0,
        }
    }

    /// `(M_R, M_F)` with `M_R = round(rough_fraction * N_tot)`.
    pub fn split(&self) -> (u64, u64) {
        let m_r = (self.rough_fraction * self.n_tot as f64).round() as u64;
        (m_r, self.n_tot.saturating_sub(m_r))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rough_fraction > 0.0 && self.rough_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rough_fraction {} outside (0, 1)",
                self.rough_fraction
            )));
        }
        if self.n_tot == 0 {
            return Err(Error::InvalidConfig("n_tot must be positive".into()));
        }
        if self.adaptive {
            let (m_r, m_f) = self.split();
            if m_r == 0 || m_f == 0 {
                return Err(Error::InvalidConfig(format!(
                    "split of n_tot = {} gives M_R = {m_r}, M_F = {m_f}; both must be >= 1",
                    self.n_tot
                )));
            }
            if m_f <= m_r {
                return Err(Error::InvalidConfig(format!(
                    "final stage must use more samples than the rough stage (M_R = {m_r}, M_F = {m_f})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Adaptive,
    Nonadaptive,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Adaptive => "adaptive",
            Mode::Nonadaptive => "nonadaptive",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Mode::Adaptive),
            "nonadaptive" | "non-adaptive" => Ok(Mode::Nonadaptive),
            other => Err(Error::InvalidSpec(format!("unknown mode {other:?}"))),
        }
    }
}

/// Full audit trail of one protocol run.
///
/// Rough-stage fields are `None` for non-adaptive runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationRecord {
    pub mode: Mode,
    pub true_phase: f64,
    pub rough_estimate: Option<f64>,
    pub rough_error: Option<f64>,
    pub rough_variance: Option<f64>,
    pub target_phase: Option<f64>,
    pub feedback_shift: f64,
    pub corrected_phase: f64,
    pub final_stage_estimate: f64,
    pub final_estimate: f64,
    pub final_error: f64,
    pub posterior_variance: f64,
    pub rough_samples: u64,
    pub final_samples: u64,
    pub clamped: bool,
}

impl EstimationRecord {
    pub fn samples_used(&self) -> (u64, u64) {
        (self.rough_samples, self.final_samples)
    }
}

/// Runs the mode selected by `config.adaptive` with a stream seeded from `config.seed`.
pub fn run(
    probe: &SqueezedThermalProbe,
    true_phase: f64,
    config: &ProtocolConfig,
) -> Result<EstimationRecord> {
    let estimator = ExactEstimator {
        probe: *probe,
        grid: config.grid,
    };
    run_with(&estimator, probe, true_phase, config)
}

pub fn run_with(
    estimator: &dyn PhaseEstimator,
    probe: &SqueezedThermalProbe,
    true_phase: f64,
    config: &ProtocolConfig,
) -> Result<EstimationRecord> {
    let mut stream = RandomStream::new(config.seed);
    if config.adaptive {
        run_adaptive_with(estimator, probe, true_phase, config, &mut stream)
    } else {
        run_nonadaptive_with(estimator, probe, true_phase, config, &mut stream)
    }
}

pub fn run_adaptive(
    probe: &SqueezedThermalProbe,
    true_phase: f64,
    config: &ProtocolConfig,
    stream: &mut RandomStream,
) -> Result<EstimationRecord> {
    let estimator = ExactEstimator {
        probe: *probe,
        grid: config.grid,
    };
    run_adaptive_with(&estimator, probe, true_phase, config, stream)
}

pub fn run_nonadaptive(
    probe: &SqueezedThermalProbe,
    true_phase: f64,
    config: &ProtocolConfig,
    stream: &mut RandomStream,
) -> Result<EstimationRecord> {
    let estimator = ExactEstimator {
        probe: *probe,
        grid: config.grid,
    };
    run_nonadaptive_with(&estimator, probe, true_phase, config, stream)
}

pub fn run_adaptive_with(
    estimator: &dyn PhaseEstimator,
    probe: &SqueezedThermalProbe,
    true_phase: f64,
    config: &ProtocolConfig,
    stream: &mut RandomStream,
) -> Result<EstimationRecord> {
    let config = ProtocolConfig {
        adaptive: true,
        ..*config
    };
    check_inputs(estimator, probe, true_phase, &config)?;
    let target = probe.optimal_phase()?;
    let (m_r, m_f) = config.split();

    let rough_batch = sample_homodyne(probe, true_phase, m_r as usize, stream);
    let rough = estimator.estimate(&rough_batch)?;
    let shift = rough.map_phase - target;

    // May leave [0, pi/2]; the statistics are even in phi so sampling at the
    // signed phase is what the shifted oscillator would see.
    let corrected = true_phase - shift;
    let final_batch = sample_homodyne(probe, corrected, m_f as usize, stream);
    let last = estimator.estimate(&final_batch)?;

    let (final_estimate, clamped) = clamp_phase(last.map_phase + shift);
    Ok(EstimationRecord {
        mode: Mode::Adaptive,
        true_phase,
        rough_estimate: Some(rough.map_phase),
        rough_error: Some(rough.map_phase - true_phase),
        rough_variance: Some(rough.variance),
        target_phase: Some(target),
        feedback_shift: shift,
        corrected_phase: corrected,
        final_stage_estimate: last.map_phase,
        final_estimate,
        final_error: final_estimate - true_phase,
        posterior_variance: last.variance,
        rough_samples: m_r,
        final_samples: m_f,
        clamped,
    })
}

pub fn run_nonadaptive_with(
    estimator: &dyn PhaseEstimator,
    probe: &SqueezedThermalProbe,
    true_phase: f64,
    config: &ProtocolConfig,
    stream: &mut RandomStream,
) -> Result<EstimationRecord> {
    let config = ProtocolConfig {
        adaptive: false,
        ..*config
    };
    check_inputs(estimator, probe, true_phase, &config)?;
    let batch = sample_homodyne(probe, true_phase, config.n_tot as usize, stream);
    let post = estimator.estimate(&batch)?;
    Ok(EstimationRecord {
        mode: Mode::Nonadaptive,
        true_phase,
        rough_estimate: None,
        rough_error: None,
        rough_variance: None,
        target_phase: None,
        feedback_shift: 0.0,
        corrected_phase: true_phase,
        final_stage_estimate: post.map_phase,
        final_estimate: post.map_phase,
        final_error: post.map_phase - true_phase,
        posterior_variance: post.variance,
        rough_samples: 0,
        final_samples: config.n_tot,
        clamped: false,
    })
}

fn check_inputs(
    estimator: &dyn PhaseEstimator,
    probe: &SqueezedThermalProbe,
    true_phase: f64,
    config: &ProtocolConfig,
) -> Result<()> {
    config.validate()?;
    probe.require_sensitive()?;
    if !in_estimation_range(true_phase) {
        return Err(Error::PhaseOutOfRange(true_phase));
    }
    if estimator.grid() != config.grid {
        return Err(Error::InvalidConfig(format!(
            "estimator grid has {} points, config grid has {}",
            estimator.grid().len(),
            config.grid.len()
        )));
    }
    Ok(())
}

fn clamp_phase(phi: f64) -> (f64, bool) {
    if phi < 0.0 {
        (0.0, true)
    } else if phi > FRAC_PI_2 {
        (FRAC_PI_2, true)
    } else {
        (phi, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::posterior;

    fn paper() -> SqueezedThermalProbe {
        SqueezedThermalProbe::from_db(5.69, 11.83).unwrap()
    }

    fn config(n_tot: u64, seed: u64) -> ProtocolConfig {
        ProtocolConfig {
            seed,
            ..ProtocolConfig::new(n_tot)
        }
    }

    #[test]
    fn split_and_validation() {
        assert_eq!(config(10_000, 0).split(), (1000, 9000));
        let mut c = config(10_000, 0);
        c.rough_fraction = 0.0;
        assert!(c.validate().is_err());
        c.rough_fraction = 1.0;
        assert!(c.validate().is_err());
        c.rough_fraction = 0.6;
        assert!(c.validate().is_err());
        c.adaptive = false;
        assert!(c.validate().is_ok());
        let tiny = config(4, 0);
        assert!(tiny.validate().is_err(), "M_R rounds to 0");
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = paper();
        let c = config(1000, 1);
        let mut s = RandomStream::new(1);
        assert!(matches!(
            run_adaptive(&p, 0.0, &c, &mut s),
            Err(Error::PhaseOutOfRange(_))
        ));
        assert!(run_adaptive(&p, 1.6, &c, &mut s).is_err());
        let vac = SqueezedThermalProbe::vacuum();
        assert!(matches!(
            run_adaptive(&vac, 0.5, &c, &mut s),
            Err(Error::DegenerateProbe { .. })
        ));
        assert!(run_nonadaptive(&vac, 0.5, &c, &mut s).is_err());
    }

    #[test]
    fn bookkeeping_identity() {
        let p = paper();
        for seed in 0..50 {
            for phi in [0.2, 0.8, 1.4, FRAC_PI_2] {
                let r = run(&p, phi, &config(2000, seed)).unwrap();
                assert_eq!(r.samples_used(), (200, 1800));
                let shift = r.rough_estimate.unwrap() - p.optimal_phase().unwrap();
                assert_eq!(r.feedback_shift, shift);
                assert_eq!(r.corrected_phase, phi - shift);
                if !r.clamped {
                    let lhs = r.final_estimate - r.true_phase;
                    let rhs = r.final_stage_estimate - r.corrected_phase;
                    assert!((lhs - rhs).abs() < 1e-12);
                    assert_eq!(r.final_error, lhs);
                } else {
                    assert!(r.final_estimate == 0.0 || r.final_estimate == FRAC_PI_2);
                }
            }
        }
    }

    #[test]
    fn deterministic_records() {
        let p = paper();
        let a = run(&p, 0.9, &config(3000, 77)).unwrap();
        let b = run(&p, 0.9, &config(3000, 77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nonadaptive_is_a_single_posterior() {
        let p = paper();
        let mut c = config(5000, 8);
        c.adaptive = false;
        let r = run(&p, 0.7, &c).unwrap();
        assert_eq!(r.feedback_shift, 0.0);
        assert_eq!(r.corrected_phase, 0.7);
        assert_eq!(r.samples_used(), (0, 5000));
        let batch = sample_homodyne(&p, 0.7, 5000, &mut RandomStream::new(8));
        let post = posterior(&batch, &p, &c.grid, None).unwrap();
        assert_eq!(r.final_estimate, post.map_phase);
        assert_eq!(r.posterior_variance, post.variance);
    }

    #[test]
    fn run_dispatches_on_flag() {
        let p = paper();
        let mut c = config(1000, 3);
        c.adaptive = false;
        let explicit = run_nonadaptive(&p, 0.4, &c, &mut RandomStream::new(3)).unwrap();
        assert_eq!(run(&p, 0.4, &c).unwrap(), explicit);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let p = paper();
        let est = ExactEstimator {
            probe: p,
            grid: PhaseGrid::new(100).unwrap(),
        };
        let c = config(1000, 0);
        assert!(run_with(&est, &p, 0.5, &c).is_err());
    }

    #[test]
    fn starting_at_optimum_gives_small_shift() {
        let p = paper();
        let opt = p.optimal_phase().unwrap();
        let crb = 1.0 / (1000.0 * p.fisher_info(opt));
        let mut c = config(10_000, 0);
        let mut adaptive = 0.0;
        let mut fixed = 0.0;
        for seed in 0..80 {
            c.seed = seed;
            c.adaptive = true;
            let r = run(&p, opt, &c).unwrap();
            assert!(r.feedback_shift.abs() < 5.0 * crb.sqrt() + c.grid.step());
            adaptive += r.posterior_variance;
            c.adaptive = false;
            fixed += run(&p, opt, &c).unwrap().posterior_variance;
        }
        // adaptive spends 10% of the budget on the rough stage
        let ratio = adaptive / fixed;
        assert!(ratio > 1.0 && ratio < 1.25, "{ratio}");
    }

    #[test]
    fn feedback_helps_far_from_optimum() {
        let p = paper();
        let mut c = config(10_000, 0);
        let (mut a, mut n) = (0.0, 0.0);
        for seed in 0..80 {
            c.seed = seed;
            c.adaptive = true;
            a += run(&p, 1.2, &c).unwrap().posterior_variance;
            c.adaptive = false;
            n += run(&p, 1.2, &c).unwrap().posterior_variance;
        }
        assert!(n / a > 1.0, "nonadaptive {n} adaptive {a}");
    }

    #[test]
    fn clamping_is_rare() {
        // measured: ~2-3% at N_tot = 1e3 and 3e3 from reflections at phi = 0,
        // none from 1e4 upwards
        let p = paper();
        let mut clamps = 0;
        let mut total = 0;
        for seed in 0..100 {
            for k in 0..7 {
                let phi = 0.1 + k as f64 * (FRAC_PI_2 - 0.2) / 6.0;
                clamps += run(&p, phi, &config(10_000, seed)).unwrap().clamped as usize;
                total += 1;
            }
        }
        assert!((clamps as f64) < 0.01 * total as f64, "{clamps}/{total}");
    }
}

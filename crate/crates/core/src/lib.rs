//! Squeezing-enhanced adaptive Bayesian phase estimation.
//!
//! A squeezed thermal probe acquires an unknown phase in `(0, pi/2]`, which
//! is estimated from homodyne samples by grid Bayesian inference. The
//! adaptive protocol uses a small rough stage to steer the local oscillator
//! to the phase of maximal Fisher information before the final stage.
//!
//! * [`probe`]: probe parameters, quadrature variance, Fisher information.
//! * [`bounds`]: Cramér-Rao and reference variance bounds.
//! * [`homodyne`]: seeded homodyne sampling.
//! * [`bayes`]: grid posterior, MAP and posterior variance.
//! * [`protocol`]: two-stage feedback and the non-adaptive baseline.
//! * [`lut`]: fixed-point lookup-table streaming estimator.
//! * [`harness`]: Monte-Carlo sweeps and CSV/JSON emission.

pub mod bayes;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod homodyne;
pub mod lut;
pub mod probe;
pub mod protocol;
pub mod stats;
pub mod throughput;

pub use bayes::{
    log_likelihood, posterior, ExactEstimator, PhaseEstimator, PhaseGrid, Posterior,
    PosteriorSummary,
};
pub use bounds::{bound_values, bounds_report, BoundValues, BoundsReport};
pub use error::{Error, Result};
pub use harness::{
    emit_bounds, sweep_n, sweep_phase, EngineKind, ProbeSpec, RunSummary, SweepSpec,
};
pub use homodyne::{derive_seed, sample_homodyne, HomodyneBatch, RandomStream};
pub use lut::{build_table, LikelihoodTable, QuantizerSpec, StreamState};
pub use probe::{qfi_coherent, qfi_pure, SqueezedThermalProbe};
pub use protocol::{run, run_adaptive, run_nonadaptive, EstimationRecord, Mode, ProtocolConfig};
pub use throughput::{bench_throughput, ThroughputReport};

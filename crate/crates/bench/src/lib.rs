//! Fixtures shared by the benchmarks.

use sqzphase::{
    build_table, sample_homodyne, HomodyneBatch, LikelihoodTable, PhaseGrid, ProbeSpec,
    QuantizerSpec, RandomStream, SqueezedThermalProbe,
};

/// The measured squeezed-thermal probe used throughout.
pub fn measured_probe() -> SqueezedThermalProbe {
    ProbeSpec::measured()
        .build()
        .expect("measured probe is valid")
}

/// Default-size table for `probe` on a grid of `points`.
pub fn table(probe: &SqueezedThermalProbe, points: usize) -> LikelihoodTable {
    let grid = PhaseGrid::new(points).expect("grid");
    build_table(probe, &grid, &QuantizerSpec::for_probe(probe)).expect("table")
}

/// `m` samples at the optimal working point.
pub fn batch_at_optimum(probe: &SqueezedThermalProbe, m: usize, seed: u64) -> HomodyneBatch {
    let phi = probe.optimal_phase().expect("squeezed probe");
    sample_homodyne(probe, phi, m, &mut RandomStream::new(seed))
}

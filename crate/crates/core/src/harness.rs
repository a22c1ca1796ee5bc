//! Monte-Carlo sweeps over input phase and sample budget, and result emission.
//!
//! Output files (all written via temp file + rename, after every run has
//! finished):
//!
//! * `<prefix>_runs.csv`: one row per protocol run, columns [`RUN_COLUMNS`].
//! * `<prefix>_summary.csv`: one row per (phase, N_tot, mode), columns [`SUMMARY_COLUMNS`].
//! * `<prefix>_scaling.csv` (`sweep-n` only): one row per (N_tot, mode), columns [`SCALING_COLUMNS`].
//! * `<prefix>_meta.json`: spec echo, seed rule, slopes, crate version.
//!
//! Repetition `i` is seeded with `master_seed ^ i` for every phase, budget
//! and mode, so adaptive and non-adaptive runs see the same random stream.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{ExactEstimator, PhaseEstimator, PhaseGrid, DEFAULT_GRID_POINTS};
use crate::bounds::{bound_values, bounds_report, BoundValues, BoundsReport};
use crate::error::{Error, Result};
use crate::homodyne::{derive_seed, RandomStream};
use crate::lut::{build_table, QuantizerSpec};
use crate::probe::{in_estimation_range, qfi_coherent, qfi_pure, SqueezedThermalProbe};
use crate::protocol::{
    run_adaptive_with, run_nonadaptive_with, EstimationRecord, Mode, ProtocolConfig,
    DEFAULT_ROUGH_FRACTION,
};
use crate::stats::{loglog_slope, mean, sample_std};

pub const RUN_COLUMNS: &[&str] = &[
    "phase",
    "n_tot",
    "mode",
    "repetition",
    "seed",
    "rough_estimate",
    "feedback_shift",
    "corrected_phase",
    "final_stage_estimate",
    "final_estimate",
    "final_error",
    "posterior_variance",
    "rough_samples",
    "final_samples",
    "clamped",
];

pub const SUMMARY_COLUMNS: &[&str] = &[
    "phase",
    "n_tot",
    "mode",
    "repetitions",
    "mean_variance",
    "std_variance",
    "mse",
    "clamp_rate",
    "sql",
    "qcr_coherent",
    "ocr",
    "qcr_pure",
];

pub const SCALING_COLUMNS: &[&str] = &[
    "n_tot",
    "mode",
    "phases",
    "repetitions",
    "mean_variance",
    "std_variance",
    "mse",
    "clamp_rate",
    "sql",
    "qcr_coherent",
    "ocr",
    "qcr_pure",
];

pub const CURVE_COLUMNS: &[&str] = &["phase", "fisher", "cramer_rao", "qfi_pure", "qfi_coherent"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProbeSpec {
    Db {
        squeezed_db: f64,
        antisqueezed_db: f64,
    },
    Params {
        r: f64,
        n_th: f64,
    },
}

impl ProbeSpec {
    /// The measured source: 5.69 dB squeezing, 11.83 dB anti-squeezing.
    pub fn measured() -> Self {
        ProbeSpec::Db {
            squeezed_db: 5.69,
            antisqueezed_db: 11.83,
        }
    }

    pub fn build(&self) -> Result<SqueezedThermalProbe> {
        match *self {
            ProbeSpec::Db {
                squeezed_db,
                antisqueezed_db,
            } => SqueezedThermalProbe::from_db(squeezed_db, antisqueezed_db),
            ProbeSpec::Params { r, n_th } => SqueezedThermalProbe::new(r, n_th),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Exact,
    Lut,
}

impl std::str::FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(EngineKind::Exact),
            "lut" => Ok(EngineKind::Lut),
            other => Err(Error::InvalidSpec(format!("unknown engine {other:?}"))),
        }
    }
}

/// Seven phases `k pi / 14`, `k = 1..=7`, spanning `(0, pi/2]`.
pub fn default_phases() -> Vec<f64> {
    (1..=7).map(|k| k as f64 * PI / 14.0).collect()
}

pub fn default_n_tot_values() -> Vec<u64> {
    vec![1_000, 3_000, 10_000, 30_000]
}

pub const DEFAULT_REPETITIONS: u64 = 80;
pub const DEFAULT_MASTER_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub probe: ProbeSpec,
    pub phases: Vec<f64>,
    pub n_tot_values: Vec<u64>,
    pub repetitions: u64,
    pub rough_fraction: f64,
    pub modes: Vec<Mode>,
    pub engine: EngineKind,
    pub master_seed: u64,
    pub grid_points: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            probe: ProbeSpec::measured(),
            phases: default_phases(),
            n_tot_values: default_n_tot_values(),
            repetitions: DEFAULT_REPETITIONS,
            rough_fraction: DEFAULT_ROUGH_FRACTION,
            modes: vec![Mode::Adaptive, Mode::Nonadaptive],
            engine: EngineKind::Exact,
            master_seed: DEFAULT_MASTER_SEED,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

/// Key-value config file; every key optional, missing keys keep defaults.
///
/// ```toml
/// squeezed_db = 5.69
/// antisqueezed_db = 11.83
/// phases = [0.2, 0.8]
/// n_tot = [1000, 10000]
/// repetitions = 80
/// rough_fraction = 0.1
/// modes = ["adaptive", "nonadaptive"]
/// engine = "exact"
/// seed = 7
/// grid_points = 2048
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub squeezed_db: Option<f64>,
    pub antisqueezed_db: Option<f64>,
    pub r: Option<f64>,
    pub n_th: Option<f64>,
    pub phases: Option<Vec<f64>>,
    pub n_tot: Option<Vec<u64>>,
    pub repetitions: Option<u64>,
    pub rough_fraction: Option<f64>,
    pub modes: Option<Vec<Mode>>,
    pub engine: Option<EngineKind>,
    pub seed: Option<u64>,
    pub grid_points: Option<usize>,
}

impl SweepFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn apply(self, mut spec: SweepSpec) -> Result<SweepSpec> {
        match (self.squeezed_db, self.antisqueezed_db, self.r, self.n_th) {
            (None, None, None, None) => {}
            (Some(s), Some(a), None, None) => {
                spec.probe = ProbeSpec::Db {
                    squeezed_db: s,
                    antisqueezed_db: a,
                }
            }
            (None, None, Some(r), n_th) => {
                spec.probe = ProbeSpec::Params {
                    r,
                    n_th: n_th.unwrap_or(0.0),
                }
            }
            _ => {
                return Err(Error::InvalidSpec(
                    "give either squeezed_db + antisqueezed_db or r (+ n_th)".into(),
                ))
            }
        }
        if let Some(v) = self.phases {
            spec.phases = v;
        }
        if let Some(v) = self.n_tot {
            spec.n_tot_values = v;
        }
        if let Some(v) = self.repetitions {
            spec.repetitions = v;
        }
        if let Some(v) = self.rough_fraction {
            spec.rough_fraction = v;
        }
        if let Some(v) = self.modes {
            spec.modes = v;
        }
        if let Some(v) = self.engine {
            spec.engine = v;
        }
        if let Some(v) = self.seed {
            spec.master_seed = v;
        }
        if let Some(v) = self.grid_points {
            spec.grid_points = v;
        }
        Ok(spec)
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<SqueezedThermalProbe> {
        let probe = self.probe.build()?;
        probe.require_sensitive()?;
        if self.phases.is_empty() || self.n_tot_values.is_empty() || self.modes.is_empty() {
            return Err(Error::InvalidSpec(
                "phases, n_tot and modes must be non-empty".into(),
            ));
        }
        if self.repetitions < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2 repetitions, got {}",
                self.repetitions
            )));
        }
        if let Some(&bad) = self.phases.iter().find(|&&p| !in_estimation_range(p)) {
            return Err(Error::PhaseOutOfRange(bad));
        }
        let grid = self.grid()?;
        for &n_tot in &self.n_tot_values {
            for &mode in &self.modes {
                self.protocol_config(n_tot, mode, grid, 0).validate()?;
            }
        }
        Ok(probe)
    }

    pub fn grid(&self) -> Result<PhaseGrid> {
        PhaseGrid::new(self.grid_points)
    }

    fn protocol_config(
        &self,
        n_tot: u64,
        mode: Mode,
        grid: PhaseGrid,
        seed: u64,
    ) -> ProtocolConfig {
        ProtocolConfig {
            n_tot,
            rough_fraction: self.rough_fraction,
            grid,
            adaptive: mode == Mode::Adaptive,
            seed,
        }
    }
}

/// One emitted per-run row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub phase: f64,
    pub n_tot: u64,
    pub mode: Mode,
    pub repetition: u64,
    pub seed: u64,
    pub rough_estimate: Option<f64>,
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

impl RunRow {
    fn new(n_tot: u64, repetition: u64, seed: u64, rec: &EstimationRecord) -> Self {
        Self {
            phase: rec.true_phase,
            n_tot,
            mode: rec.mode,
            repetition,
            seed,
            rough_estimate: rec.rough_estimate,
            feedback_shift: rec.feedback_shift,
            corrected_phase: rec.corrected_phase,
            final_stage_estimate: rec.final_stage_estimate,
            final_estimate: rec.final_estimate,
            final_error: rec.final_error,
            posterior_variance: rec.posterior_variance,
            rough_samples: rec.rough_samples,
            final_samples: rec.final_samples,
            clamped: rec.clamped,
        }
    }
}

/// Statistics over the repetitions of one (phase, N_tot, mode) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub phase: f64,
    pub n_tot: u64,
    pub mode: Mode,
    pub repetitions: u64,
    pub mean_variance: f64,
    pub std_variance: f64,
    pub mse: f64,
    pub clamp_rate: f64,
    pub sql: f64,
    pub qcr_coherent: f64,
    pub ocr: f64,
    pub qcr_pure: f64,
}

/// Phase-averaged statistics for one (N_tot, mode).
///
/// `std_variance` is the per-phase standard deviation averaged over phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSummary {
    pub n_tot: u64,
    pub mode: Mode,
    pub phases: u64,
    pub repetitions: u64,
    pub mean_variance: f64,
    pub std_variance: f64,
    pub mse: f64,
    pub clamp_rate: f64,
    pub sql: f64,
    pub qcr_coherent: f64,
    pub ocr: f64,
    pub qcr_pure: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepMeta {
    pub kind: &'static str,
    pub version: &'static str,
    pub seed_rule: &'static str,
    pub generator: &'static str,
    pub spec: SweepSpec,
    pub probe: SqueezedThermalProbe,
    pub mean_photons: f64,
    pub optimal_phase: f64,
    /// Log-log slope of mean posterior variance against N_tot, per mode.
    pub slopes: BTreeMap<String, Option<f64>>,
    /// Ratio of empirical MSE to mean posterior variance at each (N_tot, mode).
    pub mse_to_variance: Vec<(u64, Mode, f64)>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub runs: Vec<RunRow>,
    pub summary: Vec<RunSummary>,
    pub scaling: Option<Vec<ScalingSummary>>,
    pub meta: SweepMeta,
}

/// Runs every (N_tot, phase, mode, repetition) cell; rows come back in that order.
pub fn run_all(spec: &SweepSpec) -> Result<Vec<RunRow>> {
    let probe = spec.validate()?;
    let grid = spec.grid()?;
    let table;
    let exact = ExactEstimator { probe, grid };
    let estimator: &dyn PhaseEstimator = match spec.engine {
        EngineKind::Exact => &exact,
        EngineKind::Lut => {
            table = build_table(&probe, &grid, &QuantizerSpec::for_probe(&probe))?;
            &table
        }
    };

    let mut cells = Vec::new();
    for &n_tot in &spec.n_tot_values {
        for &phase in &spec.phases {
            for &mode in &spec.modes {
                for rep in 0..spec.repetitions {
                    cells.push((n_tot, phase, mode, rep));
                }
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(n_tot, phase, mode, rep)| {
            let seed = derive_seed(spec.master_seed, rep);
            let config = spec.protocol_config(n_tot, mode, grid, seed);
            let mut stream = RandomStream::new(seed);
            let rec = match mode {
                Mode::Adaptive => run_adaptive_with(estimator, &probe, phase, &config, &mut stream),
                Mode::Nonadaptive => {
                    run_nonadaptive_with(estimator, &probe, phase, &config, &mut stream)
                }
            }?;
            Ok(RunRow::new(n_tot, rep, seed, &rec))
        })
        .collect()
}

/// Aggregates run rows into per-cell summaries, in first-appearance order.
pub fn summarize(runs: &[RunRow], probe: &SqueezedThermalProbe) -> Result<Vec<RunSummary>> {
    let mut order = Vec::new();
    let mut cells: BTreeMap<(u64, u64, Mode), Vec<&RunRow>> = BTreeMap::new();
    for row in runs {
        let key = (row.n_tot, row.phase.to_bits(), row.mode);
        cells
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(row);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &cells[&key];
            let vars: Vec<f64> = rows.iter().map(|r| r.posterior_variance).collect();
            let sq_err: Vec<f64> = rows.iter().map(|r| r.final_error * r.final_error).collect();
            let clamps = rows.iter().filter(|r| r.clamped).count();
            let b = bound_values(probe, key.0)?;
            Ok(RunSummary {
                phase: f64::from_bits(key.1),
                n_tot: key.0,
                mode: key.2,
                repetitions: rows.len() as u64,
                mean_variance: mean(&vars),
                std_variance: sample_std(&vars),
                mse: mean(&sq_err),
                clamp_rate: clamps as f64 / rows.len() as f64,
                sql: b.sql,
                qcr_coherent: b.qcr_coherent,
                ocr: b.ocr,
                qcr_pure: b.qcr_pure,
            })
        })
        .collect()
}

/// Averages per-phase summaries over phases for each (N_tot, mode).
pub fn scale_summaries(summary: &[RunSummary]) -> Vec<ScalingSummary> {
    let mut order = Vec::new();
    let mut cells: BTreeMap<(u64, Mode), Vec<&RunSummary>> = BTreeMap::new();
    for s in summary {
        let key = (s.n_tot, s.mode);
        cells
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(s);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &cells[&key];
            let pick =
                |f: fn(&RunSummary) -> f64| mean(&rows.iter().map(|s| f(s)).collect::<Vec<_>>());
            let first = rows[0];
            ScalingSummary {
                n_tot: key.0,
                mode: key.1,
                phases: rows.len() as u64,
                repetitions: first.repetitions,
                mean_variance: pick(|s| s.mean_variance),
                std_variance: pick(|s| s.std_variance),
                mse: pick(|s| s.mse),
                clamp_rate: pick(|s| s.clamp_rate),
                sql: first.sql,
                qcr_coherent: first.qcr_coherent,
                ocr: first.ocr,
                qcr_pure: first.qcr_pure,
            }
        })
        .collect()
}

/// Variance-versus-phase sweep at a single sample budget.
pub fn sweep_phase(spec: &SweepSpec) -> Result<SweepOutput> {
    if spec.n_tot_values.len() != 1 {
        return Err(Error::InvalidSpec(format!(
            "sweep-phase takes exactly one n_tot, got {}",
            spec.n_tot_values.len()
        )));
    }
    sweep(spec, "sweep-phase", false)
}

/// Variance-versus-budget sweep, averaged over phases.
pub fn sweep_n(spec: &SweepSpec) -> Result<SweepOutput> {
    sweep(spec, "sweep-n", true)
}

fn sweep(spec: &SweepSpec, kind: &'static str, with_scaling: bool) -> Result<SweepOutput> {
    let probe = spec.validate()?;
    let runs = run_all(spec)?;
    let summary = summarize(&runs, &probe)?;
    let scaling_rows = scale_summaries(&summary);

    let mut slopes = BTreeMap::new();
    for &mode in &spec.modes {
        let pts: Vec<(f64, f64)> = scaling_rows
            .iter()
            .filter(|s| s.mode == mode)
            .map(|s| (s.n_tot as f64, s.mean_variance))
            .collect();
        slopes.insert(mode.as_str().to_string(), loglog_slope(&pts));
    }
    let meta = SweepMeta {
        kind,
        version: env!("CARGO_PKG_VERSION"),
        seed_rule: "repetition i uses seed master_seed XOR i",
        generator: "ChaCha20Rng::seed_from_u64 + rand_distr::StandardNormal",
        spec: spec.clone(),
        probe,
        mean_photons: probe.mean_photons(),
        optimal_phase: probe.optimal_phase()?,
        slopes,
        mse_to_variance: scaling_rows
            .iter()
            .map(|s| (s.n_tot, s.mode, s.mse / s.mean_variance))
            .collect(),
    };
    Ok(SweepOutput {
        runs,
        summary,
        scaling: with_scaling.then_some(scaling_rows),
        meta,
    })
}

fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidSpec(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl SweepOutput {
    pub fn runs_csv(&self) -> Result<Vec<u8>> {
        csv_bytes(&self.runs, RUN_COLUMNS)
    }

    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        csv_bytes(&self.summary, SUMMARY_COLUMNS)
    }

    pub fn scaling_csv(&self) -> Result<Option<Vec<u8>>> {
        self.scaling
            .as_deref()
            .map(|s| csv_bytes(s, SCALING_COLUMNS))
            .transpose()
    }

    pub fn meta_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(&self.meta)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    /// Serialises everything first, then writes each file atomically.
    pub fn write_to(&self, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
        let mut files = vec![
            (format!("{prefix}_runs.csv"), self.runs_csv()?),
            (format!("{prefix}_summary.csv"), self.summary_csv()?),
        ];
        if let Some(bytes) = self.scaling_csv()? {
            files.push((format!("{prefix}_scaling.csv"), bytes));
        }
        files.push((format!("{prefix}_meta.json"), self.meta_json()?));
        fs::create_dir_all(dir)?;
        files
            .into_iter()
            .map(|(name, bytes)| {
                let path = dir.join(name);
                write_atomic(&path, &bytes)?;
                Ok(path)
            })
            .collect()
    }
}

/// Parses an emitted runs CSV back into rows.
pub fn read_runs_csv(bytes: &[u8]) -> Result<Vec<RunRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn read_summary_csv(bytes: &[u8]) -> Result<Vec<RunSummary>> {
    let mut r = csv::Reader::from_reader(bytes);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, Serialize)]
struct CurveRow {
    phase: f64,
    fisher: f64,
    cramer_rao: f64,
    qfi_pure: f64,
    qfi_coherent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsScalars {
    pub probe: SqueezedThermalProbe,
    pub n_samples: u64,
    pub mean_photons: f64,
    pub optimal_phase: f64,
    pub peak_fisher: f64,
    pub qfi_pure: f64,
    pub qfi_coherent: f64,
    pub bounds: BoundValues,
    pub heisenberg_ref: f64,
}

/// Plot-ready Fisher curve and bound scalars.
#[derive(Debug, Clone)]
pub struct BoundsOutput {
    pub report: BoundsReport,
    pub curve_csv: Vec<u8>,
    pub scalars: BoundsScalars,
}

impl BoundsOutput {
    pub fn scalars_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(&self.scalars)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn write_to(&self, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
        let json = self.scalars_json()?;
        fs::create_dir_all(dir)?;
        let curve = dir.join(format!("{prefix}_curve.csv"));
        let scalars = dir.join(format!("{prefix}.json"));
        write_atomic(&curve, &self.curve_csv)?;
        write_atomic(&scalars, &json)?;
        Ok(vec![curve, scalars])
    }
}

/// Fisher curve `(phi, F, 1/(N F))` with QFI reference lines at the probe's squeezing and energy.
pub fn emit_bounds(
    probe: &SqueezedThermalProbe,
    n_samples: u64,
    grid: &PhaseGrid,
) -> Result<BoundsOutput> {
    let report = bounds_report(probe, n_samples, grid)?;
    let h_sq = qfi_pure(probe.r());
    let h_coh = qfi_coherent(report.mean_photons);
    let rows: Vec<CurveRow> = report
        .fisher_curve
        .iter()
        .map(|&(phase, fisher)| CurveRow {
            phase,
            fisher,
            cramer_rao: report.cramer_rao(phase),
            qfi_pure: h_sq,
            qfi_coherent: h_coh,
        })
        .collect();
    let curve_csv = csv_bytes(&rows, CURVE_COLUMNS)?;
    let scalars = BoundsScalars {
        probe: *probe,
        n_samples,
        mean_photons: report.mean_photons,
        optimal_phase: report.optimal_phase,
        peak_fisher: probe.fisher_info(report.optimal_phase),
        qfi_pure: h_sq,
        qfi_coherent: h_coh,
        bounds: report.values(),
        heisenberg_ref: report.heisenberg_ref,
    };
    Ok(BoundsOutput {
        report,
        curve_csv,
        scalars,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro() -> SweepSpec {
        SweepSpec {
            phases: vec![0.7],
            n_tot_values: vec![100],
            repetitions: 2,
            modes: vec![Mode::Adaptive],
            grid_points: 256,
            ..SweepSpec::default()
        }
    }

    #[test]
    fn defaults() {
        let s = SweepSpec::default();
        assert_eq!(s.phases.len(), 7);
        assert_eq!(*s.phases.last().unwrap(), PI / 2.0);
        assert_eq!(s.n_tot_values, vec![1000, 3000, 10_000, 30_000]);
        assert_eq!(s.repetitions, 80);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn validation_failures() {
        let bad = |f: fn(&mut SweepSpec)| {
            let mut s = micro();
            f(&mut s);
            s.validate().is_err()
        };
        assert!(bad(|s| s.phases.clear()));
        assert!(bad(|s| s.repetitions = 1));
        assert!(bad(|s| s.phases = vec![0.0]));
        assert!(bad(|s| s.phases = vec![2.0]));
        assert!(bad(|s| s.rough_fraction = 1.5));
        assert!(bad(|s| s.n_tot_values = vec![3]));
        assert!(bad(|s| s.probe = ProbeSpec::Params { r: 0.0, n_th: 0.0 }));
        assert!(bad(|s| s.grid_points = 1));
    }

    #[test]
    fn micro_sweep_aggregation() {
        let out = sweep_phase(&micro()).unwrap();
        assert_eq!(out.runs.len(), 2);
        assert_eq!(out.summary.len(), 1);
        let s = &out.summary[0];
        let (a, b) = (
            out.runs[0].posterior_variance,
            out.runs[1].posterior_variance,
        );
        assert!((s.mean_variance - (a + b) / 2.0).abs() < 1e-18);
        assert!((s.std_variance - (a - b).abs() / 2f64.sqrt()).abs() < 1e-15);
        let (ea, eb) = (out.runs[0].final_error, out.runs[1].final_error);
        assert!((s.mse - (ea * ea + eb * eb) / 2.0).abs() < 1e-18);
        assert_eq!(out.runs[0].seed, 1);
        assert_eq!(out.runs[1].seed, 0);
        assert!(out.scaling.is_none());
    }

    #[test]
    fn sweep_phase_needs_one_budget() {
        let spec = SweepSpec {
            n_tot_values: vec![100, 200],
            ..micro()
        };
        assert!(matches!(sweep_phase(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn single_budget_scaling_is_phase_average() {
        let spec = SweepSpec {
            phases: vec![0.3, 0.9, 1.4],
            n_tot_values: vec![500],
            repetitions: 4,
            ..micro()
        };
        let n = sweep_n(&spec).unwrap();
        let p = sweep_phase(&spec).unwrap();
        assert_eq!(n.runs, p.runs);
        let rows = n.scaling.unwrap();
        assert_eq!(rows.len(), 1);
        let avg = mean(
            &p.summary
                .iter()
                .map(|s| s.mean_variance)
                .collect::<Vec<_>>(),
        );
        assert_eq!(rows[0].mean_variance, avg);
        assert_eq!(n.meta.slopes["adaptive"], None);
    }

    #[test]
    fn emitted_rows_reparse_to_same_summary() {
        let spec = SweepSpec {
            phases: vec![0.3, 1.0],
            n_tot_values: vec![300],
            repetitions: 3,
            modes: vec![Mode::Adaptive, Mode::Nonadaptive],
            ..micro()
        };
        let out = sweep_phase(&spec).unwrap();
        let runs = read_runs_csv(&out.runs_csv().unwrap()).unwrap();
        assert_eq!(runs, out.runs);
        let probe = spec.probe.build().unwrap();
        let again = summarize(&runs, &probe).unwrap();
        let emitted = read_summary_csv(&out.summary_csv().unwrap()).unwrap();
        assert_eq!(again.len(), emitted.len());
        for (a, b) in again.iter().zip(&emitted) {
            assert!((a.mean_variance - b.mean_variance).abs() <= 1e-12 * a.mean_variance);
            assert!((a.std_variance - b.std_variance).abs() <= 1e-12 * a.std_variance);
            assert!((a.mse - b.mse).abs() <= 1e-12 * a.mse.max(1e-300));
            assert_eq!((a.phase, a.n_tot, a.mode), (b.phase, b.n_tot, b.mode));
        }
    }

    #[test]
    fn lut_engine_runs() {
        let spec = SweepSpec {
            engine: EngineKind::Lut,
            ..micro()
        };
        let out = sweep_phase(&spec).unwrap();
        assert_eq!(out.runs.len(), 2);
        assert!(out.summary[0].mean_variance > 0.0);
    }

    #[test]
    fn config_file_overrides() {
        let file = SweepFile::parse(
            "r = 0.9\nphases = [0.5]\nn_tot = [2000]\nmodes = [\"nonadaptive\"]\nengine = \"lut\"\nseed = 9\n",
        )
        .unwrap();
        let spec = file.apply(SweepSpec::default()).unwrap();
        assert_eq!(spec.probe, ProbeSpec::Params { r: 0.9, n_th: 0.0 });
        assert_eq!(spec.phases, vec![0.5]);
        assert_eq!(spec.modes, vec![Mode::Nonadaptive]);
        assert_eq!(spec.engine, EngineKind::Lut);
        assert_eq!(spec.master_seed, 9);
        assert_eq!(spec.repetitions, 80);
        assert!(SweepFile::parse("bogus = 1").is_err());
        let mixed = SweepFile::parse("r = 1.0\nsqueezed_db = 3.0").unwrap();
        assert!(mixed.apply(SweepSpec::default()).is_err());
    }

    #[test]
    fn bounds_emission() {
        let pure = SqueezedThermalProbe::from_db(6.0206, 6.0206).unwrap();
        let grid = PhaseGrid::new(100_001).unwrap();
        let out = emit_bounds(&pure, 1, &grid).unwrap();
        let (arg, peak) = out
            .report
            .fisher_curve
            .iter()
            .copied()
            .fold((0.0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
        assert!((arg - 0.2450).abs() < 1e-4);
        assert!((peak / qfi_pure(pure.r()) - 1.0).abs() < 1e-8);
        let text = String::from_utf8(out.curve_csv.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CURVE_COLUMNS.join(","));
        assert!(lines.next().unwrap().starts_with("0.0,0.0,inf,"));
        assert!(emit_bounds(&SqueezedThermalProbe::vacuum(), 1, &grid).is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let out = sweep_phase(&micro()).unwrap();
        let files = out.write_to(dir.path(), "t").unwrap();
        assert_eq!(files.len(), 3);
        let names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert!(names.iter().all(|n| !n.ends_with(".tmp")), "{names:?}");
    }
}

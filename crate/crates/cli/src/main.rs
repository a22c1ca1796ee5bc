use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sqzphase::harness::{write_atomic, SweepFile, SweepOutput};
use sqzphase::homodyne::sample_homodyne;
use sqzphase::lut::DEFAULT_BINS;
use sqzphase::{
    bench_throughput, build_table, emit_bounds, posterior, sweep_n, sweep_phase, EngineKind, Error,
    Mode, PhaseGrid, ProbeSpec, ProtocolConfig, QuantizerSpec, RandomStream, SqueezedThermalProbe,
    SweepSpec,
};

#[derive(Parser)]
#[command(
    name = "sqzphase",
    version,
    about = "Adaptive squeezed-light phase estimation simulator"
)]
struct Cli {
    /// Directory for result files.
    #[arg(
        long,
        global = true,
        env = "SQZPHASE_OUT_DIR",
        default_value = "sqzphase-out"
    )]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fisher-information curve and variance bounds.
    Bounds {
        #[command(flatten)]
        probe: ProbeArgs,
        #[arg(long, default_value_t = 10_000)]
        n_samples: u64,
        #[arg(long, default_value_t = 2048)]
        grid_points: usize,
        #[arg(long, default_value = "bounds")]
        prefix: String,
    },
    /// Estimation variance against input phase at one sample budget.
    SweepPhase(SweepArgs),
    /// Estimation variance against sample budget, averaged over phases.
    SweepN(SweepArgs),
    /// Throughput and accuracy of the lookup-table path against the float path.
    BenchLut {
        #[command(flatten)]
        probe: ProbeArgs,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 2048)]
        grid_points: usize,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        /// Fixed-point scale as a power-of-two exponent.
        #[arg(long, default_value_t = 20)]
        scale_bits: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write the table dump to this file.
        #[arg(long)]
        dump_table: Option<PathBuf>,
    },
    /// A single protocol run with a stage-by-stage trace.
    RunOne {
        #[command(flatten)]
        probe: ProbeArgs,
        /// True phase in (0, pi/2].
        #[arg(long)]
        phase: f64,
        #[arg(long, default_value_t = 10_000)]
        n_tot: u64,
        #[arg(long, default_value_t = 0.1)]
        rough_fraction: f64,
        #[arg(long, default_value_t = 2048)]
        grid_points: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        nonadaptive: bool,
        /// Print the record as JSON instead of the trace.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Clone, Default)]
struct ProbeArgs {
    /// Squeezing below vacuum in dB (with --antisqueezed-db).
    #[arg(long, requires = "antisqueezed_db", conflicts_with = "r")]
    squeezed_db: Option<f64>,
    #[arg(long, requires = "squeezed_db")]
    antisqueezed_db: Option<f64>,
    /// Squeezing parameter (alternative to the dB pair).
    #[arg(long)]
    r: Option<f64>,
    /// Thermal photon number, used with --r.
    #[arg(long, requires = "r")]
    n_th: Option<f64>,
}

impl ProbeArgs {
    fn spec(&self) -> Option<ProbeSpec> {
        match (self.squeezed_db, self.antisqueezed_db, self.r) {
            (Some(s), Some(a), _) => Some(ProbeSpec::Db {
                squeezed_db: s,
                antisqueezed_db: a,
            }),
            (_, _, Some(r)) => Some(ProbeSpec::Params {
                r,
                n_th: self.n_th.unwrap_or(0.0),
            }),
            _ => None,
        }
    }

    fn build(&self) -> Result<SqueezedThermalProbe, Error> {
        self.spec().unwrap_or_else(ProbeSpec::measured).build()
    }
}

#[derive(Args, Clone)]
struct SweepArgs {
    /// Key-value (TOML) file with sweep settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    probe: ProbeArgs,
    #[arg(long, value_delimiter = ',')]
    phases: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    n_tot: Option<Vec<u64>>,
    #[arg(long)]
    repetitions: Option<u64>,
    #[arg(long)]
    rough_fraction: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<Mode>>,
    #[arg(long)]
    engine: Option<EngineKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// File name prefix; defaults to the subcommand name.
    #[arg(long)]
    prefix: Option<String>,
}

impl SweepArgs {
    fn spec(&self, default_n_tot: Option<u64>) -> Result<SweepSpec, Error> {
        let mut spec = SweepSpec::default();
        if let Some(n) = default_n_tot {
            spec.n_tot_values = vec![n];
        }
        if let Some(path) = &self.config {
            spec = SweepFile::parse(&std::fs::read_to_string(path)?)?.apply(spec)?;
        }
        if let Some(p) = self.probe.spec() {
            spec.probe = p;
        }
        if let Some(v) = &self.phases {
            spec.phases = v.clone();
        }
        if let Some(v) = &self.n_tot {
            spec.n_tot_values = v.clone();
        }
        if let Some(v) = self.repetitions {
            spec.repetitions = v;
        }
        if let Some(v) = self.rough_fraction {
            spec.rough_fraction = v;
        }
        if let Some(v) = &self.modes {
            spec.modes = v.clone();
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
        spec.validate()?;
        Ok(spec)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_invalid_input() { 1 } else { 2 })
        }
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    let out = cli.out_dir;
    match cli.command {
        Command::Bounds {
            probe,
            n_samples,
            grid_points,
            prefix,
        } => {
            let probe = probe.build()?;
            let emitted = emit_bounds(&probe, n_samples, &PhaseGrid::new(grid_points)?)?;
            let s = &emitted.scalars;
            println!(
                "r = {:.6}  n_th = {:.6}  <n> = {:.4}",
                probe.r(),
                probe.n_th(),
                s.mean_photons
            );
            println!(
                "phi_opt = {:.6}  F(phi_opt) = {:.6}",
                s.optimal_phase, s.peak_fisher
            );
            println!(
                "N = {n_samples}: sql {:.4e}  qcr_coherent {:.4e}  ocr {:.4e}  qcr_pure {:.4e}",
                s.bounds.sql, s.bounds.qcr_coherent, s.bounds.ocr, s.bounds.qcr_pure
            );
            list(&emitted.write_to(&out, &prefix)?);
        }
        Command::SweepPhase(args) => {
            let spec = args.spec(Some(10_000))?;
            let result = sweep_phase(&spec)?;
            print_summary(&result);
            list(&result.write_to(&out, args.prefix.as_deref().unwrap_or("sweep_phase"))?);
        }
        Command::SweepN(args) => {
            let spec = args.spec(None)?;
            let result = sweep_n(&spec)?;
            print_summary(&result);
            list(&result.write_to(&out, args.prefix.as_deref().unwrap_or("sweep_n"))?);
        }
        Command::BenchLut {
            probe,
            samples,
            grid_points,
            bins,
            scale_bits,
            seed,
            dump_table,
        } => {
            let probe = probe.build()?;
            let quantizer = QuantizerSpec {
                bins,
                scale: 1u64.checked_shl(scale_bits).unwrap_or(0),
                ..QuantizerSpec::for_probe(&probe)
            };
            let table = build_table(&probe, &PhaseGrid::new(grid_points)?, &quantizer)?;
            if let Some(path) = dump_table {
                let mut w = BufWriter::new(File::create(&path)?);
                table.write_dump(&mut w)?;
                w.flush()?;
                println!("table written to {}", path.display());
            }
            let report = bench_throughput(&table, samples, seed)?;
            let mut json = serde_json::to_vec_pretty(&report)?;
            json.push(b'\n');
            std::fs::create_dir_all(&out)?;
            let path = out.join("bench_lut.json");
            write_atomic(&path, &json)?;
            println!(
                "float {:.3e} samples/s ({:.1} ns)  lut {:.3e} samples/s ({:.1} ns)  speedup {:.2}",
                report.exact.updates_per_sec,
                report.exact.ns_per_sample,
                report.lut.updates_per_sec,
                report.lut.ns_per_sample,
                report.speedup
            );
            println!(
                "MAP offset {} steps, variance ratio {:.6}",
                report.accuracy.map_difference_steps, report.accuracy.variance_ratio
            );
            list(&[path]);
        }
        Command::RunOne {
            probe,
            phase,
            n_tot,
            rough_fraction,
            grid_points,
            seed,
            nonadaptive,
            json,
        } => {
            let probe = probe.build()?;
            let config = ProtocolConfig {
                n_tot,
                rough_fraction,
                grid: PhaseGrid::new(grid_points)?,
                adaptive: !nonadaptive,
                seed,
            };
            let record = sqzphase::run(&probe, phase, &config)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&record)?);
            } else {
                trace(&probe, &config, &record)?;
            }
        }
    }
    Ok(())
}

fn trace(
    probe: &SqueezedThermalProbe,
    config: &ProtocolConfig,
    rec: &sqzphase::EstimationRecord,
) -> Result<(), Error> {
    println!(
        "[prepare]  r = {:.6}  n_th = {:.6}  true phase = {:.6}",
        probe.r(),
        probe.n_th(),
        rec.true_phase
    );
    if let (Some(rough), Some(var), Some(target)) =
        (rec.rough_estimate, rec.rough_variance, rec.target_phase)
    {
        println!(
            "[rough]    M_R = {}  MAP = {:.6}  error = {:+.6}  PPD variance = {:.4e}",
            rec.rough_samples,
            rough,
            rough - rec.true_phase,
            var
        );
        println!(
            "[feedback] target = {:.6}  shift = {:+.6}  corrected phase = {:.6}",
            target, rec.feedback_shift, rec.corrected_phase
        );
    }
    println!(
        "[final]    M_F = {}  MAP = {:.6}  PPD variance = {:.4e}",
        rec.final_samples, rec.final_stage_estimate, rec.posterior_variance
    );
    println!(
        "[result]   estimate = {:.6}  error = {:+.6}{}",
        rec.final_estimate,
        rec.final_error,
        if rec.clamped { "  (clamped)" } else { "" }
    );
    // reference: what the final stage would give sampled exactly at the target
    if rec.mode == Mode::Adaptive {
        let opt = probe.optimal_phase()?;
        let batch = sample_homodyne(
            probe,
            opt,
            rec.final_samples as usize,
            &mut RandomStream::new(config.seed),
        );
        let ideal = posterior(&batch, probe, &config.grid, None)?;
        println!(
            "[ref]      PPD variance at the exact optimum = {:.4e}",
            ideal.variance
        );
    }
    Ok(())
}

fn print_summary(result: &SweepOutput) {
    println!(
        "{:>10} {:>8} {:>12} {:>12} {:>12} {:>12}",
        "phase", "n_tot", "mode", "mean_var", "mse", "sql"
    );
    for s in &result.summary {
        println!(
            "{:>10.6} {:>8} {:>12} {:>12.4e} {:>12.4e} {:>12.4e}",
            s.phase,
            s.n_tot,
            s.mode.as_str(),
            s.mean_variance,
            s.mse,
            s.sql
        );
    }
    for (mode, slope) in &result.meta.slopes {
        if let Some(slope) = slope {
            println!("log-log slope ({mode}): {slope:.4}");
        }
    }
}

fn list(paths: &[impl AsRef<Path>]) {
    for p in paths {
        println!("wrote {}", p.as_ref().display());
    }
}

//! `icef`: PAPR reduction of IQ files and reproducible ensemble studies.

mod iq;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use icef_core::engine::{ComplexityEstimate, ComplexityMethod, Method, PaprReducer};
use icef_core::experiment::{
    apply_override, run_ccdf, run_feasibility_map, run_mask_placement_study, run_sweep, ExperimentPlan, Manifest,
};
use icef_core::mask::{icf_mask, validate, FrequencyMask, MaskSpec};
use icef_core::metrics::MseRequirementTable;
use icef_core::waveform::{OfdmModulator, WaveformConfig};
use serde::Serialize;

use crate::iq::{encode_iq, meta_path, parse_iq, IqMeta};
use crate::output::OutputDir;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl From<icef_core::Error> for CliError {
    fn from(e: icef_core::Error) -> Self {
        use icef_core::Error as E;
        match e {
            E::Plan { .. } => CliError::Parse(e.to_string()),
            E::Config(_) | E::Dimension { .. } | E::NotPowerOfTwo(_) | E::Contract(_) | E::InvalidSignal(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "icef", version, about = "Clipping-noise-shaping PAPR reduction for OFDM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce the PAPR of every symbol in an IQ file.
    Reduce(ReduceArgs),
    /// PAPR CCDFs of the unprocessed and processed ensembles.
    Ccdf {
        #[command(flatten)]
        study: StudyArgs,
        /// Only the unprocessed ensemble.
        #[arg(long)]
        baseline_only: bool,
    },
    /// PAPR and MSE for every (mask, target, cap) of a plan.
    Sweep {
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Largest clean-PRB count per modulation and target, with the limiting factor.
    Feasibility {
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Spread of PAPR and MSE over sub-band clean-set placements.
    MaskStudy {
        #[command(flatten)]
        study: StudyArgs,
        /// Evaluate every clean-band combination instead of the seeded subsample.
        #[arg(long)]
        full_enumeration: bool,
    },
    /// Real operations per iteration for ICF and ICEF.
    Complexity {
        #[command(flatten)]
        waveform: WaveformArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a mask file against the waveform.
    ValidateMask {
        mask: PathBuf,
        #[command(flatten)]
        waveform: WaveformArgs,
    },
}

#[derive(Args)]
struct WaveformArgs {
    /// TOML file; only its `[waveform]` table is read.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` applied to the config before parsing; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct StudyArgs {
    /// Experiment plan (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    symbols: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// `key=value` applied to the plan before parsing; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Icef,
    Icf,
}

#[derive(Args)]
struct ReduceArgs {
    /// Input IQ file.
    input: PathBuf,
    /// Mask file (JSON). Defaults to the whole passband carrying noise.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 6.0)]
    target_db: f64,
    #[arg(long, default_value_t = 20)]
    max_iterations: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Icef)]
    method: MethodArg,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    waveform: WaveformArgs,
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn load_plan(args: &StudyArgs, extra: &[String]) -> CliResult<ExperimentPlan> {
    let text = read_text(&args.config)?;
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(n) = args.symbols {
        overrides.push(format!("symbols={n}"));
    }
    overrides.extend_from_slice(extra);
    Ok(ExperimentPlan::from_toml_with_overrides(&text, &overrides)?)
}

fn load_waveform(args: &WaveformArgs) -> CliResult<WaveformConfig> {
    let mut doc = match &args.config {
        Some(p) => read_text(p)?
            .parse::<toml::Table>()
            .map_err(|e| CliError::Parse(format!("{}: {}", p.display(), e.message())))?,
        None => toml::Table::new(),
    };
    for o in &args.overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: WaveformConfig = match doc.remove("waveform") {
        Some(v) => v
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Parse(format!("waveform: {}", e.message())))?,
        None => WaveformConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_mask(path: &Path, cfg: &WaveformConfig) -> CliResult<FrequencyMask> {
    let spec = MaskSpec::from_json(&read_text(path)?)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let mask = spec.resolve(cfg)?;
    let report = validate(&mask, cfg);
    if !report.is_valid() {
        return Err(CliError::Validation(format!("{}: {report}", path.display())));
    }
    Ok(mask)
}

fn write(out: &mut OutputDir, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
    out.write(name, contents.as_ref())
        .map(|_| ())
        .map_err(|e| CliError::Runtime(format!("{name}: {e}")))
}

fn open_out(path: &Path) -> CliResult<OutputDir> {
    OutputDir::create(path).map_err(|e| io_error(path, e))
}

fn finish(out: &mut OutputDir, command: &str, plan: &ExperimentPlan) -> CliResult<()> {
    let manifest = Manifest::new(command, plan, out.written().to_vec());
    write(out, "manifest.json", manifest.to_json())
}

#[derive(Serialize)]
struct SymbolTrace {
    index: usize,
    iterations: usize,
    initial_papr_db: f64,
    final_papr_db: f64,
    converged: bool,
    papr_trace_db: Vec<f64>,
}

#[derive(Serialize)]
struct ReduceReport {
    method: Method,
    target_db: f64,
    max_iterations: usize,
    mask: MaskSpec,
    symbols: Vec<SymbolTrace>,
}

fn reduce(args: &ReduceArgs) -> CliResult<()> {
    let cfg = load_waveform(&args.waveform)?;
    let n = cfg.fft_size();
    let bytes = fs::read(&args.input).map_err(|e| io_error(&args.input, e))?;
    let samples = parse_iq(&bytes, n).map_err(|e| CliError::Parse(format!("{}: {e}", args.input.display())))?;
    let sidecar = meta_path(&args.input);
    if sidecar.exists() {
        let meta: IqMeta = serde_json::from_str(&read_text(&sidecar)?)
            .map_err(|e| CliError::Parse(format!("{}: {e}", sidecar.display())))?;
        if meta.fft_size != n || meta.symbol_count * n != samples.len() {
            return Err(CliError::Validation(format!(
                "{} describes {} symbols of {} samples; the waveform needs {n}-sample symbols and the file holds {}",
                sidecar.display(),
                meta.symbol_count,
                meta.fft_size,
                samples.len()
            )));
        }
    }
    let mask = match &args.mask {
        Some(p) => load_mask(p, &cfg)?,
        None => icf_mask(&cfg),
    };
    let method = match args.method {
        MethodArg::Icef => Method::Icef,
        MethodArg::Icf => Method::Icf,
    };
    let modulator = OfdmModulator::new(cfg)?;
    let reducer = PaprReducer::new(&cfg, &mask, method, args.target_db, args.max_iterations)?;
    let mut reduced = Vec::with_capacity(samples.len());
    let mut traces = Vec::new();
    for (index, chunk) in samples.chunks_exact(n).enumerate() {
        let symbol = modulator.symbol_from_samples(chunk)?;
        let r = reducer.run(&symbol)?;
        traces.push(SymbolTrace {
            index,
            iterations: r.iterations_used,
            initial_papr_db: r.initial_papr_db,
            final_papr_db: r.final_papr_db,
            converged: r.converged,
            papr_trace_db: r.papr_trace_db,
        });
        reduced.extend_from_slice(r.symbol.time());
    }
    let meta = IqMeta {
        sample_rate_hz: cfg.sample_rate_hz(),
        fft_size: n,
        symbol_count: traces.len(),
    };
    let report = ReduceReport {
        method,
        target_db: args.target_db,
        max_iterations: args.max_iterations,
        mask: mask.to_spec(),
        symbols: traces,
    };
    let mut out = open_out(&args.out)?;
    write(&mut out, "reduced.iq", encode_iq(&reduced))?;
    write(
        &mut out,
        "reduced.iq.meta.json",
        serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n",
    )?;
    write(
        &mut out,
        "trace.json",
        serde_json::to_string_pretty(&report).expect("trace serializes") + "\n",
    )?;
    let converged = report.symbols.iter().filter(|s| s.converged).count();
    println!(
        "{} symbols processed, {converged} reached {} dB; output in {}",
        report.symbols.len(),
        args.target_db,
        args.out.display()
    );
    Ok(())
}

fn complexity(waveform: &WaveformArgs, out: Option<&Path>) -> CliResult<()> {
    let cfg = load_waveform(waveform)?;
    let rows = ComplexityMethod::ALL
        .iter()
        .map(|&m| ComplexityEstimate::for_size(cfg.fft_size(), m))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("method,fft_size,real_mults_per_iter,real_adds_per_iter,mult_overhead_pct,add_overhead_pct\n");
    println!("N = {} (real operations per iteration)", cfg.fft_size());
    for r in &rows {
        let (m, a) = r.overhead_percent();
        println!(
            "{:<14} {:>10} mults {:>10} adds  overhead {m:.1}% mults, {a:.1}% adds",
            r.method.to_string(),
            r.real_mults_per_iter,
            r.real_adds_per_iter
        );
        csv.push_str(&format!(
            "{},{},{},{},{m:.4},{a:.4}\n",
            r.method, r.fft_size, r.real_mults_per_iter, r.real_adds_per_iter
        ));
    }
    if let Some(dir) = out {
        let mut o = open_out(dir)?;
        write(&mut o, "complexity.csv", csv)?;
        write(
            &mut o,
            "complexity.json",
            serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n",
        )?;
    }
    Ok(())
}

fn validate_mask(path: &Path, waveform: &WaveformArgs) -> CliResult<()> {
    let cfg = load_waveform(waveform)?;
    let mask = load_mask(path, &cfg)?;
    println!(
        "valid: {} noisy, {} clean, {} null bins",
        mask.noisy().len(),
        mask.clean().len(),
        mask.null().len()
    );
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("ICEF_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Parse(format!("ICEF_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Reduce(args) => reduce(&args),
        Command::Ccdf { study, baseline_only } => {
            let plan = load_plan(&study, &[])?;
            let result = run_ccdf(&plan, !baseline_only)?;
            let mut out = open_out(&study.out)?;
            write(&mut out, "ccdf.csv", result.to_csv())?;
            write(&mut out, "ccdf_summary.csv", result.summary_csv())?;
            write(&mut out, "ccdf.json", result.to_json())?;
            finish(&mut out, "ccdf", &plan)?;
            for s in &result.series {
                println!("{}: {:.4} dB at CCDF {}", s.label, s.papr_db, result.probability);
            }
            Ok(())
        }
        Command::Sweep { study } => {
            let plan = load_plan(&study, &[])?;
            let result = run_sweep(&plan)?;
            let mut out = open_out(&study.out)?;
            write(&mut out, "sweep.csv", result.to_csv())?;
            write(&mut out, "sweep.json", result.to_json())?;
            finish(&mut out, "sweep", &plan)?;
            println!("{} rows written to {}", result.rows.len(), study.out.display());
            Ok(())
        }
        Command::Feasibility { study } => {
            let plan = load_plan(&study, &[])?;
            let map = run_feasibility_map(&plan, &MseRequirementTable::default())?;
            let mut out = open_out(&study.out)?;
            write(&mut out, "feasibility.csv", map.to_csv())?;
            write(&mut out, "feasibility_detail.csv", map.detail_csv())?;
            write(&mut out, "feasibility.json", map.to_json())?;
            finish(&mut out, "feasibility", &plan)?;
            print!("{}", map.to_csv());
            Ok(())
        }
        Command::MaskStudy { study, full_enumeration } => {
            let extra = if full_enumeration {
                vec!["masks.full_enumeration=true".to_string()]
            } else {
                Vec::new()
            };
            let plan = load_plan(&study, &extra)?;
            let result = run_mask_placement_study(&plan)?;
            let mut out = open_out(&study.out)?;
            write(&mut out, "mask_study.csv", result.sweep.to_csv())?;
            write(&mut out, "mask_study_summary.csv", result.summary_csv())?;
            write(&mut out, "noise_spectra.csv", result.spectra_csv())?;
            write(&mut out, "mask_study.json", result.to_json())?;
            finish(&mut out, "mask-study", &plan)?;
            print!("{}", result.summary_csv());
            Ok(())
        }
        Command::Complexity { waveform, out } => complexity(&waveform, out.as_deref()),
        Command::ValidateMask { mask, waveform } => validate_mask(&mask, &waveform),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

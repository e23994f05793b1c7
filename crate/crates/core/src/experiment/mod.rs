//! Seeded Monte-Carlo studies: |K_F| sweeps, feasibility maps, mask-placement
//! studies and CCDF curves.
//!
//! Every symbol draws its data from a stream keyed by `(seed, mask key,
//! symbol index)`, so results do not depend on scheduling. Symbols are
//! processed in fixed-size chunks whose partial sums are folded in chunk
//! order, which makes the output identical for any thread count.

mod plan;
mod studies;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::PaprReducer;
use crate::error::Result;
use crate::metrics::SpectralErrorAccumulator;
use crate::waveform::{papr_db, OfdmModulator};

pub use plan::{apply_override, ExperimentPlan, ExplicitMask, FeasibilitySettings, MaskFamily, MaskInstance};
pub use studies::{
    run_ccdf, run_feasibility_map, run_kf_sweep, run_mask_placement_study, run_sweep, CcdfSeries, CcdfStudy,
    FeasibilityCell, FeasibilityMap, MaskStudy, PlacementSummary, SpreadStats, SweepResult, SweepRow,
};

/// Symbols per work item.
const CHUNK: usize = 64;

/// Data stream for one symbol of one mask.
pub fn stream_rng(seed: u64, key: u64, index: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&key.to_le_bytes());
    bytes[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(bytes)
}

/// Frequency-domain data for symbol `index` of the mask with `key`.
pub fn symbol_data(plan: &ExperimentPlan, key: u64, index: usize) -> Vec<Complex64> {
    let mut rng = stream_rng(plan.seed, key, index as u64);
    plan.modulation
        .random_symbols(plan.waveform.active_subcarriers, &mut rng)
}

/// Ensemble statistics for one (mask, target, cap) cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub target_db: f64,
    pub max_iterations: usize,
    /// Final PAPR per symbol, in symbol order.
    pub papr_db: Vec<f64>,
    pub iterations_total: u64,
    pub converged: usize,
    pub spectral: SpectralErrorAccumulator,
}

impl CellOutcome {
    fn empty(target_db: f64, max_iterations: usize, fft_size: usize) -> Self {
        Self {
            target_db,
            max_iterations,
            papr_db: Vec::new(),
            iterations_total: 0,
            converged: 0,
            spectral: SpectralErrorAccumulator::new(fft_size),
        }
    }

    fn merge(&mut self, other: &Self) {
        self.papr_db.extend_from_slice(&other.papr_db);
        self.iterations_total += other.iterations_total;
        self.converged += other.converged;
        self.spectral.merge(&other.spectral);
    }
}

/// Runs every (target, cap) cell of `plan` for one mask. Cells are ordered
/// target-major, caps in plan order.
pub fn run_mask_ensemble(plan: &ExperimentPlan, instance: &MaskInstance) -> Result<Vec<CellOutcome>> {
    let cfg = &plan.waveform;
    let modulator = OfdmModulator::new(*cfg)?;
    let dense = instance.mask.materialize(cfg)?;
    let max_cap = *plan.iteration_caps.iter().max().expect("validated non-empty");
    let reducers = plan
        .targets_db
        .iter()
        .map(|&t| {
            PaprReducer::with_transform(modulator.transform().clone(), dense.clone(), plan.method, t, max_cap)
                .map(|r| r.keep_trace(false))
        })
        .collect::<Result<Vec<_>>>()?;
    let fresh = || -> Vec<CellOutcome> {
        plan.targets_db
            .iter()
            .flat_map(|&t| plan.iteration_caps.iter().map(move |&c| (t, c)))
            .map(|(t, c)| CellOutcome::empty(t, c, cfg.fft_size()))
            .collect()
    };

    let run_chunk = |start: usize| -> Result<Vec<CellOutcome>> {
        let mut cells = fresh();
        for i in start..(start + CHUNK).min(plan.symbols) {
            let symbol = modulator.modulate(&symbol_data(plan, instance.key, i))?;
            for (ti, reducer) in reducers.iter().enumerate() {
                let results = reducer.run_checkpoints(&symbol, &plan.iteration_caps)?;
                for (ci, r) in results.iter().enumerate() {
                    let cell = &mut cells[ti * plan.iteration_caps.len() + ci];
                    cell.papr_db.push(r.final_papr_db);
                    cell.iterations_total += r.iterations_used as u64;
                    cell.converged += usize::from(r.converged);
                    cell.spectral.add(&r.symbol, &dense);
                }
            }
        }
        Ok(cells)
    };

    let starts: Vec<usize> = (0..plan.symbols).step_by(CHUNK).collect();
    let wave = 2 * rayon::current_num_threads().max(1);
    let mut total = fresh();
    for group in starts.chunks(wave) {
        let partials = group
            .par_iter()
            .map(|&s| run_chunk(s))
            .collect::<Result<Vec<_>>>()?;
        for partial in &partials {
            for (acc, p) in total.iter_mut().zip(partial) {
                acc.merge(p);
            }
        }
    }
    Ok(total)
}

/// PAPR of the unprocessed symbols, drawn from the stream with key 0.
pub fn baseline_papr_samples(plan: &ExperimentPlan) -> Result<Vec<f64>> {
    let modulator = OfdmModulator::new(plan.waveform)?;
    (0..plan.symbols)
        .into_par_iter()
        .map(|i| papr_db(modulator.modulate(&symbol_data(plan, 0, i))?.time()))
        .collect()
}

/// Provenance written next to every result set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub library_version: String,
    pub seed: u64,
    pub plan_sha256: String,
    pub symbols: usize,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, plan: &ExperimentPlan, files: Vec<String>) -> Self {
        Self {
            command: command.into(),
            library_version: env!("CARGO_PKG_VERSION").into(),
            seed: plan.seed,
            plan_sha256: plan.hash_hex(),
            symbols: plan.symbols,
            files,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

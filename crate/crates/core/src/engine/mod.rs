//! Iterative clipping loops: classical clipping and filtering (ICF) and
//! clipping with error filtering (ICEF).
//!
//! Every step clips the current time signal at the fixed threshold `A`,
//! moves to the frequency domain and rebuilds the spectrum from the mask:
//!
//! * ICF keeps `H[k]·X̄[k]`, so passband clipping noise lands everywhere.
//! * ICEF separates the clipping noise `C = X̄ − X⁰` and adds back only
//!   `H[k]·C[k]` onto the pristine `X⁰`, so clean bins never see noise.
//!
//! For binary masks ICEF reduces to a casewise copy (`X̄` on noisy bins, `X⁰`
//! on clean bins, zero elsewhere) that costs nothing over ICF.

mod complexity;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use complexity::{complexity, split_radix_cost, ComplexityEstimate, ComplexityMethod, TransformCost};

use crate::error::{Error, Result};
use crate::mask::{BinClass, DenseMask, FrequencyMask};
use crate::waveform::{clip_in_place, papr_db, ClipperConfig, OfdmSymbol, OfdmTransform, WaveformConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Icf,
    Icef,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Icf => "ICF",
            Method::Icef => "ICEF",
        })
    }
}

/// Clipping noise `Cˡ[k] = X̄ˡ[k] − X⁰[k]` of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippingNoise {
    pub spectrum: Vec<Complex64>,
}

impl ClippingNoise {
    pub fn between(clipped: &[Complex64], reference: &[Complex64]) -> Self {
        Self {
            spectrum: clipped.iter().zip(reference).map(|(c, r)| c - r).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaprReductionResult {
    pub symbol: OfdmSymbol,
    pub iterations_used: usize,
    /// PAPR before every clip plus the PAPR at exit (`iterations_used + 1`
    /// entries). Empty when trace retention is off.
    pub papr_trace_db: Vec<f64>,
    pub initial_papr_db: f64,
    pub final_papr_db: f64,
    /// Final PAPR at or below the target.
    pub converged: bool,
}

fn check_dims(tx: &OfdmTransform, symbol: &OfdmSymbol, mask: &DenseMask) -> Result<()> {
    for len in [symbol.len(), mask.len()] {
        if len != tx.len() {
            return Err(Error::Dimension {
                expected: tx.len(),
                actual: len,
            });
        }
    }
    Ok(())
}

/// `X̄ˡ = DFT{clip(xˡ⁻¹)}`. When nothing exceeds the threshold the clipped
/// signal is `xˡ⁻¹` itself, whose spectrum is already known.
pub fn clipped_spectrum(tx: &OfdmTransform, symbol: &OfdmSymbol, clipper: &ClipperConfig) -> Result<Vec<Complex64>> {
    if symbol.len() != tx.len() {
        return Err(Error::Dimension {
            expected: tx.len(),
            actual: symbol.len(),
        });
    }
    let mut buf = symbol.time().to_vec();
    if clip_in_place(&mut buf, clipper.amplitude_threshold) == 0 {
        return Ok(symbol.spectrum().to_vec());
    }
    tx.forward_in_place(&mut buf);
    Ok(buf)
}

fn next_symbol(tx: &OfdmTransform, prev: &OfdmSymbol, spectrum: Vec<Complex64>) -> OfdmSymbol {
    let mut time = spectrum.clone();
    tx.inverse_in_place(&mut time);
    OfdmSymbol::from_parts(Arc::clone(prev.shared_reference()), spectrum, time, prev.iteration() + 1)
}

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// One classical clipping-and-filtering iteration, `Xˡ = H·X̄ˡ`.
pub fn icf_step(
    tx: &OfdmTransform,
    symbol: &OfdmSymbol,
    clipper: &ClipperConfig,
    mask: &DenseMask,
) -> Result<OfdmSymbol> {
    check_dims(tx, symbol, mask)?;
    if mask.has_clean() {
        return Err(Error::Contract(
            "ICF cannot honour a clean subcarrier set; use icef_step for masks with K_F".into(),
        ));
    }
    let mut x = clipped_spectrum(tx, symbol, clipper)?;
    let gains = mask.response();
    for seg in mask.segments() {
        let bins = &mut x[seg.start..seg.end];
        match seg.class {
            BinClass::Noisy if mask.is_binary() => {}
            BinClass::Noisy => {
                for (v, &g) in bins.iter_mut().zip(&gains[seg.start..seg.end]) {
                    *v *= g;
                }
            }
            BinClass::Clean | BinClass::Null => bins.fill(ZERO),
        }
    }
    Ok(next_symbol(tx, symbol, x))
}

/// One clipping-with-error-filtering iteration, `Xˡ = X⁰ + H·Cˡ`, evaluated
/// bin class by bin class. Binary masks take the casewise copy with no
/// arithmetic at all.
pub fn icef_step(
    tx: &OfdmTransform,
    symbol: &OfdmSymbol,
    clipper: &ClipperConfig,
    mask: &DenseMask,
) -> Result<OfdmSymbol> {
    check_dims(tx, symbol, mask)?;
    let mut x = clipped_spectrum(tx, symbol, clipper)?;
    let reference = symbol.reference_spectrum();
    let gains = mask.response();
    for seg in mask.segments() {
        let r = seg.start..seg.end;
        match seg.class {
            BinClass::Noisy if mask.is_binary() => {}
            BinClass::Noisy => {
                for ((v, &x0), &g) in x[r.clone()].iter_mut().zip(&reference[r.clone()]).zip(&gains[r]) {
                    *v = x0 + (*v - x0) * g;
                }
            }
            BinClass::Clean => x[r.clone()].copy_from_slice(&reference[r]),
            BinClass::Null => x[r].fill(ZERO),
        }
    }
    Ok(next_symbol(tx, symbol, x))
}

/// Literal form of the error-filtering update: separate `Cˡ` over every bin,
/// weight it with the dense `H`, add it to `X⁰`. Kept as the reference the
/// casewise path is checked against.
pub fn icef_step_literal(
    tx: &OfdmTransform,
    symbol: &OfdmSymbol,
    clipper: &ClipperConfig,
    mask: &DenseMask,
) -> Result<OfdmSymbol> {
    check_dims(tx, symbol, mask)?;
    let clipped = clipped_spectrum(tx, symbol, clipper)?;
    let reference = symbol.reference_spectrum();
    let noise = ClippingNoise::between(&clipped, reference);
    let x: Vec<Complex64> = reference
        .iter()
        .zip(&noise.spectrum)
        .zip(mask.response())
        .map(|((&x0, &c), &h)| x0 + c * h)
        .collect();
    Ok(next_symbol(tx, symbol, x))
}

pub fn step(
    tx: &OfdmTransform,
    symbol: &OfdmSymbol,
    clipper: &ClipperConfig,
    mask: &DenseMask,
    method: Method,
) -> Result<OfdmSymbol> {
    match method {
        Method::Icf => icf_step(tx, symbol, clipper, mask),
        Method::Icef => icef_step(tx, symbol, clipper, mask),
    }
}

/// Runs the loop: measure PAPR, and while it exceeds the target and fewer
/// than `max_iterations` steps have run, step again.
pub fn run(
    tx: &OfdmTransform,
    symbol: &OfdmSymbol,
    clipper: &ClipperConfig,
    mask: &DenseMask,
    method: Method,
) -> Result<PaprReductionResult> {
    let mut out = run_to_caps(tx, symbol, clipper, mask, method, &[clipper.max_iterations], true)?;
    Ok(out.pop().expect("one cap requested"))
}

/// Same loop, snapshotting the state each listed cap would have returned.
/// A run capped at `L'` is a prefix of the run capped at `L > L'`, so one
/// pass serves every cap.
fn run_to_caps(
    tx: &OfdmTransform,
    symbol: &OfdmSymbol,
    clipper: &ClipperConfig,
    mask: &DenseMask,
    method: Method,
    caps: &[usize],
    keep_trace: bool,
) -> Result<Vec<PaprReductionResult>> {
    if symbol.iteration() != 0 {
        return Err(Error::Contract(format!(
            "run expects an iteration-0 symbol, got iteration {}",
            symbol.iteration()
        )));
    }
    check_dims(tx, symbol, mask)?;
    if caps.iter().any(|&c| c == 0) {
        return Err(Error::config("iteration caps must be at least 1"));
    }
    let mut order: Vec<usize> = (0..caps.len()).collect();
    order.sort_by_key(|&i| caps[i]);

    let target = clipper.papr_target_db;
    let initial = papr_db(symbol.time())?;
    let mut trace = if keep_trace { vec![initial] } else { Vec::new() };
    let mut current = symbol.clone();
    let mut papr = initial;
    let mut results: Vec<Option<PaprReductionResult>> = vec![None; caps.len()];
    for i in order {
        while papr > target && current.iteration() < caps[i] {
            current = step(tx, &current, clipper, mask, method)?;
            papr = papr_db(current.time())?;
            if keep_trace {
                trace.push(papr);
            }
        }
        results[i] = Some(PaprReductionResult {
            symbol: current.clone(),
            iterations_used: current.iteration(),
            papr_trace_db: trace.clone(),
            initial_papr_db: initial,
            final_papr_db: papr,
            converged: papr <= target,
        });
    }
    Ok(results.into_iter().map(|r| r.expect("filled")).collect())
}

/// Reusable PAPR reduction setup: planned transform, materialized mask,
/// target and iteration cap. The amplitude threshold is derived per symbol
/// from the mean power of its `x⁰`.
#[derive(Debug, Clone)]
pub struct PaprReducer {
    transform: OfdmTransform,
    mask: DenseMask,
    method: Method,
    papr_target_db: f64,
    max_iterations: usize,
    keep_trace: bool,
}

impl PaprReducer {
    pub fn new(
        config: &WaveformConfig,
        mask: &FrequencyMask,
        method: Method,
        papr_target_db: f64,
        max_iterations: usize,
    ) -> Result<Self> {
        Self::with_transform(
            OfdmTransform::new(config.fft_size())?,
            mask.materialize(config)?,
            method,
            papr_target_db,
            max_iterations,
        )
    }

    pub fn with_transform(
        transform: OfdmTransform,
        mask: DenseMask,
        method: Method,
        papr_target_db: f64,
        max_iterations: usize,
    ) -> Result<Self> {
        if mask.len() != transform.len() {
            return Err(Error::Dimension {
                expected: transform.len(),
                actual: mask.len(),
            });
        }
        if method == Method::Icf && mask.has_clean() {
            return Err(Error::Contract(
                "ICF cannot honour a clean subcarrier set; use ICEF".into(),
            ));
        }
        if max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        Ok(Self {
            transform,
            mask,
            method,
            papr_target_db,
            max_iterations,
            keep_trace: true,
        })
    }

    /// Toggles per-iteration PAPR trace retention (on by default).
    pub fn keep_trace(mut self, keep: bool) -> Self {
        self.keep_trace = keep;
        self
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn mask(&self) -> &DenseMask {
        &self.mask
    }

    pub fn transform(&self) -> &OfdmTransform {
        &self.transform
    }

    pub fn clipper_for(&self, symbol: &OfdmSymbol) -> Result<ClipperConfig> {
        ClipperConfig::for_symbol(self.papr_target_db, self.max_iterations, symbol)
    }

    pub fn step(&self, symbol: &OfdmSymbol, clipper: &ClipperConfig) -> Result<OfdmSymbol> {
        step(&self.transform, symbol, clipper, &self.mask, self.method)
    }

    pub fn run(&self, symbol: &OfdmSymbol) -> Result<PaprReductionResult> {
        let clipper = self.clipper_for(symbol)?;
        self.run_with_clipper(symbol, &clipper)
    }

    pub fn run_with_clipper(&self, symbol: &OfdmSymbol, clipper: &ClipperConfig) -> Result<PaprReductionResult> {
        let mut out = run_to_caps(
            &self.transform,
            symbol,
            clipper,
            &self.mask,
            self.method,
            &[clipper.max_iterations],
            self.keep_trace,
        )?;
        Ok(out.pop().expect("one cap requested"))
    }

    /// Results for several iteration caps from a single pass; the reducer's
    /// own cap is ignored.
    pub fn run_checkpoints(&self, symbol: &OfdmSymbol, caps: &[usize]) -> Result<Vec<PaprReductionResult>> {
        let max = caps.iter().copied().max().unwrap_or(0);
        if max == 0 {
            return Err(Error::config("at least one positive iteration cap is required"));
        }
        let clipper = ClipperConfig::for_symbol(self.papr_target_db, max, symbol)?;
        run_to_caps(&self.transform, symbol, &clipper, &self.mask, self.method, caps, self.keep_trace)
    }
}

#[cfg(test)]
mod tests;

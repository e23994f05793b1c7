//! OFDM numerology, symbol synthesis, PAPR measurement and the soft limiter.
//!
//! Subcarriers use double-sided indexing around DC: the active set of a
//! configuration with `N_act` subcarriers is `{-⌊N_act/2⌋, …, ⌈N_act/2⌉-1}`
//! and subcarrier `k` lives in transform bin `k mod N`.

mod qam;
mod transform;

use std::ops::RangeInclusive;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use qam::{generate_qam_symbols, Modulation};
pub use transform::{forward_transform, inverse_transform, OfdmTransform};

fn default_subcarrier_spacing() -> f64 {
    15e3
}

/// Static numerology of the oversampled OFDM processing grid. Fields left out
/// of a serialized config take the 20 MHz NR values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveformConfig {
    /// `N_DFT`, power of two.
    pub nominal_transform_size: usize,
    /// `N_ov`, power of two.
    pub oversampling_factor: usize,
    /// `N_act`, strictly below `N_DFT` and a whole number of PRBs.
    pub active_subcarriers: usize,
    pub prb_size: usize,
    /// Informational; used for sample-rate metadata only.
    pub subcarrier_spacing_hz: f64,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self::nr_20mhz()
    }
}

impl WaveformConfig {
    pub fn new(
        nominal_transform_size: usize,
        oversampling_factor: usize,
        active_subcarriers: usize,
        prb_size: usize,
    ) -> Result<Self> {
        let cfg = Self {
            nominal_transform_size,
            oversampling_factor,
            active_subcarriers,
            prb_size,
            subcarrier_spacing_hz: default_subcarrier_spacing(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// NR 20 MHz carrier at 15 kHz: 106 PRBs (1272 subcarriers) on a
    /// 2048-point grid, processed 8× oversampled.
    pub fn nr_20mhz() -> Self {
        Self {
            nominal_transform_size: 2048,
            oversampling_factor: 8,
            active_subcarriers: 1272,
            prb_size: 12,
            subcarrier_spacing_hz: 15e3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.nominal_transform_size.is_power_of_two() {
            return Err(Error::config(format!(
                "nominal transform size {} is not a power of two",
                self.nominal_transform_size
            )));
        }
        if !self.oversampling_factor.is_power_of_two() {
            return Err(Error::config(format!(
                "oversampling factor {} is not a power of two",
                self.oversampling_factor
            )));
        }
        if self
            .nominal_transform_size
            .checked_mul(self.oversampling_factor)
            .is_none()
        {
            return Err(Error::config("oversampled transform size overflows"));
        }
        if self.active_subcarriers == 0 {
            return Err(Error::config("at least one active subcarrier is required"));
        }
        if self.active_subcarriers >= self.nominal_transform_size {
            return Err(Error::config(format!(
                "active subcarriers ({}) must be fewer than the nominal transform size ({})",
                self.active_subcarriers, self.nominal_transform_size
            )));
        }
        if self.prb_size == 0 || self.active_subcarriers % self.prb_size != 0 {
            return Err(Error::config(format!(
                "active subcarriers ({}) is not a multiple of the PRB size ({})",
                self.active_subcarriers, self.prb_size
            )));
        }
        if !(self.subcarrier_spacing_hz.is_finite() && self.subcarrier_spacing_hz > 0.0) {
            return Err(Error::config("subcarrier spacing must be positive"));
        }
        Ok(())
    }

    /// Oversampled transform size `N = N_DFT · N_ov`.
    pub fn fft_size(&self) -> usize {
        self.nominal_transform_size * self.oversampling_factor
    }

    /// `M = log2(N)`.
    pub fn log2_fft_size(&self) -> u32 {
        self.fft_size().trailing_zeros()
    }

    pub fn prb_count(&self) -> usize {
        self.active_subcarriers / self.prb_size
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.fft_size() as f64 * self.subcarrier_spacing_hz
    }

    pub fn first_active(&self) -> i32 {
        -((self.active_subcarriers / 2) as i32)
    }

    pub fn last_active(&self) -> i32 {
        self.first_active() + self.active_subcarriers as i32 - 1
    }

    pub fn active_range(&self) -> RangeInclusive<i32> {
        self.first_active()..=self.last_active()
    }

    pub fn is_active(&self, k: i32) -> bool {
        self.active_range().contains(&k)
    }

    /// Lowest double-sided index of the full grid, `-N/2`.
    pub fn first_bin_index(&self) -> i32 {
        -((self.fft_size() / 2) as i32)
    }

    /// Transform bin holding double-sided subcarrier `k`.
    pub fn bin_of(&self, k: i32) -> usize {
        k.rem_euclid(self.fft_size() as i32) as usize
    }

    /// Double-sided index (`-N/2 … N/2-1`) of transform bin `bin`.
    pub fn index_of_bin(&self, bin: usize) -> i32 {
        let n = self.fft_size();
        if bin >= n / 2 {
            bin as i32 - n as i32
        } else {
            bin as i32
        }
    }
}

/// One OFDM symbol during PAPR reduction: the pristine reference spectrum
/// `X⁰` plus the current iterate in both domains.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmSymbol {
    reference_spectrum: Arc<[Complex64]>,
    current_spectrum: Vec<Complex64>,
    current_time: Vec<Complex64>,
    iteration: usize,
}

impl OfdmSymbol {
    pub(crate) fn from_parts(
        reference_spectrum: Arc<[Complex64]>,
        current_spectrum: Vec<Complex64>,
        current_time: Vec<Complex64>,
        iteration: usize,
    ) -> Self {
        debug_assert_eq!(reference_spectrum.len(), current_spectrum.len());
        debug_assert_eq!(current_time.len(), current_spectrum.len());
        Self {
            reference_spectrum,
            current_spectrum,
            current_time,
            iteration,
        }
    }

    /// `X⁰[k]`, in transform-bin order.
    pub fn reference_spectrum(&self) -> &[Complex64] {
        &self.reference_spectrum
    }

    pub(crate) fn shared_reference(&self) -> &Arc<[Complex64]> {
        &self.reference_spectrum
    }

    /// `Xˡ[k]`, in transform-bin order.
    pub fn spectrum(&self) -> &[Complex64] {
        &self.current_spectrum
    }

    /// `xˡ[n]`.
    pub fn time(&self) -> &[Complex64] {
        &self.current_time
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn len(&self) -> usize {
        self.current_time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current_time.is_empty()
    }

    /// Mean power of `x⁰[n]` over the oversampled grid (Parseval on `X⁰`).
    pub fn reference_power(&self) -> f64 {
        self.reference_spectrum.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn into_time(self) -> Vec<Complex64> {
        self.current_time
    }
}

/// Maps data onto the active subcarriers of the oversampled grid.
#[derive(Debug, Clone)]
pub struct OfdmModulator {
    config: WaveformConfig,
    transform: OfdmTransform,
}

impl OfdmModulator {
    pub fn new(config: WaveformConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            transform: OfdmTransform::new(config.fft_size())?,
            config,
        })
    }

    pub fn config(&self) -> &WaveformConfig {
        &self.config
    }

    pub fn transform(&self) -> &OfdmTransform {
        &self.transform
    }

    /// Builds `x⁰` from one data symbol per active subcarrier, ordered from the
    /// lowest subcarrier index upwards.
    pub fn modulate(&self, data: &[Complex64]) -> Result<OfdmSymbol> {
        let cfg = &self.config;
        if data.len() != cfg.active_subcarriers {
            return Err(Error::Dimension {
                expected: cfg.active_subcarriers,
                actual: data.len(),
            });
        }
        let n = cfg.fft_size();
        let gain = 1.0 / (cfg.active_subcarriers as f64).sqrt();
        let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
        for (k, &d) in cfg.active_range().zip(data) {
            spectrum[cfg.bin_of(k)] = d * gain;
        }
        let mut time = spectrum.clone();
        self.transform.inverse_in_place(&mut time);
        let reference: Arc<[Complex64]> = spectrum.clone().into();
        Ok(OfdmSymbol::from_parts(reference, spectrum, time, 0))
    }

    /// Wraps externally produced time samples as an iteration-0 symbol.
    ///
    /// The samples must already be confined to the active subcarriers; energy
    /// leaking into inactive bins beyond a 1e-9 fraction is rejected.
    pub fn symbol_from_samples(&self, samples: &[Complex64]) -> Result<OfdmSymbol> {
        let cfg = &self.config;
        let mut spectrum = self.transform.forward(samples)?;
        let total: f64 = spectrum.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 || !total.is_finite() {
            return Err(Error::InvalidSignal("symbol has no finite energy".into()));
        }
        let mut leaked = 0.0;
        for (bin, v) in spectrum.iter_mut().enumerate() {
            if !cfg.is_active(cfg.index_of_bin(bin)) {
                leaked += v.norm_sqr();
                *v = Complex64::new(0.0, 0.0);
            }
        }
        if leaked > 1e-9 * total {
            return Err(Error::InvalidSignal(format!(
                "{:.3e} of the symbol energy lies outside the active subcarriers",
                leaked / total
            )));
        }
        let reference: Arc<[Complex64]> = spectrum.clone().into();
        Ok(OfdmSymbol::from_parts(reference, spectrum, samples.to_vec(), 0))
    }
}

/// One-shot synthesis of `x⁰` for `config`.
pub fn ofdm_modulate(config: &WaveformConfig, data: &[Complex64]) -> Result<OfdmSymbol> {
    OfdmModulator::new(*config)?.modulate(data)
}

/// Peak-to-average power ratio of one symbol in dB, over every sample given.
pub fn papr_db(x: &[Complex64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidSignal("empty signal".into()));
    }
    // Four independent lanes keep the loop off a single dependency chain.
    let mut peaks = [0.0f64; 4];
    let mut sums = [0.0f64; 4];
    let chunks = x.chunks_exact(4);
    let tail = chunks.remainder();
    for c in chunks {
        for lane in 0..4 {
            let p = c[lane].norm_sqr();
            peaks[lane] = peaks[lane].max(p);
            sums[lane] += p;
        }
    }
    for (lane, v) in tail.iter().enumerate() {
        let p = v.norm_sqr();
        peaks[lane] = peaks[lane].max(p);
        sums[lane] += p;
    }
    let peak = peaks.iter().copied().fold(0.0, f64::max);
    let sum = (sums[0] + sums[1]) + (sums[2] + sums[3]);
    if !sum.is_finite() {
        return Err(Error::InvalidSignal("signal contains non-finite samples".into()));
    }
    if sum == 0.0 {
        return Err(Error::InvalidSignal("zero-energy signal".into()));
    }
    let mean = sum / x.len() as f64;
    Ok(10.0 * (peak / mean).log10())
}

/// Soft limiter: saturates the modulus at `threshold`, keeping the phase.
pub fn clip(x: &[Complex64], threshold: f64) -> Vec<Complex64> {
    let mut out = x.to_vec();
    clip_in_place(&mut out, threshold);
    out
}

/// Clips in place and returns how many samples were limited.
pub fn clip_in_place(x: &mut [Complex64], threshold: f64) -> usize {
    debug_assert!(threshold > 0.0);
    // Cheap squared-modulus screen; the margin keeps every sample whose exact
    // modulus could exceed the threshold.
    let screen = threshold * threshold * (1.0 - 8.0 * f64::EPSILON);
    let mut clipped = 0;
    for v in x.iter_mut() {
        if v.norm_sqr() <= screen {
            continue;
        }
        let m = v.norm();
        if m > threshold {
            let mut y = *v * (threshold / m);
            // Rounding can leave |y| one ulp above the threshold.
            while y.norm() > threshold {
                y *= 1.0 - f64::EPSILON;
            }
            *v = y;
            clipped += 1;
        }
    }
    clipped
}

/// Amplitude threshold `A = √(P · 10^(λ/10))` for a target PAPR `λ` in dB and
/// reference mean power `P`.
pub fn threshold_from_target(papr_target_db: f64, reference_power: f64) -> Result<f64> {
    if !(reference_power.is_finite() && reference_power > 0.0) {
        return Err(Error::InvalidSignal(format!(
            "reference power must be positive, got {reference_power}"
        )));
    }
    let a = (reference_power * 10f64.powf(papr_target_db / 10.0)).sqrt();
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::config(format!(
            "target {papr_target_db} dB gives an unusable threshold"
        )));
    }
    Ok(a)
}

/// Per-symbol clipper settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipperConfig {
    pub papr_target_db: f64,
    pub max_iterations: usize,
    pub amplitude_threshold: f64,
}

impl ClipperConfig {
    pub fn new(papr_target_db: f64, max_iterations: usize, amplitude_threshold: f64) -> Result<Self> {
        if max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        if !(amplitude_threshold.is_finite() && amplitude_threshold > 0.0) {
            return Err(Error::config(format!(
                "amplitude threshold must be positive, got {amplitude_threshold}"
            )));
        }
        if papr_target_db.is_nan() {
            return Err(Error::config("PAPR target is NaN"));
        }
        Ok(Self {
            papr_target_db,
            max_iterations,
            amplitude_threshold,
        })
    }

    /// Threshold derived once from the mean power of the symbol's `x⁰`; it
    /// stays fixed across iterations.
    pub fn for_symbol(papr_target_db: f64, max_iterations: usize, symbol: &OfdmSymbol) -> Result<Self> {
        let a = threshold_from_target(papr_target_db, symbol.reference_power())?;
        Self::new(papr_target_db, max_iterations, a)
    }
}

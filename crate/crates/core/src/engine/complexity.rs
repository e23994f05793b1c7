//! Real-operation counts per iteration, assuming split-radix transforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::WaveformConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ComplexityMethod {
    #[serde(rename = "ICF")]
    Icf,
    #[serde(rename = "ICEF-binary")]
    IcefBinary,
    #[serde(rename = "ICEF-weighted")]
    IcefWeighted,
}

impl ComplexityMethod {
    pub const ALL: [ComplexityMethod; 3] = [
        ComplexityMethod::Icf,
        ComplexityMethod::IcefBinary,
        ComplexityMethod::IcefWeighted,
    ];
}

impl std::fmt::Display for ComplexityMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ComplexityMethod::Icf => "ICF",
            ComplexityMethod::IcefBinary => "ICEF-binary",
            ComplexityMethod::IcefWeighted => "ICEF-weighted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformCost {
    pub real_mults: u64,
    pub real_adds: u64,
}

/// Split-radix cost of one `N = 2^M` point complex transform:
/// `MN − 3N + 4` real multiplications and `3MN − 3N + 4` real additions.
pub fn split_radix_cost(n: usize) -> Result<TransformCost> {
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::NotPowerOfTwo(n));
    }
    let n = n as u64;
    let m = n.trailing_zeros() as u64;
    Ok(TransformCost {
        real_mults: m * n - 3 * n + 4,
        real_adds: 3 * m * n - 3 * n + 4,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    pub method: ComplexityMethod,
    pub fft_size: usize,
    pub real_mults_per_iter: u64,
    pub real_adds_per_iter: u64,
}

impl ComplexityEstimate {
    pub fn for_size(fft_size: usize, method: ComplexityMethod) -> Result<Self> {
        let t = split_radix_cost(fft_size)?;
        let n = fft_size as u64;
        // One forward and one inverse transform per iteration.
        let (mut mults, mut adds) = (2 * t.real_mults, 2 * t.real_adds);
        if method == ComplexityMethod::IcefWeighted {
            // Noise separation and recombination: 2N + 2N real additions;
            // real weights: 2N real multiplications.
            mults += 2 * n;
            adds += 4 * n;
        }
        Ok(Self {
            method,
            fft_size,
            real_mults_per_iter: mults,
            real_adds_per_iter: adds,
        })
    }

    /// Relative increase over ICF at the same size, in percent
    /// (multiplications, additions).
    pub fn overhead_percent(&self) -> (f64, f64) {
        let base = Self::for_size(self.fft_size, ComplexityMethod::Icf).expect("size already validated");
        let pct = |x: u64, b: u64| 100.0 * (x - b) as f64 / b as f64;
        (
            pct(self.real_mults_per_iter, base.real_mults_per_iter),
            pct(self.real_adds_per_iter, base.real_adds_per_iter),
        )
    }
}

pub fn complexity(config: &WaveformConfig, method: ComplexityMethod) -> Result<ComplexityEstimate> {
    ComplexityEstimate::for_size(config.fft_size(), method)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nr_grid_counts() {
        let t = split_radix_cost(16384).unwrap();
        // 14·16384 − 3·16384 + 4 and 3·14·16384 − 3·16384 + 4
        assert_eq!(t.real_mults, 180_228);
        assert_eq!(t.real_adds, 638_980);
        let icf = complexity(&WaveformConfig::nr_20mhz(), ComplexityMethod::Icf).unwrap();
        assert_eq!(icf.real_mults_per_iter, 360_456);
        assert_eq!(icf.real_adds_per_iter, 1_277_960);
    }

    #[test]
    fn weighted_overhead() {
        let w = ComplexityEstimate::for_size(16384, ComplexityMethod::IcefWeighted).unwrap();
        assert_eq!(w.real_mults_per_iter - 360_456, 32_768);
        assert_eq!(w.real_adds_per_iter - 1_277_960, 65_536);
        let (m, a) = w.overhead_percent();
        assert_eq!(format!("{m:.2}"), "9.09");
        assert_eq!(format!("{a:.2}"), "5.13");
        assert_eq!(format!("{m:.1}"), "9.1");
        assert_eq!(format!("{a:.1}"), "5.1");
    }

    #[test]
    fn binary_is_free() {
        let icf = ComplexityEstimate::for_size(4096, ComplexityMethod::Icf).unwrap();
        let bin = ComplexityEstimate::for_size(4096, ComplexityMethod::IcefBinary).unwrap();
        assert_eq!(icf.real_mults_per_iter, bin.real_mults_per_iter);
        assert_eq!(icf.real_adds_per_iter, bin.real_adds_per_iter);
        assert_eq!(bin.overhead_percent(), (0.0, 0.0));
    }

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(split_radix_cost(3000).unwrap_err(), Error::NotPowerOfTwo(3000));
        assert!(split_radix_cost(1).is_err());
    }
}

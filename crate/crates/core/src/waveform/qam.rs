//! Gray-mapped square QAM constellations normalized to unit average power.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "QAM16")]
    Qam16,
    #[serde(rename = "QAM64")]
    Qam64,
    #[serde(rename = "QAM256")]
    Qam256,
}

impl Modulation {
    pub const ALL: [Modulation; 4] = [
        Modulation::Qpsk,
        Modulation::Qam16,
        Modulation::Qam64,
        Modulation::Qam256,
    ];

    pub fn order(self) -> usize {
        match self {
            Modulation::Qpsk => 4,
            Modulation::Qam16 => 16,
            Modulation::Qam64 => 64,
            Modulation::Qam256 => 256,
        }
    }

    pub fn bits_per_symbol(self) -> u32 {
        self.order().trailing_zeros()
    }

    /// Amplitude scale so that E|X|² = 1 over equiprobable points.
    fn scale(self) -> f64 {
        let m = self.order() as f64;
        (1.5 / (m - 1.0)).sqrt()
    }

    /// Maps a symbol label to its constellation point. The upper half of the
    /// label bits drive the in-phase axis, the lower half the quadrature axis,
    /// each Gray-coded onto the PAM levels `-(√M-1), …, √M-1`.
    pub fn map_label(self, label: usize) -> Complex64 {
        let half = self.bits_per_symbol() / 2;
        let mask = (1usize << half) - 1;
        let side = 1usize << half;
        let level = |gray: usize| {
            let pos = gray_to_binary(gray);
            (2 * pos) as f64 - (side - 1) as f64
        };
        let i = level((label >> half) & mask);
        let q = level(label & mask);
        Complex64::new(i, q) * self.scale()
    }

    pub fn constellation(self) -> Vec<Complex64> {
        (0..self.order()).map(|l| self.map_label(l)).collect()
    }

    pub fn random_symbols<R: Rng + ?Sized>(self, count: usize, rng: &mut R) -> Vec<Complex64> {
        let m = self.order();
        (0..count).map(|_| self.map_label(rng.random_range(0..m))).collect()
    }
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modulation::Qpsk => "QPSK",
            Modulation::Qam16 => "QAM16",
            Modulation::Qam64 => "QAM64",
            Modulation::Qam256 => "QAM256",
        })
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        match norm.as_str() {
            "QPSK" | "4QAM" | "QAM4" => Ok(Modulation::Qpsk),
            "QAM16" | "16QAM" => Ok(Modulation::Qam16),
            "QAM64" | "64QAM" => Ok(Modulation::Qam64),
            "QAM256" | "256QAM" => Ok(Modulation::Qam256),
            _ => Err(Error::config(format!("unsupported modulation `{s}`"))),
        }
    }
}

/// Draws `count` equiprobable constellation points, reproducibly for a seed.
pub fn generate_qam_symbols(modulation: Modulation, count: usize, seed: u64) -> Result<Vec<Complex64>> {
    if count == 0 {
        return Err(Error::config("symbol count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(modulation.random_symbols(count, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qpsk_is_constant_modulus() {
        let s = generate_qam_symbols(Modulation::Qpsk, 4, 7).unwrap();
        assert_eq!(s.len(), 4);
        for v in s {
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn constellations_have_unit_power() {
        for m in Modulation::ALL {
            let pts = m.constellation();
            let p: f64 = pts.iter().map(|v| v.norm_sqr()).sum::<f64>() / pts.len() as f64;
            assert!((p - 1.0).abs() < 1e-12, "{m}: {p}");
        }
    }

    #[test]
    fn qam16_sample_power_near_unity() {
        let s = generate_qam_symbols(Modulation::Qam16, 100_000, 11).unwrap();
        let p: f64 = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / s.len() as f64;
        assert!((p - 1.0).abs() < 0.01, "{p}");
    }

    #[test]
    fn qam64_frequencies_pass_chi_square() {
        let n = 100_000;
        let m = Modulation::Qam64;
        let pts = m.constellation();
        let s = generate_qam_symbols(m, n, 5).unwrap();
        let mut counts = vec![0usize; pts.len()];
        for v in &s {
            let idx = pts.iter().position(|p| (p - v).norm() < 1e-12).unwrap();
            counts[idx] += 1;
        }
        let expected = n as f64 / pts.len() as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 63 degrees of freedom: mean 63, standard deviation √126.
        let dof = (pts.len() - 1) as f64;
        assert!(chi2 < dof + 3.0 * (2.0 * dof).sqrt(), "chi2 = {chi2}");
    }

    #[test]
    fn neighbours_differ_in_one_bit() {
        for m in Modulation::ALL {
            let pts = m.constellation();
            let step = 2.0 * m.scale();
            for (a, pa) in pts.iter().enumerate() {
                for (b, pb) in pts.iter().enumerate() {
                    if ((pa - pb).norm() - step).abs() < 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1, "{m}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn parses_names() {
        assert_eq!("qpsk".parse::<Modulation>().unwrap(), Modulation::Qpsk);
        assert_eq!("16-QAM".parse::<Modulation>().unwrap(), Modulation::Qam16);
        assert_eq!("QAM256".parse::<Modulation>().unwrap(), Modulation::Qam256);
        assert!(matches!("8PSK".parse::<Modulation>(), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_for_seed() {
        let a = generate_qam_symbols(Modulation::Qam256, 32, 99).unwrap();
        let b = generate_qam_symbols(Modulation::Qam256, 32, 99).unwrap();
        assert_eq!(a, b);
    }
}

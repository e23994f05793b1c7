//! Ensemble statistics: PAPR CCDFs, per-subcarrier error power, clipping
//! noise spectra and the modulation feasibility rule.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::PaprReductionResult;
use crate::error::{Error, Result};
use crate::mask::{BinClass, DenseMask, FrequencyMask};
use crate::waveform::{Modulation, OfdmSymbol, WaveformConfig};

/// A level in dB, with zero power carried as an explicit sentinel rather
/// than a floating-point infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Db {
    Finite(f64),
    NegInfinity,
}

impl Db {
    pub fn from_power_ratio(ratio: f64) -> Self {
        if ratio > 0.0 {
            Db::Finite(10.0 * ratio.log10())
        } else {
            Db::NegInfinity
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Db::Finite(v) => Some(v),
            Db::NegInfinity => None,
        }
    }

    /// Numeric view for comparisons; the sentinel maps to `-∞`.
    pub fn as_f64(self) -> f64 {
        self.value().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Db::Finite(_))
    }
}

impl PartialOrd for Db {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.as_f64().partial_cmp(&other.as_f64())
    }
}

impl fmt::Display for Db {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Db::Finite(v) => write!(f, "{v:.4}"),
            Db::NegInfinity => f.write_str("-inf"),
        }
    }
}

impl Serialize for Db {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Db::Finite(v) => s.serialize_f64(*v),
            Db::NegInfinity => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Db {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Db::Finite(v)),
            Raw::Text(t) if t == "-inf" => Ok(Db::NegInfinity),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"-inf\", got {t:?}"))),
        }
    }
}

/// Empirical complementary CDF of per-symbol PAPR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfCurve {
    pub papr_grid_db: Vec<f64>,
    pub probability: Vec<f64>,
    pub sample_count: usize,
}

/// Evenly spaced grid `start, start + step, …` up to and including `stop`.
pub fn level_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && stop >= start);
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

/// 0.01 dB grid from 0 dB to at least 16 dB, extended past the largest
/// sample so the curve always reaches zero.
pub fn default_grid(samples_db: &[f64]) -> Vec<f64> {
    let max = samples_db.iter().copied().fold(16.0, f64::max);
    level_grid(0.0, max.ceil() + 0.5, 0.01)
}

/// `probability[i]` is the fraction of samples strictly above `grid[i]`.
pub fn estimate_ccdf(papr_samples_db: &[f64], grid: &[f64]) -> Result<CcdfCurve> {
    if papr_samples_db.is_empty() {
        return Err(Error::Statistics("no PAPR samples".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Statistics("CCDF grid must be strictly ascending".into()));
    }
    let mut sorted = papr_samples_db.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let probability = grid
        .iter()
        .map(|&g| {
            let at_or_below = sorted.partition_point(|&s| s <= g);
            (sorted.len() - at_or_below) as f64 / n
        })
        .collect();
    Ok(CcdfCurve {
        papr_grid_db: grid.to_vec(),
        probability,
        sample_count: sorted.len(),
    })
}

impl CcdfCurve {
    pub fn from_samples(papr_samples_db: &[f64]) -> Result<Self> {
        estimate_ccdf(papr_samples_db, &default_grid(papr_samples_db))
    }

    /// `level_db,ccdf` rows; levels with 4 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level_db,ccdf\n");
        for (g, p) in self.papr_grid_db.iter().zip(&self.probability) {
            out.push_str(&format!("{g:.4},{p}\n"));
        }
        out
    }
}

/// PAPR level at which the CCDF crosses `p`, interpolating linearly in
/// (dB, log probability). When the next grid point has zero probability the
/// log is undefined and the interpolation is linear in probability instead.
pub fn papr_at_probability(curve: &CcdfCurve, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Statistics(format!("probability {p} not in (0, 1)")));
    }
    let probs = &curve.probability;
    let grid = &curve.papr_grid_db;
    let (Some(&hi), Some(&lo)) = (probs.first(), probs.last()) else {
        return Err(Error::Statistics("empty CCDF curve".into()));
    };
    if p > hi || p < lo {
        return Err(Error::Extrapolation { p, min: lo, max: hi });
    }
    // Last grid index still at or above p.
    let i = probs.partition_point(|&q| q >= p) - 1;
    if i + 1 == probs.len() || probs[i] == p {
        return Ok(grid[i]);
    }
    let (g0, g1, p0, p1) = (grid[i], grid[i + 1], probs[i], probs[i + 1]);
    let t = if p1 > 0.0 {
        (p.ln() - p0.ln()) / (p1.ln() - p0.ln())
    } else {
        (p0 - p) / (p0 - p1)
    };
    Ok(g0 + t * (g1 - g0))
}

/// Mergeable per-bin sums of `|Xᴸ[k] − X⁰[k]|²` and `|X⁰[k]|²` over an
/// ensemble, in transform-bin order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralErrorAccumulator {
    error_power: Vec<f64>,
    reference_power: Vec<f64>,
    clean_max_error: f64,
    count: usize,
}

impl SpectralErrorAccumulator {
    pub fn new(fft_size: usize) -> Self {
        Self {
            error_power: vec![0.0; fft_size],
            reference_power: vec![0.0; fft_size],
            clean_max_error: 0.0,
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add(&mut self, symbol: &OfdmSymbol, mask: &DenseMask) {
        debug_assert_eq!(symbol.len(), self.error_power.len());
        let x = symbol.spectrum();
        let x0 = symbol.reference_spectrum();
        for (((e, r), xl), x0) in self
            .error_power
            .iter_mut()
            .zip(self.reference_power.iter_mut())
            .zip(x)
            .zip(x0)
        {
            *e += (xl - x0).norm_sqr();
            *r += x0.norm_sqr();
        }
        for seg in mask.segments().iter().filter(|s| s.class == BinClass::Clean) {
            for bin in seg.start..seg.end {
                self.clean_max_error = self.clean_max_error.max((x[bin] - x0[bin]).norm());
            }
        }
        self.count += 1;
    }

    /// Folds `other` in; addition order is the caller's, so merging the same
    /// partials in the same order is bit-reproducible.
    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.error_power.iter_mut().zip(&other.error_power) {
            *a += b;
        }
        for (a, b) in self.reference_power.iter_mut().zip(&other.reference_power) {
            *a += b;
        }
        self.clean_max_error = self.clean_max_error.max(other.clean_max_error);
        self.count += other.count;
    }

    pub fn mse_report(&self, config: &WaveformConfig, mask: &FrequencyMask) -> Result<MseReport> {
        if self.count == 0 {
            return Err(Error::Statistics("no symbols accumulated".into()));
        }
        let per_subcarrier_error_power = config
            .active_range()
            .map(|k| {
                let bin = config.bin_of(k);
                let r = self.reference_power[bin];
                if r > 0.0 {
                    self.error_power[bin] / r
                } else {
                    0.0
                }
            })
            .collect();
        let (mut e, mut r) = (0.0, 0.0);
        for k in mask.noisy().iter() {
            let bin = config.bin_of(k);
            e += self.error_power[bin];
            r += self.reference_power[bin];
        }
        let distorted_mse_db = if r > 0.0 {
            Db::from_power_ratio(e / r)
        } else {
            Db::NegInfinity
        };
        Ok(MseReport {
            per_subcarrier_error_power,
            distorted_mse_db,
            clean_max_error: self.clean_max_error,
            symbol_count: self.count,
        })
    }

    /// Mean clipping-noise power per bin relative to the mean active-bin
    /// signal power, ordered from bin index `-N/2` to `N/2-1`.
    pub fn noise_spectrum(&self, config: &WaveformConfig) -> Result<Vec<Db>> {
        if self.count == 0 {
            return Err(Error::Statistics("no symbols accumulated".into()));
        }
        let active_power: f64 = config
            .active_range()
            .map(|k| self.reference_power[config.bin_of(k)])
            .sum::<f64>()
            / config.active_subcarriers as f64;
        if active_power <= 0.0 {
            return Err(Error::Statistics("reference signal has no power".into()));
        }
        let lo = config.first_bin_index();
        Ok((0..config.fft_size())
            .map(|i| {
                let bin = config.bin_of(lo + i as i32);
                Db::from_power_ratio(self.error_power[bin] / active_power)
            })
            .collect())
    }
}

/// Error power of the ensemble relative to the reference signal power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    /// `Σ|Xᴸ−X⁰|² / Σ|X⁰|²` per active subcarrier, lowest index first.
    pub per_subcarrier_error_power: Vec<f64>,
    /// Same ratio aggregated over the noisy set, in dB.
    pub distorted_mse_db: Db,
    /// Largest `|Xᴸ[k] − X⁰[k]|` seen on any clean bin.
    pub clean_max_error: f64,
    pub symbol_count: usize,
}

fn accumulate(config: &WaveformConfig, mask: &FrequencyMask, results: &[PaprReductionResult]) -> Result<SpectralErrorAccumulator> {
    if results.is_empty() {
        return Err(Error::Statistics("empty result collection".into()));
    }
    let dense = mask.materialize(config)?;
    let mut acc = SpectralErrorAccumulator::new(config.fft_size());
    for r in results {
        if r.symbol.len() != config.fft_size() {
            return Err(Error::Dimension {
                expected: config.fft_size(),
                actual: r.symbol.len(),
            });
        }
        acc.add(&r.symbol, &dense);
    }
    Ok(acc)
}

pub fn mse_report(config: &WaveformConfig, mask: &FrequencyMask, results: &[PaprReductionResult]) -> Result<MseReport> {
    accumulate(config, mask, results)?.mse_report(config, mask)
}

pub fn noise_spectrum(config: &WaveformConfig, mask: &FrequencyMask, results: &[PaprReductionResult]) -> Result<Vec<Db>> {
    accumulate(config, mask, results)?.noise_spectrum(config)
}

/// Required MSE per modulation plus the margin reserved for other
/// transmitter impairments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRequirementTable {
    pub required_mse_db: BTreeMap<Modulation, f64>,
    pub margin_db: f64,
}

impl Default for MseRequirementTable {
    fn default() -> Self {
        Self {
            required_mse_db: BTreeMap::from([
                (Modulation::Qpsk, -15.0),
                (Modulation::Qam16, -18.0),
                (Modulation::Qam64, -22.0),
                (Modulation::Qam256, -29.0),
            ]),
            margin_db: 3.0,
        }
    }
}

impl MseRequirementTable {
    pub fn validate(&self) -> Result<()> {
        let levels: Vec<f64> = self.required_mse_db.values().copied().collect();
        if levels.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("MSE requirements must tighten with modulation order"));
        }
        Ok(())
    }

    /// Largest MSE accepted for `modulation` once the margin is taken.
    pub fn limit_db(&self, modulation: Modulation) -> Result<f64> {
        self.required_mse_db
            .get(&modulation)
            .map(|r| r - self.margin_db)
            .ok_or_else(|| Error::config(format!("no MSE requirement for {modulation}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feasibility {
    #[serde(rename = "feasible")]
    Feasible,
    #[serde(rename = "PAPR-limited")]
    PaprLimited,
    #[serde(rename = "MSE-limited")]
    MseLimited,
    #[serde(rename = "both-limited")]
    BothLimited,
}

impl fmt::Display for Feasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feasibility::Feasible => "feasible",
            Feasibility::PaprLimited => "PAPR-limited",
            Feasibility::MseLimited => "MSE-limited",
            Feasibility::BothLimited => "both-limited",
        })
    }
}

/// PAPR passes when `achieved ≤ target + tolerance`; MSE passes when it is at
/// or below the modulation's requirement minus the table margin.
pub fn feasibility(
    achieved_papr_db: f64,
    target_papr_db: f64,
    papr_tolerance_db: f64,
    mse_db: Db,
    modulation: Modulation,
    table: &MseRequirementTable,
) -> Result<Feasibility> {
    let papr_ok = achieved_papr_db <= target_papr_db + papr_tolerance_db;
    let mse_ok = mse_db.as_f64() <= table.limit_db(modulation)?;
    Ok(match (papr_ok, mse_ok) {
        (true, true) => Feasibility::Feasible,
        (false, true) => Feasibility::PaprLimited,
        (true, false) => Feasibility::MseLimited,
        (false, false) => Feasibility::BothLimited,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Method, PaprReducer};
    use crate::mask::{centered_clean_mask, icf_mask};
    use crate::waveform::{generate_qam_symbols, papr_db, OfdmModulator};

    #[test]
    fn ccdf_strict_inequality() {
        let c = estimate_ccdf(&[5.0; 10], &[4.9, 5.0]).unwrap();
        assert_eq!(c.probability, vec![1.0, 0.0]);
        let c = estimate_ccdf(&[1.0, 2.0, 3.0, 4.0], &[2.5]).unwrap();
        assert_eq!(c.probability, vec![0.5]);
        assert!(matches!(estimate_ccdf(&[], &[1.0]), Err(Error::Statistics(_))));
    }

    #[test]
    fn log_linear_readout() {
        let curve = CcdfCurve {
            papr_grid_db: vec![6.0, 7.0],
            probability: vec![0.1, 0.001],
            sample_count: 1000,
        };
        assert!((papr_at_probability(&curve, 0.01).unwrap() - 6.5).abs() < 1e-12);
        assert_eq!(papr_at_probability(&curve, 0.1).unwrap(), 6.0);
    }

    #[test]
    fn readout_refuses_to_extrapolate() {
        let empty = estimate_ccdf(&[1.0, 2.0], &[5.0, 6.0]).unwrap();
        assert!(matches!(papr_at_probability(&empty, 0.01), Err(Error::Extrapolation { .. })));
        let curve = CcdfCurve {
            papr_grid_db: vec![6.0, 7.0],
            probability: vec![0.1, 0.01],
            sample_count: 100,
        };
        assert!(matches!(papr_at_probability(&curve, 0.001), Err(Error::Extrapolation { .. })));
        assert!(matches!(papr_at_probability(&curve, 0.5), Err(Error::Extrapolation { .. })));
    }

    #[test]
    fn readout_falls_back_to_linear_at_zero() {
        let curve = estimate_ccdf(&[1.0, 2.0, 3.0, 4.0], &[0.0, 3.5, 4.5]).unwrap();
        // Between (3.5, 0.25) and (4.5, 0): linear in probability.
        assert!((papr_at_probability(&curve, 0.125).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let c = estimate_ccdf(&[1.0, 3.0], &[0.0, 2.0]).unwrap();
        assert_eq!(c.to_csv(), "level_db,ccdf\n0.0000,1\n2.0000,0.5\n");
    }

    #[test]
    fn db_sentinel_round_trip() {
        assert_eq!(Db::from_power_ratio(0.0), Db::NegInfinity);
        assert_eq!(serde_json::to_string(&Db::NegInfinity).unwrap(), "\"-inf\"");
        assert_eq!(serde_json::to_string(&Db::Finite(-15.5)).unwrap(), "-15.5");
        let back: Db = serde_json::from_str("\"-inf\"").unwrap();
        assert_eq!(back, Db::NegInfinity);
        assert_eq!(Db::NegInfinity.to_string(), "-inf");
        assert_eq!(Db::Finite(-3.14159).to_string(), "-3.1416");
        assert!(Db::NegInfinity < Db::Finite(-300.0));
    }

    fn ensemble(
        cfg: &WaveformConfig,
        mask: &FrequencyMask,
        method: Method,
        target: f64,
        symbols: u64,
    ) -> Vec<PaprReductionResult> {
        let m = OfdmModulator::new(*cfg).unwrap();
        let reducer = PaprReducer::new(cfg, mask, method, target, 10).unwrap().keep_trace(false);
        (0..symbols)
            .map(|seed| {
                let data = generate_qam_symbols(Modulation::Qpsk, cfg.active_subcarriers, seed).unwrap();
                reducer.run(&m.modulate(&data).unwrap()).unwrap()
            })
            .collect()
    }

    #[test]
    fn unclipped_ensemble_has_no_error() {
        let cfg = WaveformConfig::new(64, 4, 48, 12).unwrap();
        let mask = icf_mask(&cfg);
        let results = ensemble(&cfg, &mask, Method::Icf, 100.0, 5);
        let r = mse_report(&cfg, &mask, &results).unwrap();
        assert!(r.per_subcarrier_error_power.iter().all(|&e| e == 0.0));
        assert_eq!(r.distorted_mse_db, Db::NegInfinity);
        assert!(mse_report(&cfg, &mask, &[]).is_err());
    }

    #[test]
    fn binary_icef_keeps_clean_bins_and_confines_noise() {
        let cfg = WaveformConfig::new(256, 4, 192, 12).unwrap();
        let mask = centered_clean_mask(&cfg, 8).unwrap();
        let results = ensemble(&cfg, &mask, Method::Icef, 5.0, 20);
        let r = mse_report(&cfg, &mask, &results).unwrap();
        assert_eq!(r.clean_max_error, 0.0);
        assert!(r.distorted_mse_db.is_finite());

        // Aggregate equals the reference-power-weighted mean over K_E.
        let mut acc = SpectralErrorAccumulator::new(cfg.fft_size());
        let dense = mask.materialize(&cfg).unwrap();
        let mut ref_pow = vec![0.0; cfg.fft_size()];
        for res in &results {
            acc.add(&res.symbol, &dense);
            for (p, x0) in ref_pow.iter_mut().zip(res.symbol.reference_spectrum()) {
                *p += x0.norm_sqr();
            }
        }
        let (mut num, mut den) = (0.0, 0.0);
        for k in mask.noisy().iter() {
            let i = (k - cfg.first_active()) as usize;
            let w = ref_pow[cfg.bin_of(k)];
            num += r.per_subcarrier_error_power[i] * w;
            den += w;
        }
        let weighted = 10.0 * (num / den).log10();
        assert!((weighted - r.distorted_mse_db.as_f64()).abs() < 1e-9);

        let spectrum = acc.noise_spectrum(&cfg).unwrap();
        let lo = cfg.first_bin_index();
        for (i, level) in spectrum.iter().enumerate() {
            let k = lo + i as i32;
            if mask.noisy().contains(k) {
                assert!(level.is_finite(), "bin {k}");
            } else {
                assert_eq!(*level, Db::NegInfinity, "bin {k}");
            }
        }
    }

    #[test]
    fn icf_noise_spans_passband_only() {
        let cfg = WaveformConfig::new(128, 4, 96, 12).unwrap();
        let mask = icf_mask(&cfg);
        let results = ensemble(&cfg, &mask, Method::Icf, 5.0, 10);
        let spectrum = noise_spectrum(&cfg, &mask, &results).unwrap();
        let lo = cfg.first_bin_index();
        for (i, level) in spectrum.iter().enumerate() {
            assert_eq!(level.is_finite(), cfg.is_active(lo + i as i32));
        }
    }

    #[test]
    fn merge_is_split_invariant() {
        let cfg = WaveformConfig::new(64, 4, 48, 12).unwrap();
        let mask = icf_mask(&cfg);
        let dense = mask.materialize(&cfg).unwrap();
        let results = ensemble(&cfg, &mask, Method::Icf, 4.0, 6);
        let mut whole = SpectralErrorAccumulator::new(64 * 4);
        for r in &results {
            whole.add(&r.symbol, &dense);
        }
        let mut a = SpectralErrorAccumulator::new(64 * 4);
        let mut b = SpectralErrorAccumulator::new(64 * 4);
        for r in &results[..3] {
            a.add(&r.symbol, &dense);
        }
        for r in &results[3..] {
            b.add(&r.symbol, &dense);
        }
        a.merge(&b);
        assert_eq!(a.count(), whole.count());
        let ra = a.mse_report(&cfg, &mask).unwrap();
        let rw = whole.mse_report(&cfg, &mask).unwrap();
        assert!((ra.distorted_mse_db.as_f64() - rw.distorted_mse_db.as_f64()).abs() < 1e-12);
    }

    #[test]
    fn feasibility_rules() {
        let t = MseRequirementTable::default();
        t.validate().unwrap();
        let f = |a, tgt, mse, m| feasibility(a, tgt, 0.2, Db::Finite(mse), m, &t).unwrap();
        assert_eq!(f(6.1, 6.0, -20.0, Modulation::Qpsk), Feasibility::Feasible);
        assert_eq!(f(6.5, 6.0, -30.0, Modulation::Qpsk), Feasibility::PaprLimited);
        assert_eq!(f(6.0, 6.0, -17.0, Modulation::Qpsk), Feasibility::MseLimited);
        assert_eq!(f(6.5, 6.0, -10.0, Modulation::Qpsk), Feasibility::BothLimited);
        // 256-QAM needs MSE ≤ −32 dB after the margin.
        assert_eq!(f(8.05, 8.0, -32.5, Modulation::Qam256), Feasibility::Feasible);
        assert_eq!(f(7.0, 7.0, -27.0, Modulation::Qam256), Feasibility::MseLimited);
        assert_eq!(
            feasibility(6.0, 6.0, 0.2, Db::NegInfinity, Modulation::Qam256, &t).unwrap(),
            Feasibility::Feasible
        );
    }

    #[test]
    fn requirement_table_must_tighten() {
        let mut t = MseRequirementTable::default();
        t.required_mse_db.insert(Modulation::Qam64, -10.0);
        assert!(t.validate().is_err());
    }

    /// Closed-form CCDF of an OFDM symbol with `n` independent Rayleigh
    /// samples, inverted at probability `p`: the PAPR level in dB.
    fn analytic_papr_at(p: f64, n: usize) -> f64 {
        let gamma = -(1.0 - (1.0 - p).powf(1.0 / n as f64)).ln();
        10.0 * gamma.log10()
    }

    #[test]
    fn analytic_oracle_inverts_the_closed_form() {
        let level = analytic_papr_at(0.01, 1272);
        let gamma = 10f64.powf(level / 10.0);
        let ccdf = 1.0 - (1.0 - (-gamma).exp()).powi(1272);
        assert!((ccdf - 0.01).abs() < 1e-12);
        assert!((level - 10.70).abs() < 0.01, "{level}");
    }

    /// The closed form counts `N_act` independent samples, which models the
    /// signal at the nominal rate. The oversampled grid also sees the peaks
    /// between those samples and reads higher.
    #[test]
    fn unclipped_ccdf_matches_closed_form_at_one_percent() {
        let cfg = WaveformConfig::nr_20mhz();
        let m = OfdmModulator::new(cfg).unwrap();
        let (mut nominal, mut oversampled) = (Vec::new(), Vec::new());
        for seed in 0..10_000u64 {
            let data = generate_qam_symbols(Modulation::Qpsk, cfg.active_subcarriers, seed).unwrap();
            let symbol = m.modulate(&data).unwrap();
            oversampled.push(papr_db(symbol.time()).unwrap());
            let decimated: Vec<_> = symbol.time().iter().step_by(cfg.oversampling_factor).copied().collect();
            nominal.push(papr_db(&decimated).unwrap());
        }
        let read = |s: &[f64]| papr_at_probability(&CcdfCurve::from_samples(s).unwrap(), 0.01).unwrap();
        let oracle = analytic_papr_at(0.01, cfg.active_subcarriers);
        let at_nominal = read(&nominal);
        let at_oversampled = read(&oversampled);
        assert!((at_nominal - oracle).abs() <= 0.3, "nominal {at_nominal:.3} dB, oracle {oracle:.3} dB");
        assert!(
            at_oversampled > at_nominal && at_oversampled - oracle < 0.6,
            "oversampled {at_oversampled:.3} dB, oracle {oracle:.3} dB"
        );
    }

    #[test]
    fn icf_error_power_is_flat_across_the_passband() {
        let cfg = WaveformConfig::nr_20mhz();
        let mask = icf_mask(&cfg);
        let dense = mask.materialize(&cfg).unwrap();
        let m = OfdmModulator::new(cfg).unwrap();
        let reducer = PaprReducer::new(&cfg, &mask, Method::Icf, 6.0, 2).unwrap().keep_trace(false);
        let mut acc = SpectralErrorAccumulator::new(cfg.fft_size());
        for seed in 0..10_000u64 {
            let data = generate_qam_symbols(Modulation::Qpsk, cfg.active_subcarriers, seed).unwrap();
            acc.add(&reducer.run(&m.modulate(&data).unwrap()).unwrap().symbol, &dense);
        }
        let report = acc.mse_report(&cfg, &mask).unwrap();
        let e = &report.per_subcarrier_error_power;
        let max = e.iter().copied().fold(f64::MIN, f64::max);
        let min = e.iter().copied().fold(f64::MAX, f64::min);
        let ratio_db = 10.0 * (max / min).log10();
        assert!(ratio_db <= 3.0, "max/min = {ratio_db:.2} dB");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ccdf_is_non_increasing(samples in prop::collection::vec(0.0f64..14.0, 1..300)) {
                let c = CcdfCurve::from_samples(&samples).unwrap();
                prop_assert!(c.probability[0] <= 1.0);
                prop_assert!(c.probability.windows(2).all(|w| w[1] <= w[0]));
                prop_assert_eq!(*c.probability.last().unwrap(), 0.0);
            }

            #[test]
            fn readout_is_monotone_in_p(
                samples in prop::collection::vec(0.0f64..14.0, 20..300),
                p1 in 0.001f64..0.9,
                p2 in 0.001f64..0.9,
            ) {
                let c = CcdfCurve::from_samples(&samples).unwrap();
                let (lo, hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
                if let (Ok(a), Ok(b)) = (papr_at_probability(&c, lo), papr_at_probability(&c, hi)) {
                    prop_assert!(a >= b - 1e-12);
                }
            }
        }
    }
}

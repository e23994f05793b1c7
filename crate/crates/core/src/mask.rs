//! Frequency-domain masks: which passband subcarriers may carry clipping noise
//! (`K_E`), which must stay clean (`K_F`) and which are inactive (`K_null`).
//!
//! Masks are kept as sorted inclusive index ranges in double-sided
//! subcarrier indexing. The dense per-bin response `H[k]` is only built when
//! an engine needs it, via [`FrequencyMask::materialize`].

use std::collections::BTreeSet;
use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::WaveformConfig;

/// Ordered set of double-sided subcarrier indices, stored as merged,
/// non-adjacent inclusive ranges.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct SubcarrierSet {
    ranges: Vec<(i32, i32)>,
}

impl SubcarrierSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ranges<I>(ranges: I) -> Self
    where
        I: IntoIterator<Item = RangeInclusive<i32>>,
    {
        let mut raw: Vec<(i32, i32)> = ranges
            .into_iter()
            .filter(|r| r.start() <= r.end())
            .map(|r| (*r.start(), *r.end()))
            .collect();
        raw.sort_unstable();
        let mut merged: Vec<(i32, i32)> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match merged.last_mut() {
                Some(last) if lo as i64 <= last.1 as i64 + 1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Self { ranges: merged }
    }

    pub fn from_indices<I: IntoIterator<Item = i32>>(indices: I) -> Self {
        Self::from_ranges(indices.into_iter().map(|k| k..=k))
    }

    pub fn ranges(&self) -> impl Iterator<Item = RangeInclusive<i32>> + '_ {
        self.ranges.iter().map(|&(a, b)| a..=b)
    }

    pub fn len(&self) -> usize {
        self.ranges
            .iter()
            .map(|&(a, b)| (b as i64 - a as i64 + 1) as usize)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn contains(&self, k: i32) -> bool {
        let pos = self.ranges.partition_point(|&(_, hi)| hi < k);
        self.ranges.get(pos).is_some_and(|&(lo, _)| lo <= k)
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> + '_ {
        self.ranges.iter().flat_map(|&(a, b)| a..=b)
    }

    pub fn first(&self) -> Option<i32> {
        self.ranges.first().map(|r| r.0)
    }

    pub fn last(&self) -> Option<i32> {
        self.ranges.last().map(|r| r.1)
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::from_ranges(self.ranges().chain(other.ranges()))
    }

    /// Number of indices shared with `other`.
    pub fn overlap(&self, other: &Self) -> usize {
        let mut n = 0usize;
        let (mut i, mut j) = (0, 0);
        while i < self.ranges.len() && j < other.ranges.len() {
            let (a0, a1) = self.ranges[i];
            let (b0, b1) = other.ranges[j];
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if lo <= hi {
                n += (hi as i64 - lo as i64 + 1) as usize;
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        n
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.overlap(other) == 0
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.overlap(other) == self.len()
    }
}

impl Serialize for SubcarrierSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.ranges.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SubcarrierSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<(i32, i32)>::deserialize(d)?;
        Ok(Self::from_ranges(raw.into_iter().map(|(a, b)| a..=b)))
    }
}

/// How to split an odd number of noisy PRBs between the two band edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeBias {
    /// Odd splits are a configuration error.
    #[default]
    Reject,
    /// The lower edge receives the extra PRB.
    LowerHeavy,
}

/// Three-way partition of the oversampled grid plus optional real weights on
/// the noisy set.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMask {
    fft_size: usize,
    noisy: SubcarrierSet,
    clean: SubcarrierSet,
    null: SubcarrierSet,
    weights: Option<Vec<f64>>,
}

fn inactive_set(config: &WaveformConfig) -> SubcarrierSet {
    let lo = config.first_bin_index();
    let hi = -lo - 1;
    SubcarrierSet::from_ranges([lo..=config.first_active() - 1, config.last_active() + 1..=hi])
}

fn active_set(config: &WaveformConfig) -> SubcarrierSet {
    SubcarrierSet::from_ranges([config.active_range()])
}

/// `K_E` = whole passband, `K_F` = ∅: the classical clipping-and-filtering
/// mask.
pub fn icf_mask(config: &WaveformConfig) -> FrequencyMask {
    FrequencyMask {
        fft_size: config.fft_size(),
        noisy: active_set(config),
        clean: SubcarrierSet::new(),
        null: inactive_set(config),
        weights: None,
    }
}

/// Clean block of `clean_prbs` PRBs centred on DC, noisy PRBs split between
/// the two band edges.
pub fn centered_clean_mask(config: &WaveformConfig, clean_prbs: usize) -> Result<FrequencyMask> {
    centered_clean_mask_with_bias(config, clean_prbs, EdgeBias::Reject)
}

pub fn centered_clean_mask_with_bias(
    config: &WaveformConfig,
    clean_prbs: usize,
    bias: EdgeBias,
) -> Result<FrequencyMask> {
    let total = config.prb_count();
    if clean_prbs > total {
        return Err(Error::config(format!(
            "{clean_prbs} clean PRBs requested but the carrier has only {total}"
        )));
    }
    let noisy_prbs = total - clean_prbs;
    let lower = match (noisy_prbs % 2, bias) {
        (0, _) => noisy_prbs / 2,
        (_, EdgeBias::LowerHeavy) => noisy_prbs / 2 + 1,
        (_, EdgeBias::Reject) => {
            return Err(Error::config(format!(
                "{noisy_prbs} noisy PRBs cannot be split evenly between the band edges \
                 ({total} total, {clean_prbs} clean); use edge bias `lower_heavy` to put \
                 the extra PRB at the lower edge"
            )))
        }
    };
    let prb = config.prb_size as i32;
    let first = config.first_active();
    let clean_lo = first + lower as i32 * prb;
    let clean_hi = clean_lo + clean_prbs as i32 * prb - 1;
    let clean = SubcarrierSet::from_ranges([clean_lo..=clean_hi]);
    let noisy = SubcarrierSet::from_ranges([first..=clean_lo - 1, clean_hi + 1..=config.last_active()]);
    Ok(FrequencyMask {
        fft_size: config.fft_size(),
        noisy,
        clean,
        null: inactive_set(config),
        weights: None,
    })
}

/// Contiguous equal-width sub-bands over the passband, some of them clean.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubBandLayout {
    pub band_count: usize,
    pub band_width_sc: usize,
    pub clean_band_indices: BTreeSet<usize>,
}

impl SubBandLayout {
    pub fn new(
        band_count: usize,
        band_width_sc: usize,
        clean_band_indices: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let layout = Self {
            band_count,
            band_width_sc,
            clean_band_indices: clean_band_indices.into_iter().collect(),
        };
        if band_count == 0 || band_width_sc == 0 {
            return Err(Error::config("sub-band count and width must be positive"));
        }
        if let Some(&bad) = layout.clean_band_indices.iter().find(|&&b| b >= band_count) {
            return Err(Error::config(format!(
                "clean band {bad} out of range for {band_count} bands"
            )));
        }
        Ok(layout)
    }

    /// Bitmask of clean bands, a stable identifier for the layout.
    pub fn clean_bits(&self) -> u64 {
        self.clean_band_indices.iter().fold(0u64, |acc, &b| acc | (1u64 << b))
    }

    pub fn label(&self) -> String {
        let parts: Vec<String> = self.clean_band_indices.iter().map(|b| b.to_string()).collect();
        format!("clean[{}]", parts.join("-"))
    }
}

/// Every way of choosing `clean_count` clean bands, in lexicographic order.
pub fn enumerate_subband_layouts(
    band_count: usize,
    band_width_sc: usize,
    clean_count: usize,
) -> Result<Vec<SubBandLayout>> {
    if clean_count > band_count || band_count > 63 {
        return Err(Error::config(format!(
            "cannot choose {clean_count} of {band_count} bands"
        )));
    }
    let mut out = Vec::new();
    let mut combo: Vec<usize> = (0..clean_count).collect();
    loop {
        out.push(SubBandLayout::new(band_count, band_width_sc, combo.iter().copied())?);
        // Advance to the next combination.
        let mut i = clean_count;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if combo[i] < band_count - clean_count + i {
                break;
            }
        }
        combo[i] += 1;
        for j in i + 1..clean_count {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

pub fn subband_mask(config: &WaveformConfig, layout: &SubBandLayout) -> Result<FrequencyMask> {
    if layout.band_count * layout.band_width_sc != config.active_subcarriers {
        return Err(Error::config(format!(
            "{} bands of {} subcarriers do not tile {} active subcarriers",
            layout.band_count, layout.band_width_sc, config.active_subcarriers
        )));
    }
    if let Some(&bad) = layout
        .clean_band_indices
        .iter()
        .find(|&&b| b >= layout.band_count)
    {
        return Err(Error::config(format!("clean band {bad} out of range")));
    }
    let first = config.first_active();
    let width = layout.band_width_sc as i32;
    let band = |i: usize| {
        let lo = first + i as i32 * width;
        lo..=lo + width - 1
    };
    let clean = SubcarrierSet::from_ranges(layout.clean_band_indices.iter().map(|&i| band(i)));
    let noisy = SubcarrierSet::from_ranges(
        (0..layout.band_count)
            .filter(|i| !layout.clean_band_indices.contains(i))
            .map(band),
    );
    Ok(FrequencyMask {
        fft_size: config.fft_size(),
        noisy,
        clean,
        null: inactive_set(config),
        weights: None,
    })
}

impl FrequencyMask {
    /// Assembles a mask from explicit sets without checking it; see
    /// [`validate`].
    pub fn from_sets(
        fft_size: usize,
        noisy: SubcarrierSet,
        clean: SubcarrierSet,
        null: SubcarrierSet,
        weights: Option<Vec<f64>>,
    ) -> Self {
        Self {
            fft_size,
            noisy,
            clean,
            null,
            weights,
        }
    }

    /// Explicit noisy and clean sets for `config`; everything outside the
    /// passband is null.
    pub fn from_passband(config: &WaveformConfig, noisy: SubcarrierSet, clean: SubcarrierSet) -> Self {
        Self {
            fft_size: config.fft_size(),
            noisy,
            clean,
            null: inactive_set(config),
            weights: None,
        }
    }

    /// Attaches real weights in `[0, 1]`, one per noisy subcarrier in
    /// ascending index order.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.noisy.len() {
            return Err(Error::Dimension {
                expected: self.noisy.len(),
                actual: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::config(format!("weight {w} outside [0, 1]")));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn with_uniform_weight(self, weight: f64) -> Result<Self> {
        let n = self.noisy.len();
        self.with_weights(vec![weight; n])
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn noisy(&self) -> &SubcarrierSet {
        &self.noisy
    }

    pub fn clean(&self) -> &SubcarrierSet {
        &self.clean
    }

    pub fn null(&self) -> &SubcarrierSet {
        &self.null
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_binary(&self) -> bool {
        self.weights
            .as_ref()
            .is_none_or(|w| w.iter().all(|&x| x == 1.0))
    }

    /// Clean set size in whole PRBs, if it is PRB-aligned in size.
    pub fn clean_prbs(&self, config: &WaveformConfig) -> Option<usize> {
        let n = self.clean.len();
        (n % config.prb_size == 0).then_some(n / config.prb_size)
    }

    /// Builds the dense per-bin view used by the clipping engine. Fails if
    /// the mask does not validate against `config`.
    pub fn materialize(&self, config: &WaveformConfig) -> Result<DenseMask> {
        let report = validate(self, config);
        if !report.is_valid() {
            return Err(Error::config(format!("invalid mask: {report}")));
        }
        let n = config.fft_size();
        let mut classes = vec![BinClass::Null; n];
        let mut gains = vec![0.0; n];
        let weights = self.weights.as_deref();
        for (i, k) in self.noisy.iter().enumerate() {
            let bin = config.bin_of(k);
            classes[bin] = BinClass::Noisy;
            gains[bin] = weights.map_or(1.0, |w| w[i]);
        }
        for k in self.clean.iter() {
            classes[config.bin_of(k)] = BinClass::Clean;
        }
        let mut segments: Vec<Segment> = Vec::new();
        for (bin, &class) in classes.iter().enumerate() {
            match segments.last_mut() {
                Some(seg) if seg.class == class => seg.end = bin + 1,
                _ => segments.push(Segment {
                    class,
                    start: bin,
                    end: bin + 1,
                }),
            }
        }
        Ok(DenseMask {
            segments,
            gains,
            binary: self.is_binary(),
            has_clean: !self.clean.is_empty(),
            noisy_count: self.noisy.len(),
        })
    }

    /// Exchange-format view in subcarrier units.
    pub fn to_spec(&self) -> MaskSpec {
        MaskSpec {
            unit: MaskUnit::Sc,
            noisy: self.noisy.clone(),
            clean: self.clean.clone(),
            weights: self.weights.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinClass {
    Noisy,
    Clean,
    Null,
}

/// Run of consecutive transform bins sharing a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub class: BinClass,
    pub start: usize,
    pub end: usize,
}

/// Materialized mask in transform-bin order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMask {
    segments: Vec<Segment>,
    gains: Vec<f64>,
    binary: bool,
    has_clean: bool,
    noisy_count: usize,
}

impl DenseMask {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// `H[k]` per transform bin: the weight on `K_E`, zero on `K_F` and
    /// `K_null`.
    pub fn response(&self) -> &[f64] {
        &self.gains
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn has_clean(&self) -> bool {
        self.has_clean
    }

    pub fn noisy_count(&self) -> usize {
        self.noisy_count
    }

    pub fn class_of(&self, bin: usize) -> BinClass {
        let pos = self.segments.partition_point(|s| s.end <= bin);
        self.segments[pos].class
    }
}

/// One failed mask invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskIssue {
    SizeMismatch { mask: usize, config: usize },
    OutOfRange { set: &'static str, index: i32 },
    NotDisjoint { sets: &'static str, shared: usize },
    PartitionIncomplete { missing: usize },
    PassbandMismatch { expected: usize, covered: usize },
    WeightCount { expected: usize, actual: usize },
    WeightRange { value: f64 },
}

impl fmt::Display for MaskIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskIssue::SizeMismatch { mask, config } => {
                write!(f, "mask built for {mask} bins, config has {config}")
            }
            MaskIssue::OutOfRange { set, index } => {
                write!(f, "{set} set index {index} outside the transform grid")
            }
            MaskIssue::NotDisjoint { sets, shared } => {
                write!(f, "sets not disjoint: {sets} share {shared} subcarriers")
            }
            MaskIssue::PartitionIncomplete { missing } => {
                write!(f, "partition incomplete: {missing} bins belong to no set")
            }
            MaskIssue::PassbandMismatch { expected, covered } => write!(
                f,
                "noisy and clean sets cover {covered} of the {expected} active subcarriers \
                 or stray outside the passband"
            ),
            MaskIssue::WeightCount { expected, actual } => {
                write!(f, "{actual} weights given for {expected} noisy subcarriers")
            }
            MaskIssue::WeightRange { value } => write!(f, "weight {value} outside [0, 1]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub issues: Vec<MaskIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return f.write_str("valid");
        }
        let msgs: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
        f.write_str(&msgs.join("; "))
    }
}

/// Checks every mask invariant against `config`, collecting all failures.
pub fn validate(mask: &FrequencyMask, config: &WaveformConfig) -> ValidationReport {
    let mut issues = Vec::new();
    let n = config.fft_size();
    if mask.fft_size != n {
        issues.push(MaskIssue::SizeMismatch {
            mask: mask.fft_size,
            config: n,
        });
    }
    let lo = config.first_bin_index();
    let hi = -lo - 1;
    for (name, set) in [("noisy", &mask.noisy), ("clean", &mask.clean), ("null", &mask.null)] {
        if let Some(k) = set.first().filter(|&k| k < lo) {
            issues.push(MaskIssue::OutOfRange { set: name, index: k });
        } else if let Some(k) = set.last().filter(|&k| k > hi) {
            issues.push(MaskIssue::OutOfRange { set: name, index: k });
        }
    }
    let pairs = [
        ("noisy/clean", &mask.noisy, &mask.clean),
        ("noisy/null", &mask.noisy, &mask.null),
        ("clean/null", &mask.clean, &mask.null),
    ];
    for (name, a, b) in pairs {
        let shared = a.overlap(b);
        if shared > 0 {
            issues.push(MaskIssue::NotDisjoint { sets: name, shared });
        }
    }
    let grid = SubcarrierSet::from_ranges([lo..=hi]);
    let covered = mask.noisy.union(&mask.clean).union(&mask.null).overlap(&grid);
    if covered < n {
        issues.push(MaskIssue::PartitionIncomplete { missing: n - covered });
    }
    let passband = mask.noisy.union(&mask.clean);
    if passband != active_set(config) {
        issues.push(MaskIssue::PassbandMismatch {
            expected: config.active_subcarriers,
            covered: passband.overlap(&active_set(config)),
        });
    }
    if let Some(w) = &mask.weights {
        if w.len() != mask.noisy.len() {
            issues.push(MaskIssue::WeightCount {
                expected: mask.noisy.len(),
                actual: w.len(),
            });
        }
        if let Some(&bad) = w.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            issues.push(MaskIssue::WeightRange { value: bad });
        }
    }
    ValidationReport { issues }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskUnit {
    /// Subcarrier indices, double-sided around DC.
    #[default]
    Sc,
    /// PRB indices counted from the lowest PRB of the carrier (0-based).
    Prb,
}

/// Mask exchange format: inclusive index ranges for the noisy and clean
/// sets, in subcarrier or PRB units. Inactive bins are implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    #[serde(default)]
    pub unit: MaskUnit,
    pub noisy: SubcarrierSet,
    #[serde(default)]
    pub clean: SubcarrierSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl MaskSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Plan {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mask spec serializes")
    }

    /// Converts to subcarrier indices for `config`. The result may still
    /// violate mask invariants; run [`validate`] on it.
    pub fn resolve(&self, config: &WaveformConfig) -> Result<FrequencyMask> {
        let to_sc = |set: &SubcarrierSet| -> Result<SubcarrierSet> {
            match self.unit {
                MaskUnit::Sc => Ok(set.clone()),
                MaskUnit::Prb => {
                    let prbs = config.prb_count() as i32;
                    let size = config.prb_size as i32;
                    let first = config.first_active();
                    let mut out = Vec::new();
                    for r in set.ranges() {
                        if *r.start() < 0 || *r.end() >= prbs {
                            return Err(Error::config(format!(
                                "PRB range {}..={} outside 0..{prbs}",
                                r.start(),
                                r.end()
                            )));
                        }
                        out.push(first + r.start() * size..=first + (r.end() + 1) * size - 1);
                    }
                    Ok(SubcarrierSet::from_ranges(out))
                }
            }
        };
        let mask = FrequencyMask::from_passband(config, to_sc(&self.noisy)?, to_sc(&self.clean)?);
        match &self.weights {
            Some(w) => mask.with_weights(w.clone()),
            None => Ok(mask),
        }
    }
}

//! Declarative experiment plans (TOML) and the mask instances they expand to.

use rand::seq::index;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::Method;
use crate::error::{Error, Result};
use crate::mask::{
    centered_clean_mask_with_bias, enumerate_subband_layouts, subband_mask, validate, EdgeBias, FrequencyMask,
    MaskSpec, MaskUnit, SubcarrierSet,
};
use crate::waveform::{Modulation, WaveformConfig};

use super::stream_rng;

/// RNG key reserved for drawing the mask subsample; never a mask key.
const SUBSAMPLE_KEY: u64 = u64::MAX;

fn default_symbols() -> usize {
    2000
}

fn default_modulation() -> Modulation {
    Modulation::Qpsk
}

fn default_method() -> Method {
    Method::Icef
}

fn default_probability() -> f64 {
    0.01
}

fn default_band_count() -> usize {
    12
}

fn default_band_width() -> usize {
    106
}

fn default_clean_bands() -> usize {
    4
}

fn default_sample_size() -> usize {
    60
}

fn default_tolerance() -> f64 {
    0.2
}

fn all_modulations() -> Vec<Modulation> {
    Modulation::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub seed: u64,
    #[serde(default = "default_symbols")]
    pub symbols: usize,
    #[serde(default = "default_modulation")]
    pub modulation: Modulation,
    #[serde(default = "default_method")]
    pub method: Method,
    pub targets_db: Vec<f64>,
    pub iteration_caps: Vec<usize>,
    /// CCDF level for the PAPR readout.
    #[serde(default = "default_probability")]
    pub probability: f64,
    #[serde(default)]
    pub waveform: WaveformConfig,
    pub masks: MaskFamily,
    #[serde(default)]
    pub feasibility: FeasibilitySettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum MaskFamily {
    /// Clean PRB block centred on DC, one mask per entry of `clean_prbs`.
    Centered {
        clean_prbs: Vec<usize>,
        #[serde(default)]
        edge_bias: EdgeBias,
    },
    /// Equal-width sub-bands with `clean_bands` of them clean.
    Subband {
        #[serde(default = "default_band_count")]
        band_count: usize,
        #[serde(default = "default_band_width")]
        band_width_sc: usize,
        #[serde(default = "default_clean_bands")]
        clean_bands: usize,
        #[serde(default)]
        full_enumeration: bool,
        #[serde(default = "default_sample_size")]
        sample_size: usize,
    },
    Explicit { entries: Vec<ExplicitMask> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitMask {
    pub label: String,
    #[serde(default)]
    pub unit: MaskUnit,
    pub noisy: SubcarrierSet,
    #[serde(default)]
    pub clean: SubcarrierSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilitySettings {
    #[serde(default = "all_modulations")]
    pub modulations: Vec<Modulation>,
    #[serde(default = "default_tolerance")]
    pub papr_tolerance_db: f64,
}

impl Default for FeasibilitySettings {
    fn default() -> Self {
        Self {
            modulations: all_modulations(),
            papr_tolerance_db: default_tolerance(),
        }
    }
}

/// One concrete mask of a study. `key` selects the mask's data stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskInstance {
    pub label: String,
    pub key: u64,
    pub mask: FrequencyMask,
}

fn plan_error(path: &str, message: impl Into<String>) -> Error {
    Error::Plan {
        path: path.into(),
        message: message.into(),
    }
}

/// Sets `dotted.key` in a TOML document. The value is parsed as a TOML value
/// and falls back to a bare string.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| plan_error(assignment, "override must look like key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(plan_error(key, "empty key segment"));
    }
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| plan_error(key, format!("`{part}` is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentPlan {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[] as &[&str])
    }

    pub fn from_toml_with_overrides<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let at = e.span().map(|s| format!("byte {}", s.start)).unwrap_or_default();
            plan_error(&at, e.message())
        })?;
        for o in overrides {
            apply_override(&mut doc, o.as_ref())?;
        }
        let plan: Self = serde_path_to_error::deserialize(toml::Value::Table(doc))
            .map_err(|e| plan_error(&e.path().to_string(), e.inner().to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.symbols == 0 {
            return Err(plan_error("symbols", "at least one symbol is required"));
        }
        if self.targets_db.is_empty() {
            return Err(plan_error("targets_db", "at least one PAPR target is required"));
        }
        if let Some(i) = self.targets_db.iter().position(|t| !t.is_finite()) {
            return Err(plan_error(&format!("targets_db[{i}]"), "target must be finite"));
        }
        if self.iteration_caps.is_empty() {
            return Err(plan_error("iteration_caps", "at least one iteration cap is required"));
        }
        if let Some(i) = self.iteration_caps.iter().position(|&c| c == 0) {
            return Err(plan_error(&format!("iteration_caps[{i}]"), "caps must be at least 1"));
        }
        if !(self.probability > 0.0 && self.probability < 1.0) {
            return Err(plan_error("probability", "must lie in (0, 1)"));
        }
        self.waveform
            .validate()
            .map_err(|e| plan_error("waveform", e.to_string()))?;
        match &self.masks {
            MaskFamily::Centered { clean_prbs, .. } if clean_prbs.is_empty() => {
                return Err(plan_error("masks.clean_prbs", "empty grid"));
            }
            MaskFamily::Subband { sample_size: 0, full_enumeration: false, .. } => {
                return Err(plan_error("masks.sample_size", "must be at least 1"));
            }
            MaskFamily::Explicit { entries } => {
                if entries.is_empty() {
                    return Err(plan_error("masks.entries", "no masks given"));
                }
                for (i, e) in entries.iter().enumerate() {
                    if e.label.is_empty() || e.label.contains([',', '"', '\n', '\r']) {
                        return Err(plan_error(
                            &format!("masks.entries[{i}].label"),
                            "labels must be non-empty and free of commas, quotes and newlines",
                        ));
                    }
                }
            }
            _ => {}
        }
        if self.feasibility.modulations.is_empty() {
            return Err(plan_error("feasibility.modulations", "empty list"));
        }
        Ok(())
    }

    /// SHA-256 of the plan's canonical JSON form, hex encoded.
    pub fn hash_hex(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("plan serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    /// Expands the mask family into concrete masks, in a stable order.
    pub fn mask_instances(&self) -> Result<Vec<MaskInstance>> {
        let cfg = &self.waveform;
        let out = match &self.masks {
            MaskFamily::Centered { clean_prbs, edge_bias } => clean_prbs
                .iter()
                .map(|&c| {
                    Ok(MaskInstance {
                        label: format!("kf{c}"),
                        key: c as u64,
                        mask: centered_clean_mask_with_bias(cfg, c, *edge_bias)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            MaskFamily::Subband {
                band_count,
                band_width_sc,
                clean_bands,
                full_enumeration,
                sample_size,
            } => {
                let all = enumerate_subband_layouts(*band_count, *band_width_sc, *clean_bands)?;
                let chosen: Vec<usize> = if *full_enumeration || *sample_size >= all.len() {
                    (0..all.len()).collect()
                } else {
                    let mut rng = stream_rng(self.seed, SUBSAMPLE_KEY, 0);
                    let mut picks = index::sample(&mut rng, all.len(), *sample_size).into_vec();
                    picks.sort_unstable();
                    picks
                };
                chosen
                    .into_iter()
                    .map(|i| {
                        let layout = &all[i];
                        Ok(MaskInstance {
                            label: layout.label(),
                            key: layout.clean_bits(),
                            mask: subband_mask(cfg, layout)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            MaskFamily::Explicit { entries } => entries
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let spec = MaskSpec {
                        unit: e.unit,
                        noisy: e.noisy.clone(),
                        clean: e.clean.clone(),
                        weights: e.weights.clone(),
                    };
                    let mask = spec.resolve(cfg)?;
                    let report = validate(&mask, cfg);
                    if !report.is_valid() {
                        return Err(plan_error(&format!("masks.entries[{i}]"), report.to_string()));
                    }
                    Ok(MaskInstance {
                        label: e.label.clone(),
                        key: i as u64,
                        mask,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"
seed = 7
symbols = 100
targets_db = [6.0, 8.0]
iteration_caps = [1, 10, 20]

[masks]
family = "centered"
clean_prbs = [0, 4, 8]
"#;

    #[test]
    fn parses_with_defaults() {
        let p = ExperimentPlan::from_toml_str(SWEEP).unwrap();
        assert_eq!(p.modulation, Modulation::Qpsk);
        assert_eq!(p.method, Method::Icef);
        assert_eq!(p.waveform, WaveformConfig::nr_20mhz());
        assert_eq!(p.probability, 0.01);
        assert_eq!(p.feasibility.modulations.len(), 4);
        let masks = p.mask_instances().unwrap();
        assert_eq!(masks.len(), 3);
        assert_eq!(masks[2].label, "kf8");
        assert_eq!(masks[2].mask.clean().len(), 96);
    }

    #[test]
    fn errors_carry_field_paths() {
        let bad = SWEEP.replace("symbols = 100", "symbols = \"many\"");
        match ExperimentPlan::from_toml_str(&bad) {
            Err(Error::Plan { path, .. }) => assert_eq!(path, "symbols"),
            other => panic!("{other:?}"),
        }
        let bad = SWEEP.replace("clean_prbs", "clean_prb");
        match ExperimentPlan::from_toml_str(&bad) {
            Err(Error::Plan { path, message }) => {
                assert_eq!(path, "masks", "{message}");
                assert!(message.contains("clean_prb"));
            }
            other => panic!("{other:?}"),
        }
        let bad = SWEEP.replace("[1, 10, 20]", "[1, 0]");
        match ExperimentPlan::from_toml_str(&bad) {
            Err(Error::Plan { path, .. }) => assert_eq!(path, "iteration_caps[1]"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ExperimentPlan::from_toml_str("seed = [").unwrap_err(),
            Error::Plan { .. }
        ));
    }

    #[test]
    fn overrides_apply_before_validation() {
        let p = ExperimentPlan::from_toml_with_overrides(
            SWEEP,
            &["symbols=5", "masks.clean_prbs=[40]", "modulation=QAM16", "waveform.oversampling_factor=4"],
        )
        .unwrap();
        assert_eq!(p.symbols, 5);
        assert_eq!(p.modulation, Modulation::Qam16);
        assert_eq!(p.waveform.oversampling_factor, 4);
        assert_eq!(p.mask_instances().unwrap()[0].label, "kf40");
        assert!(ExperimentPlan::from_toml_with_overrides(SWEEP, &["symbols"]).is_err());
        assert!(ExperimentPlan::from_toml_with_overrides(SWEEP, &["seed.x=1"]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentPlan::from_toml_str(SWEEP).unwrap();
        let b = ExperimentPlan::from_toml_with_overrides(SWEEP, &["seed=8"]).unwrap();
        assert_eq!(a.hash_hex(), a.clone().hash_hex());
        assert_ne!(a.hash_hex(), b.hash_hex());
        assert_eq!(a.hash_hex().len(), 64);
        // TOML round trip preserves the plan.
        assert_eq!(ExperimentPlan::from_toml_str(&a.to_toml_string()).unwrap(), a);
    }

    #[test]
    fn subband_subsample_is_seeded_and_ordered() {
        let text = r#"
seed = 3
targets_db = [7.0]
iteration_caps = [20]
[masks]
family = "subband"
"#;
        let p = ExperimentPlan::from_toml_str(text).unwrap();
        let a = p.mask_instances().unwrap();
        assert_eq!(a.len(), 60);
        assert_eq!(a, p.mask_instances().unwrap());
        assert!(a.windows(2).all(|w| w[0].label < w[1].label || w[0].key != w[1].key));
        assert!(a.iter().all(|m| m.mask.clean().len() == 424));
        let full = ExperimentPlan::from_toml_with_overrides(text, &["masks.full_enumeration=true"]).unwrap();
        assert_eq!(full.mask_instances().unwrap().len(), 495);
        let other = ExperimentPlan::from_toml_with_overrides(text, &["seed=4"]).unwrap();
        assert_ne!(other.mask_instances().unwrap(), a);
    }

    #[test]
    fn explicit_masks_are_validated() {
        let text = r#"
seed = 1
targets_db = [6.0]
iteration_caps = [5]
[masks]
family = "explicit"
[[masks.entries]]
label = "edges"
unit = "prb"
noisy = [[0, 9], [96, 105]]
clean = [[10, 95]]
[[masks.entries]]
label = "broken"
noisy = [[-636, 0]]
"#;
        match ExperimentPlan::from_toml_str(text).unwrap().mask_instances() {
            Err(Error::Plan { path, message }) => {
                assert_eq!(path, "masks.entries[1]");
                assert!(message.contains("partition incomplete"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let bad_label = text.replace("label = \"edges\"", "label = \"a,b\"");
        assert!(ExperimentPlan::from_toml_str(&bad_label).is_err());
    }
}

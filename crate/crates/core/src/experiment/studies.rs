use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::Method;
use crate::error::{Error, Result};
use crate::metrics::{
    default_grid, estimate_ccdf, feasibility, papr_at_probability, CcdfCurve, Db, Feasibility, MseRequirementTable,
};
use crate::waveform::Modulation;

use super::{baseline_papr_samples, run_mask_ensemble, CellOutcome, ExperimentPlan, MaskFamily, MaskInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mask: String,
    pub clean_prbs: usize,
    pub clean_sc: usize,
    pub modulation: Modulation,
    pub method: Method,
    pub target_db: f64,
    pub max_iterations: usize,
    /// PAPR at the plan's CCDF level.
    pub papr_db: f64,
    pub distorted_mse_db: Db,
    pub clean_max_error: f64,
    pub iterations_mean: f64,
    pub converged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub probability: f64,
    pub symbols: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "mask,clean_prbs,clean_sc,modulation,method,target_db,max_iterations,papr_db,\
             distorted_mse_db,clean_max_error,iterations_mean,converged_fraction\n",
        );
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{:.4},{},{:.4},{},{:e},{:.4},{:.4}",
                r.mask,
                r.clean_prbs,
                r.clean_sc,
                r.modulation,
                r.method,
                r.target_db,
                r.max_iterations,
                r.papr_db,
                r.distorted_mse_db,
                r.clean_max_error,
                r.iterations_mean,
                r.converged_fraction
            )
            .expect("write to string");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep serializes") + "\n"
    }

    pub fn find(&self, mask: &str, target_db: f64, max_iterations: usize) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.mask == mask && r.target_db == target_db && r.max_iterations == max_iterations)
    }
}

fn row_for(plan: &ExperimentPlan, instance: &MaskInstance, cell: &CellOutcome) -> Result<SweepRow> {
    let cfg = &plan.waveform;
    let curve = estimate_ccdf(&cell.papr_db, &default_grid(&cell.papr_db))?;
    let report = cell.spectral.mse_report(cfg, &instance.mask)?;
    let n = cell.papr_db.len() as f64;
    let clean_sc = instance.mask.clean().len();
    Ok(SweepRow {
        mask: instance.label.clone(),
        clean_prbs: clean_sc / cfg.prb_size,
        clean_sc,
        modulation: plan.modulation,
        method: plan.method,
        target_db: cell.target_db,
        max_iterations: cell.max_iterations,
        papr_db: papr_at_probability(&curve, plan.probability)?,
        distorted_mse_db: report.distorted_mse_db,
        clean_max_error: report.clean_max_error,
        iterations_mean: cell.iterations_total as f64 / n,
        converged_fraction: cell.converged as f64 / n,
    })
}

struct SweepRun {
    instances: Vec<MaskInstance>,
    outcomes: Vec<Vec<CellOutcome>>,
    result: SweepResult,
}

fn sweep_run(plan: &ExperimentPlan) -> Result<SweepRun> {
    let instances = plan.mask_instances()?;
    let mut outcomes = Vec::with_capacity(instances.len());
    let mut rows = Vec::new();
    for inst in &instances {
        let cells = run_mask_ensemble(plan, inst)?;
        for cell in &cells {
            rows.push(row_for(plan, inst, cell)?);
        }
        outcomes.push(cells);
    }
    Ok(SweepRun {
        instances,
        outcomes,
        result: SweepResult {
            probability: plan.probability,
            symbols: plan.symbols,
            rows,
        },
    })
}

/// One row per (mask, target, cap), masks in plan order.
pub fn run_sweep(plan: &ExperimentPlan) -> Result<SweepResult> {
    Ok(sweep_run(plan)?.result)
}

/// Sweep over the centred clean-block family; the `kf0` row is the ICF
/// baseline.
pub fn run_kf_sweep(plan: &ExperimentPlan) -> Result<SweepResult> {
    if !matches!(plan.masks, MaskFamily::Centered { .. }) {
        return Err(Error::Plan {
            path: "masks.family".into(),
            message: "the |K_F| sweep needs the `centered` family".into(),
        });
    }
    run_sweep(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCell {
    pub modulation: Modulation,
    pub target_db: f64,
    pub max_iterations: usize,
    /// Largest clean-PRB count such that it and every smaller grid point
    /// are feasible; `None` when the smallest grid point already fails.
    pub max_clean_prbs: Option<usize>,
    /// Classification at the first infeasible grid point, if any.
    pub limiting: Option<Feasibility>,
    /// `(clean PRBs, classification)` along the grid.
    pub grid: Vec<(usize, Feasibility)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityMap {
    pub papr_tolerance_db: f64,
    pub margin_db: f64,
    pub cells: Vec<FeasibilityCell>,
    pub sweeps: Vec<SweepResult>,
}

impl FeasibilityMap {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("modulation,target_db,max_iterations,max_clean_prbs,limiting\n");
        for c in &self.cells {
            writeln!(
                out,
                "{},{:.4},{},{},{}",
                c.modulation,
                c.target_db,
                c.max_iterations,
                c.max_clean_prbs.map_or("none".to_string(), |v| v.to_string()),
                c.limiting.map_or("none".to_string(), |l| l.to_string())
            )
            .expect("write to string");
        }
        out
    }

    pub fn detail_csv(&self) -> String {
        let mut out = String::from("modulation,target_db,clean_prbs,class\n");
        for c in &self.cells {
            for (prbs, class) in &c.grid {
                writeln!(out, "{},{:.4},{},{}", c.modulation, c.target_db, prbs, class).expect("write to string");
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map serializes") + "\n"
    }

    pub fn cell(&self, modulation: Modulation, target_db: f64) -> Option<&FeasibilityCell> {
        self.cells
            .iter()
            .find(|c| c.modulation == modulation && c.target_db == target_db)
    }
}

/// Classifies each |K_F| sweep point at the largest iteration cap and reports
/// the largest contiguous feasible clean-PRB count per (modulation, target).
pub fn run_feasibility_map(plan: &ExperimentPlan, table: &MseRequirementTable) -> Result<FeasibilityMap> {
    table.validate()?;
    let cap = *plan.iteration_caps.iter().max().expect("validated non-empty");
    let tolerance = plan.feasibility.papr_tolerance_db;
    let mut cells = Vec::new();
    let mut sweeps = Vec::new();
    for &modulation in &plan.feasibility.modulations {
        let mut p = plan.clone();
        p.modulation = modulation;
        let sweep = run_kf_sweep(&p)?;
        for &target in &plan.targets_db {
            let mut points: Vec<&SweepRow> = sweep
                .rows
                .iter()
                .filter(|r| r.target_db == target && r.max_iterations == cap)
                .collect();
            points.sort_by_key(|r| r.clean_prbs);
            let grid = points
                .iter()
                .map(|r| {
                    feasibility(r.papr_db, target, tolerance, r.distorted_mse_db, modulation, table)
                        .map(|f| (r.clean_prbs, f))
                })
                .collect::<Result<Vec<_>>>()?;
            let first_bad = grid.iter().position(|(_, f)| *f != Feasibility::Feasible);
            let ok = &grid[..first_bad.unwrap_or(grid.len())];
            cells.push(FeasibilityCell {
                modulation,
                target_db: target,
                max_iterations: cap,
                max_clean_prbs: ok.last().map(|(p, _)| *p),
                limiting: first_bad.map(|i| grid[i].1),
                grid,
            });
        }
        sweeps.push(sweep);
    }
    Ok(FeasibilityMap {
        papr_tolerance_db: tolerance,
        margin_db: table.margin_db,
        cells,
        sweeps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub spread: f64,
}

impl SpreadStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self {
            min,
            max,
            mean: values.iter().sum::<f64>() / values.len() as f64,
            spread: max - min,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementSummary {
    pub target_db: f64,
    pub max_iterations: usize,
    pub mask_count: usize,
    pub papr: SpreadStats,
    /// `None` when some mask saw no clipping at all.
    pub mse: Option<SpreadStats>,
    pub best_mask: String,
    pub worst_mask: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskStudy {
    pub sweep: SweepResult,
    pub summaries: Vec<PlacementSummary>,
    /// Noise spectra of the best and worst masks of the first summary,
    /// indexed from bin `-N/2`.
    pub spectra: Vec<(String, Vec<Db>)>,
    #[serde(skip)]
    first_bin_index: i32,
}

impl MaskStudy {
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "target_db,max_iterations,mask_count,papr_min,papr_max,papr_mean,papr_spread,\
             mse_min,mse_max,mse_mean,mse_spread,best_mask,worst_mask\n",
        );
        for s in &self.summaries {
            let mse = match s.mse {
                Some(m) => format!("{:.4},{:.4},{:.4},{:.4}", m.min, m.max, m.mean, m.spread),
                None => "-inf,-inf,-inf,none".to_string(),
            };
            writeln!(
                out,
                "{:.4},{},{},{:.4},{:.4},{:.4},{:.4},{},{},{}",
                s.target_db,
                s.max_iterations,
                s.mask_count,
                s.papr.min,
                s.papr.max,
                s.papr.mean,
                s.papr.spread,
                mse,
                s.best_mask,
                s.worst_mask
            )
            .expect("write to string");
        }
        out
    }

    pub fn spectra_csv(&self) -> String {
        let mut out = String::from("subcarrier");
        for (label, _) in &self.spectra {
            out.push(',');
            out.push_str(label);
        }
        out.push('\n');
        let n = self.spectra.first().map_or(0, |(_, s)| s.len());
        for i in 0..n {
            write!(out, "{}", self.first_bin_index + i as i32).expect("write to string");
            for (_, s) in &self.spectra {
                write!(out, ",{}", s[i]).expect("write to string");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("study serializes") + "\n"
    }
}

/// Evaluates every sub-band mask of the plan and summarizes how much the
/// clean-band placement moves PAPR and MSE.
pub fn run_mask_placement_study(plan: &ExperimentPlan) -> Result<MaskStudy> {
    if !matches!(plan.masks, MaskFamily::Subband { .. }) {
        return Err(Error::Plan {
            path: "masks.family".into(),
            message: "the placement study needs the `subband` family".into(),
        });
    }
    let run = sweep_run(plan)?;
    let per_mask = plan.targets_db.len() * plan.iteration_caps.len();
    let mut summaries = Vec::with_capacity(per_mask);
    let mut extremes = Vec::new();
    for cell in 0..per_mask {
        let rows: Vec<&SweepRow> = run.result.rows.iter().skip(cell).step_by(per_mask).collect();
        let paprs: Vec<f64> = rows.iter().map(|r| r.papr_db).collect();
        let mses: Vec<f64> = rows.iter().map(|r| r.distorted_mse_db.as_f64()).collect();
        let papr = SpreadStats::of(&paprs).ok_or_else(|| Error::Statistics("non-finite PAPR".into()))?;
        // First index on ties keeps the choice stable.
        let best = (0..rows.len()).fold(0, |b, i| if paprs[i] < paprs[b] { i } else { b });
        let worst = (0..rows.len()).fold(0, |w, i| if paprs[i] > paprs[w] { i } else { w });
        if cell == 0 {
            extremes = vec![best, worst];
        }
        summaries.push(PlacementSummary {
            target_db: rows[0].target_db,
            max_iterations: rows[0].max_iterations,
            mask_count: rows.len(),
            papr,
            mse: SpreadStats::of(&mses),
            best_mask: rows[best].mask.clone(),
            worst_mask: rows[worst].mask.clone(),
        });
    }
    let spectra = extremes
        .into_iter()
        .map(|m| {
            run.outcomes[m][0]
                .spectral
                .noise_spectrum(&plan.waveform)
                .map(|s| (run.instances[m].label.clone(), s))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MaskStudy {
        sweep: run.result,
        summaries,
        spectra,
        first_bin_index: plan.waveform.first_bin_index(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfSeries {
    pub label: String,
    pub papr_db: f64,
    pub curve: CcdfCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfStudy {
    pub probability: f64,
    pub series: Vec<CcdfSeries>,
}

impl CcdfStudy {
    /// Long format: one row per (series, level).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,level_db,ccdf\n");
        for s in &self.series {
            for (g, p) in s.curve.papr_grid_db.iter().zip(&s.curve.probability) {
                writeln!(out, "{},{g:.4},{p}", s.label).expect("write to string");
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("series,probability,papr_db\n");
        for s in &self.series {
            writeln!(out, "{},{},{:.4}", s.label, self.probability, s.papr_db).expect("write to string");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ccdf serializes") + "\n"
    }
}

/// CCDF of the unprocessed ensemble, optionally followed by one curve per
/// (mask, target, cap) of the plan. All curves share one grid.
pub fn run_ccdf(plan: &ExperimentPlan, include_reduced: bool) -> Result<CcdfStudy> {
    let mut samples = vec![("baseline".to_string(), baseline_papr_samples(plan)?)];
    if include_reduced {
        for inst in plan.mask_instances()? {
            for cell in run_mask_ensemble(plan, &inst)? {
                let label = format!("{}_t{}_L{}", inst.label, cell.target_db, cell.max_iterations);
                samples.push((label, cell.papr_db));
            }
        }
    }
    let all: Vec<f64> = samples.iter().flat_map(|(_, s)| s.iter().copied()).collect();
    let grid = default_grid(&all);
    let series = samples
        .into_iter()
        .map(|(label, s)| {
            let curve = estimate_ccdf(&s, &grid)?;
            Ok(CcdfSeries {
                label,
                papr_db: papr_at_probability(&curve, plan.probability)?,
                curve,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CcdfStudy {
        probability: plan.probability,
        series,
    })
}

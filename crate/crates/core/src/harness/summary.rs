//! Machine-readable summaries and the printed table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::estimator::stats::{mean, sample_variance};
use crate::estimator::{combine_estimate, LevelRun};

use super::config::ExperimentConfig;

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: usize,
    pub n: usize,
    pub mean_fine: Option<f64>,
    pub mean_coarse: Option<f64>,
    pub rho: Option<f64>,
    pub y_mean: Option<f64>,
    pub y_var: Option<f64>,
    pub ess_y: Option<f64>,
    pub acceptance_fine: Option<f64>,
    pub acceptance_coarse: Option<f64>,
}

impl LevelSummary {
    pub fn from_run(run: &LevelRun<f64>) -> Self {
        let n = run.q_fine.len();
        let nonempty = |v: &[f64]| (!v.is_empty()).then(|| mean(v));
        Self {
            level: run.level,
            n,
            mean_fine: nonempty(&run.q_fine).and_then(finite),
            mean_coarse: nonempty(&run.q_coarse).and_then(finite),
            rho: run.rho.and_then(finite),
            y_mean: finite(run.y_mean),
            y_var: finite(run.y_var),
            ess_y: finite(run.ess_y),
            acceptance_fine: (n > 0).then_some(run.acceptance_fine),
            acceptance_coarse: run.acceptance_coarse,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub replicate: u32,
    pub estimate: Option<f64>,
    /// `Σ_ℓ V[Y_ℓ]/ESS_ℓ`.
    pub estimator_variance: Option<f64>,
    pub standard_error: Option<f64>,
    pub total_cost: f64,
    pub levels: Vec<LevelSummary>,
}

impl ReplicateSummary {
    pub fn from_runs(replicate: u32, runs: &[LevelRun<f64>]) -> Self {
        let (estimate, variance) = combine_estimate(runs);
        Self {
            replicate,
            estimate: finite(estimate),
            estimator_variance: finite(variance),
            standard_error: finite(variance.sqrt()),
            total_cost: runs.iter().map(|r| r.cost).sum(),
            levels: runs.iter().map(LevelSummary::from_run).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcrossLevel {
    pub level: usize,
    pub y_mean_mean: Option<f64>,
    /// Sample variance of the level mean across replicates.
    pub y_mean_var: Option<f64>,
    pub y_var_mean: Option<f64>,
    pub rho_mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcrossSummary {
    pub n_replicates: usize,
    pub estimate_mean: Option<f64>,
    /// Sample variance of the estimate across replicates.
    pub estimate_var: Option<f64>,
    pub levels: Vec<AcrossLevel>,
}

fn mean_var(xs: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let v: Vec<f64> = xs.iter().flatten().copied().collect();
    if v.is_empty() || v.len() != xs.len() {
        return (None, None);
    }
    let m = finite(mean(&v));
    let var = if v.len() > 1 { finite(sample_variance(&v)) } else { None };
    (m, var)
}

impl AcrossSummary {
    pub fn from_replicates(reps: &[ReplicateSummary]) -> Self {
        let (estimate_mean, estimate_var) = mean_var(&reps.iter().map(|r| r.estimate).collect::<Vec<_>>());
        let n_levels = reps.first().map(|r| r.levels.len()).unwrap_or(0);
        let levels = (0..n_levels)
            .map(|l| {
                let col = |f: fn(&LevelSummary) -> Option<f64>| reps.iter().map(|r| f(&r.levels[l])).collect::<Vec<_>>();
                let (y_mean_mean, y_mean_var) = mean_var(&col(|s| s.y_mean));
                AcrossLevel {
                    level: l,
                    y_mean_mean,
                    y_mean_var,
                    y_var_mean: mean_var(&col(|s| s.y_var)).0,
                    rho_mean: mean_var(&col(|s| s.rho)).0,
                }
            })
            .collect();
        Self {
            n_replicates: reps.len(),
            estimate_mean,
            estimate_var,
            levels,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub code_version: String,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub provenance: Provenance,
    pub replicates: Vec<ReplicateSummary>,
    pub across: AcrossSummary,
}

fn cell(x: Option<f64>, prec: usize) -> String {
    match x {
        Some(v) => format!("{v:.prec$e}"),
        None => "n/a".to_string(),
    }
}

fn cell_fixed(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.4}"),
        None => "n/a".to_string(),
    }
}

/// Plain-text table of every replicate and the across-replicate block.
pub fn render_table(s: &ExperimentSummary) -> String {
    let mut out = String::new();
    let cfg = &s.provenance.config;
    let _ = writeln!(
        out,
        "model={} coupling={:?} L={} seed={} replicates={}",
        cfg.model.name(),
        cfg.coupling,
        cfg.max_level,
        s.provenance.seed,
        s.replicates.len()
    );
    for r in &s.replicates {
        let _ = writeln!(out, "replicate {:03}  estimate {}  se {}", r.replicate, cell(r.estimate, 6), cell(r.standard_error, 3));
        let _ = writeln!(
            out,
            "  {:>5} {:>7} {:>8} {:>14} {:>11} {:>11} {:>8} {:>8}",
            "level", "n", "rho", "E[Y]", "V[Y]", "ESS", "acc_f", "acc_c"
        );
        for l in &r.levels {
            let _ = writeln!(
                out,
                "  {:>5} {:>7} {:>8} {:>14} {:>11} {:>11} {:>8} {:>8}",
                l.level,
                l.n,
                cell_fixed(l.rho),
                cell(l.y_mean, 6),
                cell(l.y_var, 3),
                cell(l.ess_y, 3),
                cell_fixed(l.acceptance_fine),
                cell_fixed(l.acceptance_coarse)
            );
        }
    }
    let a = &s.across;
    let _ = writeln!(
        out,
        "across {} replicates: estimate mean {}  variance {}",
        a.n_replicates,
        cell(a.estimate_mean, 6),
        cell(a.estimate_var, 3)
    );
    for l in &a.levels {
        let _ = writeln!(
            out,
            "  level {:>2}: E[Y] {}  var(E[Y]) {}  mean V[Y] {}  mean rho {}",
            l.level,
            cell(l.y_mean_mean, 6),
            cell(l.y_mean_var, 3),
            cell(l.y_var_mean, 3),
            cell_fixed(l.rho_mean)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_level_prints_na() {
        let run = LevelRun::from_streams(1, vec![], vec![], vec![], vec![], vec![], vec![], 0.0);
        let s = LevelSummary::from_run(&run);
        assert_eq!(s.n, 0);
        assert_eq!(s.rho, None);
        assert_eq!(s.y_mean, None);
        assert_eq!(cell(s.y_mean, 3), "n/a");
    }

    #[test]
    fn across_requires_all_values() {
        assert_eq!(mean_var(&[Some(1.0), None]), (None, None));
        assert_eq!(mean_var(&[Some(1.0), Some(3.0)]), (Some(2.0), Some(2.0)));
        assert_eq!(mean_var(&[Some(1.0)]), (Some(1.0), None));
    }
}

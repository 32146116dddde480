//! Multilevel driver and the telescoping estimator.
//!
//! Level 0 is a single adaptive Metropolis-Hastings chain; level ℓ ≥ 1 is a
//! coupled pair on `(π_ℓ, π_{ℓ−1})`. The estimate is
//! `mean(Q_0) + Σ_ℓ mean(Q_ℓ − Q_{ℓ−1})`.

pub mod stats;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coupling::{run_coupled_level, CoupledOptions, Coupling, WarmStart};
use crate::density::{LogTarget, ParamVector};
use crate::error::SamplerError;
use crate::kernel::{run_adaptive_chain, AdaptState, ChainOptions};
use crate::linalg::Matrix;
use crate::rng::{stream_id, RngStream};
use crate::scalar::Real;

use stats::{ess_or_len, mean, pearson, sample_variance};

/// One level of the hierarchy. The QoI is the target's [`LogTarget::qoi`].
#[derive(Clone)]
pub struct LevelSpec<T: Real> {
    pub level: usize,
    pub target: Arc<dyn LogTarget<T>>,
    /// Relative cost of one density evaluation.
    pub cost_per_eval: f64,
    pub n_samples: usize,
    pub burn_in: usize,
}

/// Sampler settings of the level-0 chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level0Sampler<T> {
    /// Initial proposal covariance `Σ⁰`.
    pub proposal_cov: Matrix<T>,
    /// Adapt during burn-in; otherwise the proposal stays `λ⁰·chol(Σ⁰)`.
    pub adapt: bool,
    pub target_alpha: T,
    pub gamma_exponent: T,
    /// `λ⁰`; defaults to `2.38/√d`.
    pub initial_scale: Option<T>,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub stall_limit: Option<usize>,
    pub replicate: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            stall_limit: Some(1000),
            replicate: 0,
        }
    }
}

/// Post-burn-in output of one level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelRun<T> {
    pub level: usize,
    pub q_fine: Vec<T>,
    /// Empty at level 0.
    pub q_coarse: Vec<T>,
    pub fine_theta: Vec<ParamVector<T>>,
    pub coarse_theta: Vec<ParamVector<T>>,
    pub accept_fine: Vec<bool>,
    pub accept_coarse: Vec<bool>,
    pub acceptance_fine: f64,
    /// `None` at level 0.
    pub acceptance_coarse: Option<f64>,
    /// Pearson correlation of `q_fine` and `q_coarse`; `None` at level 0 or for a constant stream.
    pub rho: Option<T>,
    pub y_mean: T,
    pub y_var: T,
    pub ess_y: T,
    pub resync_count: usize,
    pub resync_joint_accepts: usize,
    /// Final adaptation of the fine and coarse chains, when the sampler adapts.
    pub adapt_fine: Option<AdaptState<T>>,
    pub adapt_coarse: Option<AdaptState<T>>,
    pub t_sub: Option<usize>,
    /// Density evaluations times their costs, burn-in included.
    pub cost: f64,
}

impl<T: Real> LevelRun<T> {
    /// The per-sample correction `Y_ℓ`.
    pub fn y(&self) -> Vec<T> {
        if self.q_coarse.is_empty() {
            self.q_fine.clone()
        } else {
            self.q_fine.iter().zip(&self.q_coarse).map(|(&f, &c)| f - c).collect()
        }
    }

    /// Builds a level record and its summary statistics from raw streams.
    #[allow(clippy::too_many_arguments)]
    pub fn from_streams(
        level: usize,
        q_fine: Vec<T>,
        q_coarse: Vec<T>,
        fine_theta: Vec<ParamVector<T>>,
        coarse_theta: Vec<ParamVector<T>>,
        accept_fine: Vec<bool>,
        accept_coarse: Vec<bool>,
        cost: f64,
    ) -> Self {
        let rate = |v: &[bool]| v.iter().filter(|&&a| a).count() as f64 / v.len().max(1) as f64;
        let mut run = Self {
            level,
            acceptance_fine: rate(&accept_fine),
            acceptance_coarse: (!accept_coarse.is_empty()).then(|| rate(&accept_coarse)),
            rho: None,
            y_mean: T::nan(),
            y_var: T::nan(),
            ess_y: T::nan(),
            q_fine,
            q_coarse,
            fine_theta,
            coarse_theta,
            accept_fine,
            accept_coarse,
            resync_count: 0,
            resync_joint_accepts: 0,
            adapt_fine: None,
            adapt_coarse: None,
            t_sub: None,
            cost,
        };
        run.refresh_stats();
        run
    }

    /// Recomputes `rho`, `y_mean`, `y_var` and `ess_y` from the streams.
    pub fn refresh_stats(&mut self) {
        let y = self.y();
        if !self.q_coarse.is_empty() {
            self.rho = pearson(&self.q_fine, &self.q_coarse).ok();
        }
        if y.is_empty() {
            return;
        }
        self.y_mean = mean(&y);
        self.y_var = if y.len() > 1 { sample_variance(&y) } else { T::nan() };
        self.ess_y = ess_or_len(&y);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MLMCResult<T> {
    pub per_level: Vec<LevelRun<T>>,
    pub estimate: T,
    pub estimator_variance: T,
    pub total_cost: f64,
}

impl<T: Real> MLMCResult<T> {
    pub fn standard_error(&self) -> T {
        self.estimator_variance.sqrt()
    }
}

/// Telescoping sum of level means and its ESS-adjusted variance `Σ_ℓ V[Y_ℓ]/ESS_ℓ`.
pub fn combine_estimate<T: Real>(per_level: &[LevelRun<T>]) -> (T, T) {
    let estimate = per_level.iter().map(|r| r.y_mean).sum();
    let variance = per_level
        .iter()
        .map(|r| if r.y_var == T::zero() { T::zero() } else { r.y_var / r.ess_y })
        .sum();
    (estimate, variance)
}

/// Sample sizes minimizing cost for a target standard error:
/// `N_ℓ = ceil(se⁻² · √(v_ℓ/c_ℓ) · Σ_k √(v_k c_k))`.
pub fn optimal_allocation(v: &[f64], c: &[f64], target_se: f64) -> Result<Vec<usize>, SamplerError> {
    if v.len() != c.len() || v.is_empty() {
        return Err(SamplerError::Setup("variance and cost lists must be non-empty and of equal length".into()));
    }
    if v.iter().chain(c).any(|&x| !(x > 0.0 && x.is_finite())) || !(target_se > 0.0) {
        return Err(SamplerError::Setup("variances, costs and target error must be positive".into()));
    }
    let total: f64 = v.iter().zip(c).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(v.iter()
        .zip(c)
        .map(|(a, b)| ((a / b).sqrt() * total / (target_se * target_se)).ceil() as usize)
        .collect())
}

/// Runs the whole hierarchy.
///
/// Levels run in order. Level ℓ ≥ 1 starts both chains at the end-of-burn-in
/// state of level ℓ−1's fine chain. The random stream of level ℓ is
/// `(seed, stream_id(replicate, ℓ, 0))`, so results are a pure function of the inputs.
pub fn run_ml_mcmc<T: Real>(
    levels: &[LevelSpec<T>],
    coupling: &Coupling<T>,
    level0: &Level0Sampler<T>,
    theta0: ParamVector<T>,
    seed: u64,
    opts: &RunOptions,
) -> Result<MLMCResult<T>, SamplerError> {
    if levels.is_empty() {
        return Err(SamplerError::Setup("at least one level is required".into()));
    }
    for (i, l) in levels.iter().enumerate() {
        if l.level != i {
            return Err(SamplerError::Setup(format!("levels must be ordered 0..L, found {} at position {i}", l.level)));
        }
    }
    let mut per_level = Vec::with_capacity(levels.len());

    let l0 = &levels[0];
    let mut rng = RngStream::new(seed, stream_id(opts.replicate, 0, 0));
    let mut adapt = AdaptState::new(&theta0, level0.target_alpha, level0.gamma_exponent).with_sigma(level0.proposal_cov.clone());
    if let Some(s) = level0.initial_scale {
        adapt = adapt.with_initial_scale(s);
    }
    let chain_opts = ChainOptions {
        stall_limit: opts.stall_limit,
        level: 0,
        adapt: level0.adapt,
    };
    let run = run_adaptive_chain(&*l0.target, l0.n_samples, l0.burn_in, adapt, theta0, &mut rng, &chain_opts)?;
    let mut start = run.diagnostics.burn_in_end.theta.clone();
    let mut warm = level0.adapt.then(|| WarmStart {
        adapt: run.diagnostics.final_adapt.clone(),
        steps: l0.burn_in as u64,
    });
    let mut l0_run = LevelRun::from_streams(
        0,
        run.qoi,
        Vec::new(),
        run.samples,
        Vec::new(),
        run.accepted,
        Vec::new(),
        l0.n_samples as f64 * l0.cost_per_eval,
    );
    l0_run.adapt_fine = level0.adapt.then(|| run.diagnostics.final_adapt.clone());
    per_level.push(l0_run);

    for pair in levels.windows(2) {
        let (coarse, fine) = (&pair[0], &pair[1]);
        let mut rng = RngStream::new(seed, stream_id(opts.replicate, fine.level as u32, 0));
        let copts = CoupledOptions {
            level: fine.level,
            stall_limit: opts.stall_limit,
            warm_start: warm.take(),
        };
        let run = run_coupled_level(
            &*fine.target,
            &*coarse.target,
            coupling,
            fine.n_samples,
            fine.burn_in,
            start.clone(),
            start,
            &mut rng,
            &copts,
        )?;
        start = run.diagnostics.burn_in_end.fine.theta.clone();
        warm = run.diagnostics.adapt_fine.clone().map(|adapt| WarmStart {
            adapt,
            steps: run.diagnostics.adapt_steps,
        });
        let mut lr = LevelRun::from_streams(
            fine.level,
            run.q_fine,
            run.q_coarse,
            run.fine_theta,
            run.coarse_theta,
            run.accept_fine,
            run.accept_coarse,
            fine.n_samples as f64 * (fine.cost_per_eval + coarse.cost_per_eval),
        );
        lr.resync_count = run.diagnostics.resync_count;
        lr.resync_joint_accepts = run.diagnostics.resync_joint_accepts;
        lr.adapt_fine = run.diagnostics.adapt_fine.clone();
        lr.adapt_coarse = run.diagnostics.adapt_coarse.clone();
        lr.t_sub = run.diagnostics.t_sub;
        per_level.push(lr);
    }

    let (estimate, estimator_variance) = combine_estimate(&per_level);
    let total_cost = per_level.iter().map(|r| r.cost).sum();
    Ok(MLMCResult {
        per_level,
        estimate,
        estimator_variance,
        total_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::FnTarget;
    use proptest::prelude::*;

    fn level_from_q(level: usize, qf: Vec<f64>, qc: Vec<f64>) -> LevelRun<f64> {
        let n = qf.len();
        let ac = if qc.is_empty() { vec![] } else { vec![true; n] };
        LevelRun::from_streams(level, qf, qc, vec![], vec![], vec![true; n], ac, 0.0)
    }

    #[test]
    fn single_level_estimate_is_mean() {
        let (e, _) = combine_estimate(&[level_from_q(0, vec![1.0, 2.0, 3.0], vec![])]);
        assert_eq!(e, 2.0);
    }

    #[test]
    fn equal_streams_contribute_nothing() {
        let q = vec![0.5, 1.5, -0.25, 2.0, 0.0];
        let l1 = level_from_q(1, q.clone(), q);
        assert_eq!(l1.y_mean, 0.0);
        assert_eq!(l1.y_var, 0.0);
        let (e, v) = combine_estimate(&[level_from_q(0, vec![1.0, 3.0], vec![]), l1]);
        assert_eq!(e, 2.0);
        assert!(v.is_finite());
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(optimal_allocation(&[4.0], &[7.0], 0.1).unwrap(), vec![400]);
        let n = optimal_allocation(&[1.0, 1.0], &[1.0, 4.0], 0.01).unwrap();
        assert_eq!(n, vec![30_000, 15_000]);
        let scaled = optimal_allocation(&[1.0, 1.0], &[10.0, 40.0], 0.01).unwrap();
        assert_eq!(scaled, n);
        assert!(optimal_allocation(&[0.0], &[1.0], 0.1).is_err());
    }

    fn shifting(level: usize) -> Arc<dyn LogTarget<f64>> {
        let m = 2f64.powi(2 - level as i32);
        Arc::new(FnTarget::new(1, move |x: &[f64]| -0.5 * (x[0] - m).powi(2)))
    }

    fn level0() -> Level0Sampler<f64> {
        Level0Sampler {
            proposal_cov: Matrix::identity(1),
            adapt: true,
            target_alpha: 0.44,
            gamma_exponent: 0.7,
            initial_scale: None,
        }
    }

    #[test]
    fn zero_max_level_is_plain_mh() {
        let levels = vec![LevelSpec {
            level: 0,
            target: shifting(0),
            cost_per_eval: 1.0,
            n_samples: 5000,
            burn_in: 1000,
        }];
        let coupling = Coupling::Synce {
            proposal_cov: Matrix::identity(1),
        };
        let r = run_ml_mcmc(&levels, &coupling, &level0(), ParamVector::zeros(1), 3, &RunOptions::default()).unwrap();
        assert_eq!(r.per_level.len(), 1);
        assert!((r.estimate - 4.0).abs() < 0.2);
    }

    #[test]
    fn identical_targets_give_zero_correction() {
        let t = shifting(1);
        let levels = vec![
            LevelSpec {
                level: 0,
                target: t.clone(),
                cost_per_eval: 1.0,
                n_samples: 3000,
                burn_in: 500,
            },
            LevelSpec {
                level: 1,
                target: t,
                cost_per_eval: 2.0,
                n_samples: 3000,
                burn_in: 500,
            },
        ];
        let coupling = Coupling::Synce {
            proposal_cov: Matrix::identity(1),
        };
        let r = run_ml_mcmc(&levels, &coupling, &level0(), ParamVector::zeros(1), 9, &RunOptions::default()).unwrap();
        assert_eq!(r.per_level[1].y_mean, 0.0);
        assert!(r.per_level[1].y().iter().all(|&y| y == 0.0));
        assert_eq!(r.total_cost, 3000.0 + 3000.0 * 3.0);
    }

    #[test]
    fn levels_must_be_ordered() {
        let levels = vec![LevelSpec {
            level: 1,
            target: shifting(1),
            cost_per_eval: 1.0,
            n_samples: 10,
            burn_in: 1,
        }];
        let coupling = Coupling::Synce {
            proposal_cov: Matrix::identity(1),
        };
        assert!(run_ml_mcmc(&levels, &coupling, &level0(), ParamVector::zeros(1), 1, &RunOptions::default()).is_err());
    }

    proptest! {
        #[test]
        fn telescoping_sum_is_exact(
            q0 in proptest::collection::vec(-10.0f64..10.0, 5..30),
            pairs in proptest::collection::vec(proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 5..30), 0..4),
        ) {
            let mut runs = vec![level_from_q(0, q0, vec![])];
            for (i, p) in pairs.into_iter().enumerate() {
                let (f, c): (Vec<f64>, Vec<f64>) = p.into_iter().unzip();
                runs.push(level_from_q(i + 1, f, c));
            }
            let (e, _) = combine_estimate(&runs);
            let direct: f64 = runs.iter().map(|r| r.y_mean).sum();
            prop_assert_eq!(e, direct);
        }
    }
}

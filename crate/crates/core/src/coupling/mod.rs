//! Couplings between a level-ℓ chain and a level-(ℓ−1) chain.
//!
//! Each coupling produces a joint proposal together with the four log proposal
//! densities the two Metropolis-Hastings ratios need. [`coupled_accept_reject`]
//! then accepts or rejects each coordinate with one shared uniform, so a coupled
//! step has four outcomes: both move, only the fine chain moves, only the coarse
//! chain moves, or neither moves.

mod proposals;
mod runner;

pub use proposals::{
    coarse_proposal_step, independent_proposal_step, maximal_coupling_sample, maximal_coupling_step, synce_ar_step,
    synce_step, ChainScaling, CoarseSubChain, MaximalDraw, ResyncKernel, MAXIMAL_COUPLING_MAX_ITERS,
};
pub use runner::{run_coupled_level, CoupledDiagnostics, CoupledOptions, CoupledRun, Coupling, SynceArParams, WarmStart};

use serde::{Deserialize, Serialize};

use crate::density::{mh_accept_prob, LogTarget, ParamVector};
use crate::error::SamplerError;
use crate::kernel::{checked_evaluate, debug_check_coherence, ChainState};
use crate::rng::RngStream;
use crate::scalar::Real;

/// Fine and coarse chains advancing in lockstep.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState<T> {
    pub fine: ChainState<T>,
    pub coarse: ChainState<T>,
    pub level: usize,
}

impl<T: Real> CoupledState<T> {
    pub fn new(fine: ChainState<T>, coarse: ChainState<T>, level: usize) -> Result<Self, SamplerError> {
        if fine.iter != coarse.iter {
            return Err(SamplerError::Setup(format!(
                "fine and coarse iteration counters differ ({} vs {})",
                fine.iter, coarse.iter
            )));
        }
        if level == 0 {
            return Err(SamplerError::Setup("coupled states start at level 1".into()));
        }
        Ok(Self { fine, coarse, level })
    }
}

/// Joint proposal with forward (current → proposed) and reverse log densities per chain.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingProposal<T> {
    pub prop_fine: ParamVector<T>,
    pub prop_coarse: ParamVector<T>,
    pub log_q_fine_fwd: T,
    pub log_q_fine_rev: T,
    pub log_q_coarse_fwd: T,
    pub log_q_coarse_rev: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResyncKind {
    Independent,
    Coarse,
}

/// Per-level mixture weights `ω_ℓ` of the resynchronization kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResyncSchedule<T> {
    /// `weights[ℓ − 1]` is the weight for level ℓ.
    pub weights: Vec<T>,
    pub resync_kind: ResyncKind,
}

impl<T: Real> ResyncSchedule<T> {
    pub fn new(weights: Vec<T>, resync_kind: ResyncKind) -> Result<Self, SamplerError> {
        if let Some(w) = weights.iter().find(|w| !(**w >= T::zero() && **w <= T::one())) {
            return Err(SamplerError::Setup(format!("resync weight {w} outside [0, 1]")));
        }
        Ok(Self { weights, resync_kind })
    }

    /// No resynchronization at any level.
    pub fn none(levels: usize) -> Self {
        Self {
            weights: vec![T::zero(); levels],
            resync_kind: ResyncKind::Independent,
        }
    }

    /// `ω_ℓ = max(0, (ℓ − L/2) / L)` for ℓ = 1..L.
    pub fn default_for(max_level: usize) -> Self {
        let l = T::lit(max_level as f64);
        let weights = (1..=max_level)
            .map(|lv| ((T::lit(lv as f64) - l / T::lit(2.0)) / l).max(T::zero()))
            .collect();
        Self {
            weights,
            resync_kind: ResyncKind::Independent,
        }
    }

    pub fn weight(&self, level: usize) -> Option<T> {
        level.checked_sub(1).and_then(|i| self.weights.get(i).copied())
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.weights.windows(2).all(|w| w[0] <= w[1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledOutcome<T> {
    pub state: CoupledState<T>,
    pub accept_fine: bool,
    pub accept_coarse: bool,
    pub alpha_fine: T,
    pub alpha_coarse: T,
}

/// Accepts or rejects both coordinates of `prop` with a single shared uniform.
pub fn coupled_accept_reject<T: Real, F: LogTarget<T> + ?Sized, C: LogTarget<T> + ?Sized>(
    state: &CoupledState<T>,
    prop: CouplingProposal<T>,
    fine_target: &F,
    coarse_target: &C,
    rng: &mut RngStream,
) -> Result<CoupledOutcome<T>, SamplerError> {
    let eval_f = checked_evaluate(fine_target, &prop.prop_fine)?;
    let eval_c = checked_evaluate(coarse_target, &prop.prop_coarse)?;
    let u: T = rng.uniform();
    let alpha_fine = mh_accept_prob(state.fine.log_pi, eval_f.log_pi, prop.log_q_fine_fwd, prop.log_q_fine_rev).prob;
    let alpha_coarse = mh_accept_prob(state.coarse.log_pi, eval_c.log_pi, prop.log_q_coarse_fwd, prop.log_q_coarse_rev).prob;
    let accept_fine = u < alpha_fine;
    let accept_coarse = u < alpha_coarse;
    let fine = if accept_fine { state.fine.moved(prop.prop_fine, eval_f) } else { state.fine.stayed() };
    let coarse = if accept_coarse {
        state.coarse.moved(prop.prop_coarse, eval_c)
    } else {
        state.coarse.stayed()
    };
    debug_check_coherence(&fine, fine_target);
    debug_check_coherence(&coarse, coarse_target);
    Ok(CoupledOutcome {
        state: CoupledState {
            fine,
            coarse,
            level: state.level,
        },
        accept_fine,
        accept_coarse,
        alpha_fine,
        alpha_coarse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::FnTarget;

    fn pv(v: f64) -> ParamVector<f64> {
        ParamVector::new(vec![v]).unwrap()
    }

    fn pair<F: LogTarget<f64>, C: LogTarget<f64>>(f: &F, c: &C, xf: f64, xc: f64) -> CoupledState<f64> {
        CoupledState::new(ChainState::new(f, pv(xf)).unwrap(), ChainState::new(c, pv(xc)).unwrap(), 1).unwrap()
    }

    fn shared(xf: f64, xc: f64) -> CouplingProposal<f64> {
        CouplingProposal {
            prop_fine: pv(xf),
            prop_coarse: pv(xc),
            log_q_fine_fwd: 0.0,
            log_q_fine_rev: 0.0,
            log_q_coarse_fwd: 0.0,
            log_q_coarse_rev: 0.0,
        }
    }

    #[test]
    fn schedule_lookup_and_default() {
        let s = ResyncSchedule::new(vec![0.0, 0.0, 0.0, 0.2, 0.3, 0.5], ResyncKind::Independent).unwrap();
        assert_eq!(s.weight(4), Some(0.2));
        assert_eq!(s.weight(0), None);
        assert_eq!(s.weight(7), None);
        assert!(s.is_non_decreasing());
        let d = ResyncSchedule::<f64>::default_for(4);
        assert_eq!(d.weights, vec![0.0, 0.0, 0.25, 0.5]);
        assert!(ResyncSchedule::new(vec![1.5], ResyncKind::Independent).is_err());
    }

    #[test]
    fn mismatched_iterations_rejected() {
        let t = FnTarget::new(1, |_: &[f64]| 0.0);
        let mut c = ChainState::new(&t, pv(0.0)).unwrap();
        c.iter = 3;
        assert!(CoupledState::new(ChainState::new(&t, pv(0.0)).unwrap(), c, 1).is_err());
    }

    #[test]
    fn identical_configuration_gives_identical_decisions() {
        let t = FnTarget::new(1, |x: &[f64]| -0.5 * x[0] * x[0]);
        let mut s = pair(&t, &t, 0.3, 0.3);
        let mut rng = RngStream::new(5, 1);
        for _ in 0..2000 {
            let z: f64 = rng.standard_normal();
            let x = s.fine.theta[0] + z;
            let out = coupled_accept_reject(&s, shared(x, x), &t, &t, &mut rng).unwrap();
            assert_eq!(out.accept_fine, out.accept_coarse);
            s = out.state;
            assert_eq!(s.fine.theta, s.coarse.theta);
        }
    }

    #[test]
    fn forced_split_moves_only_fine() {
        let fine = FnTarget::new(1, |_: &[f64]| 0.0);
        let coarse = FnTarget::new(1, |x: &[f64]| if x[0] > 0.5 { f64::NEG_INFINITY } else { 0.0 });
        let s = pair(&fine, &coarse, 0.0, 0.0);
        let out = coupled_accept_reject(&s, shared(1.0, 1.0), &fine, &coarse, &mut RngStream::new(1, 1)).unwrap();
        assert!(out.accept_fine && !out.accept_coarse);
        assert_eq!(out.state.fine.theta, pv(1.0));
        assert_eq!(out.state.coarse.theta, pv(0.0));
        assert_eq!(out.state.fine.iter, out.state.coarse.iter);
    }
}

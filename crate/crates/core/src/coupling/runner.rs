use serde::{Deserialize, Serialize};

use crate::density::{GaussianSpec, LogTarget, ParamVector};
use crate::error::SamplerError;
use crate::estimator::stats::autocorrelation_ess;
use crate::kernel::{mh_step, AdaptState, ChainState, StallGuard};
use crate::linalg::{cholesky_psd, CholeskyFactor, Matrix};
use crate::rng::RngStream;
use crate::scalar::Real;

use super::proposals::{
    coarse_proposal_step, independent_proposal_step, maximal_coupling_step, synce_ar_step, synce_step, ChainScaling, CoarseSubChain,
    ResyncKernel,
};
use super::{coupled_accept_reject, CoupledState, ResyncKind, ResyncSchedule};

/// Settings of the adaptive SYNCE coupling with resynchronization.
///
/// SYNCE-A is this coupling with every weight set to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynceArParams<T> {
    pub schedule: ResyncSchedule<T>,
    /// Covariance of the independent resync proposal; `None` uses `(Σ_ℓ + Σ_{ℓ−1})/2`.
    pub resync_cov: Option<Matrix<T>>,
    /// Sub-chain lag when the resync kernel is the coarse proposal.
    pub t_sub: Option<usize>,
    pub target_alpha: T,
    pub gamma_exponent: T,
    /// `λ⁰`; defaults to `2.38/√d`.
    pub initial_scale: Option<T>,
    /// `Σ⁰`; defaults to the identity.
    pub initial_sigma: Option<Matrix<T>>,
    /// Start both chains from the adaptation handed over in [`CoupledOptions::warm_start`]
    /// instead of `(λ⁰, Σ⁰)`.
    #[serde(default)]
    pub warm_start: bool,
}

/// Coupling method selector.
#[derive(Clone, Debug)]
pub enum Coupling<T> {
    /// Coarse sub-chain draws proposed to both levels. `t_sub = None` picks the
    /// integrated autocorrelation time of a burn-in pilot of the sub-chain.
    CoarseProposal { proposal_cov: Matrix<T>, t_sub: Option<usize> },
    Independent { imh: GaussianSpec<T> },
    Maximal { proposal_cov: Matrix<T> },
    Synce { proposal_cov: Matrix<T> },
    SynceAr(SynceArParams<T>),
}

impl<T: Real> Coupling<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Coupling::CoarseProposal { .. } => "coarse",
            Coupling::Independent { .. } => "independent",
            Coupling::Maximal { .. } => "maximal",
            Coupling::Synce { .. } => "synce",
            Coupling::SynceAr(_) => "synce_ar",
        }
    }
}

/// Adaptation state from an earlier run and the number of updates behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct WarmStart<T> {
    pub adapt: AdaptState<T>,
    pub steps: u64,
}

#[derive(Clone, Debug)]
pub struct CoupledOptions<T = f64> {
    pub level: usize,
    /// Abort after this many consecutive rejections of either chain.
    pub stall_limit: Option<usize>,
    /// Used by SYNCE-AR when [`SynceArParams::warm_start`] is set; the step-size
    /// sequence then continues from `steps`.
    pub warm_start: Option<WarmStart<T>>,
}

impl<T> CoupledOptions<T> {
    pub fn new(level: usize) -> Self {
        Self {
            level,
            stall_limit: Some(1000),
            warm_start: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoupledDiagnostics<T> {
    pub acceptance_fine: f64,
    pub acceptance_coarse: f64,
    /// Post-burn-in iterations that took the resynchronization branch.
    pub resync_count: usize,
    /// Resync iterations in which both chains accepted (and so coincide).
    pub resync_joint_accepts: usize,
    /// Post-burn-in iterations whose maximal-coupling proposals coincided.
    pub met_count: usize,
    pub t_sub: Option<usize>,
    pub adapt_fine: Option<AdaptState<T>>,
    pub adapt_coarse: Option<AdaptState<T>>,
    /// Adaptation updates behind `adapt_fine`, warm start included.
    pub adapt_steps: u64,
    pub burn_in_end: CoupledState<T>,
}

#[derive(Clone, Debug)]
pub struct CoupledRun<T> {
    pub fine_theta: Vec<ParamVector<T>>,
    pub coarse_theta: Vec<ParamVector<T>>,
    pub q_fine: Vec<T>,
    pub q_coarse: Vec<T>,
    pub accept_fine: Vec<bool>,
    pub accept_coarse: Vec<bool>,
    pub diagnostics: CoupledDiagnostics<T>,
}

fn factor<T: Real>(m: &Matrix<T>) -> Result<CholeskyFactor<T>, SamplerError> {
    Ok(cholesky_psd(m)?)
}

/// Lag for the coarse sub-chain: `ceil(IACT)` of a pilot run, clamped to `[1, 1000]`.
fn pilot_t_sub<T: Real, C: LogTarget<T> + ?Sized>(
    coarse: &C,
    start: &ChainState<T>,
    chol: &CholeskyFactor<T>,
    len: usize,
    rng: &mut RngStream,
) -> Result<usize, SamplerError> {
    let mut s = start.clone();
    let mut trace = Vec::with_capacity(len);
    for _ in 0..len {
        s = mh_step(&s, coarse, T::one(), chol, rng)?.state;
        trace.push(s.qoi);
    }
    let iact = autocorrelation_ess(&trace).map(|r| r.iact.to_f64_lossy()).unwrap_or(1.0);
    Ok((iact.ceil() as usize).clamp(1, 1000))
}

enum Mode<T> {
    Coarse(CoarseSubChain<T>),
    Independent(GaussianSpec<T>),
    Maximal(GaussianSpec<T>),
    Synce(CholeskyFactor<T>),
    SynceAr(Box<ArState<T>>),
}

struct ArState<T> {
    params: SynceArParams<T>,
    omega: T,
    adapt_f: AdaptState<T>,
    adapt_c: AdaptState<T>,
    chol_f: CholeskyFactor<T>,
    chol_c: CholeskyFactor<T>,
    resync: Option<GaussianSpec<T>>,
    sub: Option<CoarseSubChain<T>>,
    /// Added to the chain iteration when computing the step size.
    offset: u64,
}

impl<T: Real> ArState<T> {
    /// Recenters the independent resync proposal at the averaged adapted means.
    fn refresh_resync(&mut self) -> Result<(), SamplerError> {
        if self.sub.is_some() {
            return Ok(());
        }
        let half = T::lit(0.5);
        let mu: Vec<T> = self.adapt_f.mu.iter().zip(&self.adapt_c.mu).map(|(&a, &b)| half * (a + b)).collect();
        let mean = ParamVector::new(mu)?;
        let spec = match (&self.params.resync_cov, &self.resync) {
            (Some(_), Some(existing)) => existing.with_mean(mean),
            (Some(cov), None) => GaussianSpec::new(mean, cov.clone())?,
            (None, _) => GaussianSpec::new(mean, self.adapt_f.sigma.add(&self.adapt_c.sigma).scale(half))?,
        };
        self.resync = Some(spec);
        Ok(())
    }
}

/// Runs one coupled level for `n` iterations and keeps the last `n − burn_in`.
///
/// Both chains start at their given points. Adaptation (SYNCE-AR only) is
/// active during burn-in and frozen afterwards.
#[allow(clippy::too_many_arguments)]
pub fn run_coupled_level<T: Real, F: LogTarget<T> + ?Sized, C: LogTarget<T> + ?Sized>(
    fine: &F,
    coarse: &C,
    coupling: &Coupling<T>,
    n: usize,
    burn_in: usize,
    init_fine: ParamVector<T>,
    init_coarse: ParamVector<T>,
    rng: &mut RngStream,
    opts: &CoupledOptions<T>,
) -> Result<CoupledRun<T>, SamplerError> {
    if n <= burn_in {
        return Err(SamplerError::Setup(format!("need n > burn_in, got n = {n}, burn_in = {burn_in}")));
    }
    let level = opts.level;
    let mut state = CoupledState::new(ChainState::new(fine, init_fine)?, ChainState::new(coarse, init_coarse)?, level)?;
    let d = state.fine.theta.len();

    let mut t_sub_used = None;
    let mut mode = match coupling {
        Coupling::CoarseProposal { proposal_cov, t_sub } => {
            let chol = factor(proposal_cov)?;
            let t = match t_sub {
                Some(t) => *t,
                None => pilot_t_sub(coarse, &state.coarse, &chol, burn_in.max(1000), rng)?,
            };
            t_sub_used = Some(t);
            Mode::Coarse(CoarseSubChain::new(T::one(), chol, t)?)
        }
        Coupling::Independent { imh } => Mode::Independent(imh.clone()),
        Coupling::Maximal { proposal_cov } => Mode::Maximal(GaussianSpec::new(ParamVector::zeros(d), proposal_cov.clone())?),
        Coupling::Synce { proposal_cov } => Mode::Synce(factor(proposal_cov)?),
        Coupling::SynceAr(p) => {
            let omega = p
                .schedule
                .weight(level)
                .ok_or_else(|| SamplerError::Setup(format!("no resync weight for level {level}")))?;
            let warm = opts.warm_start.as_ref().filter(|_| p.warm_start);
            let make = |theta: &ParamVector<T>| {
                if let Some(w) = warm {
                    let mut a = w.adapt.clone();
                    a.target_alpha = p.target_alpha;
                    a.gamma_exponent = p.gamma_exponent;
                    return a;
                }
                let mut a = AdaptState::new(theta, p.target_alpha, p.gamma_exponent);
                if let Some(s) = p.initial_scale {
                    a = a.with_initial_scale(s);
                }
                if let Some(sig) = &p.initial_sigma {
                    a = a.with_sigma(sig.clone());
                }
                a
            };
            let mut adapt_f = make(&state.fine.theta);
            let mut adapt_c = make(&state.coarse.theta);
            let (chol_f, _) = adapt_f.factor_or_reset();
            let (chol_c, _) = adapt_c.factor_or_reset();
            let sub = if p.schedule.resync_kind == ResyncKind::Coarse && omega > T::zero() {
                let t = match p.t_sub {
                    Some(t) => t,
                    None => pilot_t_sub(coarse, &state.coarse, &chol_c, burn_in.max(1000), rng)?,
                };
                t_sub_used = Some(t);
                Some(CoarseSubChain::new(adapt_c.lambda(), chol_c.clone(), t)?)
            } else {
                None
            };
            let mut ar = ArState {
                params: p.clone(),
                omega,
                adapt_f,
                adapt_c,
                chol_f,
                chol_c,
                resync: None,
                sub,
                offset: warm.map_or(0, |w| w.steps),
            };
            ar.refresh_resync()?;
            Mode::SynceAr(Box::new(ar))
        }
    };

    let keep = n - burn_in;
    let mut out = CoupledRun {
        fine_theta: Vec::with_capacity(keep),
        coarse_theta: Vec::with_capacity(keep),
        q_fine: Vec::with_capacity(keep),
        q_coarse: Vec::with_capacity(keep),
        accept_fine: Vec::with_capacity(keep),
        accept_coarse: Vec::with_capacity(keep),
        diagnostics: CoupledDiagnostics {
            acceptance_fine: 0.0,
            acceptance_coarse: 0.0,
            resync_count: 0,
            resync_joint_accepts: 0,
            met_count: 0,
            t_sub: t_sub_used,
            adapt_fine: None,
            adapt_coarse: None,
            adapt_steps: 0,
            burn_in_end: state.clone(),
        },
    };
    let mut guard_f = StallGuard::new(opts.stall_limit);
    let mut guard_c = StallGuard::new(opts.stall_limit);

    for i in 0..n {
        let adapting = i < burn_in;
        let (prop, resynced, met) = match &mut mode {
            Mode::Coarse(sub) => (coarse_proposal_step(sub, &state, coarse, rng)?, false, false),
            Mode::Independent(imh) => (independent_proposal_step(imh, &state, rng), false, false),
            Mode::Maximal(step) => {
                let (p, met) = maximal_coupling_step(&state, step, step, rng)?;
                (p, false, met)
            }
            Mode::Synce(chol) => (synce_step(&state, chol, rng), false, false),
            Mode::SynceAr(ar) => {
                let resync = match (&ar.sub, &ar.resync) {
                    (Some(sub), _) => ResyncKernel::Coarse(sub),
                    (None, Some(g)) => ResyncKernel::Independent(g),
                    (None, None) => unreachable!("resync proposal is built before the first step"),
                };
                let (p, used) = synce_ar_step(
                    &state,
                    ChainScaling {
                        scale: ar.adapt_f.lambda(),
                        chol: &ar.chol_f,
                    },
                    ChainScaling {
                        scale: ar.adapt_c.lambda(),
                        chol: &ar.chol_c,
                    },
                    ar.omega,
                    resync,
                    coarse,
                    rng,
                )?;
                (p, used, false)
            }
        };
        let step = coupled_accept_reject(&state, prop, fine, coarse, rng)?;
        guard_f.record(step.accept_fine, level, "fine")?;
        guard_c.record(step.accept_coarse, level, "coarse")?;
        state = step.state;

        if adapting {
            if let Mode::SynceAr(ar) = &mut mode {
                ar.adapt_f.update(step.alpha_fine, state.fine.theta.as_slice(), state.fine.iter + ar.offset);
                ar.adapt_c.update(step.alpha_coarse, state.coarse.theta.as_slice(), state.coarse.iter + ar.offset);
                ar.chol_f = ar.adapt_f.factor_or_reset().0;
                ar.chol_c = ar.adapt_c.factor_or_reset().0;
                if let Some(sub) = &mut ar.sub {
                    sub.scale = ar.adapt_c.lambda();
                    sub.chol = ar.chol_c.clone();
                }
                ar.refresh_resync()?;
            }
            if i + 1 == burn_in {
                out.diagnostics.burn_in_end = state.clone();
            }
            continue;
        }
        out.diagnostics.resync_count += resynced as usize;
        out.diagnostics.resync_joint_accepts += (resynced && step.accept_fine && step.accept_coarse) as usize;
        out.diagnostics.met_count += met as usize;
        out.fine_theta.push(state.fine.theta.clone());
        out.coarse_theta.push(state.coarse.theta.clone());
        out.q_fine.push(state.fine.qoi);
        out.q_coarse.push(state.coarse.qoi);
        out.accept_fine.push(step.accept_fine);
        out.accept_coarse.push(step.accept_coarse);
    }

    let rate = |v: &[bool]| v.iter().filter(|&&a| a).count() as f64 / v.len() as f64;
    out.diagnostics.acceptance_fine = rate(&out.accept_fine);
    out.diagnostics.acceptance_coarse = rate(&out.accept_coarse);
    if let Mode::SynceAr(ar) = mode {
        out.diagnostics.adapt_steps = ar.offset + burn_in as u64;
        out.diagnostics.adapt_fine = Some(ar.adapt_f);
        out.diagnostics.adapt_coarse = Some(ar.adapt_c);
    }
    Ok(out)
}

//! Single-chain random-walk Metropolis-Hastings with Robbins-Monro adaptation.
//!
//! The proposal is `θ* = θ + λ·chol(Σ)·z`. During burn-in the log scale `log λ`,
//! the running mean `μ` and the running covariance `Σ` follow the stochastic
//! approximation recursions
//!
//! ```text
//! log λ ← log λ + γ (α − α*)
//! Σ     ← Σ + γ ((θ − μ)(θ − μ)ᵀ − Σ)
//! μ     ← μ + γ (θ − μ)
//! ```
//!
//! with `γ = (iter + 1)^(−κ)`. After burn-in the adaptation state is frozen, so
//! every retained sample comes from a fixed kernel.

use serde::{Deserialize, Serialize};

use crate::density::{mh_accept_prob, Evaluation, LogTarget, ParamVector};
use crate::error::{ModelError, SamplerError};
use crate::linalg::{cholesky_psd, CholeskyFactor, Matrix};
use crate::rng::RngStream;
use crate::scalar::Real;

/// Current point of a chain with its cached log density and QoI.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState<T> {
    pub theta: ParamVector<T>,
    pub log_pi: T,
    pub qoi: T,
    pub iter: u64,
}

impl<T: Real> ChainState<T> {
    pub fn new<L: LogTarget<T> + ?Sized>(target: &L, theta: ParamVector<T>) -> Result<Self, ModelError> {
        let eval = checked_evaluate(target, &theta)?;
        Ok(Self {
            theta,
            log_pi: eval.log_pi,
            qoi: eval.qoi,
            iter: 0,
        })
    }

    pub(crate) fn moved(&self, theta: ParamVector<T>, eval: Evaluation<T>) -> Self {
        Self {
            theta,
            log_pi: eval.log_pi,
            qoi: eval.qoi,
            iter: self.iter + 1,
        }
    }

    pub(crate) fn stayed(&self) -> Self {
        Self {
            iter: self.iter + 1,
            ..self.clone()
        }
    }

    /// Recomputes the density and compares it with the cached value.
    pub fn is_coherent_with<L: LogTarget<T> + ?Sized>(&self, target: &L) -> bool {
        match target.log_density(&self.theta) {
            Ok(v) => v == self.log_pi || (v - self.log_pi).abs() <= T::lit(1e-9) * v.abs().max(T::one()),
            Err(_) => false,
        }
    }
}

/// Evaluates a target, mapping non-finite parameters to zero density and NaN
/// densities to a model error.
pub(crate) fn checked_evaluate<T: Real, L: LogTarget<T> + ?Sized>(
    target: &L,
    theta: &ParamVector<T>,
) -> Result<Evaluation<T>, ModelError> {
    if theta.len() != target.dim() {
        return Err(ModelError::Dimension {
            expected: target.dim(),
            got: theta.len(),
        });
    }
    if !theta.is_finite() {
        return Ok(Evaluation {
            log_pi: T::neg_infinity(),
            qoi: T::nan(),
        });
    }
    let eval = target.evaluate(theta)?;
    if eval.log_pi.is_nan() || eval.log_pi == T::infinity() {
        return Err(ModelError::NanDensity { theta: theta.to_f64() });
    }
    Ok(eval)
}

/// Proposed point with forward and reverse log proposal densities.
#[derive(Clone, Debug, PartialEq)]
pub struct Proposal<T> {
    pub theta: ParamVector<T>,
    pub log_q_fwd: T,
    pub log_q_rev: T,
}

/// Random-walk proposal `θ + scale · L z` from a given standard normal `z`.
///
/// The kernel is symmetric, so both log proposal densities are reported as 0;
/// only their difference enters the acceptance ratio.
pub fn rw_propose_with_noise<T: Real>(theta: &ParamVector<T>, scale: T, chol: &CholeskyFactor<T>, z: &[T]) -> Proposal<T> {
    let step = chol.mul_lower(z);
    Proposal {
        theta: theta.add_scaled(scale, &step),
        log_q_fwd: T::zero(),
        log_q_rev: T::zero(),
    }
}

/// Draws `z` from `rng` and forms the random-walk proposal.
pub fn rw_propose<T: Real>(state: &ChainState<T>, scale: T, chol: &CholeskyFactor<T>, rng: &mut RngStream) -> Proposal<T> {
    let mut z = vec![T::zero(); state.theta.len()];
    rng.fill_standard_normal(&mut z);
    rw_propose_with_noise(&state.theta, scale, chol, &z)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome<T> {
    pub state: ChainState<T>,
    pub accepted: bool,
    pub alpha: T,
}

/// Accept-reject step for an arbitrary proposal. Draws one uniform.
pub fn mh_transition<T: Real, L: LogTarget<T> + ?Sized>(
    state: &ChainState<T>,
    target: &L,
    proposal: Proposal<T>,
    rng: &mut RngStream,
) -> Result<StepOutcome<T>, SamplerError> {
    let eval = checked_evaluate(target, &proposal.theta)?;
    let u: T = rng.uniform();
    let alpha = mh_accept_prob(state.log_pi, eval.log_pi, proposal.log_q_fwd, proposal.log_q_rev).prob;
    let accepted = u < alpha;
    let next = if accepted { state.moved(proposal.theta, eval) } else { state.stayed() };
    debug_check_coherence(&next, target);
    Ok(StepOutcome {
        state: next,
        accepted,
        alpha,
    })
}

/// One random-walk Metropolis-Hastings step: propose, then accept with a fresh uniform.
pub fn mh_step<T: Real, L: LogTarget<T> + ?Sized>(
    state: &ChainState<T>,
    target: &L,
    scale: T,
    chol: &CholeskyFactor<T>,
    rng: &mut RngStream,
) -> Result<StepOutcome<T>, SamplerError> {
    let proposal = rw_propose(state, scale, chol, rng);
    mh_transition(state, target, proposal, rng)
}

#[inline]
pub(crate) fn debug_check_coherence<T: Real, L: LogTarget<T> + ?Sized>(state: &ChainState<T>, target: &L) {
    // Sparse check: re-evaluating every step would double the cost of PDE targets.
    if cfg!(debug_assertions) && state.iter % 4096 == 1 {
        debug_assert!(state.is_coherent_with(target), "cached log density out of sync at iter {}", state.iter);
    }
}

/// Robbins-Monro adaptation state of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptState<T> {
    pub log_lambda: T,
    pub mu: Vec<T>,
    pub sigma: Matrix<T>,
    pub target_alpha: T,
    pub gamma_exponent: T,
}

impl<T: Real> AdaptState<T> {
    /// Starts at `λ = 2.38/√d`, `Σ = I`, `μ = θ⁰`.
    pub fn new(theta0: &ParamVector<T>, target_alpha: T, gamma_exponent: T) -> Self {
        let d = theta0.len();
        Self {
            log_lambda: (T::lit(2.38) / T::lit(d as f64).sqrt()).ln(),
            mu: theta0.as_slice().to_vec(),
            sigma: Matrix::identity(d),
            target_alpha,
            gamma_exponent,
        }
    }

    pub fn with_initial_scale(mut self, lambda: T) -> Self {
        self.log_lambda = lambda.ln();
        self
    }

    pub fn with_sigma(mut self, sigma: Matrix<T>) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn lambda(&self) -> T {
        self.log_lambda.exp()
    }

    /// Step size `γ = (iter + 1)^(−κ)`.
    pub fn gamma(&self, iter: u64) -> T {
        T::lit((iter + 1) as f64).powf(-self.gamma_exponent)
    }

    /// Applies one adaptation update in place.
    pub fn update(&mut self, alpha: T, new_theta: &[T], iter: u64) {
        let gamma = self.gamma(iter);
        self.log_lambda += gamma * (alpha - self.target_alpha);
        let diff: Vec<T> = new_theta.iter().zip(&self.mu).map(|(&x, &m)| x - m).collect();
        let innovation = Matrix::outer(&diff).sub(&self.sigma);
        self.sigma = self.sigma.add(&innovation.scale(gamma)).symmetrized();
        for (m, d) in self.mu.iter_mut().zip(&diff) {
            *m += gamma * *d;
        }
    }

    /// Cholesky factor of `Σ`, resetting `Σ` to the identity when it cannot be factored.
    pub fn factor_or_reset(&mut self) -> (CholeskyFactor<T>, bool) {
        match cholesky_psd(&self.sigma) {
            Ok(f) => (f, false),
            Err(_) => {
                self.sigma = Matrix::identity(self.sigma.dim());
                (cholesky_psd(&self.sigma).expect("identity factors"), true)
            }
        }
    }
}

/// Functional form of [`AdaptState::update`].
pub fn adapt_update<T: Real>(mut adapt: AdaptState<T>, alpha: T, new_theta: &ParamVector<T>, iter: u64) -> AdaptState<T> {
    adapt.update(alpha, new_theta.as_slice(), iter);
    adapt
}

/// Consecutive-rejection guard shared by single and coupled chains.
#[derive(Clone, Debug)]
pub(crate) struct StallGuard {
    limit: Option<usize>,
    run: usize,
}

impl StallGuard {
    pub(crate) fn new(limit: Option<usize>) -> Self {
        Self { limit, run: 0 }
    }

    pub(crate) fn record(&mut self, accepted: bool, level: usize, chain: &'static str) -> Result<(), SamplerError> {
        if accepted {
            self.run = 0;
            return Ok(());
        }
        self.run += 1;
        match self.limit {
            Some(limit) if self.run >= limit => Err(SamplerError::Stalled {
                level,
                chain,
                count: self.run,
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainOptions {
    /// Abort after this many consecutive rejections; `None` disables the check.
    pub stall_limit: Option<usize>,
    /// Level index used in diagnostics.
    pub level: usize,
    /// Adapt during burn-in; when false the initial proposal is kept throughout.
    pub adapt: bool,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            stall_limit: Some(1000),
            level: 0,
            adapt: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainDiagnostics<T> {
    /// Acceptance rate over post-burn-in iterations.
    pub acceptance_rate: f64,
    pub burn_in_acceptance_rate: f64,
    /// Adaptation state at the end of burn-in (and hence for all retained samples).
    pub final_adapt: AdaptState<T>,
    /// Chain state at the end of burn-in.
    pub burn_in_end: ChainState<T>,
    pub sigma_resets: usize,
}

#[derive(Clone, Debug)]
pub struct ChainRun<T> {
    pub samples: Vec<ParamVector<T>>,
    pub qoi: Vec<T>,
    pub accepted: Vec<bool>,
    pub diagnostics: ChainDiagnostics<T>,
}

/// Adaptive random-walk Metropolis-Hastings.
///
/// Runs `n` iterations, adapting during the first `burn_in` and returning the
/// remaining `n − burn_in` states.
pub fn run_adaptive_chain<T: Real, L: LogTarget<T> + ?Sized>(
    target: &L,
    n: usize,
    burn_in: usize,
    adapt: AdaptState<T>,
    theta0: ParamVector<T>,
    rng: &mut RngStream,
    opts: &ChainOptions,
) -> Result<ChainRun<T>, SamplerError> {
    if n <= burn_in {
        return Err(SamplerError::Setup(format!("need n > burn_in, got n = {n}, burn_in = {burn_in}")));
    }
    let mut adapt = adapt;
    let mut state = ChainState::new(target, theta0)?;
    let mut guard = StallGuard::new(opts.stall_limit);
    let (mut chol, reset) = adapt.factor_or_reset();
    let mut sigma_resets = reset as usize;
    let mut burn_accepts = 0usize;
    let mut burn_in_end = state.clone();

    let keep = n - burn_in;
    let mut samples = Vec::with_capacity(keep);
    let mut qoi = Vec::with_capacity(keep);
    let mut accepted = Vec::with_capacity(keep);

    for i in 0..n {
        let out = mh_step(&state, target, adapt.lambda(), &chol, rng)?;
        guard.record(out.accepted, opts.level, "single")?;
        state = out.state;
        if i < burn_in {
            burn_accepts += out.accepted as usize;
            if opts.adapt {
                adapt.update(out.alpha, state.theta.as_slice(), state.iter);
                let (c, reset) = adapt.factor_or_reset();
                chol = c;
                sigma_resets += reset as usize;
            }
            if i + 1 == burn_in {
                burn_in_end = state.clone();
            }
        } else {
            samples.push(state.theta.clone());
            qoi.push(state.qoi);
            accepted.push(out.accepted);
        }
    }

    let acceptance_rate = accepted.iter().filter(|&&a| a).count() as f64 / keep as f64;
    let burn_in_acceptance_rate = if burn_in > 0 { burn_accepts as f64 / burn_in as f64 } else { f64::NAN };
    Ok(ChainRun {
        samples,
        qoi,
        accepted,
        diagnostics: ChainDiagnostics {
            acceptance_rate,
            burn_in_acceptance_rate,
            final_adapt: adapt,
            burn_in_end,
            sigma_resets,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::FnTarget;

    fn pv(v: &[f64]) -> ParamVector<f64> {
        ParamVector::new(v.to_vec()).unwrap()
    }

    fn std_normal(d: usize) -> impl LogTarget<f64> {
        FnTarget::new(d, |x: &[f64]| -0.5 * x.iter().map(|v| v * v).sum::<f64>())
    }

    #[test]
    fn zero_scale_proposes_current_point() {
        let chol = cholesky_psd(&Matrix::identity(2)).unwrap();
        let p = rw_propose_with_noise(&pv(&[1.0, 2.0]), 0.0, &chol, &[0.7, -0.3]);
        assert_eq!(p.theta, pv(&[1.0, 2.0]));
    }

    #[test]
    fn proposal_is_linear_in_noise() {
        let chol = cholesky_psd(&Matrix::identity(1)).unwrap();
        let p = rw_propose_with_noise(&pv(&[3.0]), 2.0, &chol, &[0.5]);
        assert_eq!(p.theta, pv(&[4.0]));
        assert_eq!(p.log_q_fwd - p.log_q_rev, 0.0);
    }

    #[test]
    fn zero_density_proposal_is_rejected() {
        let target = FnTarget::new(1, |x: &[f64]| if x[0] > 0.0 { f64::NEG_INFINITY } else { 0.0 });
        let state = ChainState::new(&target, pv(&[-1.0])).unwrap();
        let mut rng = RngStream::new(1, 1);
        let prop = Proposal {
            theta: pv(&[1.0]),
            log_q_fwd: 0.0,
            log_q_rev: 0.0,
        };
        let out = mh_transition(&state, &target, prop, &mut rng).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.alpha, 0.0);
        assert_eq!(out.state.theta, state.theta);
        assert_eq!(out.state.iter, 1);
    }

    #[test]
    fn identity_proposal_always_accepts() {
        let target = std_normal(1);
        let mut state = ChainState::new(&target, pv(&[0.0])).unwrap();
        let chol = cholesky_psd(&Matrix::identity(1)).unwrap();
        let mut rng = RngStream::new(3, 0);
        for _ in 0..100 {
            let out = mh_step(&state, &target, 0.0, &chol, &mut rng).unwrap();
            assert!(out.accepted);
            assert_eq!(out.alpha, 1.0);
            state = out.state;
        }
        assert_eq!(state.theta, pv(&[0.0]));
        assert_eq!(state.iter, 100);
    }

    #[test]
    fn nan_density_aborts() {
        let target = FnTarget::new(1, |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { 0.0 });
        let state = ChainState::new(&target, pv(&[0.0])).unwrap();
        let prop = Proposal {
            theta: pv(&[1.0]),
            log_q_fwd: 0.0,
            log_q_rev: 0.0,
        };
        let err = mh_transition(&state, &target, prop, &mut RngStream::new(0, 0)).unwrap_err();
        assert!(matches!(err, SamplerError::Model(ModelError::NanDensity { .. })));
    }

    #[test]
    fn acceptance_rate_matches_closed_form() {
        // For N(0, 1) with proposal sd s the stationary acceptance rate is (2/π)·atan(2/s).
        let target = std_normal(1);
        let mut state = ChainState::new(&target, pv(&[0.0])).unwrap();
        let chol = cholesky_psd(&Matrix::identity(1)).unwrap();
        let mut rng = RngStream::new(17, 0);
        let n = 50_000;
        let mut acc = 0;
        for _ in 0..n {
            let out = mh_step(&state, &target, 2.4, &chol, &mut rng).unwrap();
            acc += out.accepted as usize;
            state = out.state;
        }
        let rate = acc as f64 / n as f64;
        let exact = 2.0 / std::f64::consts::PI * (2.0f64 / 2.4).atan();
        assert!((rate - exact).abs() < 0.01, "acceptance {rate} vs {exact}");
    }

    #[test]
    fn adaptation_zero_innovation_keeps_scale() {
        let a = AdaptState::new(&pv(&[0.0, 0.0]), 0.44, 0.7);
        let b = adapt_update(a.clone(), 0.44, &pv(&[0.0, 0.0]), 5);
        assert_eq!(a.log_lambda, b.log_lambda);
    }

    #[test]
    fn adaptation_full_step_limits() {
        // iter = 0 gives γ = 1.
        let mut a = AdaptState::new(&pv(&[0.0, 0.0]), 0.44, 0.7).with_sigma(Matrix::zeros(2));
        assert_eq!(a.gamma(0), 1.0);
        let x = pv(&[1.5, -2.0]);
        a.update(0.44, x.as_slice(), 0);
        assert_eq!(a.mu, vec![1.5, -2.0]);
        assert_eq!(a.sigma, Matrix::outer(&[1.5, -2.0]));
    }

    #[test]
    fn gamma_sequence_is_non_increasing() {
        let a = AdaptState::new(&pv(&[0.0]), 0.44, 0.7);
        let g: Vec<f64> = (0..1000).map(|i| a.gamma(i)).collect();
        assert!(g.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn adaptation_keeps_sigma_symmetric() {
        let mut a = AdaptState::new(&pv(&[0.1, 0.2, 0.3]), 0.3, 0.6);
        let mut rng = RngStream::new(9, 9);
        for i in 1..500 {
            let x: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
            a.update(rng.uniform(), &x, i);
            assert!(a.sigma.is_symmetric(0.0));
            assert!(a.lambda() > 0.0);
        }
    }

    #[test]
    fn adaptive_chain_on_shifted_gaussian() {
        let target = FnTarget::new(1, |x: &[f64]| -0.5 * (x[0] - 4.0).powi(2));
        let mut rng = RngStream::new(42, 0);
        let theta0 = pv(&[0.0]);
        let adapt = AdaptState::new(&theta0, 0.44, 0.7);
        let run = run_adaptive_chain(&target, 50_000, 20_000, adapt, theta0, &mut rng, &ChainOptions::default()).unwrap();
        assert_eq!(run.samples.len(), 30_000);
        let n = run.samples.len() as f64;
        let mean = run.samples.iter().map(|s| s[0]).sum::<f64>() / n;
        let var = run.samples.iter().map(|s| (s[0] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 4.0).abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn zero_burn_in_never_adapts() {
        let target = std_normal(2);
        let theta0 = pv(&[0.0, 0.0]);
        let adapt = AdaptState::new(&theta0, 0.44, 0.7);
        let run = run_adaptive_chain(&target, 500, 0, adapt.clone(), theta0, &mut RngStream::new(1, 2), &ChainOptions::default()).unwrap();
        assert_eq!(run.diagnostics.final_adapt, adapt);
        assert_eq!(run.samples.len(), 500);
    }

    #[test]
    fn adaptive_chain_requires_samples_after_burn_in() {
        let target = std_normal(1);
        let theta0 = pv(&[0.0]);
        let adapt = AdaptState::new(&theta0, 0.44, 0.7);
        let err = run_adaptive_chain(&target, 10, 10, adapt, theta0, &mut RngStream::new(1, 2), &ChainOptions::default());
        assert!(matches!(err, Err(SamplerError::Setup(_))));
    }

    #[test]
    fn stall_guard_trips() {
        // Zero density everywhere except the start point.
        let target = FnTarget::new(1, |x: &[f64]| if x[0] == 0.0 { 0.0 } else { f64::NEG_INFINITY });
        let theta0 = pv(&[0.0]);
        let adapt = AdaptState::new(&theta0, 0.44, 0.7);
        let opts = ChainOptions {
            stall_limit: Some(50),
            ..ChainOptions::default()
        };
        let err = run_adaptive_chain(&target, 200, 0, adapt, theta0, &mut RngStream::new(1, 2), &opts).unwrap_err();
        assert!(matches!(err, SamplerError::Stalled { count: 50, .. }));
    }

    #[test]
    fn detailed_balance_on_lattice() {
        // 31-point target, symmetric proposal with jumps in {±1, ±2, ±3}.
        let weights: Vec<f64> = (0..31).map(|i| (-0.5 * ((i as f64 - 12.0) / 5.0).powi(2)).exp() + 0.2 * ((i % 4) as f64)).collect();
        let logw: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        let lw = logw.clone();
        let target = FnTarget::new(1, move |x: &[f64]| {
            let i = x[0];
            if (0.0..=30.0).contains(&i) {
                lw[i as usize]
            } else {
                f64::NEG_INFINITY
            }
        });
        let mut rng = RngStream::new(2718, 0);
        let mut state = ChainState::new(&target, pv(&[12.0])).unwrap();
        let mut counts = vec![vec![0u64; 31]; 31];
        let steps = 1_000_000;
        for _ in 0..steps {
            let r: f64 = rng.uniform();
            let jump = [1.0, 2.0, 3.0][(r * 3.0) as usize] * if rng.uniform::<f64>() < 0.5 { -1.0 } else { 1.0 };
            let prop = Proposal {
                theta: pv(&[state.theta[0] + jump]),
                log_q_fwd: 0.0,
                log_q_rev: 0.0,
            };
            let from = state.theta[0] as usize;
            state = mh_transition(&state, &target, prop, &mut rng).unwrap().state;
            counts[from][state.theta[0] as usize] += 1;
        }
        // π_i T_ij is estimated by N_ij / steps; compare the two directions of every edge.
        let mut edges = 0;
        for i in 0..31 {
            for j in (i + 1)..31 {
                let (a, b) = (counts[i][j] as f64, counts[j][i] as f64);
                if a + b == 0.0 {
                    continue;
                }
                edges += 1;
                let se = (a + b).sqrt();
                assert!((a - b).abs() <= 3.0 * se, "edge {i}-{j}: {a} vs {b}");
            }
        }
        assert!(edges >= 80);
    }
}

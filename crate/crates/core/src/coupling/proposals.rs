use crate::density::{log_gaussian_pdf_unchecked, sample_gaussian, GaussianSpec, LogTarget, ParamVector};
use crate::error::SamplerError;
use crate::kernel::mh_step;
use crate::linalg::CholeskyFactor;
use crate::rng::RngStream;
use crate::scalar::Real;

use super::{CoupledState, CouplingProposal};

/// Iteration cap of the residual loop in [`maximal_coupling_sample`].
pub const MAXIMAL_COUPLING_MAX_ITERS: usize = 1_000_000;

/// Log density of a random-walk increment `scale · L z`, given `z`.
///
/// Returns 0 when the density is degenerate; the value always appears on both
/// sides of a symmetric ratio.
fn rw_log_density<T: Real>(z: &[T], scale: T, chol: &CholeskyFactor<T>) -> T {
    let d = T::lit(z.len() as f64);
    let half = T::lit(0.5);
    let quad: T = z.iter().map(|&v| v * v).sum();
    let v = -half * d * T::lit(std::f64::consts::TAU).ln() - d * scale.ln() - chol.log_det_lower() - half * quad;
    if v.is_finite() {
        v
    } else {
        T::zero()
    }
}

fn standard_normal_vec<T: Real>(d: usize, rng: &mut RngStream) -> Vec<T> {
    let mut z = vec![T::zero(); d];
    rng.fill_standard_normal(&mut z);
    z
}

/// Random-walk kernel on the coarse target used to generate coarse-proposal draws.
#[derive(Clone, Debug)]
pub struct CoarseSubChain<T> {
    pub scale: T,
    pub chol: CholeskyFactor<T>,
    pub t_sub: usize,
}

impl<T: Real> CoarseSubChain<T> {
    pub fn new(scale: T, chol: CholeskyFactor<T>, t_sub: usize) -> Result<Self, SamplerError> {
        if t_sub < 1 {
            return Err(SamplerError::Setup("t_sub must be at least 1".into()));
        }
        Ok(Self { scale, chol, t_sub })
    }
}

/// Proposes the endpoint of a `t_sub`-step coarse sub-chain to both levels.
///
/// The fine chain sees the coarse posterior as its proposal density; the coarse
/// chain's ratio is identically one. Unnormalized coarse densities are used on
/// both sides, so the normalizing constant cancels. The sub-chain is only
/// approximately independent of the current state, which biases this coupling.
pub fn coarse_proposal_step<T: Real, C: LogTarget<T> + ?Sized>(
    sub: &CoarseSubChain<T>,
    state: &CoupledState<T>,
    coarse_target: &C,
    rng: &mut RngStream,
) -> Result<CouplingProposal<T>, SamplerError> {
    let mut cur = state.coarse.clone();
    for _ in 0..sub.t_sub {
        cur = mh_step(&cur, coarse_target, sub.scale, &sub.chol, rng)?.state;
    }
    let log_pc_at_fine = if state.fine.theta == state.coarse.theta {
        state.coarse.log_pi
    } else {
        crate::kernel::checked_evaluate(coarse_target, &state.fine.theta)?.log_pi
    };
    Ok(CouplingProposal {
        prop_fine: cur.theta.clone(),
        log_q_fine_fwd: cur.log_pi,
        log_q_fine_rev: log_pc_at_fine,
        log_q_coarse_fwd: cur.log_pi,
        log_q_coarse_rev: state.coarse.log_pi,
        prop_coarse: cur.theta,
    })
}

/// One independence-sampler draw shared by both chains.
pub fn independent_proposal_step<T: Real>(imh: &GaussianSpec<T>, state: &CoupledState<T>, rng: &mut RngStream) -> CouplingProposal<T> {
    let x = sample_gaussian(imh, rng);
    let fwd = log_gaussian_pdf_unchecked(x.as_slice(), imh);
    CouplingProposal {
        prop_fine: x.clone(),
        prop_coarse: x,
        log_q_fine_fwd: fwd,
        log_q_fine_rev: log_gaussian_pdf_unchecked(state.fine.theta.as_slice(), imh),
        log_q_coarse_fwd: fwd,
        log_q_coarse_rev: log_gaussian_pdf_unchecked(state.coarse.theta.as_slice(), imh),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaximalDraw<T> {
    pub x: ParamVector<T>,
    pub y: ParamVector<T>,
    pub met: bool,
    /// `log p(x)` and `log q(y)`.
    pub log_p_x: T,
    pub log_q_y: T,
}

/// γ-coupling of `p` and `q`: `x ~ p`, `y ~ q`, and `P(x = y) = 1 − TV(p, q)`.
pub fn maximal_coupling_sample<T: Real>(p: &GaussianSpec<T>, q: &GaussianSpec<T>, rng: &mut RngStream) -> Result<MaximalDraw<T>, SamplerError> {
    let x = sample_gaussian(p, rng);
    let log_p_x = log_gaussian_pdf_unchecked(x.as_slice(), p);
    let u: T = rng.uniform();
    let log_q_x = log_gaussian_pdf_unchecked(x.as_slice(), q);
    if u.ln() + log_p_x <= log_q_x {
        return Ok(MaximalDraw {
            y: x.clone(),
            x,
            met: true,
            log_p_x,
            log_q_y: log_q_x,
        });
    }
    for _ in 0..MAXIMAL_COUPLING_MAX_ITERS {
        let y = sample_gaussian(q, rng);
        let log_q_y = log_gaussian_pdf_unchecked(y.as_slice(), q);
        let w: T = rng.uniform();
        if w.ln() + log_q_y > log_gaussian_pdf_unchecked(y.as_slice(), p) {
            return Ok(MaximalDraw {
                x,
                y,
                met: false,
                log_p_x,
                log_q_y,
            });
        }
    }
    Err(SamplerError::CouplingLoop(MAXIMAL_COUPLING_MAX_ITERS))
}

/// Maximally coupled random-walk proposals.
///
/// `step_fine` and `step_coarse` are the zero-mean increment laws; they are
/// recentered at the current fine and coarse states.
pub fn maximal_coupling_step<T: Real>(
    state: &CoupledState<T>,
    step_fine: &GaussianSpec<T>,
    step_coarse: &GaussianSpec<T>,
    rng: &mut RngStream,
) -> Result<(CouplingProposal<T>, bool), SamplerError> {
    let p = step_fine.with_mean(state.fine.theta.clone());
    let q = step_coarse.with_mean(state.coarse.theta.clone());
    let draw = maximal_coupling_sample(&p, &q, rng)?;
    Ok((
        CouplingProposal {
            prop_fine: draw.x,
            prop_coarse: draw.y,
            log_q_fine_fwd: draw.log_p_x,
            log_q_fine_rev: draw.log_p_x,
            log_q_coarse_fwd: draw.log_q_y,
            log_q_coarse_rev: draw.log_q_y,
        },
        draw.met,
    ))
}

/// Adds one shared increment `η ~ N(0, C)` to both states.
pub fn synce_step<T: Real>(state: &CoupledState<T>, chol_c: &CholeskyFactor<T>, rng: &mut RngStream) -> CouplingProposal<T> {
    let z = standard_normal_vec(state.fine.theta.len(), rng);
    let eta = chol_c.mul_lower(&z);
    let lq = rw_log_density(&z, T::one(), chol_c);
    CouplingProposal {
        prop_fine: state.fine.theta.add_scaled(T::one(), &eta),
        prop_coarse: state.coarse.theta.add_scaled(T::one(), &eta),
        log_q_fine_fwd: lq,
        log_q_fine_rev: lq,
        log_q_coarse_fwd: lq,
        log_q_coarse_rev: lq,
    }
}

/// Proposal scaling of one chain: `λ` and `chol(Σ)`.
#[derive(Clone, Copy, Debug)]
pub struct ChainScaling<'a, T> {
    pub scale: T,
    pub chol: &'a CholeskyFactor<T>,
}

/// Kernel used on resynchronization steps.
#[derive(Clone, Copy, Debug)]
pub enum ResyncKernel<'a, T> {
    Independent(&'a GaussianSpec<T>),
    Coarse(&'a CoarseSubChain<T>),
}

/// Adapted SYNCE step mixed with a resynchronization kernel of weight `omega`.
///
/// Always draws `w ~ U(0, 1)` and `η ~ N(0, I)` first, so the random number
/// budget does not depend on the branch taken before the resync draw.
pub fn synce_ar_step<T: Real, C: LogTarget<T> + ?Sized>(
    state: &CoupledState<T>,
    fine: ChainScaling<'_, T>,
    coarse: ChainScaling<'_, T>,
    omega: T,
    resync: ResyncKernel<'_, T>,
    coarse_target: &C,
    rng: &mut RngStream,
) -> Result<(CouplingProposal<T>, bool), SamplerError> {
    let w: T = rng.uniform();
    let z = standard_normal_vec(state.fine.theta.len(), rng);
    if w < omega || (omega >= T::one()) {
        let prop = match resync {
            ResyncKernel::Independent(imh) => independent_proposal_step(imh, state, rng),
            ResyncKernel::Coarse(sub) => coarse_proposal_step(sub, state, coarse_target, rng)?,
        };
        return Ok((prop, true));
    }
    let step_f = fine.chol.mul_lower(&z);
    let step_c = coarse.chol.mul_lower(&z);
    let lq_f = rw_log_density(&z, fine.scale, fine.chol);
    let lq_c = rw_log_density(&z, coarse.scale, coarse.chol);
    Ok((
        CouplingProposal {
            prop_fine: state.fine.theta.add_scaled(fine.scale, &step_f),
            prop_coarse: state.coarse.theta.add_scaled(coarse.scale, &step_c),
            log_q_fine_fwd: lq_f,
            log_q_fine_rev: lq_f,
            log_q_coarse_fwd: lq_c,
            log_q_coarse_rev: lq_c,
        },
        false,
    ))
}

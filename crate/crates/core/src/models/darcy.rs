//! Darcy flow inverse problem on the unit square.
//!
//! Forward model: `−∇·(κ(x, θ) ∇u) = 1` with `u = 0` on `x₁ ∈ {0, 1}` and zero
//! flux on `x₂ ∈ {0, 1}`. The permeability depends on `x₁` only:
//!
//! ```text
//! κ(x₁, θ) = exp(θ₁ cos πx₁ + θ₂/2 sin πx₁ + θ₃/3 cos 2πx₁ + θ₄/4 sin 2πx₁)
//! ```
//!
//! Discretization is a vertex-centered finite-volume (box) scheme on the
//! `(n+1)²` nodes of a uniform grid with `n = 8·2^ℓ`. Every node carries a control
//! volume clipped to the domain; x₁-faces use the harmonic mean of the nodal
//! permeabilities, x₂-faces the nodal value. The resulting 5-point system is
//! symmetric positive definite and is solved by Jacobi-preconditioned conjugate
//! gradients.

use std::f64::consts::PI;

use crate::density::{Evaluation, LogTarget, ParamVector};
use crate::error::ModelError;
use crate::rng::RngStream;
use crate::scalar::Real;

pub const DARCY_DIM: usize = 4;
pub const NOISE_VAR: f64 = 1e-4;
pub const CG_TOLERANCE: f64 = 1e-10;
pub const FIXTURE_LEVEL: usize = 4;
pub const FIXTURE_NOISE_SEED: u64 = 20_240_917;

const THETA_TRUE_FIXTURE: &str = include_str!("../../fixtures/darcy/theta_true.txt");
const DATA_FIXTURE: &str = include_str!("../../fixtures/darcy/data.txt");

/// Cells per side at level ℓ.
pub fn cells_for_level(level: usize) -> usize {
    8 << level
}

/// Observation points `(i/5, j/5)`, `i, j ∈ 1..=4`, ordered with `i` fastest.
pub fn observation_points<T: Real>() -> Vec<(T, T)> {
    let mut pts = Vec::with_capacity(16);
    for j in 1..=4 {
        for i in 1..=4 {
            pts.push((T::lit(i as f64 / 5.0), T::lit(j as f64 / 5.0)));
        }
    }
    pts
}

fn check_theta<T: Real>(theta: &ParamVector<T>) -> Result<(), ModelError> {
    if theta.len() != DARCY_DIM {
        return Err(ModelError::Dimension {
            expected: DARCY_DIM,
            got: theta.len(),
        });
    }
    if !theta.is_finite() {
        return Err(ModelError::Invalid("non-finite parameter".into()));
    }
    Ok(())
}

/// Permeability at horizontal position `x1`.
pub fn permeability<T: Real>(x1: T, theta: &ParamVector<T>) -> T {
    let a = T::lit(PI) * x1;
    let two_a = a + a;
    (theta[0] * a.cos() + theta[1] / T::lit(2.0) * a.sin() + theta[2] / T::lit(3.0) * two_a.cos() + theta[3] / T::lit(4.0) * two_a.sin()).exp()
}

fn harmonic<T: Real>(a: T, b: T) -> T {
    T::lit(2.0) * a * b / (a + b)
}

/// Sparse matrix in compressed-row form.
#[derive(Clone, Debug)]
pub struct CsrMatrix<T> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .position(|&k| k == c)
            .map(|p| self.values[span.start + p])
            .unwrap_or_else(T::zero)
    }

    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *o = s;
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    /// Largest `|a_rc − a_cr|` relative to the largest entry.
    pub fn asymmetry(&self) -> T {
        let scale = self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let mut worst = T::zero();
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(c, r)).abs());
            }
        }
        if scale > T::zero() {
            worst / scale
        } else {
            worst
        }
    }
}

/// Assembled box-scheme system for one permeability field.
#[derive(Clone, Debug)]
pub struct DarcySystem<T> {
    pub n_cells: usize,
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    /// Nodal permeability `κ(x_i)`, `i = 0..=n`.
    pub kappa: Vec<T>,
}

/// Height factor of a node's control volume: half on the Neumann rows.
fn row_weight<T: Real>(j: usize, n: usize) -> T {
    if j == 0 || j == n {
        T::lit(0.5)
    } else {
        T::one()
    }
}

/// Unknowns are the nodes with `1 ≤ i ≤ n−1`, `0 ≤ j ≤ n`, numbered `j(n−1) + i − 1`.
pub fn assemble<T: Real>(n: usize, theta: &ParamVector<T>) -> DarcySystem<T> {
    let h = T::one() / T::lit(n as f64);
    let kappa: Vec<T> = (0..=n).map(|i| permeability(T::lit(i as f64) * h, theta)).collect();
    let face_x: Vec<T> = (0..n).map(|i| harmonic(kappa[i], kappa[i + 1])).collect();
    let nx = n - 1;
    let m = nx * (n + 1);
    let idx = |i: usize, j: usize| j * nx + i - 1;

    let mut row_ptr = Vec::with_capacity(m + 1);
    let mut col_idx = Vec::with_capacity(5 * m);
    let mut values = Vec::with_capacity(5 * m);
    let mut rhs = Vec::with_capacity(m);
    row_ptr.push(0);
    for j in 0..=n {
        let wy: T = row_weight(j, n);
        for i in 1..n {
            let west = face_x[i - 1] * wy;
            let east = face_x[i] * wy;
            let south = if j > 0 { kappa[i] } else { T::zero() };
            let north = if j < n { kappa[i] } else { T::zero() };
            if j > 0 {
                col_idx.push(idx(i, j - 1));
                values.push(-south);
            }
            if i > 1 {
                col_idx.push(idx(i - 1, j));
                values.push(-west);
            }
            col_idx.push(idx(i, j));
            values.push(west + east + south + north);
            if i < n - 1 {
                col_idx.push(idx(i + 1, j));
                values.push(-east);
            }
            if j < n {
                col_idx.push(idx(i, j + 1));
                values.push(-north);
            }
            row_ptr.push(col_idx.len());
            rhs.push(h * h * wy);
        }
    }
    DarcySystem {
        n_cells: n,
        matrix: CsrMatrix { n: m, row_ptr, col_idx, values },
        rhs,
        kappa,
    }
}

/// Jacobi-preconditioned conjugate gradients from `x0` (zero when `None`).
///
/// Returns the solution, the iteration count and the final relative residual.
pub fn pcg<T: Real>(a: &CsrMatrix<T>, b: &[T], x0: Option<&[T]>, rel_tol: T, max_iter: usize) -> Result<(Vec<T>, usize, T), ModelError> {
    let dot = |x: &[T], y: &[T]| x.iter().zip(y).map(|(&p, &q)| p * q).sum::<T>();
    let inv_diag: Vec<T> = a.diagonal().iter().map(|&d| T::one() / d).collect();
    let b_norm = dot(b, b).sqrt();
    let mut x = x0.map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); a.n]);
    if b_norm == T::zero() {
        return Ok((vec![T::zero(); a.n], 0, T::zero()));
    }
    let mut r = vec![T::zero(); a.n];
    a.mul_vec_into(&x, &mut r);
    for (rk, &bk) in r.iter_mut().zip(b) {
        *rk = bk - *rk;
    }
    let rel0 = dot(&r, &r).sqrt() / b_norm;
    if rel0 <= rel_tol {
        return Ok((x, 0, rel0));
    }
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&v, &d)| v * d).collect();
    let mut p = z.clone();
    let mut ap = vec![T::zero(); a.n];
    let mut rz = dot(&r, &z);
    let mut rel = T::one();
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..a.n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= rel_tol {
            return Ok((x, it, rel));
        }
        if !rel.is_finite() {
            break;
        }
        for k in 0..a.n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..a.n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(ModelError::SolverDiverged {
        iterations: max_iter,
        residual: rel.to_f64_lossy(),
    })
}

/// Nodal pressure on the `(n+1)²` grid, Dirichlet nodes included.
#[derive(Clone, Debug)]
pub struct PressureField<T> {
    pub n_cells: usize,
    /// Row-major by `j` (x₂ index), `values[j(n+1) + i]`.
    pub values: Vec<T>,
    pub kappa: Vec<T>,
    pub cg_iterations: usize,
    pub residual: T,
}

impl<T: Real> PressureField<T> {
    /// Constant field, mostly for quadrature checks.
    pub fn constant(n_cells: usize, c: T) -> Self {
        Self {
            n_cells,
            values: vec![c; (n_cells + 1) * (n_cells + 1)],
            kappa: vec![T::one(); n_cells + 1],
            cg_iterations: 0,
            residual: T::zero(),
        }
    }

    pub fn h(&self) -> T {
        T::one() / T::lit(self.n_cells as f64)
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[j * (self.n_cells + 1) + i]
    }

    /// Bilinear interpolation at `(x1, x2) ∈ [0, 1]²`.
    pub fn interpolate(&self, x1: T, x2: T) -> T {
        let n = self.n_cells;
        let locate = |x: T| {
            let s = (x * T::lit(n as f64)).max(T::zero());
            let i = (s.floor().to_f64_lossy() as usize).min(n - 1);
            (i, s - T::lit(i as f64))
        };
        let (i, fx) = locate(x1);
        let (j, fy) = locate(x2);
        let one = T::one();
        (one - fx) * (one - fy) * self.at(i, j) + fx * (one - fy) * self.at(i + 1, j) + (one - fx) * fy * self.at(i, j + 1) + fx * fy * self.at(i + 1, j + 1)
    }

    /// Domain integral by the midpoint rule on cells, with cell-center values
    /// taken from the bilinear interpolant.
    pub fn integral(&self) -> T {
        let n = self.n_cells;
        let mut s = T::zero();
        for j in 0..n {
            for i in 0..n {
                s += self.at(i, j) + self.at(i + 1, j) + self.at(i, j + 1) + self.at(i + 1, j + 1);
            }
        }
        let h = self.h();
        s * h * h / T::lit(4.0)
    }

    /// Total outflow through the two Dirichlet edges, from the control-volume
    /// balance of the boundary nodes.
    pub fn boundary_outflow(&self) -> T {
        let n = self.n_cells;
        let h = self.h();
        let left = harmonic(self.kappa[0], self.kappa[1]);
        let right = harmonic(self.kappa[n - 1], self.kappa[n]);
        let mut total = T::zero();
        for j in 0..=n {
            let wy: T = row_weight(j, n);
            let area = T::lit(0.5) * h * h * wy;
            total += area + left * wy * self.at(1, j);
            total += area + right * wy * self.at(n - 1, j);
        }
        total
    }
}

/// Interior nodal values of `−(κ u′)′ = 1`, `u(0) = u(1) = 0`, with the same
/// harmonic face weights as the 2-D scheme (Thomas algorithm).
fn line_solve<T: Real>(n: usize, kappa: &[T]) -> Vec<T> {
    let h = T::one() / T::lit(n as f64);
    let face: Vec<T> = (0..n).map(|i| harmonic(kappa[i], kappa[i + 1])).collect();
    let m = n - 1;
    let mut c = vec![T::zero(); m];
    let mut d = vec![T::zero(); m];
    for k in 0..m {
        let (w, e) = (face[k], face[k + 1]);
        let denom = if k == 0 { w + e } else { w + e + w * c[k - 1] };
        c[k] = -e / denom;
        d[k] = (h * h + if k == 0 { T::zero() } else { w * d[k - 1] }) / denom;
    }
    for k in (0..m.saturating_sub(1)).rev() {
        let next = d[k + 1];
        d[k] = d[k] - c[k] * next;
    }
    d
}

/// Solves the forward problem on an `n × n` cell grid.
pub fn darcy_solve_cells<T: Real>(n_cells: usize, theta: &ParamVector<T>) -> Result<PressureField<T>, ModelError> {
    check_theta(theta)?;
    if n_cells < 2 {
        return Err(ModelError::Invalid(format!("grid needs at least 2 cells per side, got {n_cells}")));
    }
    let sys = assemble(n_cells, theta);
    let max_iter = 20 * sys.matrix.n + 100;
    let n = n_cells;
    // κ depends on x₁ only, so the discrete solution is constant along x₂ and the
    // x₁ line problem gives it directly; CG then only confirms the residual.
    let line = line_solve(n, &sys.kappa);
    let guess: Vec<T> = (0..=n).flat_map(|_| line.iter().copied()).collect();
    let (x, iters, res) = pcg(&sys.matrix, &sys.rhs, Some(&guess), T::lit(CG_TOLERANCE), max_iter)?;
    let mut values = vec![T::zero(); (n + 1) * (n + 1)];
    for j in 0..=n {
        for i in 1..n {
            values[j * (n + 1) + i] = x[j * (n - 1) + i - 1];
        }
    }
    Ok(PressureField {
        n_cells,
        values,
        kappa: sys.kappa,
        cg_iterations: iters,
        residual: res,
    })
}

/// Average pressure over the domain.
pub fn darcy_qoi<T: Real>(u: &PressureField<T>) -> T {
    u.integral()
}

/// Noise-free pressures at the observation points.
pub fn observe<T: Real>(u: &PressureField<T>) -> Vec<T> {
    observation_points::<T>().into_iter().map(|(x, y)| u.interpolate(x, y)).collect()
}

fn parse_fixture(text: &str) -> Vec<f64> {
    text.split_whitespace().map(|t| t.parse().expect("fixture holds decimal numbers")).collect()
}

/// Committed ground-truth parameter.
pub fn fixture_theta_true<T: Real>() -> ParamVector<T> {
    ParamVector::new(parse_fixture(THETA_TRUE_FIXTURE).into_iter().map(T::lit).collect()).expect("valid fixture")
}

/// Committed synthetic observations.
pub fn fixture_data<T: Real>() -> Vec<T> {
    parse_fixture(DATA_FIXTURE).into_iter().map(T::lit).collect()
}

/// Observations from the level-`level_fine` solution at `theta_true`, plus
/// `N(0, 0.01²)` noise drawn from `noise_seed`.
pub fn generate_synthetic_data<T: Real>(level_fine: usize, theta_true: &ParamVector<T>, noise_seed: u64) -> Result<Vec<T>, ModelError> {
    let u = darcy_solve_cells(cells_for_level(level_fine), theta_true)?;
    let sd = T::lit(NOISE_VAR.sqrt());
    let mut rng = RngStream::new(noise_seed, 0);
    Ok(observe(&u).into_iter().map(|v| v + sd * rng.standard_normal::<T>()).collect())
}

/// Seed of the committed `θ_true` draw.
pub const FIXTURE_THETA_SEED: u64 = 20_240_916;

/// `θ_true ~ N(0, I)` drawn from `seed`.
pub fn sample_theta_true(seed: u64) -> ParamVector<f64> {
    let mut rng = RngStream::new(seed, 0);
    let mut v = vec![0.0; DARCY_DIM];
    rng.fill_standard_normal(&mut v);
    ParamVector::new(v).expect("finite draw")
}

/// One value per line in the fixture format.
pub fn format_fixture(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.16e}\n")).collect()
}

/// Posterior on θ at one level: standard normal prior, Gaussian likelihood at 16 points.
#[derive(Clone, Debug)]
pub struct DarcyModel<T> {
    pub level: usize,
    pub n_cells: usize,
    pub obs_points: Vec<(T, T)>,
    pub data: Vec<T>,
    pub noise_var: T,
    pub theta_true: ParamVector<T>,
}

impl<T: Real> DarcyModel<T> {
    pub fn new(level: usize, data: Vec<T>, theta_true: ParamVector<T>) -> Result<Self, ModelError> {
        if data.len() != 16 {
            return Err(ModelError::Dimension { expected: 16, got: data.len() });
        }
        Ok(Self {
            level,
            n_cells: cells_for_level(level),
            obs_points: observation_points(),
            data,
            noise_var: T::lit(NOISE_VAR),
            theta_true,
        })
    }

    /// Model backed by the committed fixtures.
    pub fn from_fixtures(level: usize) -> Self {
        Self::new(level, fixture_data(), fixture_theta_true()).expect("fixture has 16 observations")
    }

    pub fn solve(&self, theta: &ParamVector<T>) -> Result<PressureField<T>, ModelError> {
        darcy_solve_cells(self.n_cells, theta)
    }

    fn log_post_from_field(&self, theta: &ParamVector<T>, u: &PressureField<T>) -> T {
        let prior = -T::lit(0.5) * theta.as_slice().iter().map(|&v| v * v).sum::<T>();
        let misfit: T = self
            .obs_points
            .iter()
            .zip(&self.data)
            .map(|(&(x, y), &d)| {
                let r = d - u.interpolate(x, y);
                r * r
            })
            .sum();
        prior - misfit / (T::lit(2.0) * self.noise_var)
    }

    /// Relative cost of one forward solve (proportional to the node count).
    pub fn cost(&self) -> f64 {
        4f64.powi(self.level as i32)
    }
}

/// Unnormalized log posterior.
pub fn darcy_log_posterior<T: Real>(model: &DarcyModel<T>, theta: &ParamVector<T>) -> Result<T, ModelError> {
    model.log_density(theta)
}

/// Alias kept for symmetry with the other model operations.
pub fn darcy_solve<T: Real>(model: &DarcyModel<T>, theta: &ParamVector<T>) -> Result<PressureField<T>, ModelError> {
    model.solve(theta)
}

impl<T: Real> LogTarget<T> for DarcyModel<T> {
    fn dim(&self) -> usize {
        DARCY_DIM
    }

    fn log_density(&self, theta: &ParamVector<T>) -> Result<T, ModelError> {
        Ok(self.evaluate(theta)?.log_pi)
    }

    fn qoi(&self, theta: &ParamVector<T>) -> Result<T, ModelError> {
        Ok(darcy_qoi(&self.solve(theta)?))
    }

    fn evaluate(&self, theta: &ParamVector<T>) -> Result<Evaluation<T>, ModelError> {
        let u = self.solve(theta)?;
        Ok(Evaluation {
            log_pi: self.log_post_from_field(theta, &u),
            qoi: darcy_qoi(&u),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector<f64> {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn permeability_examples() {
        let zero = pv(&[0.0; 4]);
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(permeability(x, &zero), 1.0);
        }
        let e1 = pv(&[1.0, 0.0, 0.0, 0.0]);
        assert!((permeability(0.0, &e1) - std::f64::consts::E).abs() < 1e-15);
        assert!((permeability(0.5, &e1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_permeability_reproduces_parabola() {
        for level in 0..3 {
            let n = cells_for_level(level);
            let u = darcy_solve_cells(n, &pv(&[0.0; 4])).unwrap();
            let h = 1.0 / n as f64;
            let err = (0..=n)
                .flat_map(|j| (0..=n).map(move |i| (i, j)))
                .map(|(i, j)| (u.at(i, j) - 0.5 * i as f64 * h * (1.0 - i as f64 * h)).abs())
                .fold(0.0, f64::max);
            assert!(err <= 0.003 && err < 1e-9, "level {level}: {err}");
        }
    }

    #[test]
    fn qoi_for_unit_permeability() {
        let exact = 1.0 / 12.0;
        let q: Vec<f64> = (0..4)
            .map(|l| darcy_qoi(&darcy_solve_cells(cells_for_level(l), &pv(&[0.0; 4])).unwrap()))
            .collect();
        assert!((q[0] - exact).abs() < 0.002);
        assert!((q[2] - exact).abs() < 5e-4);
        for l in 0..3 {
            let ratio = (q[l] - exact).abs() / (q[l + 1] - exact).abs();
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn quadrature_of_constant_is_exact() {
        assert_eq!(PressureField::constant(16, 0.75).integral(), 0.75);
    }

    #[test]
    fn line_guess_matches_cold_cg() {
        let th = pv(&[0.6, -1.2, 1.1, -1.3]);
        let sys = assemble(16, &th);
        let (cold, iters, _) = pcg(&sys.matrix, &sys.rhs, None, 1e-13, 10_000).unwrap();
        assert!(iters > 1);
        let warm = darcy_solve_cells(16, &th).unwrap();
        for j in 0..=16 {
            for i in 1..16 {
                assert!((warm.at(i, j) - cold[j * 15 + i - 1]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn doubling_permeability_halves_qoi() {
        // θ₁ = ln 2 on a constant profile is not available, so scale the system directly.
        let u1 = darcy_solve_cells(16, &pv(&[0.0; 4])).unwrap();
        let mut sys = assemble(16, &pv(&[0.0; 4]));
        sys.matrix.values.iter_mut().for_each(|v| *v *= 2.0);
        let (x, _, _) = pcg(&sys.matrix, &sys.rhs, None, 1e-12, 10_000).unwrap();
        let mut u2 = u1.clone();
        for j in 0..=16 {
            for i in 1..16 {
                u2.values[j * 17 + i] = x[j * 15 + i - 1];
            }
        }
        assert!((darcy_qoi(&u2) - darcy_qoi(&u1) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn system_is_symmetric() {
        let mut rng = RngStream::new(5, 0);
        for _ in 0..5 {
            let th: Vec<f64> = (0..4).map(|_| 2.0 * rng.standard_normal::<f64>()).collect();
            assert!(assemble(24, &pv(&th)).matrix.asymmetry() <= 1e-12);
        }
    }

    #[test]
    fn outflow_balances_source() {
        let mut rng = RngStream::new(6, 0);
        for _ in 0..5 {
            let th: Vec<f64> = (0..4).map(|_| rng.standard_normal::<f64>()).collect();
            let u = darcy_solve_cells(16, &pv(&th)).unwrap();
            assert!((u.boundary_outflow() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn solution_is_independent_of_vertical_position() {
        let u = darcy_solve_cells(16, &pv(&[0.7, -0.4, 1.1, 0.2])).unwrap();
        for j in 0..=16 {
            for i in 0..=16 {
                assert!((u.at(i, j) - u.at(i, 0)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn prior_term_vanishes_at_origin() {
        let mut m = DarcyModel::from_fixtures(0);
        let u = m.solve(&pv(&[0.0; 4])).unwrap();
        m.data = observe(&u);
        assert_eq!(m.log_density(&pv(&[0.0; 4])).unwrap(), 0.0);
    }

    #[test]
    fn synthetic_data_is_reproducible() {
        let th = pv(&[0.1, 0.2, -0.3, 0.4]);
        assert_eq!(generate_synthetic_data(1, &th, 3).unwrap(), generate_synthetic_data(1, &th, 3).unwrap());
    }

    #[test]
    fn fixtures_parse() {
        let th: ParamVector<f64> = fixture_theta_true();
        assert_eq!(th.len(), 4);
        assert_eq!(fixture_data::<f64>().len(), 16);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        assert!(darcy_solve_cells(8, &pv(&[0.0; 3])).is_err());
    }
}

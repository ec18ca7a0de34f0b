//! Implicit finite-difference engine for the full PDE
//!
//! `P_t = (k(t)/(C mu)) d/dx (cD^alpha_x P) - H(x) P_x + forcing + injections`
//!
//! on `[0, L] x [0, T]` with a Neumann condition at `x = 0` and a Dirichlet
//! condition at `x = L`. Time stepping is implicit Euler; the space operator
//! is the shifted Grünwald–Letnikov discretization of the composite
//! `d/dx cD^alpha_x` (order `alpha + 1`), which reduces to the exact
//! three-point Laplacian at `alpha = 1`. The memory structure makes the
//! operator dense lower-Hessenberg, so steps solve a cached dense LU.

use crate::error::{Error, Result};
use crate::fractional::{gl_weights_raw, FractionalOrder};
use crate::green::PhysicalParams;
use nalgebra::{DMatrix, DVector};

pub type TimeFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Uniform space-time grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub nt: usize,
    pub len: f64,
    pub t_final: f64,
}

impl Grid {
    pub fn new(nx: usize, nt: usize, len: f64, t_final: f64) -> Result<Self> {
        if nx < 8 {
            return Err(Error::Size(format!("grid needs nx >= 8, got {nx}")));
        }
        if nt < 2 {
            return Err(Error::Size(format!("grid needs nt >= 2, got {nt}")));
        }
        if !(len > 0.0 && t_final > 0.0) {
            return Err(Error::Size(format!(
                "grid extents must be positive, got len={len}, t_final={t_final}"
            )));
        }
        Ok(Self { nx, nt, len, t_final })
    }

    pub fn dx(&self) -> f64 {
        self.len / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_final / (self.nt - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    /// Explicit-scheme stability surrogate `dt k_max/(C mu) / dx^(alpha+1)`,
    /// recorded as a diagnostic (the implicit scheme does not need it).
    pub fn cfl_diagnostic(&self, params: &PhysicalParams, alpha: FractionalOrder) -> f64 {
        let k_max = match params.permeability {
            crate::green::Permeability::Constant { value } => value,
            crate::green::Permeability::Modulated { base, amplitude, .. } => base + amplitude.abs(),
        };
        self.dt() * k_max / (params.c_compress * params.mu) / self.dx().powf(alpha.get() + 1.0)
    }
}

/// Boundary data for one simulation: Neumann value at `x = 0` (the gradient
/// disturbance `d2`) and Dirichlet value at `x = L` (the control `u`).
pub struct BoundaryControls {
    pub left_neumann: TimeFn,
    pub right_dirichlet: TimeFn,
}

impl BoundaryControls {
    pub fn zero() -> Self {
        Self { left_neumann: Box::new(|_| 0.0), right_dirichlet: Box::new(|_| 0.0) }
    }
}

/// Full problem description for [`simulate`].
pub struct PdeSpec {
    pub params: PhysicalParams,
    pub alpha: FractionalOrder,
    pub forcing: SpaceTimeFn,
    /// Advection gain `H(x)` sampled on the grid (the auxiliary observer
    /// states carry `-H1(x) d/dx`).
    pub advection_gain: Option<Vec<f64>>,
    /// Additional sources: pairs of (space profile on the grid, time signal).
    pub injections: Vec<(Vec<f64>, TimeFn)>,
}

impl PdeSpec {
    pub fn plain(params: PhysicalParams, alpha: FractionalOrder) -> Self {
        Self { params, alpha, forcing: Box::new(|_, _| 0.0), advection_gain: None, injections: Vec::new() }
    }
}

/// A space-time lattice of the solution, plus the grid it lives on.
#[derive(Debug, Clone)]
pub struct Field {
    data: Vec<f64>,
    pub grid: Grid,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self { data: vec![0.0; grid.nx * grid.nt], grid }
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.grid.nx..(j + 1) * self.grid.nx]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.grid.nx..(j + 1) * self.grid.nx]
    }

    pub fn sup_norm(&self, j: usize) -> f64 {
        self.col(j).iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn sup_norm_overall(&self) -> f64 {
        (0..self.grid.nt).fold(0.0f64, |m, j| m.max(self.sup_norm(j)))
    }

    /// Tab-separated serialization: header row `x` followed by the node
    /// coordinates, then one row per step `(t, P(x_0), ..., P(x_{nx-1}))`,
    /// all values with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.data.len() * 25);
        out.push('x');
        for i in 0..self.grid.nx {
            out.push('\t');
            out.push_str(&format_sig17(self.grid.x(i)));
        }
        out.push('\n');
        for j in 0..self.grid.nt {
            out.push_str(&format_sig17(self.grid.t(j)));
            for v in self.col(j) {
                out.push('\t');
                out.push_str(&format_sig17(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits round-trips f64 exactly.
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Interior rows of the discrete composite operator `d/dx cD^alpha_x` as a
/// dense `nx x nx` matrix; boundary rows (0 and nx-1) are left zero for the
/// boundary-condition equations.
///
/// Row `i` applies the shifted Grünwald–Letnikov weights of order
/// `alpha + 1` in difference form, `dx^-(alpha+1) sum_j w_j (f_{i-j+1} -
/// f_{i-j})`, which annihilates constants exactly and reduces to the
/// `[1, -2, 1]/dx^2` Laplacian row at `alpha = 1`.
pub fn assemble_frac_operator(alpha: FractionalOrder, grid: &Grid) -> DMatrix<f64> {
    let nx = grid.nx;
    let dx = grid.dx();
    let scale = dx.powf(-(alpha.get() + 1.0));
    let w = gl_weights_raw(alpha.get(), nx);
    let mut a = DMatrix::zeros(nx, nx);
    for i in 1..nx - 1 {
        for j in 0..=i {
            let c = scale * w[j];
            a[(i, i - j + 1)] += c;
            a[(i, i - j)] -= c;
        }
    }
    a
}

/// Upwind first-derivative rows weighted by the advection gain `h`:
/// returns the matrix of the term `H(x) dP/dx` (backward difference where
/// `H > 0`, forward where `H < 0`).
pub fn upwind_advection(h: &[f64], grid: &Grid) -> DMatrix<f64> {
    let nx = grid.nx;
    let dx = grid.dx();
    let mut m = DMatrix::zeros(nx, nx);
    for i in 1..nx - 1 {
        let hi = h[i];
        if hi > 0.0 {
            m[(i, i)] += hi / dx;
            m[(i, i - 1)] -= hi / dx;
        } else if hi < 0.0 {
            m[(i, i + 1)] += hi / dx;
            m[(i, i)] -= hi / dx;
        }
    }
    m
}

/// Second-order one-sided Neumann row at `x = 0` and Dirichlet row at
/// `x = L`, written into `m` in place.
pub fn apply_boundary_rows(m: &mut DMatrix<f64>, grid: &Grid) {
    let nx = grid.nx;
    let dx = grid.dx();
    for j in 0..nx {
        m[(0, j)] = 0.0;
        m[(nx - 1, j)] = 0.0;
    }
    m[(0, 0)] = -3.0 / (2.0 * dx);
    m[(0, 1)] = 4.0 / (2.0 * dx);
    m[(0, 2)] = -1.0 / (2.0 * dx);
    m[(nx - 1, nx - 1)] = 1.0;
}

/// A factorized implicit-Euler step operator
/// `(I - dt c A + dt Adv + dt Coupling) P^{n+1} = P^n + dt F^{n+1}`.
pub struct ImplicitStepper {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    grid: Grid,
    dt: f64,
}

impl ImplicitStepper {
    /// Build and factorize the step matrix.
    ///
    /// `coupling` holds implicit rank-one terms `-g(x) P^{n+1}(x_{j0})` of the
    /// PDE right side (moved to the left side), used by the observer's
    /// boundary-innovation injection.
    pub fn new(
        alpha: FractionalOrder,
        grid: &Grid,
        diffusivity: f64,
        dt: f64,
        advection_gain: Option<&[f64]>,
        coupling: &[(Vec<f64>, usize)],
    ) -> Result<Self> {
        let nx = grid.nx;
        let a = assemble_frac_operator(alpha, grid);
        let mut m = DMatrix::identity(nx, nx) - a * (dt * diffusivity);
        if let Some(h) = advection_gain {
            if h.len() != nx {
                return Err(Error::Size(format!(
                    "advection gain has {} samples for nx = {nx}",
                    h.len()
                )));
            }
            m += upwind_advection(h, grid) * dt;
        }
        for (g, j0) in coupling {
            if g.len() != nx || *j0 >= nx {
                return Err(Error::Size("coupling profile inconsistent with grid".into()));
            }
            for i in 1..nx - 1 {
                m[(i, *j0)] += dt * g[i];
            }
        }
        apply_boundary_rows(&mut m, grid);
        let lu = m.lu();
        if lu.determinant().abs() < 1e-300 {
            return Err(Error::Solver { step: 0, detail: "singular implicit step matrix".into() });
        }
        Ok(Self { lu, grid: *grid, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance one step. `forcing` is the PDE right-side source sampled at
    /// the new time level (interior nodes); `bc_left`/`bc_right` are the
    /// Neumann and Dirichlet values at the new time level.
    pub fn step(&self, prev: &[f64], forcing: &[f64], bc_left: f64, bc_right: f64, step_idx: usize) -> Result<Vec<f64>> {
        let nx = self.grid.nx;
        let mut rhs = DVector::zeros(nx);
        for i in 1..nx - 1 {
            rhs[i] = prev[i] + self.dt * forcing[i];
        }
        rhs[0] = bc_left;
        rhs[nx - 1] = bc_right;
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Solver { step: step_idx, detail: "implicit solve failed".into() })?;
        let out: Vec<f64> = sol.iter().copied().collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("NaN/Inf in solution at step {step_idx}")));
        }
        Ok(out)
    }
}

/// Convenience single step matching the stepper's contract.
pub fn step_implicit(
    prev: &[f64],
    spec: &PdeSpec,
    grid: &Grid,
    t_next: f64,
    controls: (&dyn Fn(f64) -> f64, &dyn Fn(f64) -> f64),
    step_idx: usize,
) -> Result<Vec<f64>> {
    let stepper = ImplicitStepper::new(
        spec.alpha,
        grid,
        spec.params.diffusivity(t_next),
        grid.dt(),
        spec.advection_gain.as_deref(),
        &[],
    )?;
    let forcing = sample_forcing(spec, grid, t_next);
    stepper.step(prev, &forcing, controls.0(t_next), controls.1(t_next), step_idx)
}

fn sample_forcing(spec: &PdeSpec, grid: &Grid, t: f64) -> Vec<f64> {
    let mut f: Vec<f64> = (0..grid.nx).map(|i| (spec.forcing)(grid.x(i), t)).collect();
    for (profile, signal) in &spec.injections {
        let s = signal(t);
        for (fi, p) in f.iter_mut().zip(profile.iter()) {
            *fi += s * p;
        }
    }
    f
}

/// Run the full time loop from `initial(x)` under the given boundary data.
pub fn simulate(
    spec: &PdeSpec,
    grid: &Grid,
    initial: &dyn Fn(f64) -> f64,
    controls: &BoundaryControls,
) -> Result<Field> {
    spec.params.validate()?;
    let mut field = Field::zeros(*grid);
    for i in 0..grid.nx {
        field.col_mut(0)[i] = initial(grid.x(i));
    }
    let constant_k = spec.params.permeability.is_constant();
    let cached = if constant_k {
        Some(ImplicitStepper::new(
            spec.alpha,
            grid,
            spec.params.diffusivity(0.0),
            grid.dt(),
            spec.advection_gain.as_deref(),
            &[],
        )?)
    } else {
        None
    };
    for j in 1..grid.nt {
        let t_next = grid.t(j);
        let forcing = sample_forcing(spec, grid, t_next);
        let bc_l = (controls.left_neumann)(t_next);
        let bc_r = (controls.right_dirichlet)(t_next);
        let next = match &cached {
            Some(stepper) => stepper.step(field.col(j - 1), &forcing, bc_l, bc_r, j)?,
            None => {
                let stepper = ImplicitStepper::new(
                    spec.alpha,
                    grid,
                    spec.params.diffusivity(t_next),
                    grid.dt(),
                    spec.advection_gain.as_deref(),
                    &[],
                )?;
                stepper.step(field.col(j - 1), &forcing, bc_l, bc_r, j)?
            }
        };
        field.col_mut(j).copy_from_slice(&next);
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractional::gamma_fn;
    use approx::assert_abs_diff_eq;

    fn fo(a: f64) -> FractionalOrder {
        FractionalOrder::new(a).unwrap()
    }

    fn params(k: f64) -> PhysicalParams {
        PhysicalParams::constant_k(k, 1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn operator_reduces_to_laplacian_at_alpha_one() {
        let grid = Grid::new(32, 2, 1.0, 1.0).unwrap();
        let dx = grid.dx();
        let a = assemble_frac_operator(fo(1.0), &grid);
        for i in 1..31 {
            for j in 0..32 {
                let expect = if j == i - 1 || j == i + 1 {
                    1.0 / (dx * dx)
                } else if j == i {
                    -2.0 / (dx * dx)
                } else {
                    0.0
                };
                assert_abs_diff_eq!(a[(i, j)] * dx * dx, expect * dx * dx, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn operator_annihilates_constants() {
        let grid = Grid::new(64, 2, 1.0, 1.0).unwrap();
        let a = assemble_frac_operator(fo(0.5), &grid);
        let ones = DVector::from_element(64, 3.0);
        let out = &a * &ones;
        for i in 1..63 {
            assert_abs_diff_eq!(out[i], 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn operator_matches_cubic_power_rule() {
        // d/dx cD^alpha x^3 = Gamma(4)/Gamma(3-alpha) x^(2-alpha).
        let grid = Grid::new(401, 2, 1.0, 1.0).unwrap();
        let alpha = fo(0.5);
        let a = assemble_frac_operator(alpha, &grid);
        let f = DVector::from_iterator(401, (0..401).map(|i| grid.x(i).powi(3)));
        let out = &a * &f;
        let c = gamma_fn(4.0).unwrap() / gamma_fn(3.0 - alpha.get()).unwrap();
        let mut max_err = 0.0f64;
        for i in 1..400 {
            let x = grid.x(i);
            max_err = max_err.max((out[i] - c * x.powf(2.0 - alpha.get())).abs());
        }
        assert!(max_err < 30.0 * grid.dx(), "composite operator error {max_err}");
    }

    #[test]
    fn zero_everything_stays_zero() {
        let grid = Grid::new(32, 64, 1.0, 0.5).unwrap();
        let spec = PdeSpec::plain(params(2.0), fo(0.5));
        let field = simulate(&spec, &grid, &|_| 0.0, &BoundaryControls::zero()).unwrap();
        assert_eq!(field.sup_norm_overall(), 0.0);
    }

    /// Series oracle for d/dx cD^alpha sin(2 pi x) (power-rule term by term);
    /// cross-checked against mpmath quadrature of the Caputo definition.
    /// Terms with a Gamma pole carry a zero reciprocal and are skipped.
    pub(crate) fn dx_caputo_sin_2pix(x: f64, alpha: f64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut acc = 0.0;
        for k in 0..40 {
            let p = (2 * k + 1) as f64;
            let arg = p - alpha;
            if arg <= 0.0 || (arg - arg.round()).abs() < 1e-12 && arg < 0.5 {
                continue;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * two_pi.powf(p) * x.powf(p - 1.0 - alpha) / gamma_fn(arg).unwrap();
        }
        acc
    }

    fn sin_state_error(nx: usize, nt: usize, alpha: f64) -> f64 {
        let grid = Grid::new(nx, nt, 1.0, 1.0).unwrap();
        let p = params(5.0);
        let c = p.diffusivity(0.0);
        let exact = |x: f64, t: f64| 4.0 * (-t).exp() * (2.0 * std::f64::consts::PI * x).sin();
        let spec = PdeSpec {
            params: p.clone(),
            alpha: fo(alpha),
            forcing: Box::new(move |x, t| {
                let e = (-t).exp();
                -4.0 * e * (2.0 * std::f64::consts::PI * x).sin() - c * 4.0 * e * dx_caputo_sin_2pix(x, alpha)
            }),
            advection_gain: None,
            injections: Vec::new(),
        };
        let two_pi = 2.0 * std::f64::consts::PI;
        let controls = BoundaryControls {
            left_neumann: Box::new(move |t| 4.0 * (-t).exp() * two_pi),
            right_dirichlet: Box::new(move |t| 4.0 * (-t).exp() * (two_pi).sin()),
        };
        let field = simulate(&spec, &grid, &|x| exact(x, 0.0), &controls).unwrap();
        let mut max_err = 0.0f64;
        for j in 0..nt {
            for i in 0..nx {
                let e = (field.col(j)[i] - exact(grid.x(i), grid.t(j))).abs();
                max_err = max_err.max(e);
            }
        }
        max_err
    }

    #[test]
    fn manufactured_sin_state_reproduced() {
        // State 4 e^{-t} sin(2 pi x) with the forcing taken as its residual.
        // The exact composite derivative behaves like x^-alpha at the left
        // boundary, so the scheme converges at order 1-alpha there; the
        // threshold reflects that error model at this resolution.
        let err = sin_state_error(201, 201, 0.5);
        assert!(err < 0.35, "manufactured-solution error too large: {err}");
        // At alpha = 1 the state is smooth and the error drops sharply.
        let err1 = sin_state_error(201, 201, 1.0);
        assert!(err1 < 0.02, "alpha=1 manufactured error too large: {err1}");
    }

    fn cubic_state_error(nx: usize, nt: usize, alpha: f64) -> f64 {
        let grid = Grid::new(nx, nt, 1.0, 1.0).unwrap();
        let p = params(5.0);
        let c = p.diffusivity(0.0);
        let g34 = gamma_fn(4.0).unwrap() / gamma_fn(3.0 - alpha).unwrap();
        let exact = |x: f64, t: f64| x * x * x * (-t).exp();
        let spec = PdeSpec {
            params: p.clone(),
            alpha: fo(alpha),
            forcing: Box::new(move |x, t| {
                let e = (-t).exp();
                -x * x * x * e - c * e * g34 * x.powf(2.0 - alpha)
            }),
            advection_gain: None,
            injections: Vec::new(),
        };
        let controls = BoundaryControls {
            left_neumann: Box::new(|_| 0.0),
            right_dirichlet: Box::new(|t| (-t).exp()),
        };
        let field = simulate(&spec, &grid, &|x| x * x * x, &controls).unwrap();
        let mut max_err = 0.0f64;
        for j in 0..nt {
            for i in 0..nx {
                let e = (field.col(j)[i] - exact(grid.x(i), grid.t(j))).abs();
                max_err = max_err.max(e);
            }
        }
        max_err
    }

    #[test]
    fn manufactured_solution_refinement_order() {
        // Smooth manufactured state: first-order gain under joint dx, dt
        // halving.
        let e_coarse = cubic_state_error(101, 101, 0.5);
        let e_fine = cubic_state_error(201, 201, 0.5);
        assert!(
            e_coarse / e_fine >= 1.5,
            "refinement gain {} below 1.5 (coarse {e_coarse}, fine {e_fine})",
            e_coarse / e_fine
        );
    }

    #[test]
    fn heat_limit_matches_tridiagonal_reference() {
        // alpha = 1, same discretization implemented independently with the
        // Thomas algorithm.
        let nx = 64;
        let nt = 50;
        let grid = Grid::new(nx, nt, 1.0, 0.25).unwrap();
        let p = params(1.0);
        let a = p.diffusivity(0.0);
        let spec = PdeSpec::plain(p, fo(1.0));
        let g0 = |x: f64| (std::f64::consts::PI * x).sin() + 0.3 * (3.0 * x).cos();
        let field = simulate(&spec, &grid, &g0, &BoundaryControls::zero()).unwrap();

        // Independent tridiagonal implicit Euler.
        let dx = grid.dx();
        let dt = grid.dt();
        let r = a * dt / (dx * dx);
        let mut u: Vec<f64> = (0..nx).map(|i| g0(grid.x(i))).collect();
        for _ in 1..nt {
            // Build tridiagonal system with the same boundary rows.
            let mut sub = vec![0.0; nx];
            let mut diag = vec![0.0; nx];
            let mut sup = vec![0.0; nx];
            let mut rhs = vec![0.0; nx];
            for i in 1..nx - 1 {
                sub[i] = -r;
                diag[i] = 1.0 + 2.0 * r;
                sup[i] = -r;
                rhs[i] = u[i];
            }
            // Neumann row eliminated against the first interior row: the
            // dense path uses [-3, 4, -1]/(2dx); fold node 2 coupling.
            diag[0] = -3.0 / (2.0 * dx);
            sup[0] = 4.0 / (2.0 * dx);
            let c2 = -1.0 / (2.0 * dx);
            rhs[0] = 0.0;
            // Eliminate the (0,2) entry using row 1.
            let factor = c2 / sup[1];
            diag[0] -= factor * sub[1];
            sup[0] -= factor * diag[1];
            rhs[0] -= factor * rhs[1];
            diag[nx - 1] = 1.0;
            sub[nx - 1] = 0.0;
            rhs[nx - 1] = 0.0;
            // Thomas sweep.
            for i in 1..nx {
                let m = sub[i] / diag[i - 1];
                diag[i] -= m * sup[i - 1];
                rhs[i] -= m * rhs[i - 1];
            }
            u[nx - 1] = rhs[nx - 1] / diag[nx - 1];
            for i in (0..nx - 1).rev() {
                u[i] = (rhs[i] - sup[i] * u[i + 1]) / diag[i];
            }
        }
        let dense = field.col(nt - 1);
        let mut max_err = 0.0f64;
        for i in 0..nx {
            max_err = max_err.max((dense[i] - u[i]).abs());
        }
        assert!(max_err < 1e-8, "dense vs tridiagonal mismatch {max_err}");
    }

    #[test]
    fn sup_norm_nonincreasing_without_forcing() {
        for &al in &[0.3, 0.5, 0.7, 1.0] {
            let grid = Grid::new(65, 129, 1.0, 1.0).unwrap();
            let spec = PdeSpec::plain(params(1.0), fo(al));
            let g0 = |x: f64| (-(x - 0.5f64).powi(2) / 0.01).exp();
            let field = simulate(&spec, &grid, &g0, &BoundaryControls::zero()).unwrap();
            let mut prev = field.sup_norm(0);
            for j in 1..grid.nt {
                let cur = field.sup_norm(j);
                assert!(
                    cur <= prev * (1.0 + 1e-10),
                    "sup norm grew at step {j} for alpha={al}: {prev} -> {cur}"
                );
                prev = cur;
            }
        }
    }

    #[test]
    fn boundary_rows_satisfied() {
        let grid = Grid::new(64, 32, 1.0, 0.5).unwrap();
        let spec = PdeSpec::plain(params(2.0), fo(0.6));
        let controls = BoundaryControls {
            left_neumann: Box::new(|t| 0.3 * (2.0 * t).sin()),
            right_dirichlet: Box::new(|t| 0.1 * t.cos()),
        };
        let field = simulate(&spec, &grid, &|x| x * (1.0 - x), &controls).unwrap();
        let dx = grid.dx();
        for j in 1..grid.nt {
            let t = grid.t(j);
            let col = field.col(j);
            let slope = (-3.0 * col[0] + 4.0 * col[1] - col[2]) / (2.0 * dx);
            assert_abs_diff_eq!(slope, 0.3 * (2.0 * t).sin(), epsilon = 1e-10);
            assert_abs_diff_eq!(col[grid.nx - 1], 0.1 * t.cos(), epsilon = 1e-14);
        }
    }

    #[test]
    fn csv_header_and_rows_have_full_precision() {
        let grid = Grid::new(8, 3, 1.0, 1.0).unwrap();
        let mut field = Field::zeros(grid);
        field.col_mut(1)[3] = std::f64::consts::PI;
        let csv = field.to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("x\t0.0000000000000000e0\t"));
        let row1 = lines.nth(1).unwrap();
        let cells: Vec<&str> = row1.split('\t').collect();
        assert_eq!(cells.len(), 9);
        let back: f64 = cells[4].parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }

    #[test]
    fn nan_detection_names_the_step() {
        let grid = Grid::new(16, 8, 1.0, 0.5).unwrap();
        let spec = PdeSpec {
            params: params(1.0),
            alpha: fo(0.5),
            forcing: Box::new(|_, t| if t > 0.2 { f64::NAN } else { 0.0 }),
            advection_gain: None,
            injections: Vec::new(),
        };
        let err = simulate(&spec, &grid, &|_| 0.0, &BoundaryControls::zero()).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("step"), "error should carry the step index: {msg}");
    }

    #[test]
    fn time_varying_permeability_steps_without_cache() {
        let grid = Grid::new(32, 16, 1.0, 0.25).unwrap();
        let p = PhysicalParams {
            k0: 1.0,
            permeability: crate::green::Permeability::Modulated { base: 2.0, amplitude: 0.5, omega: 3.0 },
            mu: 1.0,
            c_compress: 1.0,
            rho: 1.0,
            domain_len: 1.0,
        };
        let spec = PdeSpec::plain(p, fo(0.7));
        let g0 = |x: f64| (-(x - 0.5f64).powi(2) / 0.02).exp();
        let field = simulate(&spec, &grid, &g0, &BoundaryControls::zero()).unwrap();
        assert!(field.sup_norm(grid.nt - 1) < field.sup_norm(0));
    }

    #[test]
    fn cfl_diagnostic_reported() {
        let grid = Grid::new(201, 2001, 1.0, 3.0).unwrap();
        let d = grid.cfl_diagnostic(&params(5.0), fo(0.5));
        assert!(d > 0.0 && d.is_finite());
    }
}

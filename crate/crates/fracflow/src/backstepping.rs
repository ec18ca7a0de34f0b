//! Backstepping reference-tracking controllers.
//!
//! Two designs drive the gradient output `y(t) = P_x(1, t)` to the reference
//! `y_d(t) = c^T V(t)`:
//!
//! - the Volterra design: spatial transform `w = P - int_0^x K(x,y) P(y) dy`
//!   with the polynomial kernel `K(x,y) = (x-y)^(2m+1)`, boundary feedback
//!   `u = int_0^1 K(1,y) P(y) dy + m^T V`;
//! - the time-convolution design: `w = P - int_0^t l(tau,t) P(x,tau) dtau`
//!   with the transport kernel `l(tau,t) = l_hat(t-tau)`, boundary feedback
//!   `u = int_0^t l_hat(t-tau) P(1,tau) dtau + m^T V`.
//!
//! Both read their feedforward row from the same regulator profile: the
//! steady manifold `P -> Mbar(x) V(t)` solves, mode by mode of `S`,
//!
//! `lambda Mbar - (k/(C mu)) d/dx cD^alpha_x Mbar = f(x) a / (C rho)`,
//! `Mbar'(0) = b`, `Mbar'(1) = c`,
//!
//! and the w-side profile is its forward Volterra image. Applying the
//! transform to the plant produces the w-equation source
//! `(1/(C rho)) V{f}(x) a^T V + (k/(C mu)) G_m(x) P(0,t)` with
//! `G_m(x) = Gamma(2m+2)/Gamma(2m+2-alpha) x^(2m+1-alpha)`, which the
//! regulator equations absorb self-consistently (`P(0,t) -> Mbar(0) V`);
//! the plug-back residual test checks exactly that identity.

use crate::error::{Error, Result};
use crate::exosystem::Exosystem;
use crate::fdm::{assemble_frac_operator, Field, Grid, ImplicitStepper};
use crate::fractional::{gamma_fn, FractionalOrder};
use crate::green::PhysicalParams;
use nalgebra::{Complex, DMatrix, DVector};

type C64 = Complex<f64>;

/// Polynomial Volterra kernel `K(x,y) = (x-y)^(2m+1)`.
///
/// Satisfies the kernel PDE and its boundary conditions in closed form:
/// `K(x,x) = 0`, the diagonal fractional traces vanish, and
/// `K(x,0) = x^(2m+1)` stays nonzero for `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolyKernel {
    m: u32,
}

impl PolyKernel {
    pub fn new(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::Domain(
                "kernel exponent m must be >= 1 for a twice continuously differentiable kernel".into(),
            ));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    fn p(&self) -> f64 {
        2.0 * self.m as f64 + 1.0
    }

    /// `K(x, y)` on the triangle `0 <= y <= x`.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        if y > x + 1e-14 {
            return Err(Error::Domain(format!("kernel defined on y <= x, got x={x}, y={y}")));
        }
        Ok((x - y).max(0.0).powi(2 * self.m as i32 + 1))
    }

    /// The pair `(d/dx yD^alpha_x K, D^alpha_{y,x} d/dy K)`; both equal
    /// `Gamma(2m+2)/Gamma(2m+1-alpha) (x-y)^(2m-alpha)` in closed form.
    /// The two entries are computed through different Gamma compositions so
    /// the PDE-residual check is not vacuously zero.
    pub fn frac_derivs(&self, x: f64, y: f64, alpha: FractionalOrder) -> Result<(f64, f64)> {
        if y > x + 1e-14 {
            return Err(Error::Domain(format!("kernel defined on y <= x, got x={x}, y={y}")));
        }
        let p = self.p();
        let a = alpha.get();
        let base = (x - y).max(0.0).powf(p - 1.0 - a);
        let lhs = gamma_fn(p + 1.0)? / gamma_fn(p - a)? * base;
        let rhs = gamma_fn(p + 1.0)? / gamma_fn(p + 1.0 - a)? * (p - a) * base;
        Ok((lhs, rhs))
    }

    /// `yD^(alpha-1)_x K` evaluated on the diagonal `y = x` (vanishes).
    pub fn frac_integral_diag(&self, x: f64, alpha: FractionalOrder) -> f64 {
        let _ = (x, alpha);
        0.0
    }

    /// `D^alpha_{y,x} K(x,y)` as the closed-form profile
    /// `Gamma(2m+2)/Gamma(2m+2-alpha) (x-y)^(2m+1-alpha)`.
    pub fn right_caputo(&self, x: f64, y: f64, alpha: FractionalOrder) -> Result<f64> {
        let p = self.p();
        let a = alpha.get();
        Ok(gamma_fn(p + 1.0)? / gamma_fn(p + 1.0 - a)? * (x - y).max(0.0).powf(p - a))
    }

    /// `K(x, 0) = x^(2m+1)`.
    pub fn at_y0(&self, x: f64) -> f64 {
        x.powi(2 * self.m as i32 + 1)
    }

    pub fn as_fn(&self) -> impl Fn(f64, f64) -> f64 + '_ {
        move |x, y| (x - y).max(0.0).powi(2 * self.m as i32 + 1)
    }
}

/// Lower-triangular trapezoid matrix of the forward transform
/// `w_i = p_i - sum_j theta_j K(x_i, y_j) p_j dx` (unit diagonal because
/// `K(x,x) = 0`).
pub fn volterra_matrix(kernel: &dyn Fn(f64, f64) -> f64, nx: usize, dx: f64) -> DMatrix<f64> {
    let mut v = DMatrix::identity(nx, nx);
    for i in 1..nx {
        let xi = i as f64 * dx;
        for j in 0..=i {
            let w = if j == 0 || j == i { 0.5 } else { 1.0 };
            v[(i, j)] -= w * dx * kernel(xi, j as f64 * dx);
        }
    }
    v
}

/// Forward Volterra transform of grid samples.
pub fn volterra_forward(p: &[f64], kernel: &dyn Fn(f64, f64) -> f64, dx: f64) -> Vec<f64> {
    let n = p.len();
    let mut out = p.to_vec();
    for i in 1..n {
        let xi = i as f64 * dx;
        let mut acc = 0.0;
        for j in 0..=i {
            let w = if j == 0 || j == i { 0.5 } else { 1.0 };
            acc += w * kernel(xi, j as f64 * dx) * p[j];
        }
        out[i] -= acc * dx;
    }
    out
}

/// Inverse transform by forward substitution on the unit-lower-triangular
/// transform matrix (the primary route).
pub fn volterra_inverse(w: &[f64], kernel: &dyn Fn(f64, f64) -> f64, dx: f64) -> Vec<f64> {
    let n = w.len();
    let mut p = vec![0.0; n];
    if n == 0 {
        return p;
    }
    p[0] = w[0];
    for i in 1..n {
        let xi = i as f64 * dx;
        let mut acc = 0.0;
        for j in 0..i {
            let wt = if j == 0 { 0.5 } else { 1.0 };
            acc += wt * kernel(xi, j as f64 * dx) * p[j];
        }
        // Diagonal kernel entry vanishes, so the diagonal coefficient is 1.
        p[i] = w[i] + acc * dx;
    }
    p
}

/// Inverse transform by resolvent (iterated-kernel) summation, kept as the
/// independent cross-check of [`volterra_inverse`]. Terminates when the next
/// iterate's sup-norm drops below 1e-12.
pub fn volterra_inverse_resolvent(w: &[f64], kernel: &dyn Fn(f64, f64) -> f64, dx: f64) -> Result<Vec<f64>> {
    let n = w.len();
    let t = {
        let mut t = DMatrix::zeros(n, n);
        for i in 1..n {
            let xi = i as f64 * dx;
            for j in 0..=i {
                let wt = if j == 0 || j == i { 0.5 } else { 1.0 };
                t[(i, j)] = wt * dx * kernel(xi, j as f64 * dx);
            }
        }
        t
    };
    let mut acc = DVector::from_column_slice(w);
    let mut term = DVector::from_column_slice(w);
    for _ in 0..200 {
        term = &t * &term;
        let sup = term.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        acc += &term;
        if sup < 1e-12 {
            return Ok(acc.iter().copied().collect());
        }
    }
    Err(Error::Numerical("volterra resolvent did not converge within 200 iterates".into()))
}

/// Transport kernel of the time-convolution design: `l(tau, t) =
/// l_hat(t - tau)` with `l_hat(t) = gamma e^(-gamma t)`; its inverse kernel
/// is the constant `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransportKernel {
    pub gamma: f64,
}

impl TransportKernel {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("transport kernel gamma must be positive, got {gamma}")));
        }
        Ok(Self { gamma })
    }

    pub fn l_hat(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else {
            self.gamma * (-self.gamma * t).exp()
        }
    }

    pub fn l(&self, tau: f64, t: f64) -> f64 {
        self.l_hat(t - tau)
    }

    /// Inverse-transform kernel `L(tau, t) = L_hat(t - tau)`; for the
    /// exponential `l_hat` the Neumann series collapses to a constant.
    pub fn inverse_l_hat(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else {
            self.gamma
        }
    }
}

/// Regulator profiles: the steady plant manifold `Mbar(x)`, its w-side image
/// `M(x) = V{Mbar}(x)`, and the feedforward rows of both controllers.
#[derive(Debug, Clone)]
pub struct MCurve {
    /// w-side profile rows (`n_V x nx`).
    pub rows_w: DMatrix<f64>,
    /// Plant-side steady profile rows (`n_V x nx`).
    pub rows_plant: DMatrix<f64>,
    /// `m^T = M^T(1)`, the Volterra controller's feedforward row.
    pub m_vec: DVector<f64>,
    /// `n^T = M^T(0)`, the boundary-value span of the target system.
    pub n_vec: DVector<f64>,
    /// Feedforward row of the convolution controller (steady-state balance
    /// of the control law through the exponential filter).
    pub m_conv: DVector<f64>,
    pub dx: f64,
}

/// Solve the regulator equations mode by mode (diagonalizing `S`), impose
/// `Mbar'(0) = b` and `Mbar'(1) = c` through one-sided derivative rows, and
/// carry the solution to the w-side through the forward Volterra transform.
pub fn solve_m(
    exo: &Exosystem,
    kernel: &PolyKernel,
    alpha: FractionalOrder,
    params: &PhysicalParams,
    f_profile: &[f64],
    nx: usize,
    transport: TransportKernel,
) -> Result<MCurve> {
    if !params.permeability.is_constant() {
        return Err(Error::Domain("regulator profiles require constant permeability".into()));
    }
    let n_v = exo.dim();
    if f_profile.len() != nx {
        return Err(Error::Size(format!("source profile has {} samples for nx = {nx}", f_profile.len())));
    }
    let len = params.domain_len;
    let grid = Grid::new(nx, 2, len, 1.0)?;
    let dx = grid.dx();
    let c_diff = params.diffusivity(0.0);
    let inv_crho = 1.0 / (params.c_compress * params.rho);

    // Eigen data of S: modes W and eigenvalues, from the exosystem cache.
    let s = exo.s_matrix();
    let lambda: Vec<C64> = s.clone().complex_eigenvalues().iter().copied().collect();
    let w_modes = mode_matrix(s, &lambda)?;
    let w_lu = w_modes.clone().lu();

    // Row vectors transformed into the eigenbasis: a~ = a^T W etc.
    let to_modes = |v: &DVector<f64>| -> DVector<C64> {
        let vc = DVector::from_iterator(n_v, v.iter().map(|x| C64::new(*x, 0.0)));
        w_modes.transpose() * vc
    };
    let a_t = to_modes(&exo.a);
    let b_t = to_modes(&exo.b);
    let c_t = to_modes(&exo.c);

    let a_frac = assemble_frac_operator(alpha, &grid);
    let mut rows_plant_c = DMatrix::from_element(n_v, nx, C64::new(0.0, 0.0));
    for (j, lam) in lambda.iter().enumerate() {
        // lambda M - c_diff A M = inv_crho f(x) a~_j, derivative BCs.
        let mut m = DMatrix::from_element(nx, nx, C64::new(0.0, 0.0));
        for r in 1..nx - 1 {
            for col in 0..nx {
                m[(r, col)] = C64::new(-c_diff * a_frac[(r, col)], 0.0);
            }
            m[(r, r)] += lam;
        }
        m[(0, 0)] = C64::new(-3.0 / (2.0 * dx), 0.0);
        m[(0, 1)] = C64::new(4.0 / (2.0 * dx), 0.0);
        m[(0, 2)] = C64::new(-1.0 / (2.0 * dx), 0.0);
        m[(nx - 1, nx - 3)] = C64::new(1.0 / (2.0 * dx), 0.0);
        m[(nx - 1, nx - 2)] = C64::new(-4.0 / (2.0 * dx), 0.0);
        m[(nx - 1, nx - 1)] = C64::new(3.0 / (2.0 * dx), 0.0);
        let mut rhs = DVector::from_element(nx, C64::new(0.0, 0.0));
        for r in 1..nx - 1 {
            rhs[r] = a_t[j] * C64::new(inv_crho * f_profile[r], 0.0);
        }
        rhs[0] = b_t[j];
        rhs[nx - 1] = c_t[j];
        let sol = m.lu().solve(&rhs).ok_or_else(|| {
            Error::Numerical(format!("regulator BVP singular for exosystem mode {} (lambda = {lam})", j))
        })?;
        for i in 0..nx {
            rows_plant_c[(j, i)] = sol[i];
        }
    }
    // Back out of the eigenbasis: Mbar^T = Mtilde^T W^{-1}, i.e. solve
    // W^T Mbar = Mtilde columnwise.
    let mut rows_plant = DMatrix::zeros(n_v, nx);
    let wt_lu = w_modes.transpose().lu();
    let mut max_imag = 0.0f64;
    let mut max_mag = 1e-12f64;
    for i in 0..nx {
        let col = DVector::from_iterator(n_v, (0..n_v).map(|j| rows_plant_c[(j, i)]));
        let back = wt_lu
            .solve(&col)
            .ok_or_else(|| Error::Numerical("mode matrix singular while recombining".into()))?;
        for j in 0..n_v {
            rows_plant[(j, i)] = back[j].re;
            max_imag = max_imag.max(back[j].im.abs());
            max_mag = max_mag.max(back[j].norm());
        }
    }
    if max_imag > 1e-7 * max_mag {
        return Err(Error::Numerical(format!(
            "regulator profile came back substantially complex (imag {max_imag:.3e} vs scale {max_mag:.3e})"
        )));
    }
    let _ = w_lu;

    // w-side image through the forward transform, row by row.
    let kfn = kernel.as_fn();
    let mut rows_w = DMatrix::zeros(n_v, nx);
    for j in 0..n_v {
        let row: Vec<f64> = (0..nx).map(|i| rows_plant[(j, i)]).collect();
        let tw = volterra_forward(&row, &kfn, dx);
        for i in 0..nx {
            rows_w[(j, i)] = tw[i];
        }
    }
    let m_vec = DVector::from_iterator(n_v, (0..n_v).map(|j| rows_w[(j, nx - 1)]));
    let n_vec = DVector::from_iterator(n_v, (0..n_v).map(|j| rows_w[(j, 0)]));
    let u_bar = DVector::from_iterator(n_v, (0..n_v).map(|j| rows_plant[(j, nx - 1)]));

    // Steady balance of u = l_hat * u + m_conv^T V around the desired
    // boundary value u -> ubar^T V: m_conv = (gamma I + S^T)^{-1} S^T ubar.
    let gs = DMatrix::identity(n_v, n_v) * transport.gamma + s.transpose();
    let m_conv = gs
        .lu()
        .solve(&(s.transpose() * &u_bar))
        .ok_or_else(|| Error::Config("l_hat gamma collides with an exosystem eigenvalue".into()))?;

    Ok(MCurve { rows_w, rows_plant, m_vec, n_vec, m_conv, dx })
}

fn mode_matrix(s: &DMatrix<f64>, lambda: &[C64]) -> Result<DMatrix<C64>> {
    let n = s.nrows();
    let scale = lambda.iter().map(|l| l.norm()).fold(1e-12, f64::max);
    let sc: DMatrix<C64> = s.map(|x| C64::new(x, 0.0));
    let mut modes = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for (j, l) in lambda.iter().enumerate() {
        let shift = l + C64::new(1e-10 * scale, 1e-10 * scale);
        let mut m = sc.clone();
        for i in 0..n {
            m[(i, i)] -= shift;
        }
        let lu = m.lu();
        let mut v = DVector::from_iterator(
            n,
            (0..n).map(|i| C64::new(1.0 + 0.3 * ((i + j) as f64).sin(), 0.1 * (i as f64 + 1.0))),
        );
        v /= C64::new(v.norm(), 0.0);
        for _ in 0..4 {
            let next = lu.solve(&v).ok_or_else(|| Error::Numerical("inverse iteration failed".into()))?;
            let norm = next.norm();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::Numerical("inverse iteration diverged".into()));
            }
            v = next / C64::new(norm, 0.0);
        }
        for i in 0..n {
            modes[(i, j)] = v[i];
        }
    }
    Ok(modes)
}

/// Interior residual of the w-side target equation
/// `M^T S - c d/dx cD^alpha M^T = (1/(C rho)) V{f} a^T + c G_m(x) M^T(0)`,
/// the plug-back consistency check of the transform algebra. Returns the
/// max-interior residual together with the magnitude of the dominant
/// equation term, the natural normalization for the tolerance.
pub fn solve_m_residual(
    m: &MCurve,
    exo: &Exosystem,
    kernel: &PolyKernel,
    alpha: FractionalOrder,
    params: &PhysicalParams,
    f_profile: &[f64],
) -> Result<(f64, f64)> {
    let n_v = exo.dim();
    let nx = m.rows_w.ncols();
    let grid = Grid::new(nx, 2, params.domain_len, 1.0)?;
    let dx = grid.dx();
    let a_frac = assemble_frac_operator(alpha, &grid);
    let c_diff = params.diffusivity(0.0);
    let inv_crho = 1.0 / (params.c_compress * params.rho);
    let kfn = kernel.as_fn();
    let vf = volterra_forward(f_profile, &kfn, dx);
    let s = exo.s_matrix();

    // (M^T S)_{j,i} = sum_k S_{kj} M_{k,i} (row-vector convention).
    let mut max_res = 0.0f64;
    let mut scale = 1e-12f64;
    for i in 1..nx - 1 {
        let x = grid.x(i);
        let gm = kernel.right_caputo(x, 0.0, alpha)?;
        for j in 0..n_v {
            let mut ms = 0.0;
            for k in 0..n_v {
                ms += s[(k, j)] * m.rows_w[(k, i)];
            }
            let mut am = 0.0;
            for col in 0..nx {
                am += a_frac[(i, col)] * m.rows_w[(j, col)];
            }
            let source = inv_crho * vf[i] * exo.a[j] + c_diff * gm * m.n_vec[j];
            max_res = max_res.max((ms - c_diff * am - source).abs());
            scale = scale.max(ms.abs()).max((c_diff * am).abs()).max(source.abs());
        }
    }
    Ok((max_res, scale))
}

/// Volterra boundary feedback `u(t) = int_0^1 K(1,y) Phat(y) dy + m^T V(t)`.
pub fn control_volterra(p_hat: &[f64], kernel: &PolyKernel, m: &MCurve, v: &DVector<f64>) -> f64 {
    let n = p_hat.len();
    let dx = m.dx;
    let x1 = (n - 1) as f64 * dx;
    let mut acc = 0.0;
    for j in 0..n {
        let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        acc += w * kernel.at_y0(x1 - j as f64 * dx).max(0.0) * p_hat[j];
    }
    acc * dx + m.m_vec.dot(v)
}

/// Convolution boundary feedback
/// `u(t) = sum_j Phat(1, tau_j) l_hat(t - tau_j) dt + m_conv^T V(t)`;
/// `boundary_history` carries `Phat(1, tau_j)` at `tau_j = j dt` for the
/// already-computed steps, and `t_now` is the time the control is issued at.
pub fn control_convolution(
    boundary_history: &[f64],
    dt: f64,
    t_now: f64,
    tk: &TransportKernel,
    m: &MCurve,
    v: &DVector<f64>,
) -> f64 {
    let n = boundary_history.len();
    let mut acc = 0.0;
    for (j, p1) in boundary_history.iter().enumerate() {
        let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        acc += w * p1 * tk.l_hat(t_now - j as f64 * dt);
    }
    acc * dt + m.m_conv.dot(v)
}

/// Simulate the homogeneous tracking-error target system
/// `e_t = c d/dx cD^alpha e`, `e_x(0) = 0`, `e(1) = 0` from the profile `e0`.
pub fn tracking_error_target(
    e0: &[f64],
    alpha: FractionalOrder,
    params: &PhysicalParams,
    grid: &Grid,
) -> Result<Field> {
    if e0.len() != grid.nx {
        return Err(Error::Size(format!("e0 has {} samples for nx = {}", e0.len(), grid.nx)));
    }
    let stepper = ImplicitStepper::new(alpha, grid, params.diffusivity(0.0), grid.dt(), None, &[])?;
    let mut field = Field::zeros(*grid);
    field.col_mut(0).copy_from_slice(e0);
    let zeros = vec![0.0; grid.nx];
    for j in 1..grid.nt {
        let next = stepper.step(field.col(j - 1), &zeros, 0.0, 0.0, j)?;
        field.col_mut(j).copy_from_slice(&next);
    }
    Ok(field)
}

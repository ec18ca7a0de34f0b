//! Analytic solution machinery: the Green function of the space-fractional
//! diffusion operator via truncated inverse-Fourier quadrature, the
//! fundamental-solution operator for the forced problem, and the `L_inf`
//! stability-bound evaluator.
//!
//! The Fourier image of the Green function is
//! `G~(s, t) = exp((k(t)/(C mu)) phi^(alpha+1)(s) t)` with
//! `phi^(alpha+1)(s) = (-is)^(alpha+1)` on the non-positive-real-part branch,
//! so `|G~| <= 1` and the inverse-transform integrand decays like
//! `exp(-c |s|^(alpha+1) t)`. Truncation radii are chosen from that decay.

use crate::error::{Error, Result};
use crate::fractional::{phi_symbol, rl_integral, ComplexSymbol, FractionalOrder, SampledFunction};
use std::sync::OnceLock;

/// Permeability as a function of time, bounded below by `k0`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Permeability {
    Constant { value: f64 },
    /// `k(t) = base + amplitude * sin(omega t)`.
    Modulated { base: f64, amplitude: f64, omega: f64 },
}

impl Permeability {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Permeability::Constant { value } => value,
            Permeability::Modulated { base, amplitude, omega } => base + amplitude * (omega * t).sin(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Permeability::Constant { .. })
    }

    fn lower_bound(&self) -> f64 {
        match *self {
            Permeability::Constant { value } => value,
            Permeability::Modulated { base, amplitude, .. } => base - amplitude.abs(),
        }
    }
}

/// Physical parameters of the gas-pressure model.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhysicalParams {
    /// Lower bound of the permeability (m^2).
    pub k0: f64,
    pub permeability: Permeability,
    /// Viscosity (Pa s).
    pub mu: f64,
    /// Porosity variation with pressure (1/Pa).
    pub c_compress: f64,
    /// Density (kg/m^3).
    pub rho: f64,
    /// Domain length (m).
    pub domain_len: f64,
}

impl PhysicalParams {
    pub fn constant_k(k: f64, mu: f64, c: f64, rho: f64, len: f64) -> Result<Self> {
        let p = Self {
            k0: k,
            permeability: Permeability::Constant { value: k },
            mu,
            c_compress: c,
            rho,
            domain_len: len,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k0", self.k0),
            ("mu", self.mu),
            ("C", self.c_compress),
            ("rho", self.rho),
            ("L", self.domain_len),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be strictly positive, got {v}")));
            }
        }
        if self.permeability.lower_bound() < self.k0 - 1e-12 * self.k0.abs() {
            return Err(Error::Domain(format!(
                "permeability falls below its declared bound k0 = {}",
                self.k0
            )));
        }
        Ok(())
    }

    pub fn k_at(&self, t: f64) -> f64 {
        self.permeability.at(t)
    }

    /// `k(t) / (C mu)`.
    pub fn diffusivity(&self, t: f64) -> f64 {
        self.k_at(t) / (self.c_compress * self.mu)
    }

    /// Lower bound of the diffusivity, used for truncation radii.
    pub fn diffusivity_floor(&self) -> f64 {
        self.k0 / (self.c_compress * self.mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadRule {
    Trapezoid,
    Gauss,
}

/// Numerical parameters of the inverse-Fourier quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenQuadrature {
    /// Fourier truncation radius; `None` selects it from the decay criterion
    /// `exp((k0/(C mu)) Re phi(s_max) t) < 1e-12`.
    pub s_max: Option<f64>,
    /// Minimum node count across the truncated interval.
    pub n_nodes: usize,
    pub rule: QuadRule,
}

impl Default for GreenQuadrature {
    fn default() -> Self {
        Self { s_max: None, n_nodes: 256, rule: QuadRule::Gauss }
    }
}

impl GreenQuadrature {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 64 {
            return Err(Error::Domain(format!(
                "green quadrature needs n_nodes >= 64, got {}",
                self.n_nodes
            )));
        }
        if let Some(s) = self.s_max {
            if !(s > 0.0) {
                return Err(Error::Domain(format!("s_max must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

const TRUNCATION_LOG: f64 = 27.631_021_115_928_547; // ln(1e12)
const MAX_PANELS: usize = 65_536;

fn gauss16() -> &'static ([f64; 16], [f64; 16]) {
    static TABLE: OnceLock<([f64; 16], [f64; 16])> = OnceLock::new();
    TABLE.get_or_init(|| {
        // Legendre nodes by Newton iteration on P_16.
        let n = 16usize;
        let mut xs = [0.0f64; 16];
        let mut ws = [0.0f64; 16];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_and_deriv(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_and_deriv(n, x);
            xs[n - 1 - i] = x;
            ws[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (xs, ws)
    })
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Fourier image of the Green function:
/// `exp((k(t)/(C mu)) phi^(alpha+1)(s) t)`.
pub fn green_tilde(s: f64, t: f64, alpha: FractionalOrder, params: &PhysicalParams) -> Result<ComplexSymbol> {
    if t < 0.0 {
        return Err(Error::Domain(format!("green_tilde needs t >= 0, got {t}")));
    }
    let phi = phi_symbol(s, alpha);
    let a = params.diffusivity(t) * t;
    let modulus = (a * phi.re).exp();
    let phase = a * phi.im;
    Ok(ComplexSymbol::new(modulus * phase.cos(), modulus * phase.sin()))
}

/// Truncation radius from the decay criterion.
fn auto_s_max(t: f64, alpha: FractionalOrder, params: &PhysicalParams) -> f64 {
    let sin_half = (std::f64::consts::FRAC_PI_2 * alpha.get()).sin();
    (TRUNCATION_LOG / (params.diffusivity_floor() * sin_half * t)).powf(1.0 / (alpha.get() + 1.0))
}

struct PanelPlan {
    s_max: f64,
    n_panels: usize,
}

fn plan_panels(x: f64, t: f64, alpha: FractionalOrder, params: &PhysicalParams, quad: &GreenQuadrature) -> Result<PanelPlan> {
    let s_max = quad.s_max.unwrap_or_else(|| auto_s_max(t, alpha, params));
    // Resolve both the oscillation e^{-isx} and the decay scale of G~.
    let sin_half = (std::f64::consts::FRAC_PI_2 * alpha.get()).sin();
    let s_decay = (1.0 / (params.diffusivity_floor() * sin_half * t)).powf(1.0 / (alpha.get() + 1.0));
    let width_osc = 2.0 * std::f64::consts::PI / x.abs().max(1e-3);
    let width = width_osc.min(s_decay).min(s_max);
    let mut n_panels = (s_max / width).ceil() as usize;
    n_panels = n_panels.max(quad.n_nodes.div_ceil(16)).max(8);
    if n_panels > MAX_PANELS {
        return Err(Error::Accuracy(format!(
            "green quadrature needs {n_panels} panels (s_max = {s_max:.3e}, t = {t:.3e}); \
             time lag too small for the node budget"
        )));
    }
    Ok(PanelPlan { s_max, n_panels })
}

/// Point evaluation of the Green function `G_alpha(x, t)` for `t > 0`.
///
/// Uses the Hermitian symmetry of the integrand: the result is the real part
/// of the truncated inverse Fourier transform.
pub fn green_eval(x: f64, t: f64, alpha: FractionalOrder, params: &PhysicalParams, quad: &GreenQuadrature) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("green_eval needs t > 0 (t = 0 is the delta distribution), got {t}")));
    }
    quad.validate()?;
    let plan = plan_panels(x, t, alpha, params, quad)?;
    let a = params.diffusivity(t) * t;
    let f = |s: f64| {
        let phi = phi_symbol(s, alpha);
        let modulus = (a * phi.re).exp();
        let phase = a * phi.im;
        // Re[e^{-isx} G~(s)]
        modulus * (phase - s * x).cos()
    };
    let integral = match quad.rule {
        QuadRule::Gauss => integrate_gauss_graded_origin(&f, plan.s_max, plan.n_panels),
        QuadRule::Trapezoid => integrate_trapezoid(&f, 0.0, plan.s_max, plan.n_panels * 16),
    };
    Ok(integral / std::f64::consts::PI)
}

/// Composite Gauss on `[0, b]` with the first uniform panel subdivided
/// geometrically toward the origin, where `|s|^(alpha+1)` has unbounded
/// curvature.
fn integrate_gauss_graded_origin(f: &dyn Fn(f64) -> f64, b: f64, panels: usize) -> f64 {
    let w0 = b / panels as f64;
    let mut total = integrate_gauss(f, w0, b, panels.saturating_sub(1).max(1));
    let mut hi = w0;
    for _ in 0..10 {
        let lo = hi / 2.0;
        total += integrate_gauss(f, lo, hi, 1);
        hi = lo;
    }
    total += integrate_gauss(f, 0.0, hi, 1);
    total
}

/// Green evaluation over the signed `s` range, returning the value and the
/// imaginary-residual ratio `|Im| / |Re|` as a diagnostic. The imaginary part
/// must cancel by Hermitian symmetry; a large residual flags a quadrature
/// problem.
pub fn green_eval_with_diagnostic(
    x: f64,
    t: f64,
    alpha: FractionalOrder,
    params: &PhysicalParams,
    quad: &GreenQuadrature,
) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("green_eval needs t > 0, got {t}")));
    }
    quad.validate()?;
    let plan = plan_panels(x, t, alpha, params, quad)?;
    let a = params.diffusivity(t) * t;
    let re_f = |s: f64| {
        let phi = phi_symbol(s, alpha);
        (a * phi.re).exp() * (a * phi.im - s * x).cos()
    };
    let im_f = |s: f64| {
        let phi = phi_symbol(s, alpha);
        (a * phi.re).exp() * (a * phi.im - s * x).sin()
    };
    let (re, im) = match quad.rule {
        QuadRule::Gauss => (
            integrate_gauss(&re_f, -plan.s_max, plan.s_max, 2 * plan.n_panels),
            integrate_gauss(&im_f, -plan.s_max, plan.s_max, 2 * plan.n_panels),
        ),
        QuadRule::Trapezoid => (
            integrate_trapezoid(&re_f, -plan.s_max, plan.s_max, 32 * plan.n_panels),
            integrate_trapezoid(&im_f, -plan.s_max, plan.s_max, 32 * plan.n_panels),
        ),
    };
    let value = re / (2.0 * std::f64::consts::PI);
    let ratio = (im / (2.0 * std::f64::consts::PI)).abs() / value.abs().max(1e-300);
    if ratio > 1e-8 && value.abs() > 1e-10 {
        return Err(Error::Accuracy(format!(
            "imaginary residual ratio {ratio:.3e} exceeds 1e-8 at (x={x}, t={t})"
        )));
    }
    Ok((value, ratio))
}

fn integrate_gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (xs, ws) = gauss16();
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        let mut acc = 0.0;
        for i in 0..16 {
            acc += ws[i] * f(mid + half * xs[i]);
        }
        total += acc * half;
    }
    total
}

fn integrate_trapezoid(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(2);
    let h = (b - a) / (n - 1) as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for i in 1..n - 1 {
        acc += f(a + i as f64 * h);
    }
    acc * h
}

/// Evaluate the homogeneous-part convolution `int G(x_i - y, t) g0(y) dy`
/// for every node of the grid carrying `g0`, reusing Green evaluations on
/// the shared offset lattice. `g0` is extended by zero outside its window.
pub fn analytic_profile(
    g0: &SampledFunction,
    t: f64,
    alpha: FractionalOrder,
    params: &PhysicalParams,
    quad: &GreenQuadrature,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let n = g0.len();
    let dx = g0.dx;
    // Offsets (i - j) dx for i, j in 0..n.
    let offsets: Vec<i64> = (-(n as i64 - 1)..=(n as i64 - 1)).collect();
    let g_vals: Vec<f64> = offsets
        .par_iter()
        .map(|&k| green_eval(k as f64 * dx, t, alpha, params, quad))
        .collect::<Result<Vec<_>>>()?;
    let g_at = |i: i64, j: i64| g_vals[(i - j + n as i64 - 1) as usize];
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            acc += w * g_at(i as i64, j as i64) * g0.values[j];
        }
        out[i] = acc * dx;
    }
    Ok(out)
}

/// Fundamental solution of the forced problem at a single point:
///
/// `P(x,t) = u(t) + int_0^t int G(x-y, t-tau) Qbar(y,tau) dy dtau
///           + int G(x-y, t) g0bar(y) dy`
///
/// with `g0bar = g0 - u(0)` and `Qbar = Q/(C rho) - u'`, both extended by the
/// indicator of `[0, L]`. Restricted to constant permeability; the
/// finite-difference engine handles time-varying `k`.
#[allow(clippy::too_many_arguments)]
pub fn analytic_solution(
    q: &dyn Fn(f64, f64) -> f64,
    g0: &dyn Fn(f64) -> f64,
    u: &dyn Fn(f64) -> f64,
    du: &dyn Fn(f64) -> f64,
    x: f64,
    t: f64,
    alpha: FractionalOrder,
    params: &PhysicalParams,
    quad: &GreenQuadrature,
) -> Result<f64> {
    if !params.permeability.is_constant() {
        return Err(Error::Domain(
            "analytic_solution requires constant permeability; use the finite-difference engine for time-varying k".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("analytic_solution needs t > 0, got {t}")));
    }
    let len = params.domain_len;
    let inv_crho = 1.0 / (params.c_compress * params.rho);
    let u0 = u(0.0);

    // Initial-data term.
    let g0bar = |y: f64| g0(y) - u0;
    let init_term = spatial_convolution(&g0bar, x, t, len, alpha, params, quad)?;

    // Forcing term with the endpoint substitution sigma = (t - tau)^(alpha/(alpha+1)).
    let a = alpha.get();
    let p_exp = (a + 1.0) / a;
    let sigma_max = t.powf(a / (a + 1.0));
    // Below this lag the kernel is collapsed to its delta limit (unit mass);
    // the substitution already removed the singularity, the floor only caps
    // the Fourier truncation radius.
    let lag_floor = (5e-3 * t).max(1e-10);
    let inner = |sigma: f64| -> Result<f64> {
        let lag = sigma.powf(p_exp);
        let tau = t - lag;
        let qbar = |y: f64| inv_crho * q(y, tau) - du(tau);
        let spatial = if lag < lag_floor {
            if x >= 0.0 && x <= len {
                qbar(x)
            } else {
                0.0
            }
        } else {
            spatial_convolution(&qbar, x, lag, len, alpha, params, quad)?
        };
        Ok(spatial * p_exp * sigma.powf(1.0 / a))
    };
    let forcing_term = if probe_forcing_zero(q, du, t, len, inv_crho) {
        0.0
    } else {
        adaptive_gauss(&inner, 0.0, sigma_max, 1e-6, 4, 64)?
    };

    Ok(u(t) + init_term + forcing_term)
}

/// Cheap all-zero probe so unforced problems skip the nested quadrature.
fn probe_forcing_zero(q: &dyn Fn(f64, f64) -> f64, du: &dyn Fn(f64) -> f64, t: f64, len: f64, inv_crho: f64) -> bool {
    for i in 0..5 {
        let tau = t * (i as f64 + 0.3) / 5.0;
        if du(tau) != 0.0 {
            return false;
        }
        for j in 0..7 {
            let y = len * (j as f64 + 0.21) / 7.0;
            if inv_crho * q(y, tau) != 0.0 {
                return false;
            }
        }
    }
    true
}

fn spatial_convolution(
    f: &dyn Fn(f64) -> f64,
    x: f64,
    lag: f64,
    len: f64,
    alpha: FractionalOrder,
    params: &PhysicalParams,
    quad: &GreenQuadrature,
) -> Result<f64> {
    let g = |y: f64| -> Result<f64> { Ok(green_eval(x - y, lag, alpha, params, quad)? * f(y)) };
    adaptive_gauss(&g, 0.0, len, 1e-6, 16, 1024)
}

/// Composite 16-point Gauss quadrature with panel doubling until two
/// successive refinements agree to `tol` (relative to the magnitude).
fn adaptive_gauss(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    tol: f64,
    start_panels: usize,
    max_panels: usize,
) -> Result<f64> {
    let eval = |panels: usize| -> Result<f64> {
        let (xs, ws) = gauss16();
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            let half = 0.5 * h;
            for i in 0..16 {
                total += ws[i] * f(mid + half * xs[i])? * half;
            }
        }
        Ok(total)
    };
    let mut panels = start_panels.max(1);
    let mut prev = eval(panels)?;
    loop {
        panels *= 2;
        if panels > max_panels {
            return Err(Error::Accuracy(format!(
                "quadrature did not converge to {tol:.1e} within {max_panels} panels"
            )));
        }
        let cur = eval(panels)?;
        if (cur - prev).abs() <= tol * (1.0 + cur.abs()) {
            return Ok(cur);
        }
        prev = cur;
    }
}

/// Mass of the Green function inside the window `[-x_win, x_win]`, computed
/// in Fourier space: `int_{-X}^{X} G dx = (2/pi) int_0^inf Re[G~(s,t)]
/// sin(sX)/s ds`. Used to pick spatial windows from the Green-mass tails and
/// to check the normalization `int G = 1`.
pub fn green_mass_in_window(
    x_win: f64,
    t: f64,
    alpha: FractionalOrder,
    params: &PhysicalParams,
) -> Result<f64> {
    if !(t > 0.0 && x_win > 0.0) {
        return Err(Error::Domain(format!(
            "green_mass_in_window needs t > 0 and x_win > 0, got t={t}, x_win={x_win}"
        )));
    }
    let s_max = auto_s_max(t, alpha, params);
    let a = params.diffusivity(t) * t;
    let f = |s: f64| {
        if s.abs() < 1e-14 {
            return x_win;
        }
        let phi = phi_symbol(s, alpha);
        let re_g = (a * phi.re).exp() * (a * phi.im).cos();
        re_g * (s * x_win).sin() / s
    };
    // One panel per half-period of sin(s x_win), at least 64.
    let n_panels = ((s_max * x_win / std::f64::consts::PI).ceil() as usize).max(64);
    if n_panels > 4 * MAX_PANELS {
        return Err(Error::Accuracy(format!(
            "mass quadrature needs {n_panels} panels; window too wide for the node budget"
        )));
    }
    Ok(integrate_gauss(&f, 0.0, s_max, n_panels) * 2.0 / std::f64::consts::PI)
}

/// `L_inf` stability bound for separable forcing `Qbar(x,t) = T(t) q(x)`,
/// `|T| <= r`:
///
/// `(|r|/2pi) (C mu / (k0 sin(pi alpha/2))) (2 ||J^(alpha+1) q||_1 + ||q||_1) + |u_max|`.
///
/// Returns `+inf` when the `sin(pi alpha/2)` prefactor underflows (the bound
/// diverges as `alpha -> 0`).
pub fn stability_bound(
    q: &SampledFunction,
    r: f64,
    u_max: f64,
    alpha: FractionalOrder,
    params: &PhysicalParams,
) -> Result<f64> {
    let sin_half = (std::f64::consts::FRAC_PI_2 * alpha.get()).sin();
    if sin_half < 1e-12 {
        return Ok(f64::INFINITY);
    }
    let j_q = rl_integral(q, alpha.get() + 1.0)?;
    let bound = r.abs() / (2.0 * std::f64::consts::PI)
        * (params.c_compress * params.mu / (params.k0 * sin_half))
        * (2.0 * j_q.norm_l1() + q.norm_l1())
        + u_max.abs();
    Ok(if bound.is_finite() { bound } else { f64::INFINITY })
}

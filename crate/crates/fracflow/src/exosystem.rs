//! Finite-dimensional signal generator `V'(t) = S V(t)` spanning the
//! disturbances `d1, d2`, the reference `y_d`, and the measurement span
//! `q^T V`.
//!
//! `S` must have distinct eigenvalues with non-positive real parts; strictly
//! imaginary pairs (undamped references such as `sin(2 pi t)`) are accepted
//! but flagged as marginal, since the stability theorems assume strictly
//! negative spectra. Evolution uses the eigendecomposition, so `V(t)` is
//! exact for any `t`.

use crate::error::{Error, Result};
use nalgebra::{Complex, DMatrix, DVector};

type C64 = Complex<f64>;

/// Output samples of the generator at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signals {
    pub d1: f64,
    pub d2: f64,
    pub y_d: f64,
    /// Span value `q^T V(t)`; the plant's measured `y_m` is synthesized from
    /// the simulated state, this is only the target-system model term.
    pub y_m_span: f64,
}

#[derive(Debug, Clone)]
pub struct Exosystem {
    s: DMatrix<f64>,
    v0: DVector<f64>,
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub q: DVector<f64>,
    marginal: bool,
    lambda: Vec<C64>,
    modes: DMatrix<C64>,
    coeffs: DVector<C64>,
    modes_inv: DMatrix<C64>,
}

impl Exosystem {
    pub fn new(
        s: DMatrix<f64>,
        v0: DVector<f64>,
        a: DVector<f64>,
        b: DVector<f64>,
        c: DVector<f64>,
        q: DVector<f64>,
    ) -> Result<Self> {
        let n = s.nrows();
        if s.ncols() != n || n == 0 {
            return Err(Error::Config(format!(
                "S must be square and nonempty, got {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
        for (name, v) in [("V0", &v0), ("a", &a), ("b", &b), ("c", &c), ("q", &q)] {
            if v.len() != n {
                return Err(Error::Config(format!("vector {name} has length {}, expected {n}", v.len())));
            }
        }
        let lambda: Vec<C64> = s.clone().complex_eigenvalues().iter().copied().collect();
        let scale = lambda.iter().map(|l| l.norm()).fold(1e-12, f64::max);
        for i in 0..n {
            for j in (i + 1)..n {
                if (lambda[i] - lambda[j]).norm() < 1e-8 * scale {
                    return Err(Error::Config(format!(
                        "S must have distinct eigenvalues; {} and {} coincide",
                        lambda[i], lambda[j]
                    )));
                }
            }
        }
        let mut marginal = false;
        for l in &lambda {
            if l.re > 1e-9 * scale {
                return Err(Error::Config(format!("S has an eigenvalue with positive real part: {l}")));
            }
            if l.re.abs() <= 1e-9 * scale {
                marginal = true;
            }
        }
        let modes = eigenvectors(&s, &lambda, scale)?;
        let lu = modes.clone().lu();
        let v0c = DVector::from_iterator(n, v0.iter().map(|x| C64::new(*x, 0.0)));
        let coeffs = lu
            .solve(&v0c)
            .ok_or_else(|| Error::Config("eigenvector matrix is singular".into()))?;
        let modes_inv = lu
            .try_inverse()
            .ok_or_else(|| Error::Config("eigenvector matrix is singular".into()))?;
        Ok(Self { s, v0, a, b, c, q, marginal, lambda, modes, coeffs, modes_inv })
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn s_matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn v0(&self) -> &DVector<f64> {
        &self.v0
    }

    /// True when some eigenvalue sits on the imaginary axis (undamped
    /// reference modes); the decay theorems do not cover these.
    pub fn is_marginal(&self) -> bool {
        self.marginal
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.lambda
    }

    /// `V(t) = exp(S t) V0` through the eigendecomposition.
    pub fn evolve(&self, t: f64) -> Result<DVector<f64>> {
        if t < 0.0 {
            return Err(Error::Domain(format!("exosystem evolution needs t >= 0, got {t}")));
        }
        let n = self.dim();
        let mut acc = DVector::from_element(n, C64::new(0.0, 0.0));
        for (j, l) in self.lambda.iter().enumerate() {
            let w = (l * t).exp() * self.coeffs[j];
            for i in 0..n {
                acc[i] += self.modes[(i, j)] * w;
            }
        }
        Ok(DVector::from_iterator(n, acc.iter().map(|z| z.re)))
    }

    /// Propagate an arbitrary state by `dt`: `exp(S dt) v`.
    pub fn propagate(&self, v: &DVector<f64>, dt: f64) -> DVector<f64> {
        let n = self.dim();
        let vc = DVector::from_iterator(n, v.iter().map(|x| C64::new(*x, 0.0)));
        let mut coeffs = &self.modes_inv * vc;
        for (j, l) in self.lambda.iter().enumerate() {
            coeffs[j] *= (l * dt).exp();
        }
        let out = &self.modes * coeffs;
        DVector::from_iterator(n, out.iter().map(|z| z.re))
    }

    pub fn signals(&self, t: f64) -> Result<Signals> {
        let v = self.evolve(t)?;
        Ok(Signals {
            d1: self.a.dot(&v),
            d2: self.b.dot(&v),
            y_d: self.c.dot(&v),
            y_m_span: self.q.dot(&v),
        })
    }
}

/// Eigenvectors by inverse iteration with a slightly shifted complex LU;
/// distinct eigenvalues make this robust.
fn eigenvectors(s: &DMatrix<f64>, lambda: &[C64], scale: f64) -> Result<DMatrix<C64>> {
    let n = s.nrows();
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
            let next = lu
                .solve(&v)
                .ok_or_else(|| Error::Config("inverse iteration failed (defective S?)".into()))?;
            let norm = next.norm();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::Config("inverse iteration diverged".into()));
            }
            v = next / C64::new(norm, 0.0);
        }
        for i in 0..n {
            modes[(i, j)] = v[i];
        }
    }
    Ok(modes)
}

/// Block-diagonal `S` of the closed-loop experiments: one decaying scalar
/// mode and one undamped oscillator pair at angular frequency `omega`.
pub fn decay_plus_oscillator(decay: f64, omega: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[decay, 0.0, 0.0, 0.0, 0.0, omega, 0.0, -omega, 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn scalar_exo(s: f64) -> Exosystem {
        Exosystem::new(
            DMatrix::from_row_slice(1, 1, &[s]),
            DVector::from_row_slice(&[1.0]),
            DVector::from_row_slice(&[1.0]),
            DVector::from_row_slice(&[0.5]),
            DVector::from_row_slice(&[0.0]),
            DVector::from_row_slice(&[0.0]),
        )
        .unwrap()
    }

    #[test]
    fn evolve_at_zero_returns_v0() {
        let exo = scalar_exo(-25.0);
        let v = exo.evolve(0.0).unwrap();
        assert_relative_eq!(v[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn scalar_mode_is_exponential() {
        let exo = scalar_exo(-25.0);
        for &t in &[0.01, 0.1, 0.5] {
            assert_relative_eq!(exo.evolve(t).unwrap()[0], (-25.0 * t).exp(), max_relative = 1e-10);
        }
    }

    #[test]
    fn damped_oscillator_matches_rk4() {
        // 2x2 rotation + decay block, independent RK4 integration as oracle.
        let s = DMatrix::from_row_slice(2, 2, &[-0.5, 3.0, -3.0, -0.5]);
        let v0 = DVector::from_row_slice(&[1.0, -0.4]);
        let exo = Exosystem::new(
            s.clone(),
            v0.clone(),
            DVector::zeros(2),
            DVector::zeros(2),
            DVector::from_row_slice(&[1.0, 0.0]),
            DVector::zeros(2),
        )
        .unwrap();
        let mut v = v0.clone();
        let dt = 1e-4;
        let n = 10_000;
        for _ in 0..n {
            let k1 = &s * &v;
            let k2 = &s * &(&v + &k1 * (dt / 2.0));
            let k3 = &s * &(&v + &k2 * (dt / 2.0));
            let k4 = &s * &(&v + &k3 * dt);
            v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        }
        let exact = exo.evolve(dt * n as f64).unwrap();
        assert_abs_diff_eq!(exact[0], v[0], epsilon = 1e-9);
        assert_abs_diff_eq!(exact[1], v[1], epsilon = 1e-9);
    }

    #[test]
    fn semigroup_property() {
        let s = decay_plus_oscillator(-25.0, 2.0 * std::f64::consts::PI);
        let exo = Exosystem::new(
            s,
            DVector::from_row_slice(&[1.0, 0.0, 1.0]),
            DVector::zeros(3),
            DVector::zeros(3),
            DVector::from_row_slice(&[0.0, 1.0, 0.0]),
            DVector::zeros(3),
        )
        .unwrap();
        let t1 = 0.37;
        let t2 = 0.59;
        let direct = exo.evolve(t1 + t2).unwrap();
        let chained = exo.propagate(&exo.evolve(t1).unwrap(), t2);
        for i in 0..3 {
            assert_abs_diff_eq!(direct[i], chained[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn reference_is_pure_sine() {
        let omega = 2.0 * std::f64::consts::PI;
        let exo = Exosystem::new(
            decay_plus_oscillator(-25.0, omega),
            DVector::from_row_slice(&[1.0, 0.0, 1.0]),
            DVector::from_row_slice(&[1.0, 0.0, 0.0]),
            DVector::from_row_slice(&[0.5, 0.0, 0.0]),
            DVector::from_row_slice(&[0.0, 1.0, 0.0]),
            DVector::zeros(3),
        )
        .unwrap();
        assert!(exo.is_marginal());
        for &t in &[0.1, 0.53, 1.7, 2.9] {
            let sig = exo.signals(t).unwrap();
            assert_abs_diff_eq!(sig.y_d, (omega * t).sin(), epsilon = 1e-9);
            assert_abs_diff_eq!(sig.d1, (-25.0 * t).exp(), epsilon = 1e-9);
            assert_abs_diff_eq!(sig.d2, 0.5 * (-25.0 * t).exp(), epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_output_vector_gives_zero_signal() {
        let exo = scalar_exo(-2.0);
        let sig = exo.signals(0.8).unwrap();
        assert_eq!(sig.y_d, 0.0);
        assert_eq!(sig.y_m_span, 0.0);
    }

    #[test]
    fn steplike_disturbance_via_slow_eigenvalue() {
        let exo = scalar_exo(-1e-4);
        let v1 = exo.evolve(1.0).unwrap()[0];
        assert!((v1 - 1.0).abs() < 2e-4);
        assert!(!exo.is_marginal());
    }

    #[test]
    fn repeated_eigenvalues_rejected() {
        let r = Exosystem::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]),
            DVector::zeros(2),
            DVector::zeros(2),
            DVector::zeros(2),
            DVector::zeros(2),
            DVector::zeros(2),
        );
        assert!(r.is_err());
    }

    #[test]
    fn positive_eigenvalue_rejected() {
        let r = Exosystem::new(
            DMatrix::from_row_slice(1, 1, &[0.3]),
            DVector::from_row_slice(&[1.0]),
            DVector::from_row_slice(&[1.0]),
            DVector::from_row_slice(&[1.0]),
            DVector::from_row_slice(&[1.0]),
            DVector::from_row_slice(&[1.0]),
        );
        assert!(r.is_err());
    }

    #[test]
    fn strictly_stable_norm_envelope() {
        let s = DMatrix::from_row_slice(2, 2, &[-0.5, 3.0, -3.0, -0.5]);
        let v0 = DVector::from_row_slice(&[1.0, 2.0]);
        let exo = Exosystem::new(
            s,
            v0.clone(),
            DVector::zeros(2),
            DVector::zeros(2),
            DVector::zeros(2),
            DVector::zeros(2),
        )
        .unwrap();
        let lambda_max = exo.eigenvalues().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        assert!(lambda_max < 0.0);
        let kappa = 10.0;
        for &t in &[1.0, 3.0, 8.0] {
            let v = exo.evolve(t).unwrap();
            assert!(v.norm() <= kappa * (lambda_max * t).exp() * v0.norm());
        }
    }
}

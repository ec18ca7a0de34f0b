//! Scenario configuration: TOML sections `[params]`, `[grid]`,
//! `[exosystem]`, `[controller]`, `[observer]`, `[source]`, `[noise]`.
//! Defaults reproduce the closed-loop experiment of the simulation study
//! (`k = 5`, `mu = C = L = 1`, `rho = 1.0726`, decaying disturbance mode at
//! `-25`, reference `sin(2 pi t)`, cubic kernel `m = 1`).

use crate::backstepping::TransportKernel;
use crate::error::{Error, Result};
use crate::exosystem::Exosystem;
use crate::fdm::Grid;
use crate::fractional::FractionalOrder;
use crate::green::{Permeability, PhysicalParams};
use crate::scenario::{ControllerKind, ObserverKind, Scenario};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub params: ParamsSection,
    pub grid: GridSection,
    pub exosystem: ExoSection,
    pub controller: ControllerSection,
    pub observer: ObserverSection,
    pub source: SourceSection,
    pub noise: NoiseSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            params: ParamsSection::default(),
            grid: GridSection::default(),
            exosystem: ExoSection::default(),
            controller: ControllerSection::default(),
            observer: ObserverSection::default(),
            source: SourceSection::default(),
            noise: NoiseSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub k: f64,
    /// Amplitude and angular frequency of an optional sinusoidal
    /// permeability modulation `k(t) = k + k_amplitude sin(k_omega t)`.
    pub k_amplitude: f64,
    pub k_omega: f64,
    pub mu: f64,
    pub c: f64,
    pub rho: f64,
    pub length: f64,
    pub alpha: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self { k: 5.0, k_amplitude: 0.0, k_omega: 0.0, mu: 1.0, c: 1.0, rho: 1.0726, length: 1.0, alpha: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub nx: usize,
    pub nt: usize,
    pub t_final: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { nx: 201, nt: 2001, t_final: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExoSection {
    /// Row-major square matrix.
    pub s: Vec<Vec<f64>>,
    pub v0: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub q: Vec<f64>,
}

impl Default for ExoSection {
    fn default() -> Self {
        // Decaying mode at -25, an undamped oscillator pair carrying the
        // sin(2 pi t) reference, and a slow steplike mode at -1 so the
        // disturbances persist long enough to exercise the estimator.
        let omega = 2.0 * std::f64::consts::PI;
        Self {
            s: vec![
                vec![-25.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.0, omega, 0.0],
                vec![0.0, -omega, 0.0, 0.0],
                vec![0.0, 0.0, 0.0, -1.0],
            ],
            v0: vec![1.0, 0.0, 1.0, 1.0],
            a: vec![0.5, 0.0, 0.0, 0.5],
            b: vec![0.3, 0.0, 0.0, 0.3],
            c: vec![0.0, 1.0, 0.0, 0.0],
            q: vec![0.0, 0.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    /// `volterra`, `convolution`, or `none`.
    pub kind: String,
    pub kernel_m: u32,
    pub l_hat_gamma: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self { kind: "volterra".into(), kernel_m: 1, l_hat_gamma: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserverSection {
    /// `adaptive` or `none`.
    pub kind: String,
    /// Initial observer state: `zero` or `sine` (amplitude times
    /// `sin(2 pi x)`).
    pub p_hat0: String,
    pub p_hat0_amplitude: f64,
}

impl Default for ObserverSection {
    fn default() -> Self {
        Self { kind: "adaptive".into(), p_hat0: "zero".into(), p_hat0_amplitude: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    /// `sine_normalized` (sin(2 pi x) scaled to unit L1 norm) or `zero`.
    pub profile: String,
    pub scale: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self { profile: "sine_normalized".into(), scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub sigma: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { sigma: 0.0 }
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("bad config: {e}")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Validate and assemble the runtime scenario.
    pub fn build(&self) -> Result<Scenario> {
        let p = &self.params;
        let permeability = if p.k_amplitude == 0.0 {
            Permeability::Constant { value: p.k }
        } else {
            Permeability::Modulated { base: p.k, amplitude: p.k_amplitude, omega: p.k_omega }
        };
        let params = PhysicalParams {
            k0: p.k - p.k_amplitude.abs(),
            permeability,
            mu: p.mu,
            c_compress: p.c,
            rho: p.rho,
            domain_len: p.length,
        };
        params.validate().map_err(|e| Error::Config(format!("[params]: {e}")))?;
        let alpha = FractionalOrder::new(p.alpha).map_err(|e| Error::Config(format!("[params].alpha: {e}")))?;
        let grid = Grid::new(self.grid.nx, self.grid.nt, p.length, self.grid.t_final)
            .map_err(|e| Error::Config(format!("[grid]: {e}")))?;

        let n = self.exosystem.s.len();
        if self.exosystem.s.iter().any(|row| row.len() != n) {
            return Err(Error::Config("[exosystem].s must be square (row-major rows of equal length)".into()));
        }
        let flat: Vec<f64> = self.exosystem.s.iter().flatten().copied().collect();
        let exo = Exosystem::new(
            DMatrix::from_row_slice(n, n, &flat),
            DVector::from_vec(self.exosystem.v0.clone()),
            DVector::from_vec(self.exosystem.a.clone()),
            DVector::from_vec(self.exosystem.b.clone()),
            DVector::from_vec(self.exosystem.c.clone()),
            DVector::from_vec(self.exosystem.q.clone()),
        )?;

        let controller = match self.controller.kind.as_str() {
            "volterra" => ControllerKind::Volterra,
            "convolution" => ControllerKind::Convolution,
            "none" => ControllerKind::None,
            other => return Err(Error::Config(format!("[controller].kind unknown: {other}"))),
        };
        let observer = match self.observer.kind.as_str() {
            "adaptive" => ObserverKind::Adaptive,
            "none" => ObserverKind::None,
            other => return Err(Error::Config(format!("[observer].kind unknown: {other}"))),
        };
        let transport = TransportKernel::new(self.controller.l_hat_gamma)
            .map_err(|e| Error::Config(format!("[controller].l_hat_gamma: {e}")))?;

        let nx = grid.nx;
        let dx = grid.dx();
        let two_pi = 2.0 * std::f64::consts::PI;
        let source: Vec<f64> = match self.source.profile.as_str() {
            "zero" => vec![0.0; nx],
            "sine_normalized" => {
                // sin(2 pi x / L) normalized to unit L1 norm: ||sin||_1 = 2L/pi.
                let norm = 2.0 * p.length / std::f64::consts::PI;
                (0..nx)
                    .map(|i| self.source.scale * (two_pi * (i as f64 * dx) / p.length).sin() / norm)
                    .collect()
            }
            other => return Err(Error::Config(format!("[source].profile unknown: {other}"))),
        };
        let p_hat0: Vec<f64> = match self.observer.p_hat0.as_str() {
            "zero" => vec![0.0; nx],
            "sine" => (0..nx)
                .map(|i| self.observer.p_hat0_amplitude * (two_pi * (i as f64 * dx) / p.length).sin())
                .collect(),
            other => return Err(Error::Config(format!("[observer].p_hat0 unknown: {other}"))),
        };
        if self.noise.sigma < 0.0 {
            return Err(Error::Config(format!("[noise].sigma must be >= 0, got {}", self.noise.sigma)));
        }

        Ok(Scenario {
            params,
            alpha,
            grid,
            exo,
            controller,
            kernel_m: self.controller.kernel_m,
            transport,
            observer,
            p_hat0,
            source,
            noise_sigma: self.noise.sigma,
            seed: self.seed,
            config: self.clone(),
        })
    }
}

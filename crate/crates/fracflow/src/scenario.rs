//! Closed-loop orchestration: plant + controller + observer stepping,
//! per-step series, metrics, and the run-directory output files.

use crate::backstepping::{control_convolution, control_volterra, solve_m, MCurve, PolyKernel, TransportKernel};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::exosystem::Exosystem;
use crate::fdm::{Field, Grid, ImplicitStepper};
use crate::fractional::FractionalOrder;
use crate::green::PhysicalParams;
use crate::observer::{compute_gains, ObserverState, ObserverStepper};
use crate::report::{metrics_from_rows, Metrics, ObsRow, TrackRow};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Volterra,
    Convolution,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObserverKind {
    Adaptive,
    None,
}

/// What the driver runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Plant under the exosystem disturbances, zero control.
    OpenLoop,
    /// Controller fed by the true plant state (no observer).
    Track,
    /// Observer watching the plant under a known (zero) control.
    Observe,
    /// Controller fed by the observer estimate.
    ClosedLoop,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::OpenLoop => "simulate",
            RunMode::Track => "track",
            RunMode::Observe => "observe",
            RunMode::ClosedLoop => "closed-loop",
        }
    }
}

/// Fully validated runtime scenario (see [`Config::build`]).
pub struct Scenario {
    pub params: PhysicalParams,
    pub alpha: FractionalOrder,
    pub grid: Grid,
    pub exo: Exosystem,
    pub controller: ControllerKind,
    pub kernel_m: u32,
    pub transport: TransportKernel,
    pub observer: ObserverKind,
    pub p_hat0: Vec<f64>,
    pub source: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
    pub config: Config,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub mode: String,
    pub seed: u64,
    pub cfl_diagnostic: f64,
    pub metrics: Metrics,
    /// Configuration echo: the run is reproducible from this block alone.
    pub provenance: Config,
}

pub struct RunArtifacts {
    pub field: Field,
    pub tracking: Vec<TrackRow>,
    pub observer_rows: Vec<ObsRow>,
    pub report: RunReport,
}

/// Run one scenario in the given mode.
pub fn run(sc: &Scenario, mode: RunMode) -> Result<RunArtifacts> {
    sc.params.validate()?;
    let grid = sc.grid;
    let nx = grid.nx;
    let dx = grid.dx();
    let dt = grid.dt();
    let inv_crho = 1.0 / (sc.params.c_compress * sc.params.rho);

    let use_controller = !matches!(mode, RunMode::OpenLoop | RunMode::Observe) && sc.controller != ControllerKind::None;
    let use_observer = matches!(mode, RunMode::Observe | RunMode::ClosedLoop) && sc.observer == ObserverKind::Adaptive;
    if matches!(mode, RunMode::ClosedLoop) && sc.observer != ObserverKind::Adaptive {
        return Err(Error::Config("closed-loop mode needs [observer].kind = \"adaptive\"".into()));
    }
    if (use_controller || use_observer) && !sc.params.permeability.is_constant() {
        return Err(Error::Config("controller/observer require constant permeability".into()));
    }

    let kernel = PolyKernel::new(sc.kernel_m)?;
    let m_curve: Option<MCurve> = if use_controller {
        Some(solve_m(&sc.exo, &kernel, sc.alpha, &sc.params, &sc.source, nx, sc.transport)?)
    } else {
        None
    };

    let constant_k = sc.params.permeability.is_constant();
    let plant_step = if constant_k {
        Some(ImplicitStepper::new(sc.alpha, &grid, sc.params.diffusivity(0.0), dt, None, &[])?)
    } else {
        None
    };

    let mut obs_stepper: Option<ObserverStepper> = None;
    let mut obs_state: Option<ObserverState> = None;
    if use_observer {
        let gains = compute_gains(&kernel, sc.alpha, nx, dx)?;
        obs_stepper = Some(ObserverStepper::new(gains, sc.source.clone(), sc.alpha, &sc.params, &grid)?);
        obs_state = Some(ObserverState::new(sc.p_hat0.clone(), nx));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut field = Field::zeros(grid);
    let mut tracking = Vec::with_capacity(grid.nt);
    let mut observer_rows = Vec::with_capacity(grid.nt);
    // Boundary history (control values) for the convolution feedback.
    let mut u_history: Vec<f64> = Vec::with_capacity(grid.nt);
    u_history.push(0.0);

    let gradient_at_outlet = |col: &[f64]| -> f64 {
        (3.0 * col[nx - 1] - 4.0 * col[nx - 2] + col[nx - 3]) / (2.0 * dx)
    };
    let sup_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));

    // Initial rows (t = 0): plant starts at rest.
    {
        let sig0 = sc.exo.signals(0.0)?;
        let y0 = gradient_at_outlet(field.col(0));
        tracking.push(TrackRow { t: 0.0, u: 0.0, y: y0, y_d: sig0.y_d, e: y0 - sig0.y_d });
        if let Some(st) = &obs_state {
            let theta_true = Vector2::new(sig0.d1, sig0.d2);
            let tt = st.theta_hat - theta_true;
            let w0 = (st.p_hat[0] - field.col(0)[0]) - st.lambda1[0] * tt[0] - st.lambda2[0] * tt[1];
            observer_rows.push(ObsRow {
                t: 0.0,
                ptilde_sup: sup_diff(&st.p_hat, field.col(0)),
                d1: sig0.d1,
                d1_hat: st.theta_hat[0],
                d2: sig0.d2,
                d2_hat: st.theta_hat[1],
                w0,
                v1: st.lyapunov_v1(theta_true)?,
            });
        }
    }

    for j in 1..grid.nt {
        let t = grid.t(j);
        let v = sc.exo.evolve(t)?;
        let d1 = sc.exo.a.dot(&v);
        let d2 = sc.exo.b.dot(&v);
        let y_d = sc.exo.c.dot(&v);

        // Control for this step.
        let u_next = if use_controller {
            let m = m_curve.as_ref().unwrap();
            let state_view: Vec<f64> = match mode {
                RunMode::Track => {
                    let col = field.col(j - 1);
                    if sc.noise_sigma > 0.0 {
                        // The controller sees a noisy copy of the state; the
                        // plant itself stays unperturbed.
                        col.iter().map(|p| p + sc.noise_sigma * standard_normal(&mut rng)).collect()
                    } else {
                        col.to_vec()
                    }
                }
                RunMode::ClosedLoop => obs_state.as_ref().unwrap().p_hat.clone(),
                _ => unreachable!(),
            };
            match sc.controller {
                ControllerKind::Volterra => control_volterra(&state_view, &kernel, m, &v),
                ControllerKind::Convolution => control_convolution(&u_history, dt, t, &sc.transport, m, &v),
                ControllerKind::None => 0.0,
            }
        } else {
            0.0
        };
        u_history.push(u_next);

        // Plant step.
        let forcing: Vec<f64> = sc.source.iter().map(|f| inv_crho * d1 * f).collect();
        let next = match &plant_step {
            Some(stepper) => stepper.step(field.col(j - 1), &forcing, d2, u_next, j)?,
            None => {
                let stepper = ImplicitStepper::new(sc.alpha, &grid, sc.params.diffusivity(t), dt, None, &[])?;
                stepper.step(field.col(j - 1), &forcing, d2, u_next, j)?
            }
        };
        field.col_mut(j).copy_from_slice(&next);

        // Measurements at the new level. The discrete fractional trace at
        // x = 0 is identically zero, so y_m carries only noise.
        let (z_m, y_m) = if sc.noise_sigma > 0.0 {
            (
                field.col(j)[0] + sc.noise_sigma * standard_normal(&mut rng),
                sc.noise_sigma * standard_normal(&mut rng),
            )
        } else {
            (field.col(j)[0], 0.0)
        };

        if let (Some(stepper), Some(state)) = (&obs_stepper, obs_state.as_mut()) {
            stepper.step(state, z_m, y_m, u_next, j)?;
        }

        let y = gradient_at_outlet(field.col(j));
        tracking.push(TrackRow { t, u: u_next, y, y_d, e: y - y_d });
        if let Some(st) = &obs_state {
            let theta_true = Vector2::new(d1, d2);
            let tt = st.theta_hat - theta_true;
            let w0 = (st.p_hat[0] - field.col(j)[0]) - st.lambda1[0] * tt[0] - st.lambda2[0] * tt[1];
            observer_rows.push(ObsRow {
                t,
                ptilde_sup: sup_diff(&st.p_hat, field.col(j)),
                d1,
                d1_hat: st.theta_hat[0],
                d2,
                d2_hat: st.theta_hat[1],
                w0,
                v1: st.lyapunov_v1(theta_true)?,
            });
        }
    }

    let sup_p = field.sup_norm_overall();
    let metrics = metrics_from_rows(&tracking, &observer_rows, grid.t_final, sup_p);
    let report = RunReport {
        mode: mode.as_str().to_string(),
        seed: sc.seed,
        cfl_diagnostic: grid.cfl_diagnostic(&sc.params, sc.alpha),
        metrics,
        provenance: sc.config.clone(),
    };
    Ok(RunArtifacts { field, tracking, observer_rows, report })
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniform draws per sample keep the stream simple and
    // reproducible.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Write the run directory: field.csv, tracking.csv, observer.csv,
/// report.json, and a matplotlib script for the figures.
pub fn write_outputs(dir: &std::path::Path, artifacts: &RunArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("field.csv"), artifacts.field.to_csv())?;
    std::fs::write(dir.join("tracking.csv"), crate::report::tracking_to_csv(&artifacts.tracking))?;
    std::fs::write(dir.join("observer.csv"), crate::report::observer_to_csv(&artifacts.observer_rows))?;
    let json = serde_json::to_string_pretty(&artifacts.report)
        .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
    std::fs::write(dir.join("report.json"), json)?;
    std::fs::write(dir.join("plot_run.py"), PLOT_SCRIPT)?;
    Ok(())
}

/// Emit only the plotting script (the `plots` subcommand for existing runs).
pub fn write_plot_script(dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("plot_run.py"), PLOT_SCRIPT)?;
    Ok(())
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot a fracflow run directory (tab-separated CSVs)."""
import os
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))

def load(name):
    path = os.path.join(here, name)
    return np.genfromtxt(path, delimiter="\t", names=True) if os.path.exists(path) else None

tracking = load("tracking.csv")
observer = load("observer.csv")

if tracking is not None and tracking.size:
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    axes[0].plot(tracking["t"], tracking["y"], label="y(t)")
    axes[0].plot(tracking["t"], tracking["y_d"], "--", label="y_d(t)")
    axes[0].set_xlabel("t"); axes[0].legend(); axes[0].set_title("reference tracking")
    axes[1].plot(tracking["t"], tracking["e"])
    axes[1].set_xlabel("t"); axes[1].set_title("tracking error e(t)")
    fig.tight_layout(); fig.savefig(os.path.join(here, "tracking.png"), dpi=150)

if observer is not None and observer.size:
    fig, axes = plt.subplots(1, 3, figsize=(15, 4))
    axes[0].semilogy(observer["t"], np.maximum(observer["ptilde_sup"], 1e-18))
    axes[0].set_xlabel("t"); axes[0].set_title("state estimation error sup-norm")
    axes[1].plot(observer["t"], observer["d1"], label="d1")
    axes[1].plot(observer["t"], observer["d1_hat"], "--", label="d1 estimate")
    axes[1].plot(observer["t"], observer["d2"], label="d2")
    axes[1].plot(observer["t"], observer["d2_hat"], "--", label="d2 estimate")
    axes[1].set_xlabel("t"); axes[1].legend(); axes[1].set_title("disturbance estimation")
    axes[2].semilogy(observer["t"], np.maximum(observer["v1"], 1e-18))
    axes[2].set_xlabel("t"); axes[2].set_title("V1(t)")
    fig.tight_layout(); fig.savefig(os.path.join(here, "observer.png"), dpi=150)

field_path = os.path.join(here, "field.csv")
if os.path.exists(field_path):
    raw = np.loadtxt(field_path, delimiter="\t", skiprows=1)
    ts, lattice = raw[:, 0], raw[:, 1:]
    with open(field_path) as fh:
        xs = np.array(fh.readline().split("\t")[1:], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    pcm = ax.pcolormesh(xs, ts, lattice, shading="auto")
    fig.colorbar(pcm, ax=ax, label="P(x, t)")
    ax.set_xlabel("x"); ax.set_ylabel("t"); ax.set_title("pressure field")
    fig.tight_layout(); fig.savefig(os.path.join(here, "field.png"), dpi=150)

print("plots written next to the CSV files")
"#;

//! Run records: per-step series rows, summary metrics, and the parsers that
//! recompute every metric from the emitted CSV files.

use crate::error::{Error, Result};
use crate::fdm::format_sig17;
use serde::{Deserialize, Serialize};

/// One tracking row: time, control, output, reference, tracking error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub t: f64,
    pub u: f64,
    pub y: f64,
    pub y_d: f64,
    pub e: f64,
}

/// One observer row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsRow {
    pub t: f64,
    pub ptilde_sup: f64,
    pub d1: f64,
    pub d1_hat: f64,
    pub d2: f64,
    pub d2_hat: f64,
    pub w0: f64,
    pub v1: f64,
}

/// Summary metrics of one run; every entry is recomputable from the CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Peak |e(t)| over the whole run.
    pub peak_abs_e: f64,
    /// Max |e(t)| over the final third of the horizon.
    pub tail_max_abs_e: f64,
    /// tail / peak ratio (1.0 when the peak is zero).
    pub tail_ratio: f64,
    pub max_abs_u: f64,
    pub initial_ptilde_sup: f64,
    pub final_ptilde_sup: f64,
    /// final / initial ratio of the state-estimation error norm.
    pub ptilde_ratio: f64,
    /// Least-squares slope of `ln ||thetatilde||` over the final two thirds.
    pub theta_tilde_slope: f64,
    /// Fraction of steps where the discrete Lyapunov inequality
    /// `dV1/dt <= -V1 + w(0,t)^2` failed beyond tolerance.
    pub lyapunov_violation_fraction: f64,
    /// Sup over the run of `||P(., t)||_inf` (from the field lattice).
    pub sup_p_overall: f64,
}

/// Compute the summary metrics from series rows plus the field sup-norm.
pub fn metrics_from_rows(tracking: &[TrackRow], observer: &[ObsRow], t_final: f64, sup_p_overall: f64) -> Metrics {
    let tail_start = t_final * 2.0 / 3.0;
    let mut peak_abs_e = 0.0f64;
    let mut tail_max_abs_e = 0.0f64;
    let mut max_abs_u = 0.0f64;
    for r in tracking {
        peak_abs_e = peak_abs_e.max(r.e.abs());
        max_abs_u = max_abs_u.max(r.u.abs());
        if r.t >= tail_start {
            tail_max_abs_e = tail_max_abs_e.max(r.e.abs());
        }
    }
    let tail_ratio = if peak_abs_e > 0.0 { tail_max_abs_e / peak_abs_e } else { 1.0 };

    let initial_ptilde_sup = observer.first().map_or(0.0, |r| r.ptilde_sup);
    let final_ptilde_sup = observer.last().map_or(0.0, |r| r.ptilde_sup);
    let ptilde_ratio = if initial_ptilde_sup > 0.0 { final_ptilde_sup / initial_ptilde_sup } else { 1.0 };

    // Log-linear fit of ||thetatilde|| over t >= t_final/3.
    let fit_start = t_final / 3.0;
    let mut n = 0.0f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for r in observer {
        if r.t < fit_start {
            continue;
        }
        let norm = ((r.d1_hat - r.d1).powi(2) + (r.d2_hat - r.d2).powi(2)).sqrt().max(1e-300);
        let y = norm.ln();
        n += 1.0;
        sx += r.t;
        sy += y;
        sxx += r.t * r.t;
        sxy += r.t * y;
    }
    let theta_tilde_slope = if n >= 2.0 { (n * sxy - sx * sy) / (n * sxx - sx * sx) } else { 0.0 };

    // Discrete Lyapunov inequality with a quadrature-tolerance slack.
    let mut violations = 0usize;
    let mut checks = 0usize;
    for win in observer.windows(2) {
        let (a, b) = (win[0], win[1]);
        let dt = b.t - a.t;
        if dt <= 0.0 {
            continue;
        }
        let dv = (b.v1 - a.v1) / dt;
        let bound = -a.v1 + a.w0 * a.w0;
        let tol = 1e-9 + 1e-6 * (a.v1.abs() + a.w0 * a.w0) + 0.5 * dt * (a.v1.abs() + 1.0);
        checks += 1;
        if dv > bound + tol {
            violations += 1;
        }
    }
    let lyapunov_violation_fraction = if checks > 0 { violations as f64 / checks as f64 } else { 0.0 };

    Metrics {
        peak_abs_e,
        tail_max_abs_e,
        tail_ratio,
        max_abs_u,
        initial_ptilde_sup,
        final_ptilde_sup,
        ptilde_ratio,
        theta_tilde_slope,
        lyapunov_violation_fraction,
        sup_p_overall,
    }
}

pub fn tracking_to_csv(rows: &[TrackRow]) -> String {
    let mut out = String::from("t\tu\ty\ty_d\te\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            format_sig17(r.t),
            format_sig17(r.u),
            format_sig17(r.y),
            format_sig17(r.y_d),
            format_sig17(r.e)
        ));
    }
    out
}

pub fn observer_to_csv(rows: &[ObsRow]) -> String {
    let mut out = String::from("t\tptilde_sup\td1\td1_hat\td2\td2_hat\tw0\tv1\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            format_sig17(r.t),
            format_sig17(r.ptilde_sup),
            format_sig17(r.d1),
            format_sig17(r.d1_hat),
            format_sig17(r.d2),
            format_sig17(r.d2_hat),
            format_sig17(r.w0),
            format_sig17(r.v1)
        ));
    }
    out
}

fn parse_floats(line: &str, expect: usize, what: &str) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> = line.split('\t').map(|c| c.parse::<f64>()).collect();
    let vals = vals.map_err(|e| Error::Config(format!("bad {what} row: {e}")))?;
    if vals.len() != expect {
        return Err(Error::Config(format!("{what} row has {} cells, expected {expect}", vals.len())));
    }
    Ok(vals)
}

pub fn parse_tracking_csv(text: &str) -> Result<Vec<TrackRow>> {
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let v = parse_floats(line, 5, "tracking")?;
        rows.push(TrackRow { t: v[0], u: v[1], y: v[2], y_d: v[3], e: v[4] });
    }
    Ok(rows)
}

pub fn parse_observer_csv(text: &str) -> Result<Vec<ObsRow>> {
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let v = parse_floats(line, 8, "observer")?;
        rows.push(ObsRow {
            t: v[0],
            ptilde_sup: v[1],
            d1: v[2],
            d1_hat: v[3],
            d2: v[4],
            d2_hat: v[5],
            w0: v[6],
            v1: v[7],
        });
    }
    Ok(rows)
}

/// Parse the field lattice CSV and return the overall sup-norm.
pub fn field_csv_sup(text: &str) -> Result<f64> {
    let mut sup = 0.0f64;
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        for cell in line.split('\t').skip(1) {
            let v: f64 = cell.parse().map_err(|e| Error::Config(format!("bad field cell: {e}")))?;
            sup = sup.max(v.abs());
        }
    }
    Ok(sup)
}

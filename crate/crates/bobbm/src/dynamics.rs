//! The truncated vector field, the flow map, and the linear propagator.
//!
//! The truncated dynamics is `∂_t u = -(1+|D_x|)^{-1} ∂_x P_{<=N}(u + u²)`
//! with both state and nonlinearity sharply projected to `|n| <= N`. Its
//! linear symbol `i n/(1+|n|)` is bounded by 1, so the system is non-stiff
//! and a fixed-step classical fourth-order integrator suffices at any cutoff.
//! Negative times integrate the negated field, keeping step logic uniform.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spectral::{multiply, FourierField};
use crate::{Error, Result};

/// Integrator identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Method {
    /// Classical explicit Runge-Kutta of order 4 with fixed step.
    #[default]
    Rk4,
    /// Linear propagator only (nonlinearity disabled); exact, for diagnostics.
    LinearOnly,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "linear" => Ok(Method::LinearOnly),
            other => Err(Error::InvalidParam(format!("unknown method {other}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Rk4 => write!(f, "rk4"),
            Method::LinearOnly => write!(f, "linear"),
        }
    }
}

/// Time-integration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    /// Step size in model time; must be positive.
    pub dt: f64,
    pub method: Method,
    /// Safety bound on |t|.
    pub max_t: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { dt: 1e-3, method: Method::Rk4, max_t: 16.0 }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParam(format!("dt must be positive, got {}", self.dt)));
        }
        if self.max_t < self.dt {
            return Err(Error::InvalidParam("max_t must be at least dt".into()));
        }
        Ok(())
    }
}

/// Right-hand side `F(u) = -(1+|D|)^{-1} ∂_x P_{<=N}(u + u²)`, i.e.
/// `F̂(n) = -(i n/(1+|n|)) (û(n) + (P_{<=N} u²)^(n))` for `0 < |n| <= N`.
/// The input is projected to `N` first; the output carries no zero mode by
/// construction (the multiplier vanishes there).
pub fn vector_field(u: &FourierField, n: usize) -> FourierField {
    let w = u.project_leq(n);
    let sq = multiply(&w, &w).project_leq(n);
    let mut coeffs = Vec::with_capacity(n);
    for k in 1..=n as i64 {
        let sym = Complex64::new(0.0, -(k as f64) / (1.0 + k as f64));
        coeffs.push(sym * (w.coeff(k) + sq.coeff(k)));
    }
    FourierField::from_coeffs(coeffs)
}

/// Linear propagator `S(t)`: each coefficient multiplied by the unit-modulus
/// phase `e^{i t n/(1+|n|)}`. Preserves every Sobolev norm exactly.
pub fn linear_propagator(u: &FourierField, t: f64) -> FourierField {
    let coeffs = u
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let n = (k + 1) as f64;
            c * Complex64::from_polar(1.0, t * n / (1.0 + n))
        })
        .collect();
    FourierField::from_coeffs(coeffs)
}

/// Recorded trajectory: state at every accepted step, first node at `t = 0`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<FourierField>,
}

impl Trajectory {
    /// Signed node spacing (zero for a single-node trajectory).
    pub fn step(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }
}

fn rk4_step(u: &FourierField, n: usize, h: f64, sign: f64) -> FourierField {
    let k1 = vector_field(u, n).scaled(sign);
    let k2 = vector_field(&u.add_scaled(h / 2.0, &k1), n).scaled(sign);
    let k3 = vector_field(&u.add_scaled(h / 2.0, &k2), n).scaled(sign);
    let k4 = vector_field(&u.add_scaled(h, &k3), n).scaled(sign);
    let mut out = u.add_scaled(h / 6.0, &k1);
    out = out.add_scaled(h / 3.0, &k2);
    out = out.add_scaled(h / 3.0, &k3);
    out.add_scaled(h / 6.0, &k4)
}

fn flow_impl(
    u: &FourierField,
    t: f64,
    n: usize,
    params: &FlowParams,
    mut record: Option<&mut Trajectory>,
) -> Result<FourierField> {
    params.validate()?;
    if t.abs() > params.max_t {
        return Err(Error::InvalidParam(format!(
            "|t| = {} exceeds max_t = {}",
            t.abs(),
            params.max_t
        )));
    }
    let mut state = u.project_leq(n);
    if state.max_freq() < n {
        let mut padded = FourierField::zeros(n);
        for k in 1..=state.max_freq() {
            padded.set_coeff(k, state.coeff(k as i64));
        }
        state = padded;
    }
    if let Some(rec) = record.as_deref_mut() {
        rec.times.push(0.0);
        rec.states.push(state.clone());
    }
    if t == 0.0 {
        return Ok(state);
    }
    let steps = ((t.abs() / params.dt).round() as usize).max(1);
    let h = t.abs() / steps as f64;
    let sign = t.signum();
    for k in 1..=steps {
        state = match params.method {
            Method::Rk4 => rk4_step(&state, n, h, sign),
            Method::LinearOnly => linear_propagator(&state, sign * h),
        };
        let now = sign * h * k as f64;
        if !state.all_finite() {
            return Err(Error::FlowDiverged { t: now });
        }
        if let Some(rec) = record.as_deref_mut() {
            rec.times.push(now);
            rec.states.push(state.clone());
        }
    }
    Ok(state)
}

/// Flow map `Φ_t^N` applied to `P_{<=N} u`.
pub fn flow(u: &FourierField, t: f64, n: usize, params: &FlowParams) -> Result<FourierField> {
    flow_impl(u, t, n, params, None)
}

/// Flow with every step recorded, for time quadrature along the trajectory.
pub fn flow_trajectory(
    u: &FourierField,
    t: f64,
    n: usize,
    params: &FlowParams,
) -> Result<Trajectory> {
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new() };
    flow_impl(u, t, n, params, Some(&mut traj))?;
    Ok(traj)
}

/// Composite Simpson on equispaced nodes with signed spacing `h`; an odd
/// interval count is finished with the 3/8 rule. One or two nodes fall back
/// to the trapezoid.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let m = values.len().saturating_sub(1);
    match m {
        0 => 0.0,
        1 => h * (values[0] + values[1]) / 2.0,
        _ => {
            let even_part = if m % 2 == 0 { m } else { m - 3 };
            let mut acc = 0.0;
            if even_part >= 2 {
                acc += values[0] + values[even_part];
                let mut odd = 0.0;
                let mut even = 0.0;
                for k in 1..even_part {
                    if k % 2 == 1 {
                        odd += values[k];
                    } else {
                        even += values[k];
                    }
                }
                acc = (acc + 4.0 * odd + 2.0 * even) * h / 3.0;
            }
            if m % 2 == 1 {
                let tail = &values[even_part..];
                acc += h * 3.0 / 8.0 * (tail[0] + 3.0 * tail[1] + 3.0 * tail[2] + tail[3]);
            }
            acc
        }
    }
}

/// Finite-difference divergence of the truncated vector field in the real
/// coordinates `(Re û(n), Im û(n))`: the trace of the Jacobian, centred
/// differences of width `step`. The analytic value is exactly zero.
pub fn divergence_fd(u: &FourierField, n: usize, step: f64) -> f64 {
    let base = u.project_leq(n);
    let mut div = 0.0;
    for k in 1..=n {
        for part in 0..2 {
            let delta = if part == 0 {
                Complex64::new(step, 0.0)
            } else {
                Complex64::new(0.0, step)
            };
            let mut up = base.clone();
            up.set_coeff(k, base.coeff(k as i64) + delta);
            let mut dn = base.clone();
            dn.set_coeff(k, base.coeff(k as i64) - delta);
            let fu = vector_field(&up, n);
            let fd = vector_field(&dn, n);
            let diff = (fu.coeff(k as i64) - fd.coeff(k as i64)) / (2.0 * step);
            div += if part == 0 { diff.re } else { diff.im };
        }
    }
    div
}

/// Trajectory dump: one JSON line per saved step, `{"t":…, "field":{…},
/// "energy":…}`.
pub fn write_trajectory_jsonl(traj: &Trajectory, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut file = std::fs::File::create(path)
        .map_err(|e| Error::OutputWrite { path: path.display().to_string(), source: e })?;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let line = serde_json::json!({
            "t": t,
            "field": state,
            "energy": state.energy(),
        });
        writeln!(file, "{line}")
            .map_err(|e| Error::OutputWrite { path: path.display().to_string(), source: e })?;
    }
    Ok(())
}

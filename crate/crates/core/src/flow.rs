//! Time integration by exponential Euler.
//!
//! One step maps each coordinate through
//! `u_i ← e^{−λ_i h} u_i + (1 − e^{−λ_i h}) / λ_i · F(u)_i`,
//! which is the one-step discretization of the variation-of-constants
//! formula, exact whenever `F` is constant along the step. The linear part
//! is reproduced exactly for any `h`, and the amplification factor
//! `e^{−λ_i h} ≤ 1` keeps the stiff Q-modes unconditionally stable.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::SpectralProblem;
use crate::state::StateVector;

/// A time-stamped solution curve with uniform step `h` (the last step may be
/// short so the final time is hit exactly).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub step: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory is nonempty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is nonempty")
    }

    /// Index of the grid time closest to `t`, if within `tol`.
    pub fn index_of_time(&self, t: f64, tol: f64) -> Option<usize> {
        let mut best = None;
        let mut best_err = tol;
        for (i, &s) in self.times.iter().enumerate() {
            let err = (s - t).abs();
            if err <= best_err {
                best_err = err;
                best = Some(i);
            }
        }
        best
    }

    /// Shift all times by `offset` (used to reindex boundary-value solutions).
    pub fn shift_times(&mut self, offset: f64) {
        for t in self.times.iter_mut() {
            *t += offset;
        }
    }
}

/// Per-eigenvalue step factors: `decay = e^{−λh}`, `forcing = (1 − e^{−λh})/λ`.
struct StepFactors {
    decay: Vec<f64>,
    forcing: Vec<f64>,
}

impl StepFactors {
    fn new(problem: &SpectralProblem, h: f64) -> Self {
        let mut decay = Vec::with_capacity(problem.dim());
        let mut forcing = Vec::with_capacity(problem.dim());
        for &lam in problem.eigenvalues() {
            let e = (-lam * h).exp();
            decay.push(e);
            // -expm1 keeps precision when λh is tiny.
            forcing.push(-(-lam * h).exp_m1() / lam);
        }
        Self { decay, forcing }
    }

    fn apply(&self, problem: &SpectralProblem, u: &StateVector) -> Result<StateVector> {
        let f = problem.eval_nonlinearity(u)?;
        let coords = u
            .coords()
            .iter()
            .zip(f.coords())
            .zip(self.decay.iter().zip(&self.forcing))
            .map(|((ui, fi), (d, g))| d * ui + g * fi)
            .collect();
        Ok(StateVector::new(coords))
    }
}

/// One exponential-Euler step of size `h`.
pub fn step(problem: &SpectralProblem, u: &StateVector, h: f64) -> Result<StateVector> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step size must be positive, got {h}")));
    }
    if !u.is_finite() {
        return Err(Error::NonFinite("integrator input state".into()));
    }
    StepFactors::new(problem, h).apply(problem, u)
}

/// Number of full steps and the (possibly zero) trailing short step.
fn step_plan(t_final: f64, h: f64) -> (usize, f64) {
    let n_full = (t_final / h + 1e-9).floor() as usize;
    let remainder = t_final - n_full as f64 * h;
    if remainder > 1e-12 * t_final.max(1.0) {
        (n_full, remainder)
    } else {
        (n_full, 0.0)
    }
}

/// Integrate from time 0 to `t_final`, recording every step.
pub fn integrate(
    problem: &SpectralProblem,
    u0: &StateVector,
    t_final: f64,
    h: f64,
) -> Result<Trajectory> {
    if !(t_final > 0.0) {
        return Err(Error::Domain(format!(
            "final time must be positive, got {t_final}"
        )));
    }
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step size must be positive, got {h}")));
    }
    if !u0.is_finite() {
        return Err(Error::NonFinite("integrator initial state".into()));
    }
    let (n_full, remainder) = step_plan(t_final, h);
    let factors = StepFactors::new(problem, h);
    let mut times = Vec::with_capacity(n_full + 2);
    let mut states = Vec::with_capacity(n_full + 2);
    times.push(0.0);
    states.push(u0.clone());
    let mut u = u0.clone();
    for i in 1..=n_full {
        u = factors.apply(problem, &u)?;
        if !u.is_finite() {
            return Err(Error::NonFinite(format!("state at step {i}")));
        }
        times.push(if i == n_full && remainder == 0.0 {
            t_final
        } else {
            i as f64 * h
        });
        states.push(u.clone());
    }
    if remainder > 0.0 {
        let last = StepFactors::new(problem, remainder);
        u = last.apply(problem, &u)?;
        if !u.is_finite() {
            return Err(Error::NonFinite("state at final short step".into()));
        }
        times.push(t_final);
        states.push(u);
    }
    Ok(Trajectory {
        times,
        states,
        step: h,
    })
}

/// Endpoint of the flow after time `t`; `t = 0` returns the initial state.
pub fn flow_map(
    problem: &SpectralProblem,
    u0: &StateVector,
    t: f64,
    h: f64,
) -> Result<StateVector> {
    if t == 0.0 {
        return Ok(u0.clone());
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("flow time must be nonnegative, got {t}")));
    }
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step size must be positive, got {h}")));
    }
    if !u0.is_finite() {
        return Err(Error::NonFinite("integrator initial state".into()));
    }
    let (n_full, remainder) = step_plan(t, h);
    let factors = StepFactors::new(problem, h);
    let mut u = u0.clone();
    for i in 0..n_full {
        u = factors.apply(problem, &u)?;
        if !u.is_finite() {
            return Err(Error::NonFinite(format!("state at step {}", i + 1)));
        }
    }
    if remainder > 0.0 {
        u = StepFactors::new(problem, remainder).apply(problem, &u)?;
        if !u.is_finite() {
            return Err(Error::NonFinite("state at final short step".into()));
        }
    }
    Ok(u)
}

/// Write a trajectory as CSV with header `t,x1..xM`. Floats use the shortest
/// representation that round-trips, so read-back is lossless.
pub fn write_trajectory_csv<P: AsRef<Path>>(trajectory: &Trajectory, path: P) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let dim = trajectory
        .states
        .first()
        .map(|s| s.dim())
        .unwrap_or_default();
    let mut header = vec!["t".to_string()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    writer.write_record(&header)?;
    for (t, state) in trajectory.times.iter().zip(&trajectory.states) {
        let mut record = vec![t.to_string()];
        record.extend(state.coords().iter().map(|x| x.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Read a trajectory written by [`write_trajectory_csv`].
pub fn read_trajectory_csv<P: AsRef<Path>>(path: P) -> Result<Trajectory> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut times = Vec::new();
    let mut states = Vec::new();
    for record in reader.records() {
        let record = record?;
        let mut fields = record.iter();
        let t: f64 = fields
            .next()
            .ok_or_else(|| Error::Config("empty CSV record".into()))?
            .parse()
            .map_err(|e| Error::Config(format!("bad time field: {e}")))?;
        let coords: std::result::Result<Vec<f64>, _> = fields.map(str::parse).collect();
        times.push(t);
        states.push(StateVector::new(coords.map_err(|e| {
            Error::Config(format!("bad coordinate field: {e}"))
        })?));
    }
    let step = if times.len() >= 2 {
        times[1] - times[0]
    } else {
        0.0
    };
    Ok(Trajectory {
        times,
        states,
        step,
    })
}

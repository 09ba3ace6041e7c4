//! Backward bounded solutions by shooting.
//!
//! The two-point problem — hit a target `p₀` in the P-modes at the end of an
//! `n`-unit window while the Q-modes start from zero — is integrated forward
//! on `[0, n]` and reindexed to `[−n, 0]`, which sidesteps backward
//! integration of the stiff Q-modes. Newton iteration acts on the P-endpoint
//! map; when it stagnates, the horizon is grown one unit at a time and each
//! solution warm-starts the next horizon. Multistart over seeded initial
//! guesses exposes multiple branches of the set-valued endpoint map `Φ`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{flow_map, integrate, Trajectory};
use crate::problem::{sample_in_ball, NonlinearityKind, SpectralProblem};
use crate::state::{distance, norm, sub};

/// Radius of the containment ball for horizon-`n` shooting with target
/// norm `|p₀|`: `2 e^{n λ_N} (R + |p₀|)`.
pub fn bn_radius(problem: &SpectralProblem, n: usize, p0_norm: f64) -> f64 {
    2.0 * (n as f64 * problem.lambda_n()).exp() * (problem.r_trunc() + p0_norm)
}

/// P-endpoint of the flow started at `(p_init, 0)` after time `n`.
pub fn shooting_map(
    problem: &SpectralProblem,
    p_init: &[f64],
    n: usize,
    h: f64,
) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let u0 = problem.embed_p(p_init)?;
    if !u0.is_finite() {
        return Err(Error::NonFinite("shooting start".into()));
    }
    let u = flow_map(problem, &u0, n as f64, h)?;
    Ok(problem.project_p(&u))
}

/// A solved (or best-effort) boundary value problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingResult {
    pub horizon_n: usize,
    pub p0_target: Vec<f64>,
    /// Found P-value at time `−n`.
    pub p_minus_n: Vec<f64>,
    /// `|p(0) − p₀|`, re-evaluated on the final trajectory.
    pub residual: f64,
    /// Solution on `[−n, 0]`.
    pub trajectory: Trajectory,
    pub branch_id: usize,
    pub converged: bool,
    pub newton_iters: usize,
}

/// Newton / continuation options for a single shoot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 30,
        }
    }
}

fn clamp_into_ball(p: &mut [f64], radius: f64) {
    let n = norm(p);
    if n > radius {
        let s = 0.99 * radius / n;
        for x in p.iter_mut() {
            *x *= s;
        }
    }
}

/// Solve `jac · x = rhs` for small systems by Gaussian elimination with
/// partial pivoting. Returns `None` when the pivot degenerates.
fn solve_dense(jac: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut a: Vec<Vec<f64>> = jac.iter().map(|row| row.clone()).collect();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let (pivot, &pv) = a
            .iter()
            .enumerate()
            .skip(col)
            .map(|(i, row)| (i, &row[col]))
            .max_by(|x, y| x.1.abs().partial_cmp(&y.1.abs()).unwrap())?;
        if pv.abs() < 1e-300 || !pv.is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for i in col + 1..n {
            let f = a[i][col] / a[col][col];
            for j in col..n {
                a[i][j] -= f * a[col][j];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
        if !x[i].is_finite() {
            return None;
        }
    }
    Some(x)
}

/// Levenberg-damped solve of `(JᵀJ + µI) x = −Jᵀ r`.
fn solve_damped(jac: &[Vec<f64>], r: &[f64], mu: f64) -> Option<Vec<f64>> {
    let n = r.len();
    let mut jtj = vec![vec![0.0; n]; n];
    let mut jtr = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += jac[k][i] * jac[k][j];
            }
            jtj[i][j] = s + if i == j { mu } else { 0.0 };
        }
        let mut s = 0.0;
        for k in 0..n {
            s += jac[k][i] * r[k];
        }
        jtr[i] = -s;
    }
    solve_dense(&jtj, &jtr)
}

struct NewtonOutcome {
    p: Vec<f64>,
    residual_norm: f64,
    iters: usize,
    converged: bool,
}

fn newton_shoot(
    problem: &SpectralProblem,
    p0: &[f64],
    n: usize,
    guess: &[f64],
    h: f64,
    opts: &ShootOptions,
) -> Result<NewtonOutcome> {
    let dim = p0.len();
    let ball = bn_radius(problem, n, norm(p0));
    let mut p = guess.to_vec();
    clamp_into_ball(&mut p, ball);
    let residual = |p: &[f64]| -> Result<Vec<f64>> {
        Ok(sub(&shooting_map(problem, p, n, h)?, p0))
    };
    let mut r = residual(&p)?;
    let mut rn = norm(&r);
    let mut iters = 0usize;
    while iters < opts.max_iters {
        if rn <= opts.tol {
            return Ok(NewtonOutcome {
                p,
                residual_norm: rn,
                iters,
                converged: true,
            });
        }
        iters += 1;
        // Jacobian by central differences, one column per P-direction.
        let fd = 1e-6 * (1.0 + norm(&p));
        let mut jac = vec![vec![0.0; dim]; dim];
        for j in 0..dim {
            let mut plus = p.clone();
            plus[j] += fd;
            let mut minus = p.clone();
            minus[j] -= fd;
            let rp = residual(&plus)?;
            let rm = residual(&minus)?;
            for i in 0..dim {
                jac[i][j] = (rp[i] - rm[i]) / (2.0 * fd);
            }
        }
        let neg_r: Vec<f64> = r.iter().map(|x| -x).collect();
        let mut delta = solve_dense(&jac, &neg_r);
        if delta.is_none() {
            delta = solve_damped(&jac, &r, 1e-12 + 1e-6 * rn);
        }
        let Some(delta) = delta else {
            break;
        };
        // Backtracking line search.
        let mut improved = false;
        let mut scale = 1.0;
        for _ in 0..10 {
            let mut candidate: Vec<f64> = p
                .iter()
                .zip(&delta)
                .map(|(a, d)| a + scale * d)
                .collect();
            clamp_into_ball(&mut candidate, ball);
            let rc = residual(&candidate)?;
            let rcn = norm(&rc);
            if rcn < rn {
                p = candidate;
                r = rc;
                rn = rcn;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(NewtonOutcome {
        converged: rn <= opts.tol,
        p,
        residual_norm: rn,
        iters,
    })
}

/// Linear backward extension of a P-point by one time unit.
fn backward_extend(problem: &SpectralProblem, p: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(problem.eigenvalues())
        .map(|(x, lam)| x * lam.exp())
        .collect()
}

fn build_result(
    problem: &SpectralProblem,
    p0: &[f64],
    n: usize,
    outcome: NewtonOutcome,
    h: f64,
) -> Result<ShootingResult> {
    let u0 = problem.embed_p(&outcome.p)?;
    let mut trajectory = integrate(problem, &u0, n as f64, h)?;
    trajectory.shift_times(-(n as f64));
    let endpoint_p = problem.project_p(trajectory.final_state());
    let residual = distance(&endpoint_p, p0);
    Ok(ShootingResult {
        horizon_n: n,
        p0_target: p0.to_vec(),
        p_minus_n: outcome.p,
        residual,
        trajectory,
        branch_id: 0,
        converged: outcome.converged,
        newton_iters: outcome.iters,
    })
}

/// Solve the horizon-`n` boundary value problem for the given target.
///
/// Tries Newton from `guess` directly; on stagnation falls back to horizon
/// continuation from 1 up to `n`, warm-starting each horizon with the
/// backward-extended solution of the previous one. A non-converged outcome
/// is returned as a result carrying the best residual, not as an error.
pub fn shoot(
    problem: &SpectralProblem,
    p0: &[f64],
    n: usize,
    guess: &[f64],
    h: f64,
    opts: &ShootOptions,
) -> Result<ShootingResult> {
    if n < 1 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    if p0.len() != problem.split_index() || guess.len() != problem.split_index() {
        return Err(Error::DimensionMismatch {
            expected: problem.split_index(),
            got: p0.len().max(guess.len()),
        });
    }
    let direct = newton_shoot(problem, p0, n, guess, h, opts)?;
    if direct.converged {
        return build_result(problem, p0, n, direct, h);
    }
    // Horizon continuation.
    let mut warm = backward_extend(problem, p0)[..p0.len()].to_vec();
    let mut best = direct;
    for m in 1..=n {
        let outcome = newton_shoot(problem, p0, m, &warm, h, opts)?;
        if !outcome.converged {
            if m == n && outcome.residual_norm < best.residual_norm {
                best = outcome;
            }
            break;
        }
        if m == n {
            return build_result(problem, p0, n, outcome, h);
        }
        warm = backward_extend(problem, &outcome.p)[..p0.len()].to_vec();
    }
    build_result(problem, p0, n, best, h)
}

/// One branch of the set-valued backward map at a target point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiBranch {
    pub branch_id: usize,
    /// Q-value at time 0 for the deepest horizon reached.
    pub q0: Vec<f64>,
    pub p_minus_n: Vec<f64>,
    /// Cauchy increments `|q_{n+1}(0) − q_n(0)|` across horizons.
    pub increments: Vec<f64>,
    pub converged: bool,
    pub residual: f64,
    pub horizon: usize,
}

/// The set of backward Q-values found at one P-target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiValue {
    pub p0: Vec<f64>,
    pub branches: Vec<PhiBranch>,
    pub horizon_used: usize,
    /// False when some horizon produced no converged start.
    pub complete: bool,
}

impl PhiValue {
    pub fn best_branch(&self) -> Option<&PhiBranch> {
        self.branches
            .iter()
            .filter(|b| b.converged)
            .min_by(|a, b| a.residual.partial_cmp(&b.residual).unwrap())
            .or_else(|| self.branches.first())
    }
}

/// Options for the multistart backward map evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiOptions {
    pub n_max: usize,
    pub n_starts: usize,
    pub seed: u64,
    pub h: f64,
    /// Cauchy-increment stopping tolerance per branch.
    pub tol: f64,
    pub shoot: ShootOptions,
}

impl Default for PhiOptions {
    fn default() -> Self {
        Self {
            n_max: 6,
            n_starts: 8,
            seed: 1,
            h: 1e-3,
            tol: 1e-6,
            shoot: ShootOptions::default(),
        }
    }
}

/// Evaluate the backward map at `p0` by multistart shooting over growing
/// horizons, clustering the endpoint Q-values into branches.
pub fn phi(problem: &SpectralProblem, p0: &[f64], opts: &PhiOptions) -> Result<PhiValue> {
    if opts.n_max < 2 {
        return Err(Error::Domain("n_max must be at least 2".into()));
    }
    if opts.n_starts < 1 {
        return Err(Error::Domain("need at least one start".into()));
    }
    if p0.len() != problem.split_index() {
        return Err(Error::DimensionMismatch {
            expected: problem.split_index(),
            got: p0.len(),
        });
    }
    // Branches distinguishable beyond integrator noise.
    let cluster_tol = 1e3 * opts.h;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let core_radius = 2.0 * (problem.r_trunc() + norm(p0));

    struct Branch {
        q0: Vec<f64>,
        p_minus: Vec<f64>,
        increments: Vec<f64>,
        converged: bool,
        residual: f64,
        horizon: usize,
    }
    let mut branches: Vec<Branch> = Vec::new();
    let mut horizon_used = 0usize;
    let mut complete = true;

    for n in 1..=opts.n_max {
        let mut guesses: Vec<Vec<f64>> = Vec::new();
        // Deterministic guess: linear backward transport of the target.
        let mut linear = p0.to_vec();
        for _ in 0..n {
            linear = backward_extend(problem, &linear);
        }
        guesses.push(linear);
        // Warm starts from live branches.
        for b in branches.iter().filter(|b| !b.converged) {
            guesses.push(backward_extend(problem, &b.p_minus));
        }
        // Seeded multistart in the horizon-independent core of the ball.
        for _ in 0..opts.n_starts {
            guesses.push(sample_in_ball(&mut rng, p0.len(), core_radius));
        }

        let results: Result<Vec<ShootingResult>> = guesses
            .par_iter()
            .map(|g| shoot(problem, p0, n, g, opts.h, &opts.shoot))
            .collect();
        let results = results?;
        let mut any_converged = false;
        let mut updated: Vec<usize> = Vec::new();
        for result in results.into_iter().filter(|r| r.converged) {
            any_converged = true;
            let q0 = problem.project_q(result.trajectory.final_state());
            let nearest = branches
                .iter()
                .enumerate()
                .map(|(i, b)| (i, distance(&q0, &b.q0)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            match nearest {
                Some((i, d)) if d < cluster_tol => {
                    if updated.contains(&i) {
                        // Another start already refreshed this branch at
                        // this horizon; keep the better residual.
                        if result.residual < branches[i].residual {
                            branches[i].p_minus = result.p_minus_n;
                            branches[i].residual = result.residual;
                        }
                        continue;
                    }
                    let increment = distance(&q0, &branches[i].q0);
                    let b = &mut branches[i];
                    b.increments.push(increment);
                    b.converged = increment < opts.tol;
                    b.q0 = q0;
                    b.p_minus = result.p_minus_n;
                    b.residual = result.residual;
                    b.horizon = n;
                    updated.push(i);
                }
                _ => {
                    branches.push(Branch {
                        q0,
                        p_minus: result.p_minus_n,
                        increments: Vec::new(),
                        converged: false,
                        residual: result.residual,
                        horizon: n,
                    });
                    updated.push(branches.len() - 1);
                }
            }
        }
        horizon_used = n;
        if !any_converged {
            complete = false;
            break;
        }
        if n >= 2 && !branches.is_empty() && branches.iter().all(|b| b.converged) {
            break;
        }
    }

    Ok(PhiValue {
        p0: p0.to_vec(),
        branches: branches
            .into_iter()
            .enumerate()
            .map(|(i, b)| PhiBranch {
                branch_id: i,
                q0: b.q0,
                p_minus_n: b.p_minus,
                increments: b.increments,
                converged: b.converged,
                residual: b.residual,
                horizon: b.horizon,
            })
            .collect(),
        horizon_used,
        complete,
    })
}

/// A-priori bounds along a backward trajectory: growth of the P-part,
/// uniform bound of the Q-part, and the fractional-power bound
/// `|A^{1/2}q| ≤ √2 K₀ λ_{N+1}^{−1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardBoundsReport {
    /// Min over the trajectory of `(|p₀| + K₀/λ_N) e^{−λ_N t} − |p(t)|`.
    pub p_margin: f64,
    /// Min of `K₀/λ_{N+1} − |q(t)|`.
    pub q_margin: f64,
    /// Min of `√2 K₀ λ_{N+1}^{−1/2} − |A^{1/2}q(t)|`.
    pub aq_margin: f64,
    /// Measured supremum of `|A^{1/2}q(t)|` (the stated bound is not sharp;
    /// the measured value is logged alongside it).
    pub max_aq: f64,
    pub n_times: usize,
}

impl BackwardBoundsReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.p_margin >= -tol && self.q_margin >= -tol && self.aq_margin >= -tol
    }
}

/// Verify the backward a-priori bounds along a shooting trajectory.
pub fn check_backward_bounds(
    problem: &SpectralProblem,
    result: &ShootingResult,
) -> Result<BackwardBoundsReport> {
    let k0 = problem.k0();
    let lambda_n = problem.lambda_n();
    let lambda_n1 = problem.lambda_n1();
    let p0_norm = norm(&result.p0_target);
    let q_bound = k0 / lambda_n1;
    let aq_bound = std::f64::consts::SQRT_2 * k0 / lambda_n1.sqrt();
    let mut p_margin = f64::INFINITY;
    let mut q_margin = f64::INFINITY;
    let mut aq_margin = f64::INFINITY;
    let mut max_aq = 0.0f64;
    for (t, state) in result.trajectory.times.iter().zip(&result.trajectory.states) {
        let (p, q) = problem.split(state)?;
        let p_bound = (p0_norm + k0 / lambda_n) * (-lambda_n * t).exp();
        p_margin = p_margin.min(p_bound - p.norm());
        q_margin = q_margin.min(q_bound - q.norm());
        let aq = state
            .coords()
            .iter()
            .zip(problem.eigenvalues())
            .skip(problem.split_index())
            .map(|(x, lam)| lam * x * x)
            .sum::<f64>()
            .sqrt();
        max_aq = max_aq.max(aq);
        aq_margin = aq_margin.min(aq_bound - aq);
    }
    Ok(BackwardBoundsReport {
        p_margin,
        q_margin,
        aq_margin,
        max_aq,
        n_times: result.trajectory.len(),
    })
}

fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn quadrature(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Closed-form / quadrature reference value of the backward map where one is
/// available: identically zero for the zero kind, the stationary Q-solution
/// for constant forcing, and the backward-in-time convolution integral
/// `∫_{−∞}^0 e^{A_Q s} g(e^{−A_P s} p₀) ds` for the decoupled kind. Returns
/// `None` for kinds with no tractable reference.
///
/// This route never touches the shooting machinery, so it can sit on the
/// other side of a cross-check against [`phi`].
pub fn phi_reference(
    problem: &SpectralProblem,
    p0: &[f64],
    quad_tol: f64,
) -> Result<Option<Vec<f64>>> {
    if p0.len() != problem.split_index() {
        return Err(Error::DimensionMismatch {
            expected: problem.split_index(),
            got: p0.len(),
        });
    }
    let q_dim = problem.q_dim();
    match &problem.nonlinearity().kind {
        NonlinearityKind::Zero => Ok(Some(vec![0.0; q_dim])),
        NonlinearityKind::ConstantForcing { c } => Ok(Some(
            (problem.split_index()..problem.dim())
                .map(|i| c[i] / problem.eigenvalues()[i])
                .collect(),
        )),
        NonlinearityKind::Decoupled { map } => {
            let p0_norm = norm(p0);
            let support = map.support_radius();
            if p0_norm == 0.0 {
                // p(s) ≡ 0 backward; the integral is g(0)/λ per coordinate.
                let g0 = map.eval(p0, q_dim);
                return Ok(Some(
                    g0.iter()
                        .enumerate()
                        .map(|(j, g)| g / problem.eigenvalues()[problem.split_index() + j])
                        .collect(),
                ));
            }
            if p0_norm >= support {
                // |p(s)| grows monotonically backward, so g vanishes along
                // the whole half-line.
                return Ok(Some(vec![0.0; q_dim]));
            }
            let s_min = -((support / p0_norm).ln() / problem.lambda1() + 0.1);
            let p_at = |s: f64| -> Vec<f64> {
                p0.iter()
                    .zip(problem.eigenvalues())
                    .map(|(x, lam)| x * (-lam * s).exp())
                    .collect()
            };
            let mut q0 = Vec::with_capacity(q_dim);
            for j in 0..q_dim {
                let lam_q = problem.eigenvalues()[problem.split_index() + j];
                let integrand =
                    move |s: f64| (lam_q * s).exp() * map.eval(&p_at(s), q_dim)[j];
                q0.push(quadrature(&integrand, s_min, 0.0, quad_tol));
            }
            Ok(Some(q0))
        }
        NonlinearityKind::ChafeeInfante { .. } => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{DecoupledMap, NonlinearitySpec};
    use approx::assert_relative_eq;

    fn linear_problem_n1() -> SpectralProblem {
        SpectralProblem::new(
            vec![1.0, 2.0, 3.0, 4.0],
            1,
            NonlinearitySpec {
                kind: NonlinearityKind::Zero,
                cutoff_inner: 0.5,
            },
            0.0,
            0.0,
            1.0,
        )
        .unwrap()
    }

    fn forced_problem() -> SpectralProblem {
        let c = vec![0.0, 0.0, 0.5, 0.25, 0.0, 0.0, 0.0, 0.0];
        SpectralProblem::new(
            (1..=8).map(|k| k as f64).collect(),
            2,
            NonlinearitySpec {
                kind: NonlinearityKind::ConstantForcing { c },
                cutoff_inner: 0.5,
            },
            0.56,
            1.5,
            1.2,
        )
        .unwrap()
    }

    fn decoupled_problem() -> SpectralProblem {
        SpectralProblem::new(
            (1..=8).map(|k| k as f64).collect(),
            2,
            NonlinearitySpec {
                kind: NonlinearityKind::Decoupled {
                    map: DecoupledMap::SineBump {
                        amp: 0.2,
                        freq: 2.0,
                        support: 1.0,
                    },
                },
                cutoff_inner: 0.5,
            },
            0.3,
            1.5,
            4.0,
        )
        .unwrap()
    }

    #[test]
    fn linear_shooting_map_decays() {
        let problem = linear_problem_n1();
        let p_init = vec![0.1 * (2.0f64).exp()];
        let out = shooting_map(&problem, &p_init, 2, 1e-3).unwrap();
        assert_relative_eq!(out[0], 0.1, max_relative = 1e-12);
    }

    #[test]
    fn unforced_p_stays_at_origin() {
        let problem = forced_problem();
        let out = shooting_map(&problem, &[0.0, 0.0], 3, 1e-2).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn shoot_inverts_linear_flow() {
        let problem = linear_problem_n1();
        let p0 = vec![0.1];
        let result = shoot(
            &problem,
            &p0,
            2,
            &[0.5],
            1e-3,
            &ShootOptions::default(),
        )
        .unwrap();
        assert!(result.converged);
        assert!(result.residual <= 1e-10);
        assert_relative_eq!(
            result.p_minus_n[0],
            0.1 * (2.0f64).exp(),
            max_relative = 1e-9
        );
        // Times are reindexed to [-n, 0].
        assert_relative_eq!(result.trajectory.times[0], -2.0);
        assert_eq!(result.trajectory.final_time(), 0.0);
        // The far-end boundary condition is exact.
        let (_, q) = problem.split(&result.trajectory.states[0]).unwrap();
        assert_eq!(q.norm(), 0.0);
    }

    #[test]
    fn shoot_on_forced_preset_is_linear_in_p() {
        // Pc = 0 keeps the P-dynamics linear; p_{-n} = e^{A_P n} p0.
        let problem = forced_problem();
        let p0 = vec![0.05, -0.02];
        let n = 3;
        let result = shoot(
            &problem,
            &p0,
            n,
            &[0.0, 0.0],
            1e-3,
            &ShootOptions::default(),
        )
        .unwrap();
        assert!(result.converged, "residual {}", result.residual);
        assert_relative_eq!(
            result.p_minus_n[0],
            0.05 * (3.0f64).exp(),
            max_relative = 1e-7
        );
        assert_relative_eq!(
            result.p_minus_n[1],
            -0.02 * (6.0f64).exp(),
            max_relative = 1e-7
        );
        // The found start lies inside the containment ball.
        assert!(norm(&result.p_minus_n) <= bn_radius(&problem, n, norm(&p0)));
    }

    #[test]
    fn phi_zero_kind_is_identically_zero() {
        let problem = SpectralProblem::new(
            (1..=6).map(|k| k as f64).collect(),
            2,
            NonlinearitySpec {
                kind: NonlinearityKind::Zero,
                cutoff_inner: 0.5,
            },
            0.0,
            0.0,
            1.0,
        )
        .unwrap();
        let opts = PhiOptions {
            n_max: 3,
            n_starts: 3,
            h: 1e-2,
            ..Default::default()
        };
        for p0 in [[0.0, 0.0], [0.4, -0.3], [1.5, 0.2]] {
            let value = phi(&problem, &p0, &opts).unwrap();
            assert!(value.complete);
            assert_eq!(value.branches.len(), 1);
            let branch = value.best_branch().unwrap();
            assert!(branch.converged);
            assert!(norm(&branch.q0) <= 1e-10, "q0 = {:?}", branch.q0);
        }
    }

    #[test]
    fn phi_constant_forcing_matches_stationary_solution() {
        let problem = forced_problem();
        let opts = PhiOptions {
            n_max: 6,
            n_starts: 4,
            h: 1e-3,
            ..Default::default()
        };
        let value = phi(&problem, &[0.0, 0.0], &opts).unwrap();
        let branch = value.best_branch().unwrap();
        assert!(branch.converged);
        let expected = phi_reference(&problem, &[0.0, 0.0], 1e-9)
            .unwrap()
            .unwrap();
        assert_relative_eq!(branch.q0[0], expected[0], max_relative = 1e-4);
        assert_relative_eq!(branch.q0[1], expected[1], max_relative = 1e-4);
        assert!(distance(&branch.q0, &expected) <= 10.0 * opts.h);
    }

    #[test]
    fn phi_decoupled_matches_quadrature() {
        let problem = decoupled_problem();
        let opts = PhiOptions {
            n_max: 6,
            n_starts: 4,
            h: 1e-3,
            ..Default::default()
        };
        let p0 = vec![0.3, -0.1];
        let value = phi(&problem, &p0, &opts).unwrap();
        let branch = value.best_branch().unwrap();
        assert!(branch.converged);
        let expected = phi_reference(&problem, &p0, 1e-9).unwrap().unwrap();
        let err = distance(&branch.q0, &expected);
        assert!(
            err <= 10.0 * opts.h + 1e-8,
            "phi = {:?}, reference = {:?}, err = {err}",
            branch.q0,
            expected
        );
    }

    #[test]
    fn backward_bounds_hold_for_zero_kind() {
        let problem = linear_problem_n1();
        let result = shoot(
            &problem,
            &[0.1],
            2,
            &[0.5],
            1e-3,
            &ShootOptions::default(),
        )
        .unwrap();
        let report = check_backward_bounds(&problem, &result).unwrap();
        // q stays identically zero, so both Q bounds hold with margin 0.
        assert!(report.passes(1e-12), "{report:?}");
        assert_eq!(report.max_aq, 0.0);
    }

    #[test]
    fn backward_bounds_hold_for_forcing() {
        let problem = forced_problem();
        let result = shoot(
            &problem,
            &[0.05, -0.02],
            4,
            &[0.0, 0.0],
            1e-3,
            &ShootOptions::default(),
        )
        .unwrap();
        assert!(result.converged);
        let report = check_backward_bounds(&problem, &result).unwrap();
        assert!(report.passes(10.0 * 1e-3), "{report:?}");
        // |q| approaches |A^{-1}Qc| < K0/lambda_{N+1} with real margin.
        assert!(report.q_margin > 0.0);
    }

    #[test]
    fn quadrature_integrates_smooth_functions() {
        let val = quadrature(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert_relative_eq!(val, 2.0, max_relative = 1e-10);
        let val = quadrature(&|x: f64| (-x).exp(), 0.0, 5.0, 1e-12);
        assert_relative_eq!(val, 1.0 - (-5.0f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn phi_reference_kinds() {
        let zero_ref = phi_reference(&linear_problem_n1(), &[0.3], 1e-9)
            .unwrap()
            .unwrap();
        assert_eq!(zero_ref, vec![0.0; 3]);

        let forced_ref = phi_reference(&forced_problem(), &[0.0, 0.0], 1e-9)
            .unwrap()
            .unwrap();
        assert_eq!(forced_ref[0], 0.5 / 3.0);
        assert_eq!(forced_ref[1], 0.25 / 4.0);

        // Outside the support of g the decoupled reference is zero.
        let problem = decoupled_problem();
        let outside = phi_reference(&problem, &[2.0, 0.0], 1e-9).unwrap().unwrap();
        assert_eq!(outside, vec![0.0; 6]);
    }
}

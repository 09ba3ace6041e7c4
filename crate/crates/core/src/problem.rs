//! Spectrally decomposed semilinear problems `u' + Au = F(u)`.
//!
//! The linear part is diagonal in the eigenbasis, the phase space is the
//! Galerkin truncation to the first `M` modes, and the nonlinearity is
//! truncated by a `C¹` cutoff so that `F(u) = 0` exactly for `|u| ≥ R`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::state::StateVector;

/// Safety factor applied to sampled bound/Lipschitz estimates.
pub const CONSTANT_SAFETY_FACTOR: f64 = 1.25;

/// Named smooth maps from P-coordinates to Q-coordinates, used by the
/// `decoupled` nonlinearity. Each map is bounded, `C¹`, and compactly
/// supported in `p`, so backward-in-time integrals against it converge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DecoupledMap {
    /// `g_j(p) = (amp / j²) · bump(|p| / support) · sin(j · freq · p₁)` for the
    /// j-th Q-coordinate, where `bump` is the cubic cutoff with inner
    /// fraction 1/2.
    SineBump { amp: f64, freq: f64, support: f64 },
}

impl DecoupledMap {
    /// Evaluate the map into the `n_q` Q-coordinates.
    pub fn eval(&self, p: &[f64], n_q: usize) -> Vec<f64> {
        match self {
            DecoupledMap::SineBump { amp, freq, support } => {
                let r = crate::state::norm(p) / support;
                let bump = smooth_cutoff(r, 0.5);
                if bump == 0.0 {
                    return vec![0.0; n_q];
                }
                let p1 = p.first().copied().unwrap_or(0.0);
                (1..=n_q)
                    .map(|j| {
                        let jf = j as f64;
                        amp / (jf * jf) * bump * (jf * freq * p1).sin()
                    })
                    .collect()
            }
        }
    }

    pub fn support_radius(&self) -> f64 {
        match self {
            DecoupledMap::SineBump { support, .. } => *support,
        }
    }
}

/// The raw nonlinearity `G`, before the support cutoff is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// `G ≡ 0`.
    Zero,
    /// `G(u) = c` for a fixed vector `c`.
    ConstantForcing { c: Vec<f64> },
    /// `G(u) = g(Pu)` mapped into the Q-coordinates; the P-part of `G` is zero.
    Decoupled { map: DecoupledMap },
    /// `G(u) = u − u³` on `(0, π)` in the Dirichlet sine basis with
    /// `λ_k = ν k²`, evaluated pseudospectrally.
    ChafeeInfante { nu: f64 },
}

/// Nonlinearity specification: raw map plus the cutoff geometry.
///
/// The evaluated nonlinearity is `F(u) = θ(|u|/R) G(u)` where `θ` equals 1
/// below `cutoff_inner` and vanishes at 1 (see [`smooth_cutoff`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    #[serde(flatten)]
    pub kind: NonlinearityKind,
    /// Fraction of `R` where the cutoff starts to decay, in `(0, 1)`.
    pub cutoff_inner: f64,
}

/// `C¹` cubic cutoff: 1 for `s ≤ inner`, 0 for `s ≥ 1`,
/// `1 − 3w² + 2w³` with `w = (s − inner)/(1 − inner)` in between.
pub fn smooth_cutoff(s: f64, inner: f64) -> f64 {
    if s <= inner {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let w = (s - inner) / (1.0 - inner);
        1.0 - w * w * (3.0 - 2.0 * w)
    }
}

/// Largest slope of `s ↦ smooth_cutoff(s, inner)` (attained at `w = 1/2`).
pub fn cutoff_max_slope(inner: f64) -> f64 {
    1.5 / (1.0 - inner)
}

/// Sine collocation tables for the pseudospectral cubic. Built once per
/// problem; `n = 4M` points avoid aliasing when projecting `u³` back onto
/// the first `M` modes.
#[derive(Debug, Clone, PartialEq)]
struct SineCollocation {
    modes: usize,
    points: usize,
    /// `basis[i * modes + k] = sqrt(2/π) sin((k+1) x_i)`, `x_i = (i+1)π/(n+1)`.
    basis: Vec<f64>,
    /// Quadrature weight `π/(n+1)`.
    weight: f64,
}

impl SineCollocation {
    fn new(modes: usize) -> Self {
        let points = 4 * modes;
        let c = (2.0 / std::f64::consts::PI).sqrt();
        let step = std::f64::consts::PI / (points as f64 + 1.0);
        let mut basis = Vec::with_capacity(points * modes);
        for i in 0..points {
            let x = (i as f64 + 1.0) * step;
            for k in 0..modes {
                basis.push(c * ((k as f64 + 1.0) * x).sin());
            }
        }
        Self {
            modes,
            points,
            basis,
            weight: step,
        }
    }

    /// Coefficients of `u − u³` in the first `modes` basis functions.
    fn cubic_rhs(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut vals = vec![0.0; self.points];
        for i in 0..self.points {
            let row = &self.basis[i * self.modes..(i + 1) * self.modes];
            let mut v = 0.0;
            for (b, c) in row.iter().zip(coeffs) {
                v += b * c;
            }
            vals[i] = v - v * v * v;
        }
        let mut out = vec![0.0; self.modes];
        for i in 0..self.points {
            let row = &self.basis[i * self.modes..(i + 1) * self.modes];
            let w = self.weight * vals[i];
            for (o, b) in out.iter_mut().zip(row) {
                *o += w * b;
            }
        }
        out
    }
}

/// A Galerkin-truncated semilinear problem, immutable after construction.
///
/// Holds the eigenvalues of `A`, the mode split `N`, the truncated
/// nonlinearity, and the certified constants `K₀` (bound on `|F|`), `K₁`
/// (Lipschitz constant of `F`) and `R` (support radius of `F`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProblem {
    eigenvalues: Vec<f64>,
    split_index: usize,
    nonlinearity: NonlinearitySpec,
    k0: f64,
    k1: f64,
    r_trunc: f64,
    collocation: Option<SineCollocation>,
}

impl SpectralProblem {
    pub fn new(
        eigenvalues: Vec<f64>,
        split_index: usize,
        nonlinearity: NonlinearitySpec,
        k0: f64,
        k1: f64,
        r_trunc: f64,
    ) -> Result<Self> {
        let m = eigenvalues.len();
        if m < 2 {
            return Err(Error::Config("need at least two modes".into()));
        }
        if split_index < 1 || split_index >= m {
            return Err(Error::Config(format!(
                "split index {split_index} must satisfy 1 <= N < M = {m}"
            )));
        }
        if !(eigenvalues[0] > 0.0) {
            return Err(Error::Config("eigenvalues must be positive".into()));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("eigenvalues must be nondecreasing".into()));
        }
        if !(k0 >= 0.0 && k1 >= 0.0) {
            return Err(Error::Config("constants must be nonnegative".into()));
        }
        if k1 >= eigenvalues[split_index] {
            return Err(Error::Config(format!(
                "K1 = {k1} must be below lambda_{{N+1}} = {}",
                eigenvalues[split_index]
            )));
        }
        if !(r_trunc > k0 / eigenvalues[0]) {
            return Err(Error::Config(format!(
                "truncation radius {r_trunc} must exceed K0/lambda_1 = {}",
                k0 / eigenvalues[0]
            )));
        }
        if !(nonlinearity.cutoff_inner > 0.0 && nonlinearity.cutoff_inner < 1.0) {
            return Err(Error::Config("cutoff_inner must lie in (0, 1)".into()));
        }
        if let NonlinearityKind::ConstantForcing { c } = &nonlinearity.kind {
            if c.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: c.len(),
                });
            }
        }
        if let NonlinearityKind::ChafeeInfante { nu } = &nonlinearity.kind {
            for (k, lam) in eigenvalues.iter().enumerate() {
                let expected = nu * ((k + 1) * (k + 1)) as f64;
                if (lam - expected).abs() > 1e-9 * expected.max(1.0) {
                    return Err(Error::Config(format!(
                        "chafee_infante requires lambda_k = nu k^2; got lambda_{} = {lam}, expected {expected}",
                        k + 1
                    )));
                }
            }
        }
        let collocation = match &nonlinearity.kind {
            NonlinearityKind::ChafeeInfante { .. } => Some(SineCollocation::new(m)),
            _ => None,
        };
        Ok(Self {
            eigenvalues,
            split_index,
            nonlinearity,
            k0,
            k1,
            r_trunc,
            collocation,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Mode split `N`: coordinates `1..N` are the P-modes.
    pub fn split_index(&self) -> usize {
        self.split_index
    }

    pub fn q_dim(&self) -> usize {
        self.dim() - self.split_index
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_n(&self) -> f64 {
        self.eigenvalues[self.split_index - 1]
    }

    pub fn lambda_n1(&self) -> f64 {
        self.eigenvalues[self.split_index]
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn r_trunc(&self) -> f64 {
        self.r_trunc
    }

    pub fn nonlinearity(&self) -> &NonlinearitySpec {
        &self.nonlinearity
    }

    /// The estimates never use strictness of `λ₁ < λ₂`; a repeated leading
    /// eigenvalue is allowed but surfaced so reports can mention it.
    pub fn has_degenerate_leading_pair(&self) -> bool {
        self.eigenvalues.len() >= 2 && self.eigenvalues[0] == self.eigenvalues[1]
    }

    /// Orthogonal decomposition `u = p + q`, both zero-padded to full length.
    pub fn split(&self, u: &StateVector) -> Result<(StateVector, StateVector)> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.dim(),
            });
        }
        let mut p = vec![0.0; self.dim()];
        let mut q = vec![0.0; self.dim()];
        p[..self.split_index].copy_from_slice(&u.coords()[..self.split_index]);
        q[self.split_index..].copy_from_slice(&u.coords()[self.split_index..]);
        Ok((StateVector::new(p), StateVector::new(q)))
    }

    /// First `N` coordinates of `u`.
    pub fn project_p(&self, u: &StateVector) -> Vec<f64> {
        u.coords()[..self.split_index].to_vec()
    }

    /// Last `M − N` coordinates of `u`.
    pub fn project_q(&self, u: &StateVector) -> Vec<f64> {
        u.coords()[self.split_index..].to_vec()
    }

    /// Assemble a full state from P- and Q-coordinates.
    pub fn embed_pq(&self, p: &[f64], q: &[f64]) -> Result<StateVector> {
        if p.len() != self.split_index {
            return Err(Error::DimensionMismatch {
                expected: self.split_index,
                got: p.len(),
            });
        }
        if q.len() != self.q_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.q_dim(),
                got: q.len(),
            });
        }
        let mut coords = Vec::with_capacity(self.dim());
        coords.extend_from_slice(p);
        coords.extend_from_slice(q);
        Ok(StateVector::new(coords))
    }

    /// Embed P-coordinates with `q = 0`.
    pub fn embed_p(&self, p: &[f64]) -> Result<StateVector> {
        self.embed_pq(p, &vec![0.0; self.q_dim()])
    }

    /// Evaluate the truncated nonlinearity `F(u) = θ(|u|/R) G(u)`.
    ///
    /// Total on all of phase space; exactly zero for `|u| ≥ R`.
    pub fn eval_nonlinearity(&self, u: &StateVector) -> Result<StateVector> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.dim(),
            });
        }
        let theta = smooth_cutoff(u.norm() / self.r_trunc, self.nonlinearity.cutoff_inner);
        if theta == 0.0 {
            return Ok(StateVector::zeros(self.dim()));
        }
        let mut raw = self.eval_raw(u);
        if theta != 1.0 {
            for x in raw.iter_mut() {
                *x *= theta;
            }
        }
        Ok(StateVector::new(raw))
    }

    /// The raw nonlinearity `G(u)` without the cutoff.
    fn eval_raw(&self, u: &StateVector) -> Vec<f64> {
        match &self.nonlinearity.kind {
            NonlinearityKind::Zero => vec![0.0; self.dim()],
            NonlinearityKind::ConstantForcing { c } => c.clone(),
            NonlinearityKind::Decoupled { map } => {
                let p = self.project_p(u);
                let g = map.eval(&p, self.q_dim());
                let mut out = vec![0.0; self.dim()];
                out[self.split_index..].copy_from_slice(&g);
                out
            }
            NonlinearityKind::ChafeeInfante { .. } => self
                .collocation
                .as_ref()
                .expect("collocation tables exist for chafee_infante")
                .cubic_rhs(u.coords()),
        }
    }

    /// Short stable identifier of the problem data, for report sidecars.
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Canon<'a> {
            eigenvalues: &'a [f64],
            split_index: usize,
            nonlinearity: &'a NonlinearitySpec,
            k0: f64,
            k1: f64,
            r_trunc: f64,
        }
        let canon = Canon {
            eigenvalues: &self.eigenvalues,
            split_index: self.split_index,
            nonlinearity: &self.nonlinearity,
            k0: self.k0,
            k1: self.k1,
            r_trunc: self.r_trunc,
        };
        let json = serde_json::to_string(&canon).expect("canonical problem serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Draw a standard gaussian via Box-Muller.
pub(crate) fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniform sample from the ball of the given radius.
pub(crate) fn sample_in_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    let mut dir: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
    let n = crate::state::norm(&dir);
    if n == 0.0 {
        return dir;
    }
    let r = radius * rng.gen::<f64>().powf(1.0 / dim as f64);
    for x in dir.iter_mut() {
        *x *= r / n;
    }
    dir
}

/// Seeded estimates of the bound `K₀` and Lipschitz constant `K₁` of the
/// truncated nonlinearity, inflated by [`CONSTANT_SAFETY_FACTOR`].
///
/// Analytic for the `zero` and `constant_forcing` kinds; Monte-Carlo over the
/// support ball otherwise. Half of the sampled difference quotients use tight
/// pairs so the estimate approaches the local derivative supremum.
pub fn estimate_constants(problem: &SpectralProblem, n_samples: usize, seed: u64) -> (f64, f64) {
    assert!(n_samples >= 2, "need at least two samples");
    match &problem.nonlinearity.kind {
        NonlinearityKind::Zero => (0.0, 0.0),
        NonlinearityKind::ConstantForcing { c } => {
            let norm_c = crate::state::norm(c);
            let lip = cutoff_max_slope(problem.nonlinearity.cutoff_inner) * norm_c
                / problem.r_trunc;
            (norm_c, lip)
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dim = problem.dim();
            let radius = problem.r_trunc;
            let mut k0 = 0.0f64;
            let mut k1 = 0.0f64;
            for i in 0..n_samples {
                let u = StateVector::new(sample_in_ball(&mut rng, dim, radius));
                let fu = problem.eval_nonlinearity(&u).expect("dims match");
                k0 = k0.max(fu.norm());

                let v = if i % 2 == 0 {
                    StateVector::new(sample_in_ball(&mut rng, dim, radius))
                } else {
                    // Tight pair: probes the local derivative at u.
                    let mut dir: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
                    let n = crate::state::norm(&dir);
                    let eps = 1e-4 * radius;
                    for x in dir.iter_mut() {
                        *x *= eps / n;
                    }
                    StateVector::new(
                        u.coords()
                            .iter()
                            .zip(&dir)
                            .map(|(a, b)| a + b)
                            .collect(),
                    )
                };
                let fv = problem.eval_nonlinearity(&v).expect("dims match");
                let du = u.sub(&v).expect("dims match").norm();
                if du > 0.0 {
                    let dfu = fu.sub(&fv).expect("dims match").norm();
                    k1 = k1.max(dfu / du);
                }
            }
            (k0 * CONSTANT_SAFETY_FACTOR, k1 * CONSTANT_SAFETY_FACTOR)
        }
    }
}

/// Seeded supremum of the raw (uncut) nonlinearity over a ball; feeds the
/// truncation-radius rule in the preset builder.
pub fn sample_raw_sup(problem: &SpectralProblem, radius: f64, n_samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sup = 0.0f64;
    for _ in 0..n_samples {
        let u = StateVector::new(sample_in_ball(&mut rng, problem.dim(), radius));
        sup = sup.max(crate::state::norm(&problem.eval_raw(&u)));
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn basic_problem(m: usize, n: usize) -> SpectralProblem {
        let eigenvalues = (1..=m).map(|k| k as f64).collect();
        SpectralProblem::new(
            eigenvalues,
            n,
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

    fn chafee_problem(m: usize, n: usize) -> SpectralProblem {
        let eigenvalues = (1..=m).map(|k| (k * k) as f64).collect();
        SpectralProblem::new(
            eigenvalues,
            n,
            NonlinearitySpec {
                kind: NonlinearityKind::ChafeeInfante { nu: 1.0 },
                cutoff_inner: 0.5,
            },
            1.0,
            2.0,
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn split_basis_vectors() {
        let problem = basic_problem(8, 3);
        let u = StateVector::basis(8, 1)
            .add(&StateVector::basis(8, 4))
            .unwrap();
        let (p, q) = problem.split(&u).unwrap();
        assert_eq!(p, StateVector::basis(8, 1));
        assert_eq!(q, StateVector::basis(8, 4));
    }

    #[test]
    fn split_zero() {
        let problem = basic_problem(8, 3);
        let (p, q) = problem.split(&StateVector::zeros(8)).unwrap();
        assert_eq!(p, StateVector::zeros(8));
        assert_eq!(q, StateVector::zeros(8));
    }

    #[test]
    fn split_recombines_and_is_orthogonal() {
        let problem = basic_problem(8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let u = StateVector::new((0..8).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let (p, q) = problem.split(&u).unwrap();
            let back = p.add(&q).unwrap();
            assert_eq!(back, u);
            assert_relative_eq!(p.dot(&q), 0.0);
            assert_relative_eq!(
                u.norm().powi(2),
                p.norm().powi(2) + q.norm().powi(2),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn split_rejects_wrong_dim() {
        let problem = basic_problem(8, 3);
        assert!(problem.split(&StateVector::zeros(5)).is_err());
    }

    #[test]
    fn zero_nonlinearity_is_zero() {
        let problem = basic_problem(8, 3);
        let u = StateVector::basis(8, 2).scale(0.3);
        let f = problem.eval_nonlinearity(&u).unwrap();
        assert_eq!(f, StateVector::zeros(8));
    }

    #[test]
    fn constant_forcing_exact_inside_inner_radius() {
        let c = vec![0.0, 0.0, 0.5, 0.25, 0.0, 0.0, 0.0, 0.0];
        let problem = SpectralProblem::new(
            (1..=8).map(|k| k as f64).collect(),
            2,
            NonlinearitySpec {
                kind: NonlinearityKind::ConstantForcing { c: c.clone() },
                cutoff_inner: 0.5,
            },
            0.56,
            1.5,
            1.2,
        )
        .unwrap();
        // |u| = 0.5 < cutoff_inner * R = 0.6, so theta = 1 exactly.
        let u = StateVector::basis(8, 1).scale(0.5);
        let f = problem.eval_nonlinearity(&u).unwrap();
        assert_eq!(f.coords(), c.as_slice());
    }

    #[test]
    fn cutoff_vanishes_outside_support() {
        let problem = chafee_problem(6, 2);
        let u = StateVector::basis(6, 1).scale(problem.r_trunc() * 1.01);
        let f = problem.eval_nonlinearity(&u).unwrap();
        assert_eq!(f, StateVector::zeros(6));
        // Boundary case |u| = R.
        let u = StateVector::basis(6, 1).scale(problem.r_trunc());
        let f = problem.eval_nonlinearity(&u).unwrap();
        assert_eq!(f, StateVector::zeros(6));
    }

    #[test]
    fn cutoff_is_continuous_and_monotone() {
        let inner = 0.4;
        assert_eq!(smooth_cutoff(0.0, inner), 1.0);
        assert_eq!(smooth_cutoff(inner, inner), 1.0);
        assert_eq!(smooth_cutoff(1.0, inner), 0.0);
        let mut prev = 1.0;
        for i in 0..=100 {
            let s = i as f64 / 100.0;
            let v = smooth_cutoff(s, inner);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        // Midpoint of the decay band.
        let mid = smooth_cutoff(0.7, 0.4);
        assert_relative_eq!(mid, 0.5, max_relative = 1e-12);
    }

    /// Independent oracle: expand `u³` for a 3-mode sine expansion by trig
    /// identities and project exactly.
    fn cubic_oracle(coeffs: &[f64; 3]) -> [f64; 3] {
        let c = (2.0 / std::f64::consts::PI).sqrt();
        // b[m] = coefficient of sin((m+1) x) in u³, m up to 8 (3+3+3-1).
        let mut b = [0.0f64; 9];
        let mut add = |freq: i64, coeff: f64| {
            if freq > 0 {
                b[(freq - 1) as usize] += coeff;
            } else if freq < 0 {
                b[(-freq - 1) as usize] -= coeff;
            }
        };
        for i in 1..=3i64 {
            for j in 1..=3i64 {
                for k in 1..=3i64 {
                    let a = coeffs[(i - 1) as usize]
                        * coeffs[(j - 1) as usize]
                        * coeffs[(k - 1) as usize]
                        * c.powi(3)
                        / 4.0;
                    add(k + i - j, a);
                    add(k - i + j, a);
                    add(k + i + j, -a);
                    add(k - i - j, -a);
                }
            }
        }
        // u³ in the orthonormal basis: sin(mx) = φ_m / c.
        [
            coeffs[0] - b[0] / c,
            coeffs[1] - b[1] / c,
            coeffs[2] - b[2] / c,
        ]
    }

    #[test]
    fn chafee_matches_cubic_convolution_oracle() {
        let problem = chafee_problem(3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let coeffs = [
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
            ];
            let u = StateVector::new(coeffs.to_vec());
            // Keep |u| inside the inner radius so theta = 1.
            assert!(u.norm() < 0.5 * problem.r_trunc());
            let f = problem.eval_nonlinearity(&u).unwrap();
            let expected = cubic_oracle(&coeffs);
            for (got, want) in f.coords().iter().zip(expected.iter()) {
                assert_relative_eq!(got, want, max_relative = 1e-12, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn chafee_single_mode_closed_form() {
        // u = a φ₁: u³ = a³ (2/π) (3 φ₁ − φ₃) / 4.
        let problem = chafee_problem(3, 1);
        let a = 0.2;
        let u = StateVector::new(vec![a, 0.0, 0.0]);
        let f = problem.eval_nonlinearity(&u).unwrap();
        let c2 = 2.0 / std::f64::consts::PI;
        assert_relative_eq!(f.coords()[0], a - 0.75 * a.powi(3) * c2, max_relative = 1e-12);
        assert_relative_eq!(f.coords()[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(f.coords()[2], 0.25 * a.powi(3) * c2, max_relative = 1e-12);
    }

    #[test]
    fn estimate_constants_zero_kind() {
        let problem = basic_problem(8, 3);
        assert_eq!(estimate_constants(&problem, 10, 1), (0.0, 0.0));
    }

    #[test]
    fn estimate_constants_constant_forcing_analytic() {
        let c = vec![0.0, 0.0, 0.5, 0.25, 0.0, 0.0, 0.0, 0.0];
        let norm_c = crate::state::norm(&c);
        let problem = SpectralProblem::new(
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
        .unwrap();
        let (k0, k1) = estimate_constants(&problem, 10, 1);
        assert_relative_eq!(k0, norm_c);
        assert_relative_eq!(k1, 3.0 * norm_c / 1.2);
    }

    #[test]
    fn sampled_lipschitz_bound_holds_on_pairs() {
        // |F(u) − F(v)| <= k1 |u − v| over fresh sampled pairs.
        let problem = chafee_problem(8, 2);
        let (_, k1) = estimate_constants(&problem, 4000, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let u = StateVector::new(sample_in_ball(&mut rng, 8, problem.r_trunc()));
            let v = StateVector::new(sample_in_ball(&mut rng, 8, problem.r_trunc()));
            let df = problem
                .eval_nonlinearity(&u)
                .unwrap()
                .sub(&problem.eval_nonlinearity(&v).unwrap())
                .unwrap()
                .norm();
            let du = u.sub(&v).unwrap().norm();
            assert!(df <= k1 * du + 1e-12, "df = {df}, k1*du = {}", k1 * du);
        }
    }

    #[test]
    fn invariant_violations_rejected() {
        let spec = NonlinearitySpec {
            kind: NonlinearityKind::Zero,
            cutoff_inner: 0.5,
        };
        // k1 >= lambda_{N+1}
        assert!(
            SpectralProblem::new(vec![1.0, 2.0, 3.0], 1, spec.clone(), 0.0, 2.5, 1.0).is_err()
        );
        // r_trunc <= k0 / lambda_1
        assert!(
            SpectralProblem::new(vec![1.0, 2.0, 3.0], 1, spec.clone(), 2.0, 0.5, 1.5).is_err()
        );
        // decreasing eigenvalues
        assert!(
            SpectralProblem::new(vec![2.0, 1.0, 3.0], 1, spec.clone(), 0.0, 0.0, 1.0).is_err()
        );
        // nonpositive leading eigenvalue
        assert!(
            SpectralProblem::new(vec![0.0, 1.0, 2.0], 1, spec.clone(), 0.0, 0.0, 1.0).is_err()
        );
        // split index out of range
        assert!(SpectralProblem::new(vec![1.0, 2.0], 2, spec, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn degenerate_leading_pair_is_allowed_and_flagged() {
        let problem = SpectralProblem::new(
            vec![1.0, 1.0, 3.0],
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
        assert!(problem.has_degenerate_leading_pair());
        assert!(!basic_problem(8, 3).has_degenerate_leading_pair());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = basic_problem(8, 3);
        let b = basic_problem(8, 3);
        assert_eq!(a.hash(), b.hash());
        let c = basic_problem(8, 2);
        assert_ne!(a.hash(), c.hash());
    }
}

//! Set metrics and the global conformance experiments: Hausdorff–Cauchy
//! rates of the Q-sections, attractor containment, inclusion of the forward
//! limit in the backward graph, and graph-closedness probes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backward::{phi, PhiOptions};
use crate::error::{Error, Result};
use crate::estimates::RateConstants;
use crate::flow::flow_map;
use crate::forward::SampledManifold;
use crate::problem::{sample_in_ball, SpectralProblem};
use crate::state::{distance, distance_sq, StateVector};

fn check_set(xs: &[Vec<f64>], dim: usize) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptySet);
    }
    for x in xs {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
    }
    Ok(())
}

/// Directed Hausdorff distance `max_{x∈X} min_{y∈Y} |x − y|`.
pub fn directed_hausdorff(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<f64> {
    let dim = xs.first().map(|x| x.len()).unwrap_or(0);
    check_set(xs, dim)?;
    check_set(ys, dim)?;
    let mut worst_sq = 0.0f64;
    for x in xs {
        let mut best_sq = f64::INFINITY;
        for y in ys {
            let d = distance_sq(x, y);
            if d < best_sq {
                best_sq = d;
                if best_sq <= worst_sq {
                    // This x can no longer raise the maximum.
                    break;
                }
            }
        }
        if best_sq > worst_sq {
            worst_sq = best_sq;
        }
    }
    Ok(worst_sq.sqrt())
}

/// Symmetric Hausdorff distance: the larger of the two directed distances.
pub fn hausdorff(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<f64> {
    let ab = directed_hausdorff(xs, ys)?;
    let ba = directed_hausdorff(ys, xs)?;
    Ok(ab.max(ba))
}

/// Distance from a single point to a finite set.
pub fn point_to_set_distance(x: &[f64], ys: &[Vec<f64>]) -> Result<f64> {
    check_set(ys, x.len())?;
    Ok(ys
        .iter()
        .map(|y| distance_sq(x, y))
        .fold(f64::INFINITY, f64::min)
        .sqrt())
}

/// Options for the Cauchy-rate analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    /// Convergence threshold on the final distance.
    pub tol: f64,
    /// Distances at or below this value are treated as numerical noise:
    /// they are excluded from the log-linear fit and flagged, because a
    /// fabricated floor value would corrupt the slope.
    pub fit_floor: f64,
    /// Multiplier on the theoretical envelope for the per-step bound check.
    pub bound_slack: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            fit_floor: 1e-12,
            bound_slack: 3.0,
        }
    }
}

/// Fitted decay of a Hausdorff-distance sequence against the theoretical
/// envelope `prefactor · e^{−rate·n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
    /// Negative slope of the log-linear least-squares fit; present only when
    /// at least three positive distances were available.
    pub fitted_rate: Option<f64>,
    pub theoretical_rate: f64,
    /// `K₀ K₂ / λ_{N+1}`.
    pub prefactor: f64,
    pub converged: bool,
    /// Acceptance band for the fitted rate: `[0.5, 2.0] · theoretical_rate`.
    pub slack_band: (f64, f64),
    /// Indices whose distance sat at or below the fit floor.
    pub floored: Vec<usize>,
    /// Whether every distance obeyed `bound_slack · prefactor · e^{−rate·n}`.
    pub bound_ok: bool,
    /// Whether the fitted rate fell inside the slack band (when fitted).
    pub band_ok: Option<bool>,
    /// False when the theoretical rate is nonpositive, in which case the
    /// decay checks are vacuous and skipped.
    pub rate_applicable: bool,
    pub fit_floor: f64,
    pub bound_slack: f64,
}

/// Build a [`RateReport`] from an already-computed distance sequence.
/// `indices[i]` is the integer time of the earlier section in distance `i`.
pub fn rate_report_from_distances(
    indices: &[usize],
    distances: &[f64],
    constants: &RateConstants,
    opts: &RateOptions,
) -> RateReport {
    assert_eq!(indices.len(), distances.len());
    let rate = constants.rate;
    let prefactor = constants.k0 * constants.k2 / constants.lambda_n1;
    let rate_applicable = constants.rate_positive;

    let mut fit_points = Vec::new();
    let mut floored = Vec::new();
    for (&n, &d) in indices.iter().zip(distances) {
        if d.is_finite() && d > opts.fit_floor {
            fit_points.push((n as f64, d.ln()));
        } else {
            floored.push(n);
        }
    }
    let fitted_rate = if fit_points.len() >= 3 {
        Some(-least_squares_slope(&fit_points))
    } else {
        None
    };

    let bound_ok = !rate_applicable
        || indices.iter().zip(distances).all(|(&n, &d)| {
            d <= opts.bound_slack * prefactor * (-rate * n as f64).exp()
        });
    let slack_band = (0.5 * rate, 2.0 * rate);
    let band_ok = if rate_applicable {
        fitted_rate.map(|f| f >= slack_band.0 && f <= slack_band.1)
    } else {
        None
    };
    let converged = distances.last().is_some_and(|&d| d < opts.tol);
    RateReport {
        indices: indices.to_vec(),
        distances: distances.to_vec(),
        fitted_rate,
        theoretical_rate: rate,
        prefactor,
        converged,
        slack_band,
        floored,
        bound_ok,
        band_ok,
        rate_applicable,
        fit_floor: opts.fit_floor,
        bound_slack: opts.bound_slack,
    }
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|(x, _)| x).sum();
    let sy: f64 = points.iter().map(|(_, y)| y).sum();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Hausdorff–Cauchy analysis of a sequence of Q-sections; `sections[i]` is
/// taken at integer time `i + 1`.
pub fn cauchy_rate(
    sections: &[Vec<Vec<f64>>],
    constants: &RateConstants,
    opts: &RateOptions,
) -> Result<RateReport> {
    if sections.len() < 4 {
        return Err(Error::Domain(format!(
            "need at least 4 sections, got {}",
            sections.len()
        )));
    }
    let mut indices = Vec::new();
    let mut distances = Vec::new();
    for (i, pair) in sections.windows(2).enumerate() {
        indices.push(i + 1);
        distances.push(hausdorff(&pair[1], &pair[0])?);
    }
    Ok(rate_report_from_distances(
        &indices, &distances, constants, opts,
    ))
}

/// Pool long-run states from seeded initial conditions: integrate through a
/// transient, then collect snapshots every `stride` over `t_collect`.
pub fn sample_attractor(
    problem: &SpectralProblem,
    n_seeds: usize,
    seed: u64,
    t_transient: f64,
    t_collect: f64,
    stride: f64,
    h: f64,
) -> Result<Vec<StateVector>> {
    if !(t_transient > 0.0) {
        return Err(Error::Domain("transient time must be positive".into()));
    }
    if !(stride > 0.0) {
        return Err(Error::Domain("stride must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<StateVector> = (0..n_seeds)
        .map(|_| StateVector::new(sample_in_ball(&mut rng, problem.dim(), problem.r_trunc())))
        .collect();
    let n_snapshots = (t_collect / stride).floor() as usize;
    let pooled: Result<Vec<Vec<StateVector>>> = starts
        .par_iter()
        .map(|u0| {
            let mut u = flow_map(problem, u0, t_transient, h)?;
            let mut states = vec![u.clone()];
            for _ in 0..n_snapshots {
                u = flow_map(problem, &u, stride, h)?;
                states.push(u.clone());
            }
            Ok(states)
        })
        .collect();
    Ok(pooled?.into_iter().flatten().collect())
}

/// Worst distance from a point cloud to a sampled manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub max_distance: f64,
    pub worst_index: usize,
    pub tol: f64,
    pub pass: bool,
    pub n_points: usize,
}

/// Check that every full state lies within `tol` of the manifold sample.
pub fn containment(
    points: &[StateVector],
    manifold: &SampledManifold,
    tol: f64,
) -> Result<ContainmentReport> {
    let targets = manifold.full_states();
    let mut max_distance = 0.0f64;
    let mut worst_index = 0usize;
    for (i, u) in points.iter().enumerate() {
        let d = point_to_set_distance(u.coords(), &targets)?;
        if d > max_distance {
            max_distance = d;
            worst_index = i;
        }
    }
    Ok(ContainmentReport {
        max_distance,
        worst_index,
        tol,
        pass: max_distance <= tol,
        n_points: points.len(),
    })
}

/// Directed distances between two manifold samples over the full `(p, q)`
/// space. Only the forward direction is a conformance requirement; the
/// reverse is reported because equality is expected exactly when the
/// backward graph is single-valued.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub forward_distance: f64,
    pub reverse_distance: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn inclusion_check(
    m_inf: &SampledManifold,
    phi_graph: &SampledManifold,
    tol: f64,
) -> Result<InclusionReport> {
    if m_inf.problem_hash != phi_graph.problem_hash {
        return Err(Error::ProblemHashMismatch {
            left: m_inf.problem_hash.clone(),
            right: phi_graph.problem_hash.clone(),
        });
    }
    let a = m_inf.full_states();
    let b = phi_graph.full_states();
    let forward = directed_hausdorff(&a, &b)?;
    let reverse = directed_hausdorff(&b, &a)?;
    Ok(InclusionReport {
        forward_distance: forward,
        reverse_distance: reverse,
        tol,
        pass: forward <= tol,
    })
}

/// One probe of the graph between grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub p_star: Vec<f64>,
    /// Distance from the freshly evaluated Q-value to the multilinear
    /// interpolation of the neighboring graph nodes.
    pub jump: Option<f64>,
    pub local_lipschitz: Option<f64>,
    /// Set when the probe or a neighboring node carries several branches;
    /// jump classification is skipped there.
    pub multi_branch: bool,
    pub failed: bool,
    /// Jump exceeded ten times the locally expected deviation.
    pub flagged: bool,
}

/// Summary of graph-closedness probing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosednessReport {
    pub probes: Vec<ProbeOutcome>,
    pub max_jump: f64,
    pub n_flagged: usize,
    pub n_multi_branch: usize,
    pub n_failed: usize,
    /// True when every flagged site coincided with a multi-branch site, the
    /// only mechanism by which a closed set-valued graph may jump.
    pub flags_explained: bool,
}

/// Probe the graph of the backward map at seeded off-node points and compare
/// against the interpolated neighboring nodes.
pub fn closedness_probe(
    problem: &SpectralProblem,
    phi_graph: &SampledManifold,
    n_probes: usize,
    seed: u64,
    opts: &PhiOptions,
) -> Result<ClosednessReport> {
    let meta = phi_graph
        .grid_meta
        .as_ref()
        .ok_or_else(|| Error::Domain("closedness probe needs a grid-generated graph".into()))?;
    let grid = meta.grid.clone();
    // Group graph points by grid node; node coordinates are regenerated by
    // the same arithmetic, so exact comparison is safe.
    let nodes = grid.nodes();
    let mut node_branches: Vec<Vec<&[f64]>> = vec![Vec::new(); nodes.len()];
    for pt in &phi_graph.points {
        if let Some(i) = nodes.iter().position(|n| n == &pt.p) {
            node_branches[i].push(&pt.q);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = grid.dims();
    let mut probe_inputs = Vec::with_capacity(n_probes);
    for _ in 0..n_probes {
        let cell: Vec<usize> = (0..dims)
            .map(|a| {
                use rand::Rng;
                rng.gen_range(0..grid.resolution[a] - 1)
            })
            .collect();
        let frac: Vec<f64> = (0..dims)
            .map(|_| {
                use rand::Rng;
                rng.gen_range(0.15..0.85)
            })
            .collect();
        probe_inputs.push((cell, frac));
    }

    let probes: Vec<ProbeOutcome> = probe_inputs
        .par_iter()
        .enumerate()
        .map(|(probe_idx, (cell, frac))| {
            let p_star: Vec<f64> = (0..dims)
                .map(|a| grid.node(cell)[a] + frac[a] * grid.spacing(a))
                .collect();
            // Gather the 2^dims cell corners.
            let mut corner_flat = Vec::new();
            for mask in 0..(1usize << dims) {
                let idx: Vec<usize> = (0..dims)
                    .map(|a| cell[a] + ((mask >> a) & 1))
                    .collect();
                corner_flat.push(grid.ravel(&idx));
            }
            let mut multi_branch = corner_flat
                .iter()
                .any(|&f| node_branches[f].len() > 1);
            if corner_flat.iter().any(|&f| node_branches[f].is_empty()) {
                return ProbeOutcome {
                    p_star,
                    jump: None,
                    local_lipschitz: None,
                    multi_branch,
                    failed: true,
                    flagged: false,
                };
            }
            // Fresh evaluation of the backward map at the probe point.
            let mut probe_opts = opts.clone();
            probe_opts.seed = opts.seed.wrapping_add(probe_idx as u64 + 1);
            let value = match phi(problem, &p_star, &probe_opts) {
                Ok(v) => v,
                Err(_) => {
                    return ProbeOutcome {
                        p_star,
                        jump: None,
                        local_lipschitz: None,
                        multi_branch,
                        failed: true,
                        flagged: false,
                    }
                }
            };
            let converged: Vec<&Vec<f64>> = value
                .branches
                .iter()
                .filter(|b| b.converged)
                .map(|b| &b.q0)
                .collect();
            if converged.is_empty() {
                return ProbeOutcome {
                    p_star,
                    jump: None,
                    local_lipschitz: None,
                    multi_branch,
                    failed: true,
                    flagged: false,
                };
            }
            multi_branch |= converged.len() > 1;
            if multi_branch {
                return ProbeOutcome {
                    p_star,
                    jump: None,
                    local_lipschitz: None,
                    multi_branch,
                    failed: false,
                    flagged: false,
                };
            }
            // Multilinear interpolation of the corner Q-values at p_star.
            let q_dim = node_branches[corner_flat[0]][0].len();
            let mut interp = vec![0.0; q_dim];
            for (mask, &f) in corner_flat.iter().enumerate() {
                let mut w = 1.0;
                for a in 0..dims {
                    let fa = frac[a];
                    w *= if (mask >> a) & 1 == 1 { fa } else { 1.0 - fa };
                }
                for (o, &v) in interp.iter_mut().zip(node_branches[f][0]) {
                    *o += w * v;
                }
            }
            let q_star = converged[0];
            let jump = distance(q_star, &interp);
            // Local Lipschitz estimate over the cell edges.
            let mut lip = 0.0f64;
            for (i, &fi) in corner_flat.iter().enumerate() {
                for (j, &fj) in corner_flat.iter().enumerate().skip(i + 1) {
                    if (i ^ j).count_ones() == 1 {
                        let dp = distance(&nodes[fi], &nodes[fj]);
                        if dp > 0.0 {
                            lip = lip
                                .max(distance(node_branches[fi][0], node_branches[fj][0]) / dp);
                        }
                    }
                }
            }
            let nearest_corner = corner_flat
                .iter()
                .map(|&f| distance(&p_star, &nodes[f]))
                .fold(f64::INFINITY, f64::min);
            let expected = lip * nearest_corner + 10.0 * opts.h;
            ProbeOutcome {
                p_star,
                jump: Some(jump),
                local_lipschitz: Some(lip),
                multi_branch,
                failed: false,
                flagged: jump > 10.0 * expected,
            }
        })
        .collect();

    let max_jump = probes
        .iter()
        .filter_map(|p| p.jump)
        .fold(0.0f64, f64::max);
    let n_flagged = probes.iter().filter(|p| p.flagged).count();
    let n_multi_branch = probes.iter().filter(|p| p.multi_branch).count();
    let n_failed = probes.iter().filter(|p| p.failed).count();
    let flags_explained = probes.iter().all(|p| !p.flagged || p.multi_branch);
    Ok(ClosednessReport {
        probes,
        max_jump,
        n_flagged,
        n_multi_branch,
        n_failed,
        flags_explained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn subset_has_zero_directed_distance() {
        let xs = vec![vec![0.0, 1.0], vec![2.0, 3.0]];
        let ys = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![5.0, 5.0]];
        assert_eq!(directed_hausdorff(&xs, &ys).unwrap(), 0.0);
    }

    #[test]
    fn single_pair_distance() {
        let xs = vec![vec![0.0, 0.0]];
        let ys = vec![vec![3.0, 4.0]];
        assert_eq!(directed_hausdorff(&xs, &ys).unwrap(), 5.0);
    }

    #[test]
    fn empty_sets_rejected() {
        let xs: Vec<Vec<f64>> = vec![];
        let ys = vec![vec![0.0]];
        assert!(matches!(
            directed_hausdorff(&xs, &ys),
            Err(Error::EmptySet)
        ));
        assert!(matches!(hausdorff(&ys, &xs), Err(Error::EmptySet)));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let xs = vec![vec![0.0, 1.0]];
        let ys = vec![vec![0.0]];
        assert!(directed_hausdorff(&xs, &ys).is_err());
    }

    /// Plain double loop, written independently of the implementation.
    fn brute_force_directed(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
        let mut worst = 0.0f64;
        for x in xs {
            let mut best = f64::INFINITY;
            for y in ys {
                let d = x
                    .iter()
                    .zip(y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                best = best.min(d);
            }
            worst = worst.max(best);
        }
        worst
    }

    #[test]
    fn matches_brute_force_on_seeded_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..50 {
            let dim = rng.gen_range(1..=5);
            let nx = rng.gen_range(1..=50);
            let ny = rng.gen_range(1..=50);
            let gen = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Vec<f64>> {
                (0..n)
                    .map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect())
                    .collect()
            };
            let xs = gen(&mut rng, nx);
            let ys = gen(&mut rng, ny);
            // Exact equality: both routes select the same pair.
            assert_eq!(
                directed_hausdorff(&xs, &ys).unwrap(),
                brute_force_directed(&xs, &ys)
            );
            assert_eq!(
                hausdorff(&xs, &ys).unwrap(),
                brute_force_directed(&xs, &ys).max(brute_force_directed(&ys, &xs))
            );
        }
    }

    #[test]
    fn translation_of_singletons_is_exact() {
        let xs = vec![vec![1.0, -2.0]];
        let v = [0.6, 0.8];
        let ys = vec![vec![1.0 + v[0], -2.0 + v[1]]];
        assert_relative_eq!(hausdorff(&xs, &ys).unwrap(), 1.0, max_relative = 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn metric_axioms(
            seed in 0u64..10_000,
            dim in 1usize..4,
            nx in 1usize..12,
            ny in 1usize..12,
            nz in 1usize..12,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut gen = |n: usize| -> Vec<Vec<f64>> {
                (0..n)
                    .map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect())
                    .collect()
            };
            let xs = gen(nx);
            let ys = gen(ny);
            let zs = gen(nz);
            // Identity and symmetry are exact.
            prop_assert_eq!(hausdorff(&xs, &xs).unwrap(), 0.0);
            prop_assert_eq!(
                hausdorff(&xs, &ys).unwrap(),
                hausdorff(&ys, &xs).unwrap()
            );
            // Triangle inequality with a small float slack.
            let xz = hausdorff(&xs, &zs).unwrap();
            let xy = hausdorff(&xs, &ys).unwrap();
            let yz = hausdorff(&ys, &zs).unwrap();
            prop_assert!(xz <= xy + yz + 1e-12);
        }
    }

    fn test_constants(rate: f64, k0: f64) -> RateConstants {
        RateConstants {
            lambda1: 1.0,
            lambda_n: 2.0,
            lambda_n1: 3.0,
            k0,
            k1: 0.5,
            alpha: 3.0 - 0.5 - rate,
            beta: 2.5,
            k2: 2.0,
            k3: Some(1.0),
            k4: Some(0.5),
            k5: Some(1.0),
            rate,
            gap_delta: 2.0,
            rate_positive: rate > 0.0,
            k3_denominator_valid: true,
        }
    }

    #[test]
    fn synthetic_exact_rate_recovered() {
        let constants = test_constants(1.0, 10.0);
        let indices: Vec<usize> = (1..=8).collect();
        let distances: Vec<f64> = indices
            .iter()
            .map(|&n| 0.7 * (-1.3 * n as f64).exp())
            .collect();
        let report = rate_report_from_distances(
            &indices,
            &distances,
            &constants,
            &RateOptions::default(),
        );
        let fitted = report.fitted_rate.unwrap();
        assert_relative_eq!(fitted, 1.3, max_relative = 1e-9);
    }

    #[test]
    fn cauchy_rate_on_singleton_sections() {
        let constants = test_constants(1.0, 10.0);
        // Walk with gaps 0.7 e^{-1.3 n}.
        let mut x = 0.0;
        let mut sections = vec![vec![vec![x]]];
        for n in 1..=8 {
            x += 0.7 * (-1.3 * n as f64).exp();
            sections.push(vec![vec![x]]);
        }
        let report = cauchy_rate(&sections, &constants, &RateOptions::default()).unwrap();
        assert_relative_eq!(report.fitted_rate.unwrap(), 1.3, max_relative = 1e-9);
    }

    #[test]
    fn all_zero_distances_converge_without_fit() {
        let constants = test_constants(2.0, 0.0);
        let indices = vec![1, 2, 3, 4];
        let distances = vec![0.0; 4];
        let report = rate_report_from_distances(
            &indices,
            &distances,
            &constants,
            &RateOptions::default(),
        );
        assert!(report.converged);
        assert!(report.fitted_rate.is_none());
        assert_eq!(report.floored, vec![1, 2, 3, 4]);
        assert!(report.bound_ok);
    }

    #[test]
    fn cauchy_rate_requires_four_sections() {
        let constants = test_constants(1.0, 1.0);
        let sections = vec![vec![vec![0.0]]; 3];
        assert!(cauchy_rate(&sections, &constants, &RateOptions::default()).is_err());
    }

    #[test]
    fn bound_check_fails_on_slow_sequences() {
        let constants = test_constants(2.0, 1.0);
        let indices: Vec<usize> = (1..=5).collect();
        // Far slower than the theoretical envelope.
        let distances: Vec<f64> = indices.iter().map(|&n| 0.9f64.powi(n as i32)).collect();
        let report = rate_report_from_distances(
            &indices,
            &distances,
            &constants,
            &RateOptions::default(),
        );
        assert!(!report.bound_ok);
    }

    fn linear_problem(m: usize, n: usize) -> SpectralProblem {
        use crate::problem::{NonlinearityKind, NonlinearitySpec};
        SpectralProblem::new(
            (1..=m).map(|k| k as f64).collect(),
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

    #[test]
    fn attractor_of_linear_problem_is_origin() {
        let problem = linear_problem(6, 2);
        let t_transient = 20.0;
        let points =
            sample_attractor(&problem, 16, 7, t_transient, 2.0, 0.5, 1e-2).unwrap();
        assert!(!points.is_empty());
        let bound = (-problem.lambda1() * t_transient).exp() * problem.r_trunc();
        for u in &points {
            assert!(u.norm() <= bound * (1.0 + 1e-9));
        }
    }

    #[test]
    fn containment_of_manifold_points_is_zero() {
        use crate::forward::{sample_flat_manifold, GridSpec};
        let problem = linear_problem(4, 1);
        let grid = GridSpec {
            mins: vec![-2.0],
            maxs: vec![2.0],
            resolution: vec![5],
        };
        let m = sample_flat_manifold(&problem, &grid).unwrap();
        let points: Vec<StateVector> = m
            .full_states()
            .into_iter()
            .map(StateVector::new)
            .collect();
        let report = containment(&points, &m, 1e-12).unwrap();
        assert_eq!(report.max_distance, 0.0);
        assert!(report.pass);
    }

    #[test]
    fn inclusion_requires_matching_problem() {
        use crate::forward::{ManifoldPoint, ManifoldTime};
        let mk = |hash: &str| SampledManifold {
            label: "x".into(),
            time: ManifoldTime::Limit,
            points: vec![ManifoldPoint {
                p: vec![0.0],
                q: vec![0.0],
                branch_id: None,
            }],
            grid_meta: None,
            problem_hash: hash.into(),
        };
        assert!(matches!(
            inclusion_check(&mk("a"), &mk("b"), 0.1),
            Err(Error::ProblemHashMismatch { .. })
        ));
        let report = inclusion_check(&mk("a"), &mk("a"), 0.1).unwrap();
        assert_eq!(report.forward_distance, 0.0);
        assert!(report.pass);
    }
}

//! Config-driven experiment runner.
//!
//! One TOML config names a problem preset, an experiment kind, and the
//! numeric parameters; `run` executes it, writes a JSON report plus CSV
//! artifacts into the output directory, and returns an overall pass flag.
//! All randomness flows from the single config seed, and report content is
//! byte-stable across reruns (timestamps live in the `meta` block only).

use std::path::{Path, PathBuf};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    closedness_probe, containment, hausdorff, inclusion_check, rate_report_from_distances,
    sample_attractor, ClosednessReport, ContainmentReport, InclusionReport, RateOptions,
    RateReport,
};
use crate::backward::{
    check_backward_bounds, phi, phi_reference, shoot, BackwardBoundsReport, PhiOptions,
    ShootOptions,
};
use crate::error::{Error, Result};
use crate::estimates::{rate_constants, verify_sigma_rho};
use crate::flow::integrate;
use crate::forward::{
    check_manifold_bounds, default_grid, lipschitz_estimate, manifold_limit, manifold_sequence,
    q_section, sample_flat_manifold, write_manifold_csv, write_manifold_csv_with,
    LipschitzReport, ManifoldBoundsReport, ManifoldPoint, ManifoldTime, SampledManifold,
};
use crate::presets::{load_preset, ProblemConfig};
use crate::problem::{sample_in_ball, SpectralProblem};
use crate::report::{write_json, ProblemHeader, ReportMeta};
use crate::state::{distance, StateVector};

/// Which experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rates,
    Phi,
    Inclusion,
    Attractor,
    Lemma31,
    All,
}

/// Optional overrides applied on top of a preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ProblemOverrides {
    pub k0: Option<f64>,
    pub k1: Option<f64>,
    pub r_trunc: Option<f64>,
    pub cutoff_inner: Option<f64>,
    pub split_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RatesConfig {
    pub n_max: usize,
    pub grid_resolution: usize,
    pub tol: f64,
    pub fit_floor: f64,
    pub bound_slack: f64,
}

impl Default for RatesConfig {
    fn default() -> Self {
        Self {
            n_max: 6,
            grid_resolution: 33,
            tol: 1e-9,
            fit_floor: 1e-12,
            bound_slack: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhiExpConfig {
    pub n_p0: usize,
    /// Radius of the sampled P-targets; defaults to 5% of the support
    /// radius, where the closed-form references are sharp.
    pub p0_radius: Option<f64>,
    pub n_max: usize,
    pub n_starts: usize,
    pub tol: f64,
}

impl Default for PhiExpConfig {
    fn default() -> Self {
        Self {
            n_p0: 10,
            p0_radius: None,
            n_max: 6,
            n_starts: 8,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InclusionConfig {
    pub grid_resolution: usize,
    pub manifold_n_max: usize,
    pub manifold_tol: f64,
    pub phi_n_max: usize,
    pub phi_n_starts: usize,
    pub phi_tol: f64,
}

impl Default for InclusionConfig {
    fn default() -> Self {
        Self {
            grid_resolution: 9,
            manifold_n_max: 6,
            manifold_tol: 1e-9,
            phi_n_max: 5,
            phi_n_starts: 8,
            phi_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttractorConfig {
    pub n_seeds: usize,
    pub t_transient: f64,
    pub t_collect: f64,
    pub stride: f64,
    pub n_probes: usize,
}

impl Default for AttractorConfig {
    fn default() -> Self {
        Self {
            n_seeds: 64,
            t_transient: 20.0,
            t_collect: 4.0,
            stride: 0.5,
            n_probes: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lemma31Config {
    pub n_pairs: usize,
    pub t0: f64,
    pub t: f64,
}

impl Default for Lemma31Config {
    fn default() -> Self {
        Self {
            n_pairs: 100,
            t0: 0.0,
            t: 2.0,
        }
    }
}

/// A complete, reproducible experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: String,
    pub kind: ExperimentKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub problem: Option<ProblemOverrides>,
    #[serde(default)]
    pub rates: RatesConfig,
    #[serde(default)]
    pub phi: PhiExpConfig,
    #[serde(default)]
    pub inclusion: InclusionConfig,
    #[serde(default)]
    pub attractor: AttractorConfig,
    #[serde(default)]
    pub lemma31: Lemma31Config,
}

fn default_seed() -> u64 {
    42
}

fn default_h() -> f64 {
    1e-3
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        if !(config.h > 0.0) {
            return Err(Error::Config("step size must be positive".into()));
        }
        Ok(config)
    }

    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

fn apply_overrides(config: &mut ProblemConfig, overrides: &ProblemOverrides) {
    if let Some(k0) = overrides.k0 {
        config.constants.k0 = k0;
    }
    if let Some(k1) = overrides.k1 {
        config.constants.k1 = k1;
    }
    if let Some(r) = overrides.r_trunc {
        config.constants.r_trunc = r;
    }
    if let Some(ci) = overrides.cutoff_inner {
        config.nonlinearity.cutoff_inner = ci;
    }
    if let Some(n) = overrides.split_index {
        config.split_index = n;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesReport {
    pub rate_report: RateReport,
    pub manifold_bounds: Vec<ManifoldBoundsReport>,
    pub lipschitz_by_n: Vec<f64>,
    pub lipschitz_final: LipschitzReport,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiEntry {
    pub p0: Vec<f64>,
    pub n_branches: usize,
    pub complete: bool,
    pub converged: bool,
    pub q0: Vec<f64>,
    pub residual: f64,
    pub oracle_error: Option<f64>,
    pub bounds: BackwardBoundsReport,
    pub bounds_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiExpReport {
    pub entries: Vec<PhiEntry>,
    pub oracle_available: bool,
    pub max_oracle_error: Option<f64>,
    pub oracle_tol: f64,
    pub bounds_tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma31Report {
    pub n_pairs: usize,
    pub checked_pairs: usize,
    pub constants_valid: bool,
    pub violations: usize,
    pub min_sigma_slack: Option<f64>,
    pub min_rho_slack: Option<f64>,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionExpReport {
    pub manifold_converged: bool,
    pub inclusion: InclusionReport,
    pub cell_diagonal: f64,
    pub failed_nodes: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorExpReport {
    pub containment: ContainmentReport,
    pub closedness: ClosednessReport,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExperimentReports {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<RatesReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiExpReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma31: Option<Lemma31Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inclusion: Option<InclusionExpReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attractor: Option<AttractorExpReport>,
}

/// The full run report written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub meta: ReportMeta,
    pub config: ExperimentConfig,
    pub problem: ProblemHeader,
    pub experiments: ExperimentReports,
    pub pass: bool,
}

pub struct RunOutcome {
    pub report: RunReport,
    pub summary: String,
    pub pass: bool,
}

fn wants(kind: ExperimentKind, this: ExperimentKind) -> bool {
    kind == ExperimentKind::All || kind == this
}

/// Resolve the preset plus overrides into a runtime problem.
pub fn resolve_problem(config: &ExperimentConfig) -> Result<(ProblemConfig, SpectralProblem)> {
    let mut problem_config = load_preset(&config.preset)?;
    if let Some(overrides) = &config.problem {
        apply_overrides(&mut problem_config, overrides);
    }
    let problem = problem_config.build()?;
    Ok((problem_config, problem))
}

fn run_rates(
    problem: &SpectralProblem,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<RatesReport> {
    let cfg = &config.rates;
    let grid = default_grid(problem, cfg.grid_resolution);
    let m0 = sample_flat_manifold(problem, &grid)?;
    let manifolds = manifold_sequence(problem, &m0, cfg.n_max + 1, config.h)?;
    let sections: Vec<_> = manifolds.iter().map(q_section).collect();
    let mut indices = Vec::new();
    let mut distances = Vec::new();
    for (i, pair) in sections.windows(2).enumerate() {
        indices.push(i + 1);
        distances.push(hausdorff(&pair[1], &pair[0])?);
    }
    let constants = rate_constants(problem)?;
    let rate_report = rate_report_from_distances(
        &indices,
        &distances,
        &constants,
        &RateOptions {
            tol: cfg.tol,
            fit_floor: cfg.fit_floor,
            bound_slack: cfg.bound_slack,
        },
    );
    let manifold_bounds: Vec<ManifoldBoundsReport> = manifolds
        .iter()
        .map(|m| check_manifold_bounds(problem, m, config.h))
        .collect();
    let lipschitz_by_n: Vec<f64> = manifolds
        .iter()
        .map(|m| lipschitz_estimate(m).map(|r| r.max_slope))
        .collect::<Result<_>>()?;
    let lipschitz_final = lipschitz_estimate(manifolds.last().expect("nonempty"))?;
    let mut final_manifold = manifolds.last().expect("nonempty").clone();
    final_manifold.label = "M_inf".into();
    final_manifold.time = ManifoldTime::Limit;
    write_manifold_csv(&final_manifold, out_dir.join("m_inf.csv"))?;

    let bounds_ok = manifold_bounds.iter().all(|b| b.passes());
    let rate_ok = !rate_report.rate_applicable
        || (rate_report.bound_ok && rate_report.band_ok.unwrap_or(true));
    Ok(RatesReport {
        rate_report,
        manifold_bounds,
        lipschitz_by_n,
        lipschitz_final,
        pass: bounds_ok && rate_ok,
    })
}

fn run_phi_experiment(
    problem: &SpectralProblem,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<PhiExpReport> {
    let cfg = &config.phi;
    let n = problem.split_index();
    let radius = cfg.p0_radius.unwrap_or(0.05 * problem.r_trunc());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x50));
    let mut targets = vec![vec![0.0; n]];
    while targets.len() < cfg.n_p0 {
        targets.push(sample_in_ball(&mut rng, n, radius));
    }
    let oracle_tol = 10.0 * config.h + 1e-8;
    let bounds_tol = 10.0 * config.h;

    let entries: Result<Vec<PhiEntry>> = targets
        .par_iter()
        .enumerate()
        .map(|(i, p0)| {
            let opts = PhiOptions {
                n_max: cfg.n_max,
                n_starts: cfg.n_starts,
                seed: config.seed.wrapping_add(0xF1).wrapping_add(i as u64),
                h: config.h,
                tol: cfg.tol,
                shoot: ShootOptions::default(),
            };
            let value = phi(problem, p0, &opts)?;
            let branch = value
                .best_branch()
                .ok_or_else(|| Error::Domain(format!("no branch found at p0 = {p0:?}")))?;
            let reference = phi_reference(problem, p0, 1e-9)?;
            let oracle_error = reference.as_ref().map(|r| distance(&branch.q0, r));
            // Re-shoot from the solved start to obtain the trajectory for
            // the a-priori bound checks.
            let verify = shoot(
                problem,
                p0,
                branch.horizon,
                &branch.p_minus_n,
                config.h,
                &ShootOptions::default(),
            )?;
            let bounds = check_backward_bounds(problem, &verify)?;
            Ok(PhiEntry {
                p0: p0.clone(),
                n_branches: value.branches.len(),
                complete: value.complete,
                converged: branch.converged,
                q0: branch.q0.clone(),
                residual: branch.residual,
                oracle_error,
                bounds_pass: bounds.passes(bounds_tol) && verify.converged,
                bounds,
            })
        })
        .collect();
    let entries = entries?;

    // Persist the graph sample.
    let graph = SampledManifold {
        label: "graph_Phi".into(),
        time: ManifoldTime::Limit,
        points: entries
            .iter()
            .map(|e| ManifoldPoint {
                p: e.p0.clone(),
                q: e.q0.clone(),
                branch_id: Some(0),
            })
            .collect(),
        grid_meta: None,
        problem_hash: problem.hash(),
    };
    write_manifold_csv(&graph, out_dir.join("phi_targets.csv"))?;

    let oracle_available = entries.iter().any(|e| e.oracle_error.is_some());
    let max_oracle_error = entries
        .iter()
        .filter_map(|e| e.oracle_error)
        .fold(None, |acc: Option<f64>, e| {
            Some(acc.map_or(e, |a| a.max(e)))
        });
    let pass = entries.iter().all(|e| {
        e.complete
            && e.converged
            && e.bounds_pass
            && e.oracle_error.is_none_or(|err| err <= oracle_tol)
    });
    Ok(PhiExpReport {
        entries,
        oracle_available,
        max_oracle_error,
        oracle_tol,
        bounds_tol,
        pass,
    })
}

fn run_lemma31(problem: &SpectralProblem, config: &ExperimentConfig) -> Result<Lemma31Report> {
    let cfg = &config.lemma31;
    let constants = rate_constants(problem)?;
    if !constants.k3_denominator_valid {
        return Ok(Lemma31Report {
            n_pairs: cfg.n_pairs,
            checked_pairs: 0,
            constants_valid: false,
            violations: 0,
            min_sigma_slack: None,
            min_rho_slack: None,
            tol: 10.0 * config.h,
            pass: true,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x31));
    let pairs: Vec<(StateVector, StateVector)> = (0..cfg.n_pairs)
        .map(|_| {
            (
                StateVector::new(sample_in_ball(&mut rng, problem.dim(), problem.r_trunc())),
                StateVector::new(sample_in_ball(&mut rng, problem.dim(), problem.r_trunc())),
            )
        })
        .collect();
    let tol = 10.0 * config.h;
    let reports: Result<Vec<_>> = pairs
        .par_iter()
        .map(|(u0, v0)| {
            let u = integrate(problem, u0, cfg.t, config.h)?;
            let v = integrate(problem, v0, cfg.t, config.h)?;
            verify_sigma_rho(problem, &u, &v, cfg.t0, cfg.t)
        })
        .collect();
    let reports = reports?;
    let violations = reports.iter().filter(|r| !r.passes(tol)).count();
    let min_sigma = reports
        .iter()
        .map(|r| r.sigma_min_slack)
        .fold(f64::INFINITY, f64::min);
    let min_rho = reports
        .iter()
        .map(|r| r.rho_min_slack)
        .fold(f64::INFINITY, f64::min);
    Ok(Lemma31Report {
        n_pairs: cfg.n_pairs,
        checked_pairs: reports.len(),
        constants_valid: true,
        violations,
        min_sigma_slack: Some(min_sigma),
        min_rho_slack: Some(min_rho),
        tol,
        pass: violations == 0,
    })
}

/// Evaluate the backward map over a grid, producing the graph sample used by
/// the inclusion and containment experiments.
fn build_phi_graph(
    problem: &SpectralProblem,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(SampledManifold, usize)> {
    let cfg = &config.inclusion;
    let grid = default_grid(problem, cfg.grid_resolution);
    let nodes = grid.nodes();
    let values: Result<Vec<_>> = nodes
        .par_iter()
        .enumerate()
        .map(|(i, node)| {
            let opts = PhiOptions {
                n_max: cfg.phi_n_max,
                n_starts: cfg.phi_n_starts,
                seed: config.seed.wrapping_add(0x9A1D).wrapping_add(i as u64),
                h: config.h,
                tol: cfg.phi_tol,
                shoot: ShootOptions::default(),
            };
            phi(problem, node, &opts)
        })
        .collect();
    let values = values?;
    let mut points = Vec::new();
    let mut failed_nodes = Vec::new();
    for (node, value) in nodes.iter().zip(&values) {
        let converged: Vec<_> = value.branches.iter().filter(|b| b.converged).collect();
        if converged.is_empty() {
            failed_nodes.push(node.clone());
            continue;
        }
        for branch in converged {
            points.push(ManifoldPoint {
                p: node.clone(),
                q: branch.q0.clone(),
                branch_id: Some(branch.branch_id),
            });
        }
    }
    let graph = SampledManifold {
        label: "graph_Phi".into(),
        time: ManifoldTime::Limit,
        points,
        grid_meta: Some(crate::forward::GridMeta {
            grid: grid.clone(),
            h: config.h,
        }),
        problem_hash: problem.hash(),
    };
    let diagnostics = if failed_nodes.is_empty() {
        None
    } else {
        Some(serde_json::json!({ "failed_nodes": failed_nodes }))
    };
    write_manifold_csv_with(&graph, out_dir.join("graph_phi.csv"), diagnostics)?;
    Ok((graph, nodes.len() - graph.points.len().min(nodes.len())))
}

fn run_inclusion(
    problem: &SpectralProblem,
    config: &ExperimentConfig,
    phi_graph: &SampledManifold,
    failed_nodes: usize,
    out_dir: &Path,
) -> Result<InclusionExpReport> {
    let cfg = &config.inclusion;
    let grid = default_grid(problem, cfg.grid_resolution);
    let m0 = sample_flat_manifold(problem, &grid)?;
    let (m_inf, rate_report) =
        manifold_limit(problem, &m0, cfg.manifold_n_max, config.h, cfg.manifold_tol)?;
    write_manifold_csv(&m_inf, out_dir.join("m_inf_inclusion.csv"))?;
    let cell_diagonal = grid.cell_diagonal();
    let tol = 2.0 * cell_diagonal + 10.0 * config.h;
    let inclusion = inclusion_check(&m_inf, phi_graph, tol)?;
    let pass = inclusion.pass && failed_nodes == 0;
    Ok(InclusionExpReport {
        manifold_converged: rate_report.converged,
        inclusion,
        cell_diagonal,
        failed_nodes,
        pass,
    })
}

fn run_attractor(
    problem: &SpectralProblem,
    config: &ExperimentConfig,
    phi_graph: &SampledManifold,
    out_dir: &Path,
) -> Result<AttractorExpReport> {
    let cfg = &config.attractor;
    let points = sample_attractor(
        problem,
        cfg.n_seeds,
        config.seed.wrapping_add(0xA77),
        cfg.t_transient,
        cfg.t_collect,
        cfg.stride,
        config.h,
    )?;
    write_states_csv(&points, out_dir.join("attractor.csv"))?;
    let grid = phi_graph
        .grid_meta
        .as_ref()
        .map(|m| m.grid.clone())
        .ok_or_else(|| Error::Domain("phi graph lacks grid metadata".into()))?;
    let tol = 2.0 * grid.cell_diagonal() + 10.0 * config.h;
    let containment_report = containment(&points, phi_graph, tol)?;
    let phi_opts = PhiOptions {
        n_max: config.inclusion.phi_n_max,
        n_starts: config.inclusion.phi_n_starts,
        seed: config.seed.wrapping_add(0xC1),
        h: config.h,
        tol: config.inclusion.phi_tol,
        shoot: ShootOptions::default(),
    };
    let closedness = closedness_probe(
        problem,
        phi_graph,
        cfg.n_probes,
        config.seed.wrapping_add(0xC2),
        &phi_opts,
    )?;
    let pass = containment_report.pass && closedness.flags_explained && closedness.n_failed == 0;
    Ok(AttractorExpReport {
        containment: containment_report,
        closedness,
        pass,
    })
}

fn write_states_csv<P: AsRef<Path>>(states: &[StateVector], path: P) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let dim = states.first().map(|s| s.dim()).unwrap_or(0);
    writer.write_record((1..=dim).map(|i| format!("x{i}")))?;
    for s in states {
        writer.write_record(s.coords().iter().map(|x| x.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Execute the configured experiment, writing artifacts into `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let (problem_config, problem) = resolve_problem(config)?;
    let constants = rate_constants(&problem)?;
    let header = ProblemHeader::new(&problem_config.name, &problem, &constants);

    let mut experiments = ExperimentReports::default();
    if wants(config.kind, ExperimentKind::Rates) {
        experiments.rates = Some(run_rates(&problem, config, out_dir)?);
    }
    if wants(config.kind, ExperimentKind::Phi) {
        experiments.phi = Some(run_phi_experiment(&problem, config, out_dir)?);
    }
    if wants(config.kind, ExperimentKind::Lemma31) {
        experiments.lemma31 = Some(run_lemma31(&problem, config)?);
    }
    if wants(config.kind, ExperimentKind::Inclusion) || wants(config.kind, ExperimentKind::Attractor)
    {
        let (phi_graph, failed_nodes) = build_phi_graph(&problem, config, out_dir)?;
        if wants(config.kind, ExperimentKind::Inclusion) {
            experiments.inclusion = Some(run_inclusion(
                &problem,
                config,
                &phi_graph,
                failed_nodes,
                out_dir,
            )?);
        }
        if wants(config.kind, ExperimentKind::Attractor) {
            experiments.attractor =
                Some(run_attractor(&problem, config, &phi_graph, out_dir)?);
        }
    }

    let pass = experiments.rates.as_ref().is_none_or(|r| r.pass)
        && experiments.phi.as_ref().is_none_or(|r| r.pass)
        && experiments.lemma31.as_ref().is_none_or(|r| r.pass)
        && experiments.inclusion.as_ref().is_none_or(|r| r.pass)
        && experiments.attractor.as_ref().is_none_or(|r| r.pass);

    let report = RunReport {
        meta: ReportMeta::now(),
        config: config.clone(),
        problem: header,
        experiments,
        pass,
    };
    write_json(&report, out_dir.join("report.json"))?;
    let summary = summarize(&report);
    std::fs::write(out_dir.join("summary.txt"), &summary)?;
    Ok(RunOutcome {
        pass,
        summary,
        report,
    })
}

fn pass_str(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

/// Human-readable one-line-per-check summary table.
pub fn summarize(report: &RunReport) -> String {
    let mut lines = Vec::new();
    let p = &report.problem;
    lines.push(format!(
        "problem {:12} M={} N={} lambda=({}, {}, {}) K0={:.6} K1={:.6} R={:.6}",
        p.name, p.modes, p.split_index, p.lambda1, p.lambda_n, p.lambda_n1, p.k0, p.k1, p.r_trunc
    ));
    lines.push(format!(
        "constants    alpha={:.6} beta={:.6} rate={:.6} rate_positive={} coupled_constants_valid={}",
        p.constants.alpha,
        p.constants.beta,
        p.constants.rate,
        p.constants.rate_positive,
        p.constants.k3_denominator_valid
    ));
    if let Some(r) = &report.experiments.rates {
        lines.push(format!(
            "rates        {:5}  fitted={} theoretical={:.4} distances={:?}",
            pass_str(r.pass),
            r.rate_report
                .fitted_rate
                .map_or("n/a".to_string(), |f| format!("{f:.4}")),
            r.rate_report.theoretical_rate,
            r.rate_report
                .distances
                .iter()
                .map(|d| format!("{d:.3e}"))
                .collect::<Vec<_>>()
        ));
    }
    if let Some(r) = &report.experiments.phi {
        lines.push(format!(
            "phi          {:5}  targets={} oracle_err={} (tol {:.2e})",
            pass_str(r.pass),
            r.entries.len(),
            r.max_oracle_error
                .map_or("n/a".to_string(), |e| format!("{e:.3e}")),
            r.oracle_tol
        ));
    }
    if let Some(r) = &report.experiments.lemma31 {
        lines.push(format!(
            "lemma31      {:5}  pairs={} violations={} min_slack=({}, {})",
            pass_str(r.pass),
            r.checked_pairs,
            r.violations,
            r.min_sigma_slack
                .map_or("n/a".to_string(), |v| format!("{v:.3e}")),
            r.min_rho_slack
                .map_or("n/a".to_string(), |v| format!("{v:.3e}")),
        ));
    }
    if let Some(r) = &report.experiments.inclusion {
        lines.push(format!(
            "inclusion    {:5}  forward={:.3e} reverse={:.3e} tol={:.3e}",
            pass_str(r.pass),
            r.inclusion.forward_distance,
            r.inclusion.reverse_distance,
            r.inclusion.tol
        ));
    }
    if let Some(r) = &report.experiments.attractor {
        lines.push(format!(
            "attractor    {:5}  containment={:.3e} tol={:.3e} probes_flagged={}",
            pass_str(r.pass),
            r.containment.max_distance,
            r.containment.tol,
            r.closedness.n_flagged
        ));
    }
    lines.push(format!("overall      {}", pass_str(report.pass)));
    lines.join("\n") + "\n"
}

/// Text description of a preset: spectrum, constants, and validity flags.
pub fn describe(preset: &str) -> Result<String> {
    let config = load_preset(preset)?;
    let problem = config.build()?;
    let constants = rate_constants(&problem)?;
    let eigenvalues = problem.eigenvalues();
    let shown: Vec<String> = eigenvalues.iter().take(6).map(|l| l.to_string()).collect();
    let ellipsis = if eigenvalues.len() > 6 { ", ..." } else { "" };
    Ok(format!(
        "preset {}\n  modes M = {}\n  split N = {}\n  eigenvalues = [{}{}]\n  K0 = {}\n  K1 = {}\n  R = {}\n  alpha = {}\n  beta = {}\n  rate (lambda_N+1 - K1 - alpha) = {}\n  rate_positive = {}\n  coupled_constants_valid = {}\n  degenerate_leading_pair = {}\n",
        config.name,
        problem.dim(),
        problem.split_index(),
        shown.join(", "),
        ellipsis,
        problem.k0(),
        problem.k1(),
        problem.r_trunc(),
        constants.alpha,
        constants.beta,
        constants.rate,
        constants.rate_positive,
        constants.k3_denominator_valid,
        problem.has_degenerate_leading_pair(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_from_minimal_toml() {
        let config = ExperimentConfig::from_toml_str(
            "preset = \"zero\"\nkind = \"rates\"\n",
        )
        .unwrap();
        assert_eq!(config.seed, 42);
        assert_eq!(config.h, 1e-3);
        assert_eq!(config.rates.n_max, 6);
        assert_eq!(config.kind, ExperimentKind::Rates);
    }

    #[test]
    fn config_rejects_bad_step() {
        assert!(ExperimentConfig::from_toml_str(
            "preset = \"zero\"\nkind = \"rates\"\nh = -0.1\n"
        )
        .is_err());
    }

    #[test]
    fn describe_zero_preset_mentions_rate() {
        let text = describe("zero").unwrap();
        assert!(text.contains("rate (lambda_N+1 - K1 - alpha) = 3"));
        assert!(describe("missing").is_err());
    }

    #[test]
    fn rates_experiment_on_zero_preset_passes() {
        let config = ExperimentConfig::from_toml_str(
            "preset = \"zero\"\nkind = \"rates\"\nh = 0.01\n[rates]\nn_max = 3\ngrid_resolution = 5\n",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = run(&config, dir.path()).unwrap();
        assert!(outcome.pass, "{}", outcome.summary);
        let rates = outcome.report.experiments.rates.unwrap();
        assert!(rates.rate_report.distances.iter().all(|&d| d == 0.0));
        assert!(dir.path().join("report.json").exists());
        assert!(dir.path().join("m_inf.csv").exists());
    }

    #[test]
    fn lemma31_on_forced_preset_has_no_violations() {
        let config = ExperimentConfig::from_toml_str(
            "preset = \"forced\"\nkind = \"lemma31\"\nh = 0.005\n[lemma31]\nn_pairs = 20\nt = 1.0\n",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = run(&config, dir.path()).unwrap();
        assert!(outcome.pass, "{}", outcome.summary);
        let l = outcome.report.experiments.lemma31.unwrap();
        assert_eq!(l.violations, 0);
        assert!(l.constants_valid);
    }
}

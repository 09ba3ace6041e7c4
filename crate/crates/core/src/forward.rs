//! The graph-transform construction: evolve the flat manifold `q = 0` over a
//! P-grid and track its Q-sections toward the limit candidate.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analysis::{hausdorff, rate_report_from_distances, RateOptions, RateReport};
use crate::error::{Error, Result};
use crate::estimates::rate_constants;
use crate::flow::flow_map;
use crate::problem::SpectralProblem;
use crate::state::{distance, norm};

/// Snapshot time of a sampled manifold: a concrete time or the limit marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManifoldTime {
    At(f64),
    Limit,
}

impl Serialize for ManifoldTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ManifoldTime::At(t) => serializer.serialize_f64(*t),
            ManifoldTime::Limit => serializer.serialize_str("limit"),
        }
    }
}

impl<'de> Deserialize<'de> for ManifoldTime {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct TimeVisitor;
        impl<'de> Visitor<'de> for TimeVisitor {
            type Value = ManifoldTime;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a time value or the string \"limit\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                Ok(ManifoldTime::At(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                Ok(ManifoldTime::At(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                Ok(ManifoldTime::At(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                if v == "limit" {
                    Ok(ManifoldTime::Limit)
                } else {
                    Err(E::custom(format!("unexpected time string `{v}`")))
                }
            }
        }
        deserializer.deserialize_any(TimeVisitor)
    }
}

/// A regular product grid in P-coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub resolution: Vec<usize>,
}

impl GridSpec {
    pub fn validate(&self, p_dim: usize) -> Result<()> {
        if self.mins.len() != p_dim || self.maxs.len() != p_dim || self.resolution.len() != p_dim {
            return Err(Error::Config(format!(
                "grid must have {p_dim} axes, got {}/{}/{}",
                self.mins.len(),
                self.maxs.len(),
                self.resolution.len()
            )));
        }
        if p_dim > 3 {
            return Err(Error::Config(format!(
                "grids with {p_dim} axes are not supported (max 3)"
            )));
        }
        for axis in 0..p_dim {
            if self.resolution[axis] < 2 {
                return Err(Error::Config("grid resolution must be at least 2".into()));
            }
            if !(self.maxs[axis] > self.mins[axis]) {
                return Err(Error::Config("grid bounds must be increasing".into()));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.mins.len()
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    /// Whether the box covers the ball of the given radius.
    pub fn contains_ball(&self, radius: f64) -> bool {
        (0..self.dims()).all(|a| self.mins[a] <= -radius && self.maxs[a] >= radius)
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.maxs[axis] - self.mins[axis]) / (self.resolution[axis] - 1) as f64
    }

    pub fn cell_diagonal(&self) -> f64 {
        (0..self.dims())
            .map(|a| self.spacing(a).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Coordinates of a node from its per-axis indices.
    pub fn node(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(a, &i)| self.mins[a] + i as f64 * self.spacing(a))
            .collect()
    }

    /// Per-axis indices of the node at the given row-major position.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims()];
        for a in (0..self.dims()).rev() {
            idx[a] = flat % self.resolution[a];
            flat /= self.resolution[a];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for a in 0..self.dims() {
            flat = flat * self.resolution[a] + idx[a];
        }
        flat
    }

    /// All nodes in row-major order.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.node_count())
            .map(|f| self.node(&self.unravel(f)))
            .collect()
    }
}

/// Generation record attached to grid-derived manifolds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub grid: GridSpec,
    pub h: f64,
}

/// One sampled manifold point: P-coordinates, Q-coordinates, and an optional
/// branch tag for graphs of set-valued maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[serde(default)]
    pub branch_id: Option<usize>,
}

/// A finite sample of a manifold `{(p, q)}`, tagged with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledManifold {
    pub label: String,
    pub time: ManifoldTime,
    pub points: Vec<ManifoldPoint>,
    pub grid_meta: Option<GridMeta>,
    pub problem_hash: String,
}

impl SampledManifold {
    /// Points reassembled as full state coordinates `p ++ q`.
    pub fn full_states(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .map(|pt| {
                let mut coords = pt.p.clone();
                coords.extend_from_slice(&pt.q);
                coords
            })
            .collect()
    }
}

/// Grid bounds covering the support ball plus one cell of margin.
pub fn default_grid(problem: &SpectralProblem, resolution: usize) -> GridSpec {
    let n = problem.split_index();
    let r = problem.r_trunc();
    let half_width = if resolution >= 4 {
        r * (resolution as f64 - 1.0) / (resolution as f64 - 3.0)
    } else {
        1.5 * r
    };
    GridSpec {
        mins: vec![-half_width; n],
        maxs: vec![half_width; n],
        resolution: vec![resolution; n],
    }
}

/// The flat manifold: grid nodes in P, `q = 0`.
pub fn sample_flat_manifold(problem: &SpectralProblem, grid: &GridSpec) -> Result<SampledManifold> {
    grid.validate(problem.split_index())?;
    if !grid.contains_ball(problem.r_trunc()) {
        return Err(Error::Config(format!(
            "grid bounds must cover the support ball |p| <= {}",
            problem.r_trunc()
        )));
    }
    let q_dim = problem.q_dim();
    let points = grid
        .nodes()
        .into_iter()
        .map(|p| ManifoldPoint {
            p,
            q: vec![0.0; q_dim],
            branch_id: None,
        })
        .collect();
    Ok(SampledManifold {
        label: "M_0".to_string(),
        time: ManifoldTime::At(0.0),
        points,
        grid_meta: Some(GridMeta {
            grid: grid.clone(),
            h: 0.0,
        }),
        problem_hash: problem.hash(),
    })
}

/// Advance every point of a manifold by time `t` under the flow.
fn advance_points(
    problem: &SpectralProblem,
    points: &[ManifoldPoint],
    t: f64,
    h: f64,
) -> Result<Vec<ManifoldPoint>> {
    points
        .par_iter()
        .map(|pt| {
            let u0 = problem.embed_pq(&pt.p, &pt.q)?;
            let u = flow_map(problem, &u0, t, h)?;
            Ok(ManifoldPoint {
                p: problem.project_p(&u),
                q: problem.project_q(&u),
                branch_id: pt.branch_id,
            })
        })
        .collect()
}

/// Evolve the flat manifold to time `t` point by point.
pub fn evolve_manifold(
    problem: &SpectralProblem,
    m0: &SampledManifold,
    t: f64,
    h: f64,
) -> Result<SampledManifold> {
    match m0.time {
        ManifoldTime::At(t0) if t0 == 0.0 => {}
        _ => {
            return Err(Error::Domain(
                "evolve_manifold expects a time-0 manifold".into(),
            ))
        }
    }
    if m0.points.iter().any(|pt| pt.q.iter().any(|&x| x != 0.0)) {
        return Err(Error::Domain(
            "evolve_manifold expects a flat manifold (q = 0)".into(),
        ));
    }
    let points = advance_points(problem, &m0.points, t, h)?;
    let grid_meta = m0
        .grid_meta
        .as_ref()
        .map(|meta| GridMeta {
            grid: meta.grid.clone(),
            h,
        });
    Ok(SampledManifold {
        label: format!("M_{t}"),
        time: ManifoldTime::At(t),
        points,
        grid_meta,
        problem_hash: m0.problem_hash.clone(),
    })
}

/// The multiset of Q-components.
pub fn q_section(m: &SampledManifold) -> Vec<Vec<f64>> {
    m.points.iter().map(|pt| pt.q.clone()).collect()
}

/// The manifolds at integer times `1..=count`, evolved incrementally.
pub fn manifold_sequence(
    problem: &SpectralProblem,
    m0: &SampledManifold,
    count: usize,
    h: f64,
) -> Result<Vec<SampledManifold>> {
    let mut out = Vec::with_capacity(count);
    let mut current = evolve_manifold(problem, m0, 1.0, h)?;
    for n in 2..=count {
        let next_points = advance_points(problem, &current.points, 1.0, h)?;
        let next = SampledManifold {
            label: format!("M_{n}"),
            time: ManifoldTime::At(n as f64),
            points: next_points,
            grid_meta: current.grid_meta.clone(),
            problem_hash: current.problem_hash.clone(),
        };
        out.push(std::mem::replace(&mut current, next));
    }
    out.push(current);
    Ok(out)
}

/// Iterate the unit-time graph transform until the Q-sections are Cauchy
/// below `tol`, up to `n_max` unit steps.
///
/// Returns the first manifold whose Q-section moved less than `tol` in
/// Hausdorff distance (or the last iterate, with `converged = false` in the
/// report) together with the per-step distance sequence.
pub fn manifold_limit(
    problem: &SpectralProblem,
    m0: &SampledManifold,
    n_max: usize,
    h: f64,
    tol: f64,
) -> Result<(SampledManifold, RateReport)> {
    if n_max < 2 {
        return Err(Error::Domain("n_max must be at least 2".into()));
    }
    let constants = rate_constants(problem)?;
    let mut current = evolve_manifold(problem, m0, 1.0, h)?;
    let mut distances = Vec::new();
    let mut indices = Vec::new();
    let mut converged_at: Option<SampledManifold> = None;
    for n in 1..=n_max {
        let next_points = advance_points(problem, &current.points, 1.0, h)?;
        let next = SampledManifold {
            label: format!("M_{}", n + 1),
            time: ManifoldTime::At((n + 1) as f64),
            points: next_points,
            grid_meta: current.grid_meta.clone(),
            problem_hash: current.problem_hash.clone(),
        };
        let d = hausdorff(&q_section(&next), &q_section(&current))?;
        indices.push(n);
        distances.push(d);
        if d < tol {
            converged_at = Some(current);
            break;
        }
        current = next;
    }
    let report = rate_report_from_distances(
        &indices,
        &distances,
        &constants,
        &RateOptions {
            tol,
            ..RateOptions::default()
        },
    );
    let mut limit = converged_at.unwrap_or(current);
    limit.label = "M_inf".to_string();
    limit.time = ManifoldTime::Limit;
    Ok((limit, report))
}

/// Finite-difference Lipschitz estimate of the Q-section over the P-section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub max_slope: f64,
    pub pairs_used: usize,
    /// Adjacent pairs whose P-images collided within 1e-9 (possible fold).
    pub fold_pairs: usize,
    /// True when no usable pair remained.
    pub degenerate: bool,
}

/// Max over grid-adjacent point pairs of `|q_i − q_j| / |p_i − p_j|`.
pub fn lipschitz_estimate(m: &SampledManifold) -> Result<LipschitzReport> {
    let meta = m.grid_meta.as_ref().ok_or_else(|| {
        Error::Domain("lipschitz estimate needs a grid-generated manifold".into())
    })?;
    let grid = &meta.grid;
    if grid.node_count() != m.points.len() {
        return Err(Error::Domain(
            "point count does not match the generating grid".into(),
        ));
    }
    let mut max_slope = 0.0f64;
    let mut pairs = 0usize;
    let mut folds = 0usize;
    for flat in 0..grid.node_count() {
        let idx = grid.unravel(flat);
        for axis in 0..grid.dims() {
            if idx[axis] + 1 >= grid.resolution[axis] {
                continue;
            }
            let mut jdx = idx.clone();
            jdx[axis] += 1;
            let a = &m.points[flat];
            let b = &m.points[grid.ravel(&jdx)];
            let dp = distance(&a.p, &b.p);
            if dp < 1e-9 {
                folds += 1;
                continue;
            }
            let dq = distance(&a.q, &b.q);
            max_slope = max_slope.max(dq / dp);
            pairs += 1;
        }
    }
    Ok(LipschitzReport {
        max_slope,
        pairs_used: pairs,
        fold_pairs: folds,
        degenerate: pairs == 0,
    })
}

/// Support-flatness and Q-bound checks for an evolved manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldBoundsReport {
    /// Max `|q|` over points with `|p| > R`; exterior dynamics are linear,
    /// so these must stay flat up to integrator tolerance.
    pub exterior_max_q: f64,
    pub max_q: f64,
    /// `K₀ / λ_{N+1}`.
    pub q_bound: f64,
    pub tol: f64,
}

impl ManifoldBoundsReport {
    pub fn passes(&self) -> bool {
        self.exterior_max_q <= self.tol && self.max_q <= self.q_bound + self.tol
    }
}

pub fn check_manifold_bounds(
    problem: &SpectralProblem,
    m: &SampledManifold,
    h: f64,
) -> ManifoldBoundsReport {
    let mut exterior_max_q = 0.0f64;
    let mut max_q = 0.0f64;
    for pt in &m.points {
        let qn = norm(&pt.q);
        max_q = max_q.max(qn);
        if norm(&pt.p) > problem.r_trunc() {
            exterior_max_q = exterior_max_q.max(qn);
        }
    }
    ManifoldBoundsReport {
        exterior_max_q,
        max_q,
        q_bound: problem.k0() / problem.lambda_n1(),
        tol: 10.0 * h,
    }
}

/// Sidecar metadata persisted next to manifold CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSidecar {
    pub label: String,
    pub time: ManifoldTime,
    pub grid_meta: Option<GridMeta>,
    pub problem_hash: String,
    pub n_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[serde(default)]
    pub diagnostics: Option<serde_json::Value>,
}

/// Write a manifold as CSV (`p1..pN,q1..q(M−N)`, with a leading `branch_id`
/// column when any point is branch-tagged) plus a JSON sidecar at the same
/// path with extension `json`.
pub fn write_manifold_csv<P: AsRef<Path>>(m: &SampledManifold, path: P) -> Result<()> {
    write_manifold_csv_with(m, path, None)
}

pub fn write_manifold_csv_with<P: AsRef<Path>>(
    m: &SampledManifold,
    path: P,
    diagnostics: Option<serde_json::Value>,
) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)?;
    let n_p = m.points.first().map(|pt| pt.p.len()).unwrap_or(0);
    let n_q = m.points.first().map(|pt| pt.q.len()).unwrap_or(0);
    let branched = m.points.iter().any(|pt| pt.branch_id.is_some());
    let mut header = Vec::new();
    if branched {
        header.push("branch_id".to_string());
    }
    header.extend((1..=n_p).map(|i| format!("p{i}")));
    header.extend((1..=n_q).map(|i| format!("q{i}")));
    writer.write_record(&header)?;
    for pt in &m.points {
        let mut record = Vec::new();
        if branched {
            record.push(pt.branch_id.unwrap_or(0).to_string());
        }
        record.extend(pt.p.iter().map(|x| x.to_string()));
        record.extend(pt.q.iter().map(|x| x.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    let sidecar = ManifoldSidecar {
        label: m.label.clone(),
        time: m.time,
        grid_meta: m.grid_meta.clone(),
        problem_hash: m.problem_hash.clone(),
        n_points: m.points.len(),
        diagnostics,
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    std::fs::write(path.with_extension("json"), json)?;
    Ok(())
}

/// Read back a manifold written by [`write_manifold_csv`].
pub fn read_manifold_csv<P: AsRef<Path>>(path: P) -> Result<SampledManifold> {
    let path = path.as_ref();
    let sidecar: ManifoldSidecar =
        serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)?;
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let branched = headers.get(0) == Some("branch_id");
    let n_p = headers.iter().filter(|h| h.starts_with('p')).count();
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record?;
        let mut fields = record.iter();
        let branch_id = if branched {
            Some(
                fields
                    .next()
                    .ok_or_else(|| Error::Config("missing branch_id".into()))?
                    .parse::<usize>()
                    .map_err(|e| Error::Config(format!("bad branch_id: {e}")))?,
            )
        } else {
            None
        };
        let values: std::result::Result<Vec<f64>, _> = fields.map(str::parse).collect();
        let values = values.map_err(|e| Error::Config(format!("bad manifold field: {e}")))?;
        points.push(ManifoldPoint {
            p: values[..n_p].to_vec(),
            q: values[n_p..].to_vec(),
            branch_id,
        });
    }
    Ok(SampledManifold {
        label: sidecar.label,
        time: sidecar.time,
        points,
        grid_meta: sidecar.grid_meta,
        problem_hash: sidecar.problem_hash,
    })
}

//! Cyclic circulator synthesis: beam-splitter targets built in the xp basis,
//! inverted with the projection method and scored by their nonreciprocity.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::BasisTable;
use crate::eom::build_eom_matrix;
use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::grid::ModeGrid;
use crate::linalg::{CMatrix, RMatrix};
use crate::ppm::{solve_inverse_with, InverseSolution};
use crate::pumps::{PumpFile, PumpSet};
use crate::scattering::{
    from_xp_basis, mode_magnitudes, stability_check, MatrixBasis, QuadratureScatteringMatrix,
    ScatteringFile, ScatteringMatrix,
};

/// Circulation sense. Forward routes mode `i` into mode `i + 1 (mod N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

/// Figure of merit used to rank grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// Smallest forward-minus-backward margin over the cycle edges.
    #[default]
    MinCycleMargin,
    /// Largest `|S_ij| − |S_ji|` over all mode pairs.
    ElementwiseMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirculatorSpec {
    pub n_modes: usize,
    pub magnitude_grid: Vec<f64>,
    #[serde(default)]
    pub direction: Direction,
    #[serde(default)]
    pub objective: ObjectiveKind,
}

impl CirculatorSpec {
    pub fn new(n_modes: usize, magnitude_grid: Vec<f64>) -> Self {
        Self {
            n_modes,
            magnitude_grid,
            direction: Direction::Forward,
            objective: ObjectiveKind::MinCycleMargin,
        }
    }

    pub fn validate(&self, grid: &ModeGrid) -> Result<()> {
        if self.n_modes < 3 {
            return Err(Error::InvalidParameter(format!(
                "a circulator needs at least 3 modes, got {}",
                self.n_modes
            )));
        }
        if self.n_modes != grid.n_modes() {
            return Err(Error::InvalidParameter(format!(
                "spec has {} modes but the grid has {}",
                self.n_modes,
                grid.n_modes()
            )));
        }
        if self.magnitude_grid.is_empty() {
            return Err(Error::InvalidParameter("magnitude grid is empty".into()));
        }
        for &t in &self.magnitude_grid {
            check_magnitude(t)?;
        }
        Ok(())
    }
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

fn check_magnitude(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidMagnitude(t))
    }
}

/// Output mode (grid position) fed by input position `i` along the cycle.
fn successor(i: usize, n: usize, direction: Direction) -> usize {
    match direction {
        Direction::Forward => (i + 1) % n,
        Direction::Backward => (i + n - 1) % n,
    }
}

/// Real-symplectic-compatible beam-splitter target: transmission `t` along
/// the cycle and `√(1 − t²)` reflection on the diagonal, assembled as 2×2
/// quadrature blocks and mapped back to the `(a, a†)` basis.
pub fn circulator_target(grid: &ModeGrid, magnitude: f64, direction: Direction) -> Result<ScatteringMatrix> {
    check_magnitude(magnitude)?;
    let n = grid.n_modes();
    let mut mode = CMatrix::zeros(n, n);
    let reflection = (1.0 - magnitude * magnitude).max(0.0).sqrt();
    for i in 0..n {
        mode[(i, i)] += Complex64::new(reflection, 0.0);
        mode[(successor(i, n, direction), i)] += Complex64::new(magnitude, 0.0);
    }
    from_xp_basis(&beam_splitter_xp(&mode), grid)
}

/// Quadrature form of a photon-number-conserving mode matrix `T`:
/// blocks `[[Re T, −Im T], [Im T, Re T]]`.
fn beam_splitter_xp(mode: &CMatrix) -> QuadratureScatteringMatrix {
    let n = mode.nrows();
    let mut xp = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = mode[(i, j)];
            xp[(2 * i, 2 * j)] = z.re;
            xp[(2 * i, 2 * j + 1)] = -z.im;
            xp[(2 * i + 1, 2 * j)] = z.im;
            xp[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    QuadratureScatteringMatrix::new(xp).expect("square and finite")
}

fn cycle_margins(mags: &RMatrix, direction: Direction) -> impl Iterator<Item = f64> + '_ {
    let n = mags.nrows();
    (0..n).map(move |i| {
        let j = successor(i, n, direction);
        mags[(j, i)] - mags[(i, j)]
    })
}

/// Forward circulation score: the smallest `|S_{i+1,i}| − |S_{i,i+1}|` over
/// the cycle, on mode-level magnitudes, clamped below at zero.
pub fn nonreciprocity_objective(s: &ScatteringMatrix) -> f64 {
    objective_with(s, Direction::Forward, ObjectiveKind::MinCycleMargin)
}

/// Objective for an arbitrary direction and objective kind.
pub fn objective_with(s: &ScatteringMatrix, direction: Direction, kind: ObjectiveKind) -> f64 {
    let mags = mode_magnitudes(s.data());
    if mags.nrows() < 2 {
        return 0.0;
    }
    let raw = match kind {
        ObjectiveKind::MinCycleMargin => cycle_margins(&mags, direction).fold(f64::INFINITY, f64::min),
        ObjectiveKind::ElementwiseMax => {
            let oriented = match direction {
                Direction::Forward => mags.clone(),
                Direction::Backward => mags.transpose(),
            };
            (&oriented - oriented.transpose()).max()
        }
    };
    raw.max(0.0)
}

/// Per-edge figures of an achieved circulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub from: i64,
    pub to: i64,
    pub forward: f64,
    pub backward: f64,
}

fn to_db(x: f64) -> f64 {
    20.0 * x.max(1e-300).log10()
}

fn edge_reports(s: &ScatteringMatrix, direction: Direction) -> Vec<EdgeReport> {
    let mags = mode_magnitudes(s.data());
    let n = mags.nrows();
    let m_lo = s.grid().m_lo();
    (0..n)
        .map(|i| {
            let j = successor(i, n, direction);
            EdgeReport {
                from: m_lo + i as i64,
                to: m_lo + j as i64,
                forward: mags[(j, i)],
                backward: mags[(i, j)],
            }
        })
        .collect()
}

/// Largest mode-level magnitude outside the diagonal and the designed edges.
fn max_leakage(s: &ScatteringMatrix, direction: Direction) -> f64 {
    let mags = mode_magnitudes(s.data());
    let n = mags.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            if i != j && i != successor(j, n, direction) {
                worst = worst.max(mags[(i, j)]);
            }
        }
    }
    worst
}

/// One evaluated target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub magnitude: f64,
    pub objective: Option<f64>,
    pub refined: bool,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct DesignResult {
    pub pumps: PumpSet,
    pub s_target: ScatteringMatrix,
    pub s_achieved: ScatteringMatrix,
    pub objective: f64,
    pub best_magnitude: f64,
    pub refined: bool,
    pub direction: Direction,
    pub objective_kind: ObjectiveKind,
    /// Mean cycle-edge transmission in dB.
    pub forward_db: f64,
    /// Largest unwanted-channel magnitude in dB.
    pub max_leakage_db: f64,
    /// Smallest forward-over-backward ratio along the cycle in dB.
    pub isolation_db: f64,
    pub edges: Vec<EdgeReport>,
    pub relative_residual: f64,
    pub trace: Vec<TracePoint>,
}

/// Serialized form of [`DesignResult`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignFile {
    pub direction: Direction,
    pub objective_kind: ObjectiveKind,
    pub objective: f64,
    pub best_magnitude: f64,
    pub refined: bool,
    pub forward_db: f64,
    pub max_leakage_db: f64,
    pub isolation_db: f64,
    pub relative_residual: f64,
    pub magnitude_collapse: String,
    pub edges: Vec<EdgeReport>,
    pub mode_magnitudes: Vec<Vec<f64>>,
    pub pumps: PumpFile,
    pub s_achieved: ScatteringFile,
    pub trace: Vec<TracePoint>,
}

impl DesignResult {
    pub fn to_file(&self) -> Result<DesignFile> {
        let mags = mode_magnitudes(self.s_achieved.data());
        Ok(DesignFile {
            direction: self.direction,
            objective_kind: self.objective_kind,
            objective: self.objective,
            best_magnitude: self.best_magnitude,
            refined: self.refined,
            forward_db: self.forward_db,
            max_leakage_db: self.max_leakage_db,
            isolation_db: self.isolation_db,
            relative_residual: self.relative_residual,
            magnitude_collapse: "largest singular value of each 2x2 (a, a_dag) mode block".into(),
            edges: self.edges.clone(),
            mode_magnitudes: mags.row_iter().map(|r| r.iter().copied().collect()).collect(),
            pumps: PumpFile::new(self.s_achieved.grid(), &self.pumps),
            s_achieved: ScatteringFile::new(&self.s_achieved, MatrixBasis::Aadag)?,
            trace: self.trace.clone(),
        })
    }
}

struct Candidate {
    magnitude: f64,
    target: ScatteringMatrix,
    solution: InverseSolution,
    objective: f64,
}

fn evaluate(
    target: Result<ScatteringMatrix>,
    magnitude: f64,
    table: &BasisTable,
    spec: &CirculatorSpec,
) -> (TracePoint, Option<Candidate>) {
    let outcome = target.and_then(|t| {
        let sol = solve_inverse_with(&t, table)?;
        let report = stability_check(&build_eom_matrix(table.grid(), &sol.pumps)?);
        if !report.stable {
            return Err(Error::Unstable {
                min_decay_rate: report.min_decay_rate,
                condition: report.condition_estimate,
            });
        }
        Ok((t, sol))
    });
    match outcome {
        Ok((target, solution)) => {
            let objective = objective_with(&solution.s_reconstructed, spec.direction, spec.objective);
            (
                TracePoint {
                    magnitude,
                    objective: Some(objective),
                    refined: false,
                    status: "ok".into(),
                },
                Some(Candidate {
                    magnitude,
                    target,
                    solution,
                    objective,
                }),
            )
        }
        Err(e) => (
            TracePoint {
                magnitude,
                objective: None,
                refined: false,
                status: e.tag().into(),
            },
            None,
        ),
    }
}

/// Keeps the diagonal and designed-edge blocks of `s`, zeroing the rest.
fn prune_unwanted(s: &ScatteringMatrix, direction: Direction) -> Result<ScatteringMatrix> {
    let n = s.grid().n_modes();
    let mut data = s.data().clone();
    for j in 0..n {
        for i in 0..n {
            if i != j && i != successor(j, n, direction) {
                for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    data[(2 * i + r, 2 * j + c)] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
    ScatteringMatrix::from_raw(data, *s.grid())
}

/// Scans the magnitude grid, keeps the best achieved matrix, then re-solves
/// once from that matrix with its unwanted channels removed.
pub fn optimize_circulator(grid: &ModeGrid, spec: &CirculatorSpec) -> Result<DesignResult> {
    spec.validate(grid)?;
    let table = BasisTable::new(grid);
    let evaluated = par_map(spec.magnitude_grid.len(), |i| {
        let t = spec.magnitude_grid[i];
        evaluate(circulator_target(grid, t, spec.direction), t, &table, spec)
    });

    let mut trace = Vec::with_capacity(evaluated.len() + 1);
    let mut best: Option<Candidate> = None;
    for (point, cand) in evaluated {
        trace.push(point);
        if let Some(c) = cand {
            if best.as_ref().is_none_or(|b| c.objective > b.objective) {
                best = Some(c);
            }
        }
    }
    let mut best = best.ok_or(Error::NoFeasiblePoint)?;
    let mut refined = false;

    let pruned = prune_unwanted(&best.solution.s_reconstructed, spec.direction);
    let (mut point, cand) = evaluate(pruned, best.magnitude, &table, spec);
    point.refined = true;
    trace.push(point);
    if let Some(c) = cand {
        if c.objective > best.objective {
            best = c;
            refined = true;
        }
    }

    let s = &best.solution.s_reconstructed;
    let edges = edge_reports(s, spec.direction);
    let mean_forward = edges.iter().map(|e| e.forward).sum::<f64>() / edges.len() as f64;
    let isolation_db = edges
        .iter()
        .map(|e| to_db(e.forward) - to_db(e.backward))
        .fold(f64::INFINITY, f64::min);

    Ok(DesignResult {
        pumps: best.solution.pumps.clone(),
        s_target: best.target,
        s_achieved: s.clone(),
        objective: best.objective,
        best_magnitude: best.magnitude,
        refined,
        direction: spec.direction,
        objective_kind: spec.objective,
        forward_db: to_db(mean_forward),
        max_leakage_db: to_db(max_leakage(s, spec.direction)),
        isolation_db,
        edges,
        relative_residual: best.solution.relative_residual,
        trace,
    })
}

//! Random-target round trips and the Gaussian-noise robustness sweep.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::BasisTable;
use crate::eom::build_eom_matrix;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, par_map};
use crate::grid::{ModeGrid, DEFAULT_DELTA_HZ, DEFAULT_GAMMA_HZ};
use crate::linalg::{self, CMatrix};
use crate::ppm::solve_inverse_with;
use crate::pumps::PumpSet;
use crate::scattering::{direct_problem, stability_check, ScatteringMatrix};

/// Rescalings attempted by [`random_pump_set`] before giving up.
pub const MAX_RESCALES: usize = 20;

const TARGET_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Fills every LF and HF tone of `grid` with amplitude uniform in
/// `[0, amp_max]` and phase uniform in `[0, 2π)`. Halves all amplitudes
/// while the resulting EOM matrix fails the stability check.
pub fn random_pump_set<R: Rng + ?Sized>(grid: &ModeGrid, amp_max: f64, rng: &mut R) -> Result<PumpSet> {
    if !(amp_max.is_finite() && amp_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "amp_max must be positive, got {amp_max}"
        )));
    }
    let mut draw = || {
        let amp = amp_max * rng.random::<f64>();
        let phase = TAU * rng.random::<f64>();
        Complex64::from_polar(amp, phase)
    };
    let mut pumps = PumpSet::new();
    for k in grid.lf_indices() {
        pumps.set_lf(k, draw());
    }
    for k in grid.hf_indices() {
        pumps.set_hf(k, draw());
    }
    for _ in 0..MAX_RESCALES {
        if stability_check(&build_eom_matrix(grid, &pumps)?).stable {
            return Ok(pumps);
        }
        pumps.scale(0.5);
    }
    Err(Error::UnstableAfterRetries {
        attempts: MAX_RESCALES,
    })
}

/// Adds i.i.d. complex Gaussian noise rescaled so that
/// `‖noise‖₂ / ‖S‖₂ = target_ratio` exactly. Returns the noisy matrix and
/// the achieved ratio.
pub fn add_gaussian_noise<R: Rng + ?Sized>(
    s: &ScatteringMatrix,
    target_ratio: f64,
    rng: &mut R,
) -> Result<(ScatteringMatrix, f64)> {
    if !(target_ratio.is_finite() && target_ratio >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise ratio must be >= 0, got {target_ratio}"
        )));
    }
    if target_ratio == 0.0 {
        return Ok((s.clone(), 0.0));
    }
    let d = s.data().nrows();
    let raw = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let s_norm = linalg::matrix_two_norm(s.data())?;
    let raw_norm = linalg::matrix_two_norm(&raw)?;
    if s_norm == 0.0 {
        return Err(Error::ZeroTarget);
    }
    let noise = raw.map(|z| z * (target_ratio * s_norm / raw_norm));
    let actual = linalg::matrix_two_norm(&noise)? / s_norm;
    let noisy = ScatteringMatrix::from_raw(s.data() + noise, *s.grid())?;
    Ok((noisy, actual))
}

/// `‖S_target − S_rec‖₂ / ‖S_target‖₂`.
pub fn relative_error(s_target: &ScatteringMatrix, s_rec: &ScatteringMatrix) -> Result<f64> {
    if s_target.data().shape() != s_rec.data().shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", s_target.data().shape()),
            found: format!("{:?}", s_rec.data().shape()),
        });
    }
    let denom = linalg::matrix_two_norm(s_target.data())?;
    if denom == 0.0 {
        return Err(Error::ZeroTarget);
    }
    Ok(linalg::matrix_two_norm(&(s_target.data() - s_rec.data()))? / denom)
}

/// Noise sweep campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub mode_counts: Vec<usize>,
    pub noise_ratios: Vec<f64>,
    pub targets_per_point: usize,
    pub noise_configs_per_target: usize,
    pub amp_max: f64,
    pub seed: u64,
    pub delta_hz: f64,
    pub gamma_hz: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            mode_counts: vec![1, 3, 5, 9, 15],
            noise_ratios: vec![0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            targets_per_point: 200,
            noise_configs_per_target: 20,
            amp_max: 0.05,
            seed: 0,
            delta_hz: DEFAULT_DELTA_HZ,
            gamma_hz: DEFAULT_GAMMA_HZ,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.mode_counts.is_empty() || self.mode_counts.contains(&0) {
            return bad("mode_counts must be non-empty and >= 1");
        }
        if self.noise_ratios.is_empty()
            || self.noise_ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0))
        {
            return bad("noise_ratios must be non-empty and >= 0");
        }
        if self.targets_per_point == 0 || self.noise_configs_per_target == 0 {
            return bad("targets_per_point and noise_configs_per_target must be >= 1");
        }
        if !(self.amp_max.is_finite() && self.amp_max > 0.0) {
            return bad("amp_max must be > 0");
        }
        Ok(())
    }

    fn grid(&self, n: usize) -> Result<ModeGrid> {
        ModeGrid::centered(n, self.delta_hz, self.gamma_hz)
    }
}

/// One row of the sweep table. Failed rows carry an error tag in `status`
/// and empty numeric fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub n_modes: usize,
    pub noise_ratio_actual: f64,
    pub relative_error: Option<f64>,
    pub seed: u64,
    pub condition_estimate: Option<f64>,
    pub status: String,
}

impl SweepRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn target_for(config: &SweepConfig, grid: &ModeGrid, target_index: usize) -> Result<ScatteringMatrix> {
    let seed = derive_seed(
        config.seed,
        &[TARGET_STREAM, grid.n_modes() as u64, target_index as u64],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pumps = random_pump_set(grid, config.amp_max, &mut rng)?;
    direct_problem(grid, &pumps)
}

fn run_row(
    target: &Result<ScatteringMatrix>,
    table: &BasisTable,
    n_modes: usize,
    ratio: f64,
    seed: u64,
) -> SweepRecord {
    let failed = |status: &str, noise_ratio_actual: f64| SweepRecord {
        n_modes,
        noise_ratio_actual,
        relative_error: None,
        seed,
        condition_estimate: None,
        status: status.to_string(),
    };
    let target = match target {
        Ok(t) => t,
        Err(e) => return failed(e.tag(), ratio),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (noisy, actual) = match add_gaussian_noise(target, ratio, &mut rng) {
        Ok(v) => v,
        Err(e) => return failed(e.tag(), ratio),
    };
    let outcome = solve_inverse_with(&noisy, table).and_then(|sol| {
        let err = relative_error(target, &sol.s_reconstructed)?;
        Ok((err, sol.condition_estimate))
    });
    match outcome {
        Ok((err, cond)) => SweepRecord {
            n_modes,
            noise_ratio_actual: actual,
            relative_error: Some(err),
            seed,
            condition_estimate: Some(cond),
            status: "ok".into(),
        },
        Err(e) => failed(e.tag(), actual),
    }
}

/// Runs the sweep, handing rows to `sink` in deterministic row order, one
/// `(N, ratio)` block at a time. Rows inside a block are computed in
/// parallel when the `parallel` feature is enabled.
pub fn run_noise_sweep_with<F>(config: &SweepConfig, mut sink: F) -> Result<()>
where
    F: FnMut(&SweepRecord) -> Result<()>,
{
    config.validate()?;
    let per_point = config.targets_per_point * config.noise_configs_per_target;
    let mut row_base = 0u64;
    for &n in &config.mode_counts {
        let grid = config.grid(n)?;
        let table = BasisTable::new(&grid);
        let targets = par_map(config.targets_per_point, |t| target_for(config, &grid, t));
        for &ratio in &config.noise_ratios {
            let rows = par_map(per_point, |i| {
                let row = row_base + i as u64;
                let seed = derive_seed(config.seed, &[NOISE_STREAM, row]);
                let t = i / config.noise_configs_per_target;
                run_row(&targets[t], &table, n, ratio, seed)
            });
            for r in &rows {
                sink(r)?;
            }
            row_base += per_point as u64;
        }
    }
    Ok(())
}

/// Runs the sweep and collects every row.
pub fn run_noise_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    let mut out = Vec::new();
    run_noise_sweep_with(config, |r| {
        out.push(r.clone());
        Ok(())
    })?;
    Ok(out)
}

/// CSV writer with the `n_modes,noise_ratio_actual,relative_error,seed,condition_estimate,status` header.
pub struct SweepCsv<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> SweepCsv<W> {
    pub fn new(out: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(out),
        }
    }

    pub fn write(&mut self, r: &SweepRecord) -> Result<()> {
        self.inner.serialize(r)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Median relative error of the successful rows per `(N, requested ratio)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub n_modes: usize,
    pub noise_ratio: f64,
    pub median_error: f64,
    pub ok_rows: usize,
    pub failed_rows: usize,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Groups sweep rows (in the order `run_noise_sweep` emits them) into
/// per-point medians.
pub fn summarize(config: &SweepConfig, records: &[SweepRecord]) -> Vec<SweepPoint> {
    let per_point = config.targets_per_point * config.noise_configs_per_target;
    let keys = config
        .mode_counts
        .iter()
        .flat_map(|&n| config.noise_ratios.iter().map(move |&r| (n, r)));
    records
        .chunks(per_point)
        .zip(keys)
        .map(|(rows, (n, ratio))| {
            let mut errs: Vec<f64> = rows.iter().filter_map(|r| r.relative_error).collect();
            let ok_rows = errs.len();
            SweepPoint {
                n_modes: n,
                noise_ratio: ratio,
                median_error: median(&mut errs).unwrap_or(f64::NAN),
                ok_rows,
                failed_rows: rows.len() - ok_rows,
            }
        })
        .collect()
}

/// Least-squares slope of `log10 y` against `log10 x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Outcome of repeated exact round trips on random targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTripStats {
    pub trials: usize,
    pub max_relative_residual: f64,
    pub max_amplitude_error: f64,
    pub max_asymmetry: f64,
}

/// Draws `trials` random stable pump sets, solves the direct problem and
/// inverts it again.
pub fn round_trip_trials(grid: &ModeGrid, trials: usize, amp_max: f64, seed: u64) -> Result<RoundTripStats> {
    let table = BasisTable::new(grid);
    let results = par_map(trials, |t| -> Result<(f64, f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[grid.n_modes() as u64, t as u64]));
        let pumps = random_pump_set(grid, amp_max, &mut rng)?;
        let s = direct_problem(grid, &pumps)?;
        let sol = solve_inverse_with(&s, &table)?;
        Ok((
            sol.relative_residual,
            sol.pumps.max_abs_diff(&pumps),
            sol.asymmetry,
        ))
    });
    let mut stats = RoundTripStats {
        trials,
        max_relative_residual: 0.0,
        max_amplitude_error: 0.0,
        max_asymmetry: 0.0,
    };
    for r in results {
        let (res, amp, asym) = r?;
        stats.max_relative_residual = stats.max_relative_residual.max(res);
        stats.max_amplitude_error = stats.max_amplitude_error.max(amp);
        stats.max_asymmetry = stats.max_asymmetry.max(asym);
    }
    Ok(stats)
}

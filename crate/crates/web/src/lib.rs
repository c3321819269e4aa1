//! Browser bindings for the static demo page in `www/`.
//!
//! Each operation has a plain Rust entry point returning a serializable
//! report, and a `wasm_bindgen` wrapper that hands the report to JavaScript
//! as a JSON string.

use paramix::designer::{linspace, optimize_circulator, CirculatorSpec, DesignFile, Direction};
use paramix::encoder::{pearson, selected_amplitudes, simulate_sequence, EncodingConfig, PixelMatrix};
use paramix::scattering::mode_magnitudes;
use paramix::{build_eom_matrix, scattering_from_eom, stability_check, ModeGrid, PumpFile, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Mode-level view of the scattering matrix for one pump set.
#[derive(Debug, Clone, Serialize)]
pub struct ScatteringReport {
    pub modes: Vec<i64>,
    /// Row = output mode, column = input mode.
    pub magnitudes: Vec<Vec<f64>>,
    pub stable: bool,
    pub min_decay_rate: f64,
    pub condition_estimate: f64,
}

pub fn scattering_report(pump_json: &str) -> Result<ScatteringReport> {
    let (grid, pumps) = PumpFile::from_json(pump_json)?.decode()?;
    let m = build_eom_matrix(&grid, &pumps)?;
    let stability = stability_check(&m);
    let s = scattering_from_eom(&m)?;
    let mags = mode_magnitudes(s.data());
    Ok(ScatteringReport {
        modes: grid.modes().collect(),
        magnitudes: mags.row_iter().map(|r| r.iter().copied().collect()).collect(),
        stable: stability.stable,
        min_decay_rate: stability.min_decay_rate,
        condition_estimate: stability.condition_estimate,
    })
}

pub fn circulator_report(n_modes: usize, lo: f64, hi: f64, count: usize, backward: bool) -> Result<DesignFile> {
    let grid = ModeGrid::with_defaults(n_modes)?;
    let mut spec = CirculatorSpec::new(n_modes, linspace(lo, hi, count));
    if backward {
        spec.direction = Direction::Backward;
    }
    optimize_circulator(&grid, &spec)?.to_file()
}

#[derive(Debug, Clone, Serialize)]
pub struct EncodingReport {
    pub modes: Vec<i64>,
    pub input_mode: i64,
    /// Per-column output amplitudes in dB.
    pub columns: Vec<Vec<f64>>,
    /// Per-column correlation between pixel values and idler amplitudes;
    /// `None` for flat columns.
    pub correlation: Vec<Option<f64>>,
    pub errors: Vec<Option<String>>,
}

pub fn encoding_report(
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    n_modes: usize,
    alpha: f64,
    seed: u64,
) -> Result<EncodingReport> {
    let image = PixelMatrix::new(width, height, pixels)?;
    let grid = ModeGrid::with_defaults(n_modes)?;
    let cfg = EncodingConfig {
        alpha,
        seed,
        ..EncodingConfig::default()
    };
    let map = simulate_sequence(&grid, &image, &cfg)?;
    let correlation = (0..width)
        .map(|c| {
            let amps: Option<Vec<f64>> = selected_amplitudes(&map, height, c).into_iter().collect();
            amps.and_then(|a| pearson(&image.column(c), &a))
        })
        .collect();
    Ok(EncodingReport {
        modes: map.modes,
        input_mode: map.input_mode,
        columns: map.columns,
        correlation,
        errors: map.errors,
    })
}

/// Smallest odd grid that holds every pixel row of an image `height` tall.
pub fn grid_for_height(height: usize) -> usize {
    2 * height.div_ceil(2) + 1
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = scatteringMap)]
pub fn scattering_map(pump_json: &str) -> std::result::Result<String, JsError> {
    to_js(scattering_report(pump_json))
}

#[wasm_bindgen(js_name = designCirculator)]
pub fn design_circulator(
    n_modes: usize,
    lo: f64,
    hi: f64,
    count: usize,
    backward: bool,
) -> std::result::Result<String, JsError> {
    to_js(circulator_report(n_modes, lo, hi, count, backward))
}

#[wasm_bindgen(js_name = encodePattern)]
pub fn encode_pattern(
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    alpha: f64,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(encoding_report(width, height, pixels, grid_for_height(height), alpha, seed as u64))
}

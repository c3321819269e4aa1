//! Column-by-column image encoding into HF pump sets, the resulting output
//! maps, and time-domain pump waveforms.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eom::build_eom_matrix;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, par_map};
use crate::grid::ModeGrid;
use crate::pumps::{PumpSet, PumpTone};
use crate::scattering::{mode_magnitudes, scattering_from_eom, stability_check};

/// Grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMatrix {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl PixelMatrix {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} pixels", width * height),
                found: format!("{}", pixels.len()),
            });
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let pixels = pixels.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let pixels = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.height).map(|r| self.get(r, col)).collect()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.pixels.iter().map(|p| p * factor).collect(),
        )
    }
}

struct PgmReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() && self.bytes[self.pos] != b'#' {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u64> {
        let tok = self
            .token()
            .ok_or_else(|| Error::MalformedPgm(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedPgm(format!("bad {what} {:?}", String::from_utf8_lossy(tok))))
    }
}

/// Parses a P2 (ASCII) or P5 (binary) PGM image.
pub fn load_image(bytes: &[u8]) -> Result<PixelMatrix> {
    let mut rd = PgmReader { bytes, pos: 0 };
    let magic = rd.token().ok_or_else(|| Error::MalformedPgm("empty input".into()))?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(Error::MalformedPgm(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = rd.number("width")? as usize;
    let height = rd.number("height")? as usize;
    let maxval = rd.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedPgm(format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedPgm("image dimensions overflow".into()))?;
    let scale = maxval as f64;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if rd.pos >= bytes.len() || !bytes[rd.pos].is_ascii_whitespace() {
            return Err(Error::MalformedPgm("missing raster".into()));
        }
        let raster = &bytes[rd.pos + 1..];
        let wide = maxval > 255;
        let needed = if wide { 2 * count } else { count };
        if raster.len() < needed {
            return Err(Error::MalformedPgm(format!(
                "truncated raster: {} of {needed} bytes",
                raster.len()
            )));
        }
        if wide {
            pixels.extend(
                raster[..needed]
                    .chunks_exact(2)
                    .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / scale),
            );
        } else {
            pixels.extend(raster[..needed].iter().map(|&b| b as f64 / scale));
        }
    } else {
        for i in 0..count {
            let v = rd.number("sample").map_err(|_| {
                Error::MalformedPgm(format!("truncated raster: {i} of {count} samples"))
            })?;
            pixels.push(v as f64 / scale);
        }
    }
    PixelMatrix::new(width, height, pixels)
}

/// Encodes an image as binary P5 with the given maxval.
pub fn encode_pgm(image: &PixelMatrix, maxval: u16) -> Vec<u8> {
    let maxval = maxval.max(1);
    let mut out = format!("P5\n{} {}\n{}\n", image.width, image.height, maxval).into_bytes();
    for &p in &image.pixels {
        let v = (p * maxval as f64).round() as u16;
        if maxval > 255 {
            out.extend_from_slice(&v.to_be_bytes());
        } else {
            out.push(v as u8);
        }
    }
    out
}

fn default_alpha() -> f64 {
    0.02
}

fn default_floor_db() -> f64 {
    -60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    /// Probe mode; `None` selects the lowest grid mode.
    #[serde(default)]
    pub input_mode: Option<i64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_floor_db")]
    pub floor_db: f64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            input_mode: None,
            alpha: default_alpha(),
            seed: 0,
            floor_db: default_floor_db(),
        }
    }
}

impl EncodingConfig {
    pub fn input_mode(&self, grid: &ModeGrid) -> Result<i64> {
        let m = self.input_mode.unwrap_or(grid.m_lo());
        if !grid.contains(m) {
            return Err(Error::IndexOutOfRange {
                what: "input mode",
                index: m,
                lo: grid.m_lo(),
                hi: grid.m_hi(),
            });
        }
        Ok(m)
    }

    fn validate(&self, grid: &ModeGrid) -> Result<()> {
        self.input_mode(grid)?;
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !self.floor_db.is_finite() {
            return Err(Error::InvalidParameter("floor_db must be finite".into()));
        }
        Ok(())
    }
}

/// HF index carrying pixel row `row` of a column with `n_rows` pixels.
pub fn hf_index_for_row(row: usize, n_rows: usize) -> i64 {
    row as i64 - (n_rows as i64 - 1)
}

fn check_column_fits(n_rows: usize, grid: &ModeGrid) -> Result<()> {
    if n_rows == 0 {
        return Ok(());
    }
    let lowest = hf_index_for_row(0, n_rows);
    let range = grid.hf_indices();
    if lowest < *range.start() || 0 > *range.end() {
        return Err(Error::GridTooSmall(format!(
            "{n_rows} pixel rows need HF indices {lowest}..=0, grid provides {}..={}",
            range.start(),
            range.end()
        )));
    }
    Ok(())
}

/// HF-only pump set for one image column: `|h_k'| = alpha · pixel` with a
/// uniformly random phase keyed by `(seed, column, k')`.
pub fn column_to_pumps(column: &[f64], grid: &ModeGrid, cfg: &EncodingConfig, column_index: usize) -> Result<PumpSet> {
    check_column_fits(column.len(), grid)?;
    let mut pumps = PumpSet::new();
    for (row, &pix) in column.iter().enumerate() {
        if pix == 0.0 {
            continue;
        }
        let k = hf_index_for_row(row, column.len());
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[column_index as u64, k as u64]));
        let phase = TAU * rng.random::<f64>();
        pumps.set_hf(k, Complex64::from_polar(cfg.alpha * pix.clamp(0.0, 1.0), phase));
    }
    Ok(pumps)
}

/// Simulated output amplitudes, one column per image column.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputMap {
    /// Output mode indices, ascending; the row order of every column.
    pub modes: Vec<i64>,
    pub input_mode: i64,
    /// Per-column output amplitudes in dB, floored at `floor_db`.
    pub columns: Vec<Vec<f64>>,
    /// Per-column linear amplitudes (unfloored).
    pub linear: Vec<Vec<f64>>,
    pub pump_sets: Vec<PumpSet>,
    /// Per-column error tag; `None` for successful columns.
    pub errors: Vec<Option<String>>,
    pub floor_db: f64,
}

impl OutputMap {
    /// Linear amplitude at output mode `mode` for column `col`.
    pub fn amplitude(&self, col: usize, mode: i64) -> f64 {
        let idx = (mode - self.modes[0]) as usize;
        self.linear[col][idx]
    }

    /// CSV with one row per output mode and one column per image column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["mode".to_string()];
        header.extend((0..self.columns.len()).map(|c| format!("col{c}")));
        w.write_record(&header)?;
        for (i, m) in self.modes.iter().enumerate() {
            let mut rec = vec![m.to_string()];
            rec.extend(self.columns.iter().map(|col| format!("{}", col[i])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn to_db_floored(x: f64, floor_db: f64) -> f64 {
    if x > 0.0 {
        (20.0 * x.log10()).max(floor_db)
    } else {
        floor_db
    }
}

/// Checks that the brightest possible column stays below threshold.
pub fn check_alpha(grid: &ModeGrid, n_rows: usize, cfg: &EncodingConfig) -> Result<()> {
    let pumps = column_to_pumps(&vec![1.0; n_rows], grid, cfg, 0)?;
    let report = stability_check(&build_eom_matrix(grid, &pumps)?);
    if !report.stable {
        return Err(Error::Unstable {
            min_decay_rate: report.min_decay_rate,
            condition: report.condition_estimate,
        });
    }
    Ok(())
}

/// Steady-state response to a probe tone at the input mode, column by
/// column. Columns are independent and evaluated in parallel.
pub fn simulate_sequence(grid: &ModeGrid, image: &PixelMatrix, cfg: &EncodingConfig) -> Result<OutputMap> {
    cfg.validate(grid)?;
    check_column_fits(image.height(), grid)?;
    check_alpha(grid, image.height(), cfg)?;
    let input = cfg.input_mode(grid)?;
    let in_pos = (input - grid.m_lo()) as usize;
    let n = grid.n_modes();

    let results = par_map(image.width(), |col| -> Result<(PumpSet, Result<Vec<f64>>)> {
        let pumps = column_to_pumps(&image.column(col), grid, cfg, col)?;
        if pumps.is_empty() {
            // unpumped: unit-modulus reflection at every detuning
            let unit = (0..n).map(|out| if out == in_pos { 1.0 } else { 0.0 }).collect();
            return Ok((pumps, Ok(unit)));
        }
        let amplitudes = build_eom_matrix(grid, &pumps)
            .and_then(|m| scattering_from_eom(&m))
            .map(|s| {
                let mags = mode_magnitudes(s.data());
                (0..n).map(|out| mags[(out, in_pos)]).collect()
            });
        Ok((pumps, amplitudes))
    });

    let mut map = OutputMap {
        modes: grid.modes().collect(),
        input_mode: input,
        columns: Vec::with_capacity(image.width()),
        linear: Vec::with_capacity(image.width()),
        pump_sets: Vec::with_capacity(image.width()),
        errors: Vec::with_capacity(image.width()),
        floor_db: cfg.floor_db,
    };
    for r in results {
        let (pumps, amplitudes) = r?;
        map.pump_sets.push(pumps);
        match amplitudes {
            Ok(lin) => {
                map.columns.push(lin.iter().map(|&x| to_db_floored(x, cfg.floor_db)).collect());
                map.linear.push(lin);
                map.errors.push(None);
            }
            Err(e) => {
                log::warn!("column {} failed: {e}", map.columns.len());
                map.columns.push(vec![cfg.floor_db; n]);
                map.linear.push(vec![0.0; n]);
                map.errors.push(Some(e.tag().to_string()));
            }
        }
    }
    Ok(map)
}

/// Pearson correlation coefficient; `None` when either side is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Linear amplitudes at the idler modes selected by each pixel row of
/// column `col` (`k' − input_mode`), in row order. Rows whose idler falls
/// outside the grid are `None`.
pub fn selected_amplitudes(map: &OutputMap, n_rows: usize, col: usize) -> Vec<Option<f64>> {
    let lo = map.modes[0];
    let hi = *map.modes.last().expect("non-empty grid");
    (0..n_rows)
        .map(|row| {
            let out = hf_index_for_row(row, n_rows) - map.input_mode;
            (lo..=hi).contains(&out).then(|| map.amplitude(col, out))
        })
        .collect()
}

/// Samples `Σ p cos(2π f t + φ)` at `t = i / sample_rate`.
pub fn waveform_from_tones(tones: &[PumpTone], sample_rate_hz: f64, duration_s: f64) -> Result<Vec<f64>> {
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::InvalidParameter(format!("sample rate must be > 0, got {sample_rate_hz}")));
    }
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::InvalidParameter(format!("duration must be > 0, got {duration_s}")));
    }
    let max_freq_hz = tones
        .iter()
        .filter(|t| t.amplitude != 0.0)
        .map(|t| t.frequency_hz.abs())
        .fold(0.0, f64::max);
    if sample_rate_hz <= 2.0 * max_freq_hz {
        return Err(Error::Aliasing {
            sample_rate_hz,
            max_freq_hz,
        });
    }
    let count = ((duration_s * sample_rate_hz).round() as usize).max(1);
    Ok((0..count)
        .map(|i| {
            let t = i as f64 / sample_rate_hz;
            tones
                .iter()
                .map(|tone| tone.amplitude * (TAU * tone.frequency_hz * t + tone.phase).cos())
                .sum()
        })
        .collect())
}

/// Time-domain pump waveform of a pump set.
pub fn synthesize_waveform(
    pumps: &PumpSet,
    grid: &ModeGrid,
    omega0_hz: f64,
    sample_rate_hz: f64,
    duration_s: f64,
) -> Result<Vec<f64>> {
    pumps.validate(grid)?;
    waveform_from_tones(&pumps.physical_tones(grid, omega0_hz), sample_rate_hz, duration_s)
}

/// JSON description written next to a raw waveform file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformSidecar {
    pub sample_format: String,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub n_samples: usize,
    pub omega0_hz: f64,
    pub tones: Vec<PumpTone>,
}

impl WaveformSidecar {
    pub fn new(tones: Vec<PumpTone>, sample_rate_hz: f64, duration_s: f64, n_samples: usize, omega0_hz: f64) -> Self {
        Self {
            sample_format: "f64le".into(),
            sample_rate_hz,
            duration_s,
            n_samples,
            omega0_hz,
            tones,
        }
    }
}

/// Little-endian 64-bit float samples.
pub fn waveform_bytes(samples: &[f64]) -> Vec<u8> {
    samples.iter().flat_map(|s| s.to_le_bytes()).collect()
}

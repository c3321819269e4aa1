//! Pump tone amplitudes and their JSON document format.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ModeGrid;

/// Normalized complex pump amplitudes: `l_k = g_k/γ` for the low-frequency
/// tones at `kΔ` and `h_k' = g_k'/γ` for the high-frequency tones at
/// `2ω₀ + k'Δ`. Absent keys are zero amplitude.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PumpSet {
    lf: BTreeMap<i64, Complex64>,
    hf: BTreeMap<i64, Complex64>,
}

/// Which family a pump tone belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PumpKind {
    Lf,
    Hf,
}

impl PumpSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_lf(&mut self, k: i64, value: Complex64) {
        self.lf.insert(k, value);
    }

    pub fn set_hf(&mut self, k_prime: i64, value: Complex64) {
        self.hf.insert(k_prime, value);
    }

    pub fn lf(&self, k: i64) -> Complex64 {
        self.lf.get(&k).copied().unwrap_or_default()
    }

    pub fn hf(&self, k_prime: i64) -> Complex64 {
        self.hf.get(&k_prime).copied().unwrap_or_default()
    }

    pub fn lf_iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.lf.iter().map(|(&k, &v)| (k, v))
    }

    pub fn hf_iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.hf.iter().map(|(&k, &v)| (k, v))
    }

    /// All stored tones, LF first, each family in ascending index order.
    pub fn tones(&self) -> impl Iterator<Item = (PumpKind, i64, Complex64)> + '_ {
        self.lf_iter()
            .map(|(k, v)| (PumpKind::Lf, k, v))
            .chain(self.hf_iter().map(|(k, v)| (PumpKind::Hf, k, v)))
    }

    /// True when every stored amplitude is exactly zero.
    pub fn is_empty(&self) -> bool {
        self.tones().all(|(_, _, v)| v == Complex64::default())
    }

    /// Checks every key against the grid's LF and HF index sets.
    pub fn validate(&self, grid: &ModeGrid) -> Result<()> {
        for &k in self.lf.keys() {
            grid.check_lf(k)?;
        }
        for &k in self.hf.keys() {
            grid.check_hf(k)?;
        }
        Ok(())
    }

    /// Multiplies every amplitude by a real factor.
    pub fn scale(&mut self, factor: f64) {
        for v in self.lf.values_mut().chain(self.hf.values_mut()) {
            *v *= factor;
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// Conjugates every amplitude (pump phases reversed).
    pub fn conjugated(&self) -> Self {
        Self {
            lf: self.lf.iter().map(|(&k, v)| (k, v.conj())).collect(),
            hf: self.hf.iter().map(|(&k, v)| (k, v.conj())).collect(),
        }
    }

    /// Largest componentwise `|a - b|`, treating absent tones as zero.
    pub fn max_abs_diff(&self, other: &PumpSet) -> f64 {
        let lf = self
            .lf
            .keys()
            .chain(other.lf.keys())
            .map(|&k| (self.lf(k) - other.lf(k)).norm());
        let hf = self
            .hf
            .keys()
            .chain(other.hf.keys())
            .map(|&k| (self.hf(k) - other.hf(k)).norm());
        lf.chain(hf).fold(0.0, f64::max)
    }

    /// Largest amplitude magnitude over all tones.
    pub fn max_amplitude(&self) -> f64 {
        self.tones().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }
}

/// Physical parameters of one tone of the pump waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpTone {
    pub kind: PumpKind,
    pub index: i64,
    /// Tone frequency in Hz.
    pub frequency_hz: f64,
    /// Amplitude `p = 2γ|l|`.
    pub amplitude: f64,
    /// Phase `arg(l)` in radians.
    pub phase: f64,
}

impl PumpSet {
    /// Converts the normalized amplitudes to physical tones: LF at `kΔ`, HF at
    /// `2ω₀ + k'Δ`. Zero-amplitude entries are skipped.
    pub fn physical_tones(&self, grid: &ModeGrid, omega0_hz: f64) -> Vec<PumpTone> {
        let gamma = grid.gamma_hz();
        let delta = grid.delta_hz();
        self.tones()
            .filter(|(_, _, v)| *v != Complex64::default())
            .map(|(kind, index, v)| {
                let frequency_hz = match kind {
                    PumpKind::Lf => index as f64 * delta,
                    PumpKind::Hf => 2.0 * omega0_hz + index as f64 * delta,
                };
                PumpTone {
                    kind,
                    index,
                    frequency_hz,
                    amplitude: 2.0 * gamma * v.norm(),
                    phase: v.arg(),
                }
            })
            .collect()
    }
}

/// One `{k, re, im}` entry of a pump file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneEntry {
    pub k: i64,
    pub re: f64,
    pub im: f64,
}

/// Diagnostics attached to a pump file written by the inverse solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseDiagnostics {
    pub relative_residual: f64,
    pub max_asymmetry: f64,
    pub condition_estimate: f64,
}

/// On-disk pump document: the grid plus the tone table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpFile {
    pub n: usize,
    pub m_lo: i64,
    pub m_hi: i64,
    pub delta_hz: f64,
    pub gamma_hz: f64,
    #[serde(default)]
    pub detuning_offset: f64,
    #[serde(default)]
    pub lf: Vec<ToneEntry>,
    #[serde(default)]
    pub hf: Vec<ToneEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<InverseDiagnostics>,
}

impl PumpFile {
    pub fn new(grid: &ModeGrid, pumps: &PumpSet) -> Self {
        let entry = |(k, v): (i64, Complex64)| ToneEntry {
            k,
            re: v.re,
            im: v.im,
        };
        Self {
            n: grid.n_modes(),
            m_lo: grid.m_lo(),
            m_hi: grid.m_hi(),
            delta_hz: grid.delta_hz(),
            gamma_hz: grid.gamma_hz(),
            detuning_offset: grid.detuning_offset(),
            lf: pumps.lf_iter().map(entry).collect(),
            hf: pumps.hf_iter().map(entry).collect(),
            diagnostics: None,
        }
    }

    /// Rebuilds and validates the grid and pump set.
    pub fn decode(&self) -> Result<(ModeGrid, PumpSet)> {
        let grid = ModeGrid::new(
            self.m_lo,
            self.m_hi,
            self.delta_hz,
            self.gamma_hz,
            self.detuning_offset,
        )?;
        if grid.n_modes() != self.n {
            return Err(Error::DimensionMismatch {
                expected: format!("n = m_hi - m_lo + 1 = {}", grid.n_modes()),
                found: format!("n = {}", self.n),
            });
        }
        let mut pumps = PumpSet::new();
        for t in &self.lf {
            pumps.set_lf(t.k, Complex64::new(t.re, t.im));
        }
        for t in &self.hf {
            pumps.set_hf(t.k, Complex64::new(t.re, t.im));
        }
        pumps.validate(&grid)?;
        Ok((grid, pumps))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

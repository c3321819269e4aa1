//! The frequency comb of modes seen by the parametric oscillator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default comb spacing, 100 kHz.
pub const DEFAULT_DELTA_HZ: f64 = 1e5;
/// Default coupling rate: a 4.2 GHz resonance with loaded Q of 37.5.
pub const DEFAULT_GAMMA_HZ: f64 = 1.12e8;
/// Default resonance frequency, used only for waveform synthesis.
pub const DEFAULT_OMEGA0_HZ: f64 = 4.2e9;

/// A contiguous range of comb modes `m_lo..=m_hi` with uniform spacing.
///
/// Every mode `m` contributes two rows to the equation-of-motion matrix,
/// interleaved as `a_m` at `2 (m - m_lo)` and `a_m†` at `2 (m - m_lo) + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    m_lo: i64,
    m_hi: i64,
    delta_hz: f64,
    gamma_hz: f64,
    detuning_offset: f64,
}

impl ModeGrid {
    pub fn new(
        m_lo: i64,
        m_hi: i64,
        delta_hz: f64,
        gamma_hz: f64,
        detuning_offset: f64,
    ) -> Result<Self> {
        if m_lo > m_hi {
            return Err(Error::InvalidRange { m_lo, m_hi });
        }
        if !(delta_hz.is_finite() && delta_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_hz must be positive, got {delta_hz}"
            )));
        }
        if !(gamma_hz.is_finite() && gamma_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma_hz must be positive, got {gamma_hz}"
            )));
        }
        if !detuning_offset.is_finite() {
            return Err(Error::InvalidParameter(
                "detuning_offset must be finite".into(),
            ));
        }
        Ok(Self {
            m_lo,
            m_hi,
            delta_hz,
            gamma_hz,
            detuning_offset,
        })
    }

    /// A grid of `n` modes centred on the resonance: `m_lo = -(n / 2)`.
    pub fn centered(n: usize, delta_hz: f64, gamma_hz: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("mode count must be >= 1".into()));
        }
        let m_lo = -((n / 2) as i64);
        Self::new(m_lo, m_lo + n as i64 - 1, delta_hz, gamma_hz, 0.0)
    }

    /// `centered` with the default spacing and coupling rate.
    pub fn with_defaults(n: usize) -> Result<Self> {
        Self::centered(n, DEFAULT_DELTA_HZ, DEFAULT_GAMMA_HZ)
    }

    pub fn m_lo(&self) -> i64 {
        self.m_lo
    }

    pub fn m_hi(&self) -> i64 {
        self.m_hi
    }

    pub fn delta_hz(&self) -> f64 {
        self.delta_hz
    }

    pub fn gamma_hz(&self) -> f64 {
        self.gamma_hz
    }

    pub fn detuning_offset(&self) -> f64 {
        self.detuning_offset
    }

    /// Number of modes N.
    pub fn n_modes(&self) -> usize {
        (self.m_hi - self.m_lo + 1) as usize
    }

    /// Dimension 2N of the matrices over this grid.
    pub fn dim(&self) -> usize {
        2 * self.n_modes()
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> {
        self.m_lo..=self.m_hi
    }

    pub fn contains(&self, m: i64) -> bool {
        (self.m_lo..=self.m_hi).contains(&m)
    }

    /// Row of `a_m`. Caller guarantees `m` lies on the grid.
    pub fn ann(&self, m: i64) -> usize {
        debug_assert!(self.contains(m));
        2 * (m - self.m_lo) as usize
    }

    /// Row of `a_m†`.
    pub fn cre(&self, m: i64) -> usize {
        self.ann(m) + 1
    }

    /// Dimensionless detuning `δ_m = m Δ/γ + offset`.
    pub fn detuning(&self, m: i64) -> f64 {
        m as f64 * self.delta_hz / self.gamma_hz + self.detuning_offset
    }

    /// Low-frequency pump indices `1..=N-1`.
    pub fn lf_indices(&self) -> std::ops::RangeInclusive<i64> {
        1..=(self.n_modes() as i64 - 1)
    }

    /// High-frequency pump indices `2 m_lo ..= 2 m_hi`.
    pub fn hf_indices(&self) -> std::ops::RangeInclusive<i64> {
        2 * self.m_lo..=2 * self.m_hi
    }

    /// Total number of pump tones, `3N - 2`.
    pub fn n_pumps(&self) -> usize {
        3 * self.n_modes() - 2
    }

    pub(crate) fn check_lf(&self, k: i64) -> Result<()> {
        let r = self.lf_indices();
        if r.contains(&k) {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "LF pump",
                index: k,
                lo: *r.start(),
                hi: *r.end(),
            })
        }
    }

    pub(crate) fn check_hf(&self, k: i64) -> Result<()> {
        let r = self.hf_indices();
        if r.contains(&k) {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "HF pump",
                index: k,
                lo: *r.start(),
                hi: *r.end(),
            })
        }
    }

    /// Number of ordered mode pairs `(m, n)` on the grid with `m + n = k'`.
    pub fn hf_pair_count(&self, k_prime: i64) -> usize {
        let n = self.n_modes() as i64;
        (n - (k_prime - (self.m_lo + self.m_hi)).abs()).max(0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hardware_defaults_grid() {
        let g = ModeGrid::new(-2, 2, 1e5, 1.12e8, 0.0).unwrap();
        assert_eq!(g.n_modes(), 5);
        assert_eq!(g.lf_indices(), 1..=4);
        assert_eq!(g.hf_indices(), -4..=4);
        assert_eq!(g.n_pumps(), 13);
    }

    #[test]
    fn single_mode_grid() {
        let g = ModeGrid::new(0, 0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(g.n_modes(), 1);
        assert_eq!(g.lf_indices().count(), 0);
        assert_eq!(g.hf_indices(), 0..=0);
    }

    #[test]
    fn detunings() {
        let g = ModeGrid::new(-1, 1, 1.0, 2.0, 0.0).unwrap();
        assert_eq!(g.detuning(-1), -0.5);
        assert_eq!(g.detuning(0), 0.0);
        assert_eq!(g.detuning(1), 0.5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            ModeGrid::new(2, 1, 1.0, 1.0, 0.0),
            Err(Error::InvalidRange { .. })
        ));
        assert!(matches!(
            ModeGrid::new(0, 1, 0.0, 1.0, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            ModeGrid::new(0, 1, 1.0, -1.0, 0.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn interleaved_rows() {
        let g = ModeGrid::new(-1, 1, 1.0, 1.0, 0.0).unwrap();
        assert_eq!((g.ann(-1), g.cre(-1)), (0, 1));
        assert_eq!((g.ann(1), g.cre(1)), (4, 5));
    }

    #[test]
    fn centered_grids() {
        let g = ModeGrid::with_defaults(5).unwrap();
        assert_eq!((g.m_lo(), g.m_hi()), (-2, 2));
        let g = ModeGrid::with_defaults(4).unwrap();
        assert_eq!((g.m_lo(), g.m_hi()), (-2, 1));
    }

    #[test]
    fn pair_counts_on_asymmetric_grid() {
        let g = ModeGrid::new(0, 3, 1.0, 1.0, 0.0).unwrap();
        for kp in g.hf_indices() {
            let brute = g
                .modes()
                .filter(|&m| g.contains(kp - m))
                .count();
            assert_eq!(g.hf_pair_count(kp), brute, "k' = {kp}");
        }
    }
}

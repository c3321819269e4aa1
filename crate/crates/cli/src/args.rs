use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use paramix::designer::{Direction, ObjectiveKind};
use paramix::grid::{DEFAULT_DELTA_HZ, DEFAULT_GAMMA_HZ, DEFAULT_OMEGA0_HZ};
use paramix::scattering::MatrixBasis;
use paramix::ModeGrid;

#[derive(Debug, Parser)]
#[command(name = "paramix", version, about = "Direct and inverse pump design for multi-mode parametric oscillators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Number of modes; the grid is centred unless --m-lo is given.
    #[arg(short = 'N', long = "modes")]
    pub modes: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub m_lo: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub m_hi: Option<i64>,
    /// Mode spacing in Hz.
    #[arg(long, default_value_t = DEFAULT_DELTA_HZ)]
    pub delta_hz: f64,
    /// External coupling rate in Hz.
    #[arg(long, default_value_t = DEFAULT_GAMMA_HZ)]
    pub gamma_hz: f64,
    /// Constant detuning added to every mode, in units of γ.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub detuning_offset: f64,
}

impl GridArgs {
    pub fn is_specified(&self) -> bool {
        self.modes.is_some() || self.m_lo.is_some() || self.m_hi.is_some()
    }

    pub fn resolve(&self) -> paramix::Result<ModeGrid> {
        let (m_lo, m_hi) = match (self.modes, self.m_lo, self.m_hi) {
            (Some(n), None, None) => {
                let g = ModeGrid::centered(n, self.delta_hz, self.gamma_hz)?;
                (g.m_lo(), g.m_hi())
            }
            (None, Some(lo), Some(hi)) => (lo, hi),
            (Some(n), Some(lo), None) if n > 0 => (lo, lo + n as i64 - 1),
            (Some(n), None, Some(hi)) if n > 0 => (hi - n as i64 + 1, hi),
            (Some(n), Some(lo), Some(hi)) if hi - lo + 1 == n as i64 => (lo, hi),
            _ => {
                return Err(paramix::Error::InvalidParameter(
                    "specify the grid with --modes, --m-lo/--m-hi, or a consistent combination".into(),
                ))
            }
        };
        ModeGrid::new(m_lo, m_hi, self.delta_hz, self.gamma_hz, self.detuning_offset)
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Worker threads (default: available parallelism).
    #[arg(long, env = "PARAMIX_THREADS")]
    pub threads: Option<usize>,
    /// Output file; a run manifest is written next to it.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BasisArg {
    Aadag,
    Xp,
}

impl From<BasisArg> for MatrixBasis {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Aadag => MatrixBasis::Aadag,
            BasisArg::Xp => MatrixBasis::Xp,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Forward,
    Backward,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Forward => Direction::Forward,
            DirectionArg::Backward => Direction::Backward,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ObjectiveArg {
    MinCycleMargin,
    ElementwiseMax,
}

impl From<ObjectiveArg> for ObjectiveKind {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::MinCycleMargin => ObjectiveKind::MinCycleMargin,
            ObjectiveArg::ElementwiseMax => ObjectiveKind::ElementwiseMax,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pump file to scattering matrix.
    Direct {
        #[arg(long)]
        pumps: PathBuf,
        #[arg(long, value_enum, default_value = "aadag")]
        basis: BasisArg,
        /// Also write the vacuum-input covariance matrix to this file.
        #[arg(long)]
        covariance: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Scattering matrix to pump file.
    Invert {
        #[arg(long)]
        scattering: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Random pumps through the direct and inverse maps.
    Roundtrip {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0.05)]
        amp_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest accepted relative residual.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Gaussian-noise robustness sweep, one CSV row per target and noise draw.
    BenchNoise {
        /// JSON sweep configuration; its fields override flags.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short = 'N', long = "modes", value_delimiter = ',')]
        modes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        ratios: Vec<f64>,
        #[arg(long)]
        targets: Option<usize>,
        #[arg(long)]
        noise_configs: Option<usize>,
        #[arg(long)]
        amp_max: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        delta_hz: Option<f64>,
        #[arg(long)]
        gamma_hz: Option<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Circulator synthesis over a grid of transmission magnitudes.
    DesignCirculator {
        #[command(flatten)]
        grid: GridArgs,
        /// Magnitude grid as lo:hi:count.
        #[arg(long = "grid", default_value = "0.1:0.9:20")]
        magnitudes: String,
        #[arg(long, value_enum, default_value = "forward")]
        direction: DirectionArg,
        #[arg(long, value_enum, default_value = "min-cycle-margin")]
        objective: ObjectiveArg,
        /// Trace CSV path (default: next to --out with a .trace.csv suffix).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Encode a PGM image column by column and simulate the output map.
    EncodeImage {
        #[arg(long)]
        image: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// JSON encoding configuration; its fields override flags.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        input_mode: Option<i64>,
        #[arg(long, default_value_t = 0.02)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = -60.0, allow_hyphen_values = true)]
        floor_db: f64,
        /// Directory for per-column pump waveforms.
        #[arg(long)]
        emit_waveforms: Option<PathBuf>,
        #[command(flatten)]
        wave: WaveArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Time-domain samples of a pump file.
    SynthWaveform {
        #[arg(long)]
        pumps: PathBuf,
        #[command(flatten)]
        wave: WaveArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Re-run the command recorded in a manifest and check output digests.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct WaveArgs {
    /// Resonance frequency ω₀ in Hz.
    #[arg(long, default_value_t = DEFAULT_OMEGA0_HZ)]
    pub omega0_hz: f64,
    #[arg(long, default_value_t = 2.5e10)]
    pub sample_rate_hz: f64,
    #[arg(long, default_value_t = 2e-7)]
    pub duration_s: f64,
}

/// Parses `lo:hi:count`.
pub fn parse_magnitude_grid(text: &str) -> paramix::Result<Vec<f64>> {
    let bad = || paramix::Error::InvalidParameter(format!("bad magnitude grid {text:?}; expected lo:hi:count"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [single] => Ok(vec![single.trim().parse().map_err(|_| bad())?]),
        [lo, hi, count] => {
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let count: usize = count.trim().parse().map_err(|_| bad())?;
            if count == 0 {
                return Err(bad());
            }
            Ok(paramix::designer::linspace(lo, hi, count))
        }
        _ => Err(bad()),
    }
}

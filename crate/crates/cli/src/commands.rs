use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use paramix::bench::{round_trip_trials, run_noise_sweep_with, SweepConfig, SweepCsv};
use paramix::designer::{optimize_circulator, CirculatorSpec, Direction, ObjectiveKind};
use paramix::encoder::{load_image, simulate_sequence, synthesize_waveform, waveform_bytes, EncodingConfig, WaveformSidecar};
use paramix::pumps::InverseDiagnostics;
use paramix::scattering::{stability_check, MatrixBasis};
use paramix::{
    bogoliubov_residual, build_eom_matrix, covariance_from_scattering, direct_problem, solve_inverse, to_xp_basis,
    ModeGrid, PumpFile, ScatteringFile,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{parse_magnitude_grid, Command, GridArgs, RunArgs, WaveArgs};
use crate::manifest::{manifest_path, FileDigest, RunManifest};
use crate::CliError;

type CliResult<T = ()> = Result<T, CliError>;

fn run_args(cmd: &Command) -> Option<&RunArgs> {
    match cmd {
        Command::Direct { run, .. }
        | Command::Invert { run, .. }
        | Command::Roundtrip { run, .. }
        | Command::BenchNoise { run, .. }
        | Command::DesignCirculator { run, .. }
        | Command::EncodeImage { run, .. }
        | Command::SynthWaveform { run, .. } => Some(run),
        Command::Replay { .. } => None,
    }
}

pub fn execute(cmd: Command, argv: Vec<String>) -> CliResult {
    match run_args(&cmd).and_then(|r| r.threads) {
        Some(0) => Err(CliError::Usage("--threads must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| dispatch(cmd, argv))
        }
        None => dispatch(cmd, argv),
    }
}

fn dispatch(cmd: Command, argv: Vec<String>) -> CliResult {
    let mut ctx = Context {
        argv,
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    match cmd {
        Command::Direct {
            pumps,
            basis,
            covariance,
            hbar,
            run,
        } => direct(&mut ctx, &pumps, basis.into(), covariance.as_deref(), hbar, &run),
        Command::Invert { scattering, grid, run } => invert(&mut ctx, &scattering, &grid, &run),
        Command::Roundtrip {
            grid,
            trials,
            amp_max,
            seed,
            tolerance,
            run,
        } => roundtrip(&mut ctx, &grid, trials, amp_max, seed, tolerance, &run),
        Command::BenchNoise {
            config,
            modes,
            ratios,
            targets,
            noise_configs,
            amp_max,
            seed,
            delta_hz,
            gamma_hz,
            run,
        } => {
            let mut flags = serde_json::Map::new();
            if !modes.is_empty() {
                flags.insert("mode_counts".into(), json!(modes));
            }
            if !ratios.is_empty() {
                flags.insert("noise_ratios".into(), json!(ratios));
            }
            let optional = [
                ("targets_per_point", targets.map(|v| json!(v))),
                ("noise_configs_per_target", noise_configs.map(|v| json!(v))),
                ("amp_max", amp_max.map(|v| json!(v))),
                ("seed", seed.map(|v| json!(v))),
                ("delta_hz", delta_hz.map(|v| json!(v))),
                ("gamma_hz", gamma_hz.map(|v| json!(v))),
            ];
            for (key, value) in optional {
                if let Some(v) = value {
                    flags.insert(key.into(), v);
                }
            }
            bench_noise(&mut ctx, config.as_deref(), Value::Object(flags), &run)
        }
        Command::DesignCirculator {
            grid,
            magnitudes,
            direction,
            objective,
            trace,
            run,
        } => design(
            &mut ctx,
            &grid,
            &magnitudes,
            direction.into(),
            objective.into(),
            trace.as_deref(),
            &run,
        ),
        Command::EncodeImage {
            image,
            grid,
            config,
            input_mode,
            alpha,
            seed,
            floor_db,
            emit_waveforms,
            wave,
            run,
        } => {
            let flags = EncodingConfig {
                input_mode,
                alpha,
                seed,
                floor_db,
            };
            encode(
                &mut ctx,
                &image,
                &grid,
                config.as_deref(),
                flags,
                emit_waveforms.as_deref(),
                &wave,
                &run,
            )
        }
        Command::SynthWaveform { pumps, wave, run } => synth(&mut ctx, &pumps, &wave, &run),
        Command::Replay { manifest } => replay(&manifest),
    }
}

struct Context {
    argv: Vec<String>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Context {
    fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| CliError::file(path, e))?;
        self.inputs.push(path.to_path_buf());
        Ok(bytes)
    }

    fn read_text(&mut self, path: &Path) -> CliResult<String> {
        String::from_utf8(self.read(path)?)
            .map_err(|_| CliError::Usage(format!("{}: not valid UTF-8", path.display())))
    }

    fn write(&mut self, path: &Path, bytes: &[u8]) -> CliResult {
        fs::write(path, bytes).map_err(|e| CliError::file(path, e))?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    /// Writes to `out`, or stdout when no path is given.
    fn emit(&mut self, out: Option<&Path>, bytes: &[u8]) -> CliResult {
        match out {
            Some(p) => self.write(p, bytes),
            None => {
                let mut stdout = io::stdout().lock();
                stdout
                    .write_all(bytes)
                    .and_then(|_| stdout.flush())
                    .map_err(|e| CliError::file(Path::new("<stdout>"), e))
            }
        }
    }

    fn finish(&mut self, command: &str, seed: Option<u64>, config: Value, out: Option<&Path>) -> CliResult {
        let Some(out) = out else {
            return Ok(());
        };
        let digests = |paths: &[PathBuf]| paths.iter().map(|p| FileDigest::of(p)).collect::<CliResult<Vec<_>>>();
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            argv: std::mem::take(&mut self.argv),
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
        };
        manifest.write(&manifest_path(out))
    }
}

fn to_json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value).map_err(paramix::Error::from)?;
    text.push('\n');
    Ok(text.into_bytes())
}

/// Overlays the keys of the JSON object in `config` onto `base`.
fn overlay(base: &mut Value, layer: Value) {
    if let (Value::Object(b), Value::Object(l)) = (base, layer) {
        for (k, v) in l {
            b.insert(k, v);
        }
    }
}

fn read_config(ctx: &mut Context, path: &Path) -> CliResult<Value> {
    let text = ctx.read_text(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(CliError::Usage(format!("{}: expected a JSON object", path.display())));
    }
    Ok(value)
}

fn direct(
    ctx: &mut Context,
    pumps_path: &Path,
    basis: MatrixBasis,
    covariance: Option<&Path>,
    hbar: f64,
    run: &RunArgs,
) -> CliResult {
    let text = ctx.read_text(pumps_path)?;
    let (grid, pumps) = PumpFile::from_json(&text)
        .and_then(|f| f.decode())
        .map_err(|e| CliError::at(pumps_path, e))?;
    let report = stability_check(&build_eom_matrix(&grid, &pumps)?);
    let s = direct_problem(&grid, &pumps)?;
    if !report.stable {
        log::warn!(
            "pump set is not stable (min decay rate {:.3e}, condition {:.3e})",
            report.min_decay_rate,
            report.condition_estimate
        );
    }
    eprintln!(
        "N = {}, condition {:.3e}, min decay rate {:.3e}, Bogoliubov residual {:.3e}",
        grid.n_modes(),
        report.condition_estimate,
        report.min_decay_rate,
        bogoliubov_residual(&s)
    );
    ctx.emit(run.out.as_deref(), &to_json(&ScatteringFile::new(&s, basis)?)?)?;
    if let Some(cov_path) = covariance {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(CliError::Usage(format!("--hbar must be > 0, got {hbar}")));
        }
        let v = covariance_from_scattering(&to_xp_basis(&s)?, hbar);
        let rows: Vec<Vec<f64>> = v.data.row_iter().map(|r| r.iter().copied().collect()).collect();
        let doc = json!({ "hbar": hbar, "basis": "xp", "index_convention": paramix::scattering::INDEX_CONVENTION, "rows": rows });
        ctx.write(cov_path, &to_json(&doc)?)?;
    }
    let config = json!({ "pumps": pumps_path, "basis": basis, "covariance": covariance, "hbar": hbar });
    ctx.finish("direct", None, config, run.out.as_deref())
}

fn invert(ctx: &mut Context, path: &Path, grid_args: &GridArgs, run: &RunArgs) -> CliResult {
    let text = ctx.read_text(path)?;
    let file = ScatteringFile::from_json(&text).map_err(|e| CliError::at(path, e))?;
    let fallback = ModeGrid::new(0, 0, grid_args.delta_hz, grid_args.gamma_hz, grid_args.detuning_offset)?;
    let grid = file.grid(&fallback).map_err(|e| CliError::at(path, e))?;
    let s = file.decode(&grid).map_err(|e| CliError::at(path, e))?;
    let sol = solve_inverse(&s, &grid)?;
    eprintln!(
        "relative residual {:.3e}, max asymmetry {:.3e}, condition {:.3e}",
        sol.relative_residual, sol.asymmetry, sol.condition_estimate
    );
    let mut out_file = PumpFile::new(&grid, &sol.pumps);
    out_file.diagnostics = Some(InverseDiagnostics {
        relative_residual: sol.relative_residual,
        max_asymmetry: sol.asymmetry,
        condition_estimate: sol.condition_estimate,
    });
    ctx.emit(run.out.as_deref(), &to_json(&out_file)?)?;
    let config = json!({ "scattering": path, "grid": grid });
    ctx.finish("invert", None, config, run.out.as_deref())
}

fn roundtrip(
    ctx: &mut Context,
    grid_args: &GridArgs,
    trials: usize,
    amp_max: f64,
    seed: u64,
    tolerance: f64,
    run: &RunArgs,
) -> CliResult {
    let grid = grid_args.resolve()?;
    let stats = round_trip_trials(&grid, trials, amp_max, seed)?;
    println!("max relative_residual {:.3e}", stats.max_relative_residual);
    println!("max amplitude error {:.3e}", stats.max_amplitude_error);
    let summary = json!({
        "n_modes": grid.n_modes(),
        "trials": trials,
        "max_relative_residual": stats.max_relative_residual,
        "max_amplitude_error": stats.max_amplitude_error,
        "max_asymmetry": stats.max_asymmetry,
        "tolerance": tolerance,
        "passed": stats.max_relative_residual <= tolerance,
    });
    if let Some(out) = run.out.as_deref() {
        ctx.write(out, &to_json(&summary)?)?;
    }
    let config = json!({ "grid": grid, "trials": trials, "amp_max": amp_max, "seed": seed, "tolerance": tolerance });
    ctx.finish("roundtrip", Some(seed), config, run.out.as_deref())?;
    if stats.max_relative_residual > tolerance {
        return Err(CliError::Numerical(format!(
            "round-trip residual {:.3e} exceeds tolerance {tolerance:.1e}",
            stats.max_relative_residual
        )));
    }
    Ok(())
}

fn bench_noise(ctx: &mut Context, config_path: Option<&Path>, flags: Value, run: &RunArgs) -> CliResult {
    let mut resolved = serde_json::to_value(SweepConfig::default()).map_err(paramix::Error::from)?;
    overlay(&mut resolved, flags);
    if let Some(p) = config_path {
        let layer = read_config(ctx, p)?;
        overlay(&mut resolved, layer);
    }
    let config: SweepConfig =
        serde_json::from_value(resolved).map_err(|e| CliError::Usage(format!("sweep configuration: {e}")))?;
    config.validate()?;

    let mut failed = 0usize;
    let mut total = 0usize;
    let mut stream = |sink: &mut dyn Write| -> CliResult {
        let mut csv = SweepCsv::new(sink);
        run_noise_sweep_with(&config, |r| {
            total += 1;
            if !r.is_ok() {
                failed += 1;
            }
            csv.write(r)
        })?;
        csv.finish()?;
        Ok(())
    };
    match run.out.as_deref() {
        Some(out) => {
            let file = fs::File::create(out).map_err(|e| CliError::file(out, e))?;
            let mut buffered = io::BufWriter::new(file);
            stream(&mut buffered)?;
            buffered.flush().map_err(|e| CliError::file(out, e))?;
            ctx.outputs.push(out.to_path_buf());
        }
        None => stream(&mut io::stdout().lock())?,
    }
    eprintln!("{total} rows, {failed} failed");
    let value = serde_json::to_value(&config).map_err(paramix::Error::from)?;
    ctx.finish("bench-noise", Some(config.seed), value, run.out.as_deref())
}

fn trace_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.trace.csv"))
}

fn design(
    ctx: &mut Context,
    grid_args: &GridArgs,
    magnitudes: &str,
    direction: Direction,
    objective: ObjectiveKind,
    trace: Option<&Path>,
    run: &RunArgs,
) -> CliResult {
    let grid = grid_args.resolve()?;
    let spec = CirculatorSpec {
        n_modes: grid.n_modes(),
        magnitude_grid: parse_magnitude_grid(magnitudes)?,
        direction,
        objective,
    };
    let result = optimize_circulator(&grid, &spec)?;
    eprintln!(
        "objective {:.6} at magnitude {:.4}{}; forward {:.2} dB, isolation {:.2} dB, leakage {:.2} dB",
        result.objective,
        result.best_magnitude,
        if result.refined { " (refined)" } else { "" },
        result.forward_db,
        result.isolation_db,
        result.max_leakage_db
    );
    ctx.emit(run.out.as_deref(), &to_json(&result.to_file()?)?)?;

    let trace_out = trace.map(Path::to_path_buf).or_else(|| run.out.as_deref().map(trace_path));
    if let Some(tp) = trace_out {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["magnitude", "objective", "refined", "status"]).map_err(paramix::Error::from)?;
        for p in &result.trace {
            w.write_record([
                p.magnitude.to_string(),
                p.objective.map(|o| o.to_string()).unwrap_or_default(),
                p.refined.to_string(),
                p.status.clone(),
            ])
            .map_err(paramix::Error::from)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
        ctx.write(&tp, &bytes)?;
    }
    let config = json!({ "grid": grid, "spec": spec });
    ctx.finish("design-circulator", None, config, run.out.as_deref())
}

/// Smallest centred grid whose HF range and idler modes cover `rows` pixel rows.
fn grid_for_rows(rows: usize, args: &GridArgs) -> paramix::Result<ModeGrid> {
    let n = 2 * rows.div_ceil(2) + 1;
    let g = ModeGrid::centered(n, args.delta_hz, args.gamma_hz)?;
    ModeGrid::new(g.m_lo(), g.m_hi(), args.delta_hz, args.gamma_hz, args.detuning_offset)
}

#[allow(clippy::too_many_arguments)]
fn encode(
    ctx: &mut Context,
    image_path: &Path,
    grid_args: &GridArgs,
    config_path: Option<&Path>,
    flags: EncodingConfig,
    waveforms: Option<&Path>,
    wave: &WaveArgs,
    run: &RunArgs,
) -> CliResult {
    let bytes = ctx.read(image_path)?;
    let image = load_image(&bytes).map_err(|e| CliError::at(image_path, e))?;
    let mut resolved = serde_json::to_value(&flags).map_err(paramix::Error::from)?;
    if let Some(p) = config_path {
        let layer = read_config(ctx, p)?;
        overlay(&mut resolved, layer);
    }
    let cfg: EncodingConfig =
        serde_json::from_value(resolved).map_err(|e| CliError::Usage(format!("encoding configuration: {e}")))?;
    let grid = if grid_args.is_specified() {
        grid_args.resolve()?
    } else {
        grid_for_rows(image.height(), grid_args)?
    };

    let map = simulate_sequence(&grid, &image, &cfg)?;
    for (c, err) in map.errors.iter().enumerate() {
        if let Some(tag) = err {
            eprintln!("warning: column {c} failed ({tag}); recorded at the floor");
        }
    }
    let mut csv = Vec::new();
    map.write_csv(&mut csv)?;
    ctx.emit(run.out.as_deref(), &csv)?;

    if let Some(dir) = waveforms {
        fs::create_dir_all(dir).map_err(|e| CliError::file(dir, e))?;
        for (c, pumps) in map.pump_sets.iter().enumerate() {
            let samples = synthesize_waveform(pumps, &grid, wave.omega0_hz, wave.sample_rate_hz, wave.duration_s)?;
            let sidecar = WaveformSidecar::new(
                pumps.physical_tones(&grid, wave.omega0_hz),
                wave.sample_rate_hz,
                wave.duration_s,
                samples.len(),
                wave.omega0_hz,
            );
            ctx.write(&dir.join(format!("col{c:04}.f64")), &waveform_bytes(&samples))?;
            ctx.write(&dir.join(format!("col{c:04}.json")), &to_json(&sidecar)?)?;
        }
    }
    let config = json!({
        "image": image_path,
        "grid": grid,
        "encoding": cfg,
        "waveforms": waveforms,
        "omega0_hz": wave.omega0_hz,
        "sample_rate_hz": wave.sample_rate_hz,
        "duration_s": wave.duration_s,
    });
    ctx.finish("encode-image", Some(cfg.seed), config, run.out.as_deref())
}

fn synth(ctx: &mut Context, pumps_path: &Path, wave: &WaveArgs, run: &RunArgs) -> CliResult {
    let out = run
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("synth-waveform writes binary samples and needs --out".into()))?;
    let text = ctx.read_text(pumps_path)?;
    let (grid, pumps) = PumpFile::from_json(&text)
        .and_then(|f| f.decode())
        .map_err(|e| CliError::at(pumps_path, e))?;
    let samples = synthesize_waveform(&pumps, &grid, wave.omega0_hz, wave.sample_rate_hz, wave.duration_s)?;
    let sidecar = WaveformSidecar::new(
        pumps.physical_tones(&grid, wave.omega0_hz),
        wave.sample_rate_hz,
        wave.duration_s,
        samples.len(),
        wave.omega0_hz,
    );
    ctx.write(out, &waveform_bytes(&samples))?;
    let mut sidecar_name = out.file_name().unwrap_or_default().to_os_string();
    sidecar_name.push(".json");
    ctx.write(&out.with_file_name(sidecar_name), &to_json(&sidecar)?)?;
    eprintln!("{} samples, {} tones", samples.len(), sidecar.tones.len());
    let config = json!({ "pumps": pumps_path, "omega0_hz": wave.omega0_hz, "sample_rate_hz": wave.sample_rate_hz, "duration_s": wave.duration_s });
    ctx.finish("synth-waveform", None, config, Some(out))
}

fn replay(manifest: &Path) -> CliResult {
    let recorded = RunManifest::read(manifest)?;
    let code = crate::run(std::iter::once("paramix".to_string()).chain(recorded.argv.iter().cloned()));
    if code != crate::EXIT_OK {
        return Err(CliError::Replay(code));
    }
    let mut mismatched = Vec::new();
    for expected in &recorded.outputs {
        let now = FileDigest::of(&expected.path)?;
        if now.sha256 != expected.sha256 {
            mismatched.push(expected.path.display().to_string());
        }
    }
    if !mismatched.is_empty() {
        return Err(CliError::Numerical(format!(
            "replayed outputs differ from the manifest: {}",
            mismatched.join(", ")
        )));
    }
    eprintln!("replay reproduced {} output file(s)", recorded.outputs.len());
    Ok(())
}

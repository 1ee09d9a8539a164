//! Command-line front end: scans driven by bench description files, a
//! verification suite with measured residuals, and bundled reproductions
//! of the two reference experiments.
//!
//! Exit codes: 0 on success, 1 for validation problems (bad flags, bad
//! configuration, infeasible geometry), 2 when a verification or
//! reproduction assertion fails.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::config::{Bench, ExperimentConfig};
use crate::elements::propagate_free;
use crate::engine::{
    coincidence_amplitude_direct, run_scan, BiphotonSpectrum, FastContraction,
};
use crate::error::{Result, SimError};
use crate::grid::{Domain, Grid, SampledField};
use crate::kernel::{build_arm_kernel, detector_lattice_step};
use crate::layout::{LensPlacement, OpticalLayout};
use crate::oracles::{
    closed_form_arm_kernel, fringe_period, image_scale_factor, peak_separation,
    per_photon_quadratic_distance, per_photon_quadratic_distance_printed,
    relative_coordinate_factor, thin_lens_solve,
};
use crate::pump::{pump_intensity_scan, Illumination, ObjectMask, PumpSpec};
use crate::scan::{ScanMode, ScanResult};
use crate::scanfile::{render_scan_file, ScanFileMeta, ENGINE_VERSION};
use crate::tolerances::{
    EXACT_REL, FAST_DIRECT_REL, KERNEL_MATCH_REL, RATIO_REL, UNIT_MODULUS_REL,
};

const FIG2_CONFIG: &str = include_str!("../../../configs/fig2.cfg");
const FIG3_CONFIG: &str = include_str!("../../../configs/fig3.cfg");

#[derive(Parser)]
#[command(
    name = "twinbeam",
    version,
    about = "Coincidence-imaging simulator: the pump's angular spectrum, \
             imprinted by an object, reappears in twin-photon coincidences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory that scan files and reports are written into.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for the engine (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Scan the transmitted pump intensity at the detection plane.
    PumpScan {
        /// Bench description file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Scan the coincidence rate in the configured (or overridden) mode.
    CoincidenceScan {
        /// Bench description file.
        #[arg(long)]
        config: PathBuf,
        /// Override the configured detector motion.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Parked-detector position in millimeters (fixed modes only).
        #[arg(long, value_name = "MM")]
        fixed_position: Option<f64>,
        /// Override the configured noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the invariant suite and write a pass/fail report with residuals.
    Verify,
    /// Reproduce the lens-free experiment: pump fringes plus both twin
    /// scan modes, with a summary of the fringe periods and their ratios.
    ReproduceFig2,
    /// Reproduce the lensed imaging experiment: the pump image plus both
    /// twin scan modes, with a summary of the peak separations and ratios.
    ReproduceFig3,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Park the signal detector, scan the idler.
    Fixed,
    /// Park the idler detector, scan the signal.
    FixedIdler,
    /// Move both detectors together.
    Same,
    /// Move both detectors oppositely.
    Opposite,
}

/// Parse the command line, run it, and map every outcome to an exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(error) => {
            // Help and version requests land here too; only real usage
            // errors are validation failures.
            let code = i32::from(error.use_stderr());
            let _ = error.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(error) => {
            eprintln!("error: {error}");
            error.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| SimError::ConfigGeneral(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::PumpScan { config } => pump_scan_command(&config, &cli.out),
        Command::CoincidenceScan {
            config,
            mode,
            fixed_position,
            seed,
        } => coincidence_scan_command(&config, mode, fixed_position, seed, &cli.out),
        Command::Verify => verify_command(&cli.out),
        Command::ReproduceFig2 => reproduce_command("fig2", FIG2_CONFIG, &cli.out),
        Command::ReproduceFig3 => reproduce_command("fig3", FIG3_CONFIG, &cli.out),
    }
}

/// Seconds for the `generated:` stamp; honors SOURCE_DATE_EPOCH so runs
/// can be reproduced byte for byte.
fn stamp_epoch() -> u64 {
    if let Ok(text) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(seconds) = text.trim().parse() {
            return seconds;
        }
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn load_config(path: &Path) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::ConfigGeneral(format!("read {}: {e}", path.display())))?;
    let config = ExperimentConfig::parse(&text)?;
    Ok((config, path.parent().map(Path::to_path_buf)))
}

fn announce_bench(bench: &Bench) {
    println!(
        "grid: {} samples, spacing {:.6e} m ({})",
        bench.grid.n(),
        bench.spacing_choice.spacing,
        if bench.spacing_choice.auto {
            "auto"
        } else {
            "explicit"
        }
    );
}

fn write_scan(
    out_dir: &Path,
    file_name: &str,
    command: &str,
    config: &ExperimentConfig,
    bench: &Bench,
    scan: &ScanResult,
) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| SimError::ConfigGeneral(format!("create {}: {e}", out_dir.display())))?;
    let meta = ScanFileMeta {
        command,
        config,
        spacing: bench.spacing_choice,
        epoch_seconds: stamp_epoch(),
    };
    let text = render_scan_file(&meta, scan)?;
    let path = out_dir.join(file_name);
    std::fs::write(&path, text)
        .map_err(|e| SimError::ConfigGeneral(format!("write {}: {e}", path.display())))?;
    println!(
        "wrote {} ({} points, {})",
        path.display(),
        scan.positions.len(),
        scan.kind.label()
    );
    Ok(path)
}

fn pump_scan_command(config_path: &Path, out_dir: &Path) -> Result<()> {
    let (config, config_dir) = load_config(config_path)?;
    let bench = config.bench(config_dir.as_deref())?;
    announce_bench(&bench);
    let scan = pump_intensity_scan(
        &bench.pump,
        &bench.layout,
        &bench.grid,
        &config.scan_positions(),
        config.detection.slit_width,
    )?;
    if let Some(wrap) = scan.diagnostics.detector_wrap_fraction {
        println!("detector window occupancy outside the guarded half: {wrap:.3e}");
    }
    write_scan(out_dir, "pump-scan.txt", "pump-scan", &config, &bench, &scan)?;
    Ok(())
}

fn mode_word(mode: ScanMode) -> &'static str {
    match mode {
        ScanMode::FixedSignal { .. } => "fixed",
        ScanMode::FixedIdler { .. } => "fixed-idler",
        ScanMode::SimultaneousSame => "same",
        ScanMode::SimultaneousOpposite => "opposite",
    }
}

fn apply_overrides(
    config: &mut ExperimentConfig,
    mode: Option<ModeArg>,
    fixed_position_mm: Option<f64>,
    seed: Option<u64>,
) -> Result<()> {
    let parked = fixed_position_mm.map(|mm| mm * 1e-3);
    match mode {
        Some(ModeArg::Fixed) => {
            config.detection.mode = ScanMode::FixedSignal {
                signal_position: parked.unwrap_or(0.0),
            };
        }
        Some(ModeArg::FixedIdler) => {
            config.detection.mode = ScanMode::FixedIdler {
                idler_position: parked.unwrap_or(0.0),
            };
        }
        Some(ModeArg::Same) | Some(ModeArg::Opposite) if parked.is_some() => {
            return Err(SimError::ConfigGeneral(
                "--fixed-position needs --mode fixed or fixed-idler".into(),
            ));
        }
        Some(ModeArg::Same) => config.detection.mode = ScanMode::SimultaneousSame,
        Some(ModeArg::Opposite) => config.detection.mode = ScanMode::SimultaneousOpposite,
        None => {
            if let Some(position) = parked {
                config.detection.mode = match config.detection.mode {
                    ScanMode::FixedSignal { .. } => ScanMode::FixedSignal {
                        signal_position: position,
                    },
                    ScanMode::FixedIdler { .. } => ScanMode::FixedIdler {
                        idler_position: position,
                    },
                    _ => {
                        return Err(SimError::ConfigGeneral(
                            "--fixed-position applies only when the effective mode is \
                             fixed or fixed-idler"
                                .into(),
                        ));
                    }
                };
            }
        }
    }
    if let Some(seed) = seed {
        if !config.noise.enabled {
            println!("note: noise is disabled in the config; --seed only changes the echo");
        }
        config.noise.seed = seed;
    }
    Ok(())
}

fn coincidence_scan_command(
    config_path: &Path,
    mode: Option<ModeArg>,
    fixed_position_mm: Option<f64>,
    seed: Option<u64>,
    out_dir: &Path,
) -> Result<()> {
    let (mut config, config_dir) = load_config(config_path)?;
    apply_overrides(&mut config, mode, fixed_position_mm, seed)?;
    let bench = config.bench(config_dir.as_deref())?;
    announce_bench(&bench);
    let setup = config.coincidence_setup(&bench);
    let scan = run_scan(&setup)?;
    if let Some(step) = scan.diagnostics.detector_step {
        println!("detector positions snapped to the {step:.6e} m output lattice");
    }
    println!(
        "pump spectrum tail outside the central half: {:.3e}",
        scan.diagnostics.spectrum_tail_fraction
    );
    let word = mode_word(config.detection.mode);
    let command = format!("coincidence-scan --mode {word}");
    let file_name = format!("coincidence-{word}.txt");
    write_scan(out_dir, &file_name, &command, &config, &bench, &scan)?;
    Ok(())
}

// ---------------------------------------------------------------------
// Reproductions
// ---------------------------------------------------------------------

/// Run the pump panel plus the fixed-signal and simultaneous-same
/// coincidence panels of one bundled experiment, write the three scan
/// files, and assert the summary ratios.
fn reproduce_command(tag: &str, embedded: &str, out_dir: &Path) -> Result<()> {
    let config = ExperimentConfig::parse(embedded)?;
    let bench = config.bench(None)?;
    announce_bench(&bench);
    let command = format!("reproduce-{tag}");

    let pump_panel = pump_intensity_scan(
        &bench.pump,
        &bench.layout,
        &bench.grid,
        &config.scan_positions(),
        config.detection.slit_width,
    )?;
    write_scan(
        out_dir,
        &format!("{tag}-pump.txt"),
        &command,
        &config,
        &bench,
        &pump_panel,
    )?;

    let run_mode = |mode: ScanMode, file: &str| -> Result<ScanResult> {
        let mut panel_config = config.clone();
        panel_config.detection.mode = mode;
        let setup = panel_config.coincidence_setup(&bench);
        let scan = run_scan(&setup)?;
        write_scan(out_dir, file, &command, &panel_config, &bench, &scan)?;
        Ok(scan)
    };
    let fixed_panel = run_mode(
        ScanMode::FixedSignal {
            signal_position: 0.0,
        },
        &format!("{tag}-fixed.txt"),
    )?;
    let same_panel = run_mode(ScanMode::SimultaneousSame, &format!("{tag}-same.txt"))?;

    let (title, quantity, estimate): (_, _, fn(&ScanResult) -> Result<f64>) = if tag == "fig2" {
        (
            "lens-free fringe transfer",
            "fringe_period",
            fringe_period,
        )
    } else {
        (
            "lensed coincidence imaging",
            "peak_separation",
            peak_separation,
        )
    };
    let pump_value = estimate(&pump_panel)?;
    let fixed_value = estimate(&fixed_panel)?;
    let same_value = estimate(&same_panel)?;

    let mut lines = Vec::new();
    lines.push(format!("# twinbeam reproduction summary v{ENGINE_VERSION}"));
    lines.push(format!("# {title}"));
    lines.push(format!("pump_{quantity}_mm = {:.6}", pump_value * 1e3));
    lines.push(format!("same_{quantity}_mm = {:.6}", same_value * 1e3));
    lines.push(format!("fixed_{quantity}_mm = {:.6}", fixed_value * 1e3));
    let mut all_ok = true;
    for (label, measured, expected) in [
        ("same_over_pump", same_value / pump_value, 1.0),
        ("fixed_over_pump", fixed_value / pump_value, 2.0),
    ] {
        let ok = (measured / expected - 1.0).abs() <= RATIO_REL;
        all_ok &= ok;
        lines.push(format!(
            "{label} = {measured:.4} (expected {expected:.2} within {:.0}%) {}",
            RATIO_REL * 100.0,
            if ok { "PASS" } else { "FAIL" }
        ));
    }
    lines.push(format!("status: {}", if all_ok { "PASS" } else { "FAIL" }));

    let summary_path = out_dir.join(format!("{tag}-summary.txt"));
    std::fs::write(&summary_path, lines.join("\n") + "\n")
        .map_err(|e| SimError::ConfigGeneral(format!("write {}: {e}", summary_path.display())))?;
    for line in &lines {
        println!("{line}");
    }
    println!("wrote {}", summary_path.display());
    if all_ok {
        Ok(())
    } else {
        Err(SimError::Verification(format!(
            "{tag} summary ratios out of tolerance; see {}",
            summary_path.display()
        )))
    }
}

// ---------------------------------------------------------------------
// Verification suite
// ---------------------------------------------------------------------

struct Check {
    name: &'static str,
    residual: f64,
    allowed: f64,
    pass: bool,
    note: String,
}

impl Check {
    fn against(name: &'static str, residual: f64, allowed: f64, note: String) -> Self {
        Check {
            name,
            residual,
            allowed,
            pass: residual <= allowed,
            note,
        }
    }

    fn line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let mut line = format!(
            "{status} {}: residual {:.3e} (allowed {:.1e})",
            self.name, self.residual, self.allowed
        );
        if !self.note.is_empty() {
            let _ = write!(line, "; {}", self.note);
        }
        line
    }
}

const TWIN_K: f64 = TAU / 884e-9;
const PUMP_K: f64 = TAU / 442e-9;

fn smooth_test_field(grid: Grid) -> Result<SampledField> {
    let values = (0..grid.n())
        .map(|j| {
            let x = grid.position(j);
            let envelope = (-x * x / (0.5e-3f64).powi(2)).exp();
            Complex64::from_polar(envelope, 900.0 * x)
        })
        .collect();
    SampledField::new(grid, Domain::Position, TWIN_K, values)
}

fn check_fft_round_trip() -> Result<Check> {
    let grid = Grid::new(512, 10e-6)?;
    let field = smooth_test_field(grid)?;
    let round = field.forward_spectrum()?.inverse_spectrum()?;
    let scale = field
        .values()
        .iter()
        .map(|v| v.norm())
        .fold(0.0f64, f64::max);
    let residual = field
        .values()
        .iter()
        .zip(round.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0f64, f64::max)
        / scale;
    Ok(Check::against(
        "fft-round-trip",
        residual,
        EXACT_REL,
        String::new(),
    ))
}

fn check_free_propagation_unitarity() -> Result<Check> {
    let grid = Grid::new(512, 10e-6)?;
    let field = smooth_test_field(grid)?;
    let moved = propagate_free(&field, 0.05)?;
    let residual = (moved.energy() / field.energy() - 1.0).abs();
    Ok(Check::against(
        "free-propagation-unitarity",
        residual,
        EXACT_REL,
        String::new(),
    ))
}

fn check_propagation_composition() -> Result<Check> {
    let grid = Grid::new(512, 10e-6)?;
    let field = smooth_test_field(grid)?;
    let whole = propagate_free(&field, 0.05)?;
    let split = propagate_free(&propagate_free(&field, 0.02)?, 0.03)?;
    let scale = whole
        .values()
        .iter()
        .map(|v| v.norm())
        .fold(0.0f64, f64::max);
    let residual = whole
        .values()
        .iter()
        .zip(split.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0f64, f64::max)
        / scale;
    Ok(Check::against(
        "propagation-composition",
        residual,
        EXACT_REL,
        String::new(),
    ))
}

fn check_thin_lens_identity() -> Result<Check> {
    let geometry = thin_lens_solve(Some(0.41), None, Some(0.25))?;
    let crystal_to_detector = 0.07 + geometry.image_distance;
    let from_chain = image_scale_factor(0.07, 0.25, crystal_to_detector);
    let from_conjugates = geometry.object_distance / geometry.image_distance;
    let residual = (from_chain / from_conjugates - 1.0).abs();
    Ok(Check::against(
        "thin-lens-identity",
        residual,
        EXACT_REL,
        format!("image scale O/I = {from_conjugates:.6}"),
    ))
}

fn check_kernel_against_closed_form() -> Result<Check> {
    let n = 256;
    let (crystal_to_lens, focal_length, crystal_to_detector) = (0.07, 0.25, 0.70);
    let rear = crystal_to_detector - crystal_to_lens;
    let gamma = 0.5 * TWIN_K * (1.0 / rear - 1.0 / focal_length);
    // Matched grid: the sampled chirp spectrum equals the continuous
    // Gaussian integral there, so agreement is limited only by rounding.
    let grid = Grid::new(n, (std::f64::consts::PI / (n as f64 * gamma.abs())).sqrt())?;
    let layout = OpticalLayout::new(
        0.34,
        Some(LensPlacement {
            crystal_to_lens,
            focal_length,
        }),
        crystal_to_detector,
    )?;
    let chain = layout.twin_chain(TWIN_K)?;
    let step = detector_lattice_step(&chain, &grid)?
        .ok_or_else(|| SimError::Geometry("expected a lensed detection chain".into()))?;
    let positions: Vec<f64> = (-5..=5).map(|m| (m * 11) as f64 * step).collect();
    let kernel = build_arm_kernel(&chain, &grid, &positions)?;
    let wavenumbers = grid.transverse_wavenumbers();
    let interior = (n / 10)..(n - n / 10);
    let mut residual = 0.0f64;
    for (row, &rho) in kernel.positions.iter().enumerate() {
        for column in interior.clone() {
            let exact = closed_form_arm_kernel(
                crystal_to_lens,
                focal_length,
                crystal_to_detector,
                TWIN_K,
                rho,
                wavenumbers[column],
            )?;
            residual = residual.max((kernel.rows[row][column] - exact).norm() / exact.norm());
        }
    }
    Ok(Check::against(
        "lensed-kernel-vs-closed-form",
        residual,
        KERNEL_MATCH_REL,
        format!("{} detector rows, matched {}-sample grid", positions.len(), n),
    ))
}

fn check_fast_against_direct() -> Result<Check> {
    let grid = Grid::new(128, 12.5e-6)?;
    let n = grid.n();
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    let mut values = vec![Complex64::default(); n];
    for value in &mut values[n / 4..3 * n / 4] {
        *value = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    let spectrum = BiphotonSpectrum::from_values(grid, PUMP_K, values)?;
    let layout = OpticalLayout::new(
        0.34,
        Some(LensPlacement {
            crystal_to_lens: 0.07,
            focal_length: 0.25,
        }),
        0.70,
    )?;
    let chain = layout.twin_chain(TWIN_K)?;
    let step = detector_lattice_step(&chain, &grid)?
        .ok_or_else(|| SimError::Geometry("expected a lensed detection chain".into()))?;
    let positions: Vec<f64> = (-3..=3).map(|m| m as f64 * 5.0 * step).collect();
    let idler = build_arm_kernel(&chain, &grid, &positions)?;
    let signal = build_arm_kernel(&chain, &grid, &positions)?;
    let fast = FastContraction::new(&spectrum);
    let idler_rows: Vec<Vec<Complex64>> =
        idler.rows.iter().map(|row| fast.transform_row(row)).collect();
    let signal_rows: Vec<Vec<Complex64>> =
        signal.rows.iter().map(|row| fast.transform_row(row)).collect();
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for _ in 0..20 {
        let i = rng.random_range(0..positions.len());
        let s = rng.random_range(0..positions.len());
        let direct = coincidence_amplitude_direct(&spectrum, &idler, &signal, i, s)?;
        let quick = fast.amplitude(&idler_rows[i], &signal_rows[s]);
        scale = scale.max(direct.norm());
        worst = worst.max((direct - quick).norm());
        pairs += 1;
    }
    Ok(Check::against(
        "fast-contraction-vs-direct-sum",
        worst / scale,
        FAST_DIRECT_REL,
        format!("{pairs} random detector pairs at n = {n}"),
    ))
}

fn check_relative_factor_modulus() -> Result<Check> {
    let mut residual = 0.0f64;
    for object_to_crystal in [0.10, 0.34, 0.80] {
        let object_distance = object_to_crystal + 0.07;
        let geometry = thin_lens_solve(Some(object_distance), Some(0.640625), None)?;
        let expected = (TAU * PUMP_K / object_to_crystal).sqrt();
        for index in 0..41 {
            let relative = -1e-3 + index as f64 * 5e-5;
            let modulus =
                relative_coordinate_factor(object_to_crystal, &geometry, PUMP_K, relative)?
                    .norm();
            residual = residual.max((modulus / expected - 1.0).abs());
        }
    }
    Ok(Check::against(
        "relative-factor-unit-modulus",
        residual,
        UNIT_MODULUS_REL,
        "z1 in {0.10, 0.34, 0.80} m, relative offsets to 1 mm".into(),
    ))
}

/// Shared bench for the scan-level checks: the imaging geometry on a
/// 512-sample grid, detection plane exactly at the conjugate plane.
fn verification_bench() -> Result<(PumpSpec, OpticalLayout, Grid)> {
    let pump = PumpSpec::new(
        442e-9,
        Illumination::PlaneWave,
        ObjectMask::DoubleSlit {
            separation: 300e-6,
            width: 100e-6,
        },
    )?;
    let layout = OpticalLayout::new(
        0.34,
        Some(LensPlacement {
            crystal_to_lens: 0.07,
            focal_length: 0.25,
        }),
        0.07 + 0.640625,
    )?;
    let grid = Grid::new(512, 12.5e-6)?;
    Ok((pump, layout, grid))
}

fn scan_at(
    pump: &PumpSpec,
    layout: &OpticalLayout,
    grid: Grid,
    mode: ScanMode,
    slit_width: f64,
) -> Result<ScanResult> {
    // Exactly antisymmetric positions, as the config front end produces.
    let positions: Vec<f64> = (0..=100)
        .map(|j| (2.0 * j as f64 - 100.0) / 100.0 * 1.5e-3)
        .collect();
    let setup = crate::engine::CoincidenceSetup::new(
        pump,
        layout,
        grid,
        mode,
        positions,
        slit_width,
    );
    run_scan(&setup)
}

fn check_imaging_separations() -> Result<Check> {
    let (pump, layout, grid) = verification_bench()?;
    let same = scan_at(&pump, &layout, grid, ScanMode::SimultaneousSame, 0.2e-3)?;
    let fixed = scan_at(
        &pump,
        &layout,
        grid,
        ScanMode::FixedSignal {
            signal_position: 0.0,
        },
        0.2e-3,
    )?;
    let lattice = same
        .diagnostics
        .detector_step
        .ok_or_else(|| SimError::Geometry("expected a lensed detection chain".into()))?;
    let same_separation = peak_separation(&same)?;
    let fixed_separation = peak_separation(&fixed)?;
    let magnification = 0.640625 / 0.41;
    let same_error = (same_separation - magnification * 300e-6).abs();
    let fixed_error = (fixed_separation - 2.0 * magnification * 300e-6).abs();
    Ok(Check::against(
        "imaging-separations-vs-thin-lens",
        same_error.max(fixed_error),
        lattice,
        format!(
            "same {:.4} mm, fixed {:.4} mm, allowed one {:.4} mm lattice step",
            same_separation * 1e3,
            fixed_separation * 1e3,
            lattice * 1e3
        ),
    ))
}

fn check_opposite_palindrome() -> Result<Check> {
    let (pump, layout, grid) = verification_bench()?;
    // Point detectors: the arm-swap symmetry makes the raw curve an exact
    // palindrome; a finite slit only adds symmetric smoothing on top.
    let scan = scan_at(&pump, &layout, grid, ScanMode::SimultaneousOpposite, 0.0)?;
    let mismatches = scan
        .rates
        .iter()
        .zip(scan.rates.iter().rev())
        .filter(|(a, b)| a != b)
        .count();
    Ok(Check::against(
        "opposite-scan-palindrome",
        mismatches as f64,
        0.0,
        "bit-exact reversal symmetry".into(),
    ))
}

fn verify_command(out_dir: &Path) -> Result<()> {
    let checks = [
        check_fft_round_trip()?,
        check_free_propagation_unitarity()?,
        check_propagation_composition()?,
        check_thin_lens_identity()?,
        check_kernel_against_closed_form()?,
        check_fast_against_direct()?,
        check_relative_factor_modulus()?,
        check_imaging_separations()?,
        check_opposite_palindrome()?,
    ];
    let mut lines: Vec<String> = vec![format!("# twinbeam verification report v{ENGINE_VERSION}")];
    lines.extend(checks.iter().map(Check::line));
    let carried = per_photon_quadratic_distance(0.07, 0.25, 0.70);
    let printed = per_photon_quadratic_distance_printed(0.07, 0.25, 0.70);
    lines.push(format!(
        "note: per-photon quadratic phase distance from the carried-out Gaussian \
         integral is {carried:.4} m, the historically printed coefficient is \
         {printed:.4} m (f^2 term sign); the linear image scale is unaffected"
    ));
    let failed = checks.iter().filter(|c| !c.pass).count();
    lines.push(format!(
        "summary: {} of {} checks passed",
        checks.len() - failed,
        checks.len()
    ));

    std::fs::create_dir_all(out_dir)
        .map_err(|e| SimError::ConfigGeneral(format!("create {}: {e}", out_dir.display())))?;
    let path = out_dir.join("verify-report.txt");
    std::fs::write(&path, lines.join("\n") + "\n")
        .map_err(|e| SimError::ConfigGeneral(format!("write {}: {e}", path.display())))?;
    for line in &lines {
        println!("{line}");
    }
    println!("wrote {}", path.display());
    if failed == 0 {
        Ok(())
    } else {
        Err(SimError::Verification(format!(
            "{failed} of {} checks failed",
            checks.len()
        )))
    }
}

//! Bench description files: a line-oriented `key = value` format grouped
//! into sections, with explicit length units and line-numbered errors.
//!
//! ```text
//! # double slit imaged through the detection lens
//! [geometry]
//! z1 = 34 cm          # object to crystal
//! z2 = 7 cm           # crystal to lens (omit with f for a lens-free bench)
//! z  = 70 cm          # crystal to detection plane
//! f  = 25 cm          # focal length
//!
//! [pump]
//! wavelength = 442 nm
//! illumination = plane            # or: gaussian 2 mm
//!
//! [object]
//! separation = 300 um             # double slit, center to center
//! width = 100 um                  # or instead: mask_file = masks/object.txt
//!
//! [grid]
//! samples = 4096
//! # spacing = 12.5 um             # omitted: chosen automatically
//!
//! [detection]
//! slit_width = 0.2 mm
//! mode = same                     # fixed | fixed_idler | same | opposite
//! half_range = 1.5 mm
//! steps = 101
//!
//! [noise]
//! enabled = false
//! mean_counts = 10000
//! seed = 1
//! ```
//!
//! Everything after `#` on a line is a comment. Lengths take a unit suffix
//! (`m`, `cm`, `mm`, `um`, `nm`); a bare `0` is accepted without one.
//! Every field except the geometry has a default, and `serialize` echoes
//! the fully resolved configuration in a form that parses back to an
//! identical value (floats are printed with shortest-round-trip precision).
//!
//! When `spacing` is omitted it is matched to the pump's free flight
//! (object to crystal to lens, or object to detection plane on a lens-free
//! bench): the finest spacing whose propagation phases stay sampled at the
//! grid edge. The slit-resolution and lens-chirp ceilings are then checked
//! against that choice, and configurations they cannot accommodate are
//! rejected with the sample count that would fix them.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use crate::elements::{next_power_of_two_at_least, parse_mask_table};
use crate::engine::{CoincidenceSetup, NoiseSpec};
use crate::error::{Result, SimError};
use crate::grid::Grid;
use crate::layout::{LensPlacement, OpticalLayout};
use crate::pump::{Illumination, ObjectMask, PumpSpec};
use crate::scan::ScanMode;

/// Default pump wavelength in meters.
pub const DEFAULT_WAVELENGTH: f64 = 442e-9;
/// Default double-slit center-to-center separation in meters.
pub const DEFAULT_SEPARATION: f64 = 300e-6;
/// Default double-slit opening width in meters.
pub const DEFAULT_SLIT_WIDTH: f64 = 100e-6;
/// Default detection slit width in meters.
pub const DEFAULT_DETECTION_SLIT: f64 = 0.2e-3;
/// Default grid sample count.
pub const DEFAULT_SAMPLES: usize = 4096;
/// Minimum grid cells across one slit opening.
const CELLS_PER_SLIT: f64 = 8.0;

/// What the pump illuminates: a built-in double slit or a sampled
/// transmission table loaded from a file.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectSpec {
    DoubleSlit { separation: f64, width: f64 },
    MaskFile { path: String },
}

/// Detection-side settings: the analyzing slit, how the detectors move,
/// and the scan extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    pub slit_width: f64,
    pub mode: ScanMode,
    pub half_range: f64,
    pub steps: usize,
}

/// Poisson-noise settings; `enabled = false` keeps scans noiseless while
/// preserving the counts and seed for echo round trips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub mean_counts: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn spec(&self) -> Option<NoiseSpec> {
        self.enabled.then_some(NoiseSpec {
            mean_counts: self.mean_counts,
            seed: self.seed,
        })
    }
}

/// A fully validated bench description with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Object to crystal distance (`z1`), meters.
    pub object_to_crystal: f64,
    /// Detection lens, when present (`z2` and `f`).
    pub lens: Option<LensPlacement>,
    /// Crystal to detection plane distance (`z`), meters.
    pub crystal_to_detector: f64,
    pub wavelength: f64,
    pub illumination: Illumination,
    pub object: ObjectSpec,
    pub samples: usize,
    /// Grid spacing in meters; `None` selects it automatically.
    pub spacing: Option<f64>,
    pub detection: DetectionConfig,
    pub noise: NoiseConfig,
}

/// The grid spacing a configuration resolves to, and why.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacingChoice {
    pub spacing: f64,
    pub auto: bool,
}

/// Constructed simulation inputs for one configuration: the pump (with any
/// mask file loaded), the bench layout, and the resolved grid.
#[derive(Debug, Clone)]
pub struct Bench {
    pub pump: PumpSpec,
    pub layout: OpticalLayout,
    pub grid: Grid,
    pub spacing_choice: SpacingChoice,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Geometry,
    Pump,
    Object,
    Grid,
    Detection,
    Noise,
}

/// Scan-mode keyword before it is joined with `fixed_position`.
#[derive(Clone, Copy, PartialEq)]
enum ModeWord {
    FixedSignal,
    FixedIdler,
    Same,
    Opposite,
}

/// A parsed value plus the line it came from, kept for error reports.
struct Slot<T> {
    line: usize,
    value: T,
}

type Opt<T> = Option<Slot<T>>;

#[derive(Default)]
struct RawConfig {
    z1: Opt<f64>,
    z2: Opt<f64>,
    z: Opt<f64>,
    f: Opt<f64>,
    wavelength: Opt<f64>,
    illumination: Opt<Illumination>,
    separation: Opt<f64>,
    width: Opt<f64>,
    mask_file: Opt<String>,
    samples: Opt<usize>,
    spacing: Opt<f64>,
    slit_width: Opt<f64>,
    mode: Opt<ModeWord>,
    half_range: Opt<f64>,
    steps: Opt<usize>,
    fixed_position: Opt<f64>,
    enabled: Opt<bool>,
    mean_counts: Opt<f64>,
    seed: Opt<u64>,
}

fn err(line: usize, message: impl Into<String>) -> SimError {
    SimError::Config {
        line,
        message: message.into(),
    }
}

fn store<T>(slot: &mut Opt<T>, line: usize, key: &str, value: T) -> Result<()> {
    if let Some(first) = slot {
        return Err(err(
            line,
            format!("duplicate key '{key}' (already set on line {})", first.line),
        ));
    }
    *slot = Some(Slot { line, value });
    Ok(())
}

/// Length units accepted as value suffixes, stored as the divisor that
/// takes the number to meters. Longest spellings come first so
/// `cm`/`mm`/`um`/`nm` are tried before the bare `m`; dividing by an
/// exactly representable power of ten keeps conversions like `70 cm`
/// bit-equal to the plain `0.7`.
const LENGTH_UNITS: [(&str, f64); 5] = [
    ("cm", 1e2),
    ("mm", 1e3),
    ("um", 1e6),
    ("nm", 1e9),
    ("m", 1.0),
];

fn parse_number(line: usize, key: &str, text: &str) -> Result<f64> {
    let value: f64 = text
        .parse()
        .map_err(|_| err(line, format!("{key}: expected a number, got '{text}'")))?;
    if !value.is_finite() {
        return Err(err(line, format!("{key}: value must be finite")));
    }
    Ok(value)
}

/// Parse a length such as `34 cm`. A bare `0` needs no unit; anything else
/// without a recognized suffix is rejected.
fn parse_length(line: usize, key: &str, text: &str) -> Result<f64> {
    for (suffix, divisor) in LENGTH_UNITS {
        if let Some(number) = text.strip_suffix(suffix) {
            let number = number.trim_end();
            if number.is_empty() {
                return Err(err(line, format!("{key}: missing the number before '{suffix}'")));
            }
            return Ok(parse_number(line, key, number)? / divisor);
        }
    }
    let value = parse_number(line, key, text).map_err(|_| {
        err(
            line,
            format!("{key}: expected '<number> <unit>' with unit one of m, cm, mm, um, nm; got '{text}'"),
        )
    })?;
    if value == 0.0 {
        return Ok(0.0);
    }
    Err(err(
        line,
        format!("{key}: missing length unit (m, cm, mm, um, nm) on '{text}'"),
    ))
}

fn parse_count(line: usize, key: &str, text: &str) -> Result<usize> {
    text.parse()
        .map_err(|_| err(line, format!("{key}: expected a positive integer, got '{text}'")))
}

fn parse_seed(line: usize, key: &str, text: &str) -> Result<u64> {
    text.parse()
        .map_err(|_| err(line, format!("{key}: expected an unsigned integer, got '{text}'")))
}

fn parse_bool(line: usize, key: &str, text: &str) -> Result<bool> {
    match text {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(err(line, format!("{key}: expected true or false, got '{other}'"))),
    }
}

fn parse_illumination(line: usize, text: &str) -> Result<Illumination> {
    if text == "plane" {
        return Ok(Illumination::PlaneWave);
    }
    if let Some(rest) = text.strip_prefix("gaussian") {
        let waist = parse_length(line, "illumination", rest.trim())?;
        if !(waist > 0.0) {
            return Err(err(line, "illumination: gaussian waist must be positive"));
        }
        return Ok(Illumination::Gaussian { waist });
    }
    Err(err(
        line,
        format!("illumination: expected 'plane' or 'gaussian <waist>', got '{text}'"),
    ))
}

fn parse_mode(line: usize, text: &str) -> Result<ModeWord> {
    match text {
        "fixed" | "fixed_signal" => Ok(ModeWord::FixedSignal),
        "fixed_idler" => Ok(ModeWord::FixedIdler),
        "same" => Ok(ModeWord::Same),
        "opposite" => Ok(ModeWord::Opposite),
        other => Err(err(
            line,
            format!("mode: expected fixed, fixed_idler, same, or opposite; got '{other}'"),
        )),
    }
}

fn parse_section(line: usize, name: &str) -> Result<Section> {
    match name {
        "geometry" => Ok(Section::Geometry),
        "pump" => Ok(Section::Pump),
        "object" => Ok(Section::Object),
        "grid" => Ok(Section::Grid),
        "detection" => Ok(Section::Detection),
        "noise" => Ok(Section::Noise),
        other => Err(err(
            line,
            format!("unknown section [{other}]; expected geometry, pump, object, grid, detection, or noise"),
        )),
    }
}

fn assign(raw: &mut RawConfig, section: Section, line: usize, key: &str, value: &str) -> Result<()> {
    match (section, key) {
        (Section::Geometry, "z1") => store(&mut raw.z1, line, key, parse_length(line, key, value)?),
        (Section::Geometry, "z2") => store(&mut raw.z2, line, key, parse_length(line, key, value)?),
        (Section::Geometry, "z") => store(&mut raw.z, line, key, parse_length(line, key, value)?),
        (Section::Geometry, "f") => store(&mut raw.f, line, key, parse_length(line, key, value)?),
        (Section::Geometry, _) => Err(err(
            line,
            format!("unknown key '{key}' in [geometry]; expected z1, z2, z, or f"),
        )),
        (Section::Pump, "wavelength") => store(
            &mut raw.wavelength,
            line,
            key,
            parse_length(line, key, value)?,
        ),
        (Section::Pump, "illumination") => store(
            &mut raw.illumination,
            line,
            key,
            parse_illumination(line, value)?,
        ),
        (Section::Pump, _) => Err(err(
            line,
            format!("unknown key '{key}' in [pump]; expected wavelength or illumination"),
        )),
        (Section::Object, "separation" | "d") => store(
            &mut raw.separation,
            line,
            "separation",
            parse_length(line, key, value)?,
        ),
        (Section::Object, "width" | "a") => {
            store(&mut raw.width, line, "width", parse_length(line, key, value)?)
        }
        (Section::Object, "mask_file") => {
            store(&mut raw.mask_file, line, key, value.to_string())
        }
        (Section::Object, _) => Err(err(
            line,
            format!("unknown key '{key}' in [object]; expected separation, width, or mask_file"),
        )),
        (Section::Grid, "samples" | "n") => store(
            &mut raw.samples,
            line,
            "samples",
            parse_count(line, key, value)?,
        ),
        (Section::Grid, "spacing" | "dx") => store(
            &mut raw.spacing,
            line,
            "spacing",
            parse_length(line, key, value)?,
        ),
        (Section::Grid, _) => Err(err(
            line,
            format!("unknown key '{key}' in [grid]; expected samples or spacing"),
        )),
        (Section::Detection, "slit_width") => store(
            &mut raw.slit_width,
            line,
            key,
            parse_length(line, key, value)?,
        ),
        (Section::Detection, "mode") => store(&mut raw.mode, line, key, parse_mode(line, value)?),
        (Section::Detection, "half_range") => store(
            &mut raw.half_range,
            line,
            key,
            parse_length(line, key, value)?,
        ),
        (Section::Detection, "steps") => {
            store(&mut raw.steps, line, key, parse_count(line, key, value)?)
        }
        (Section::Detection, "fixed_position") => store(
            &mut raw.fixed_position,
            line,
            key,
            parse_length(line, key, value)?,
        ),
        (Section::Detection, _) => Err(err(
            line,
            format!(
                "unknown key '{key}' in [detection]; expected slit_width, mode, half_range, steps, or fixed_position"
            ),
        )),
        (Section::Noise, "enabled") => {
            store(&mut raw.enabled, line, key, parse_bool(line, key, value)?)
        }
        (Section::Noise, "mean_counts") => store(
            &mut raw.mean_counts,
            line,
            key,
            parse_number(line, key, value)?,
        ),
        (Section::Noise, "seed") => store(&mut raw.seed, line, key, parse_seed(line, key, value)?),
        (Section::Noise, _) => Err(err(
            line,
            format!("unknown key '{key}' in [noise]; expected enabled, mean_counts, or seed"),
        )),
    }
}

fn require_positive(slot: &Slot<f64>, key: &str) -> Result<f64> {
    if slot.value > 0.0 && slot.value.is_finite() {
        Ok(slot.value)
    } else {
        Err(err(
            slot.line,
            format!("{key} must be positive, got {}", slot.value),
        ))
    }
}

impl ExperimentConfig {
    /// Parse and validate a bench description. Every diagnostic names the
    /// offending line when one exists.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        let mut section: Option<Section> = None;
        for (index, full_line) in text.lines().enumerate() {
            let line = index + 1;
            let content = full_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(inner) = content.strip_prefix('[') {
                let Some(name) = inner.strip_suffix(']') else {
                    return Err(err(line, "section header must look like [name]"));
                };
                section = Some(parse_section(line, name.trim())?);
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(err(line, "expected 'key = value' or a [section] header"));
            };
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(err(line, format!("{key}: empty value")));
            }
            let Some(current) = section else {
                return Err(err(line, "assignment before any [section] header"));
            };
            assign(&mut raw, current, line, key, value)?;
        }
        finish(raw)
    }

    /// Canonical text form: every field resolved, lengths in meters with
    /// shortest-round-trip precision, so parsing the output reproduces
    /// this exact value.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str("[geometry]\n");
        out.push_str(&format!("z1 = {} m\n", self.object_to_crystal));
        if let Some(lens) = &self.lens {
            out.push_str(&format!("z2 = {} m\n", lens.crystal_to_lens));
        }
        out.push_str(&format!("z = {} m\n", self.crystal_to_detector));
        if let Some(lens) = &self.lens {
            out.push_str(&format!("f = {} m\n", lens.focal_length));
        }
        out.push_str("\n[pump]\n");
        out.push_str(&format!("wavelength = {} m\n", self.wavelength));
        match &self.illumination {
            Illumination::PlaneWave => out.push_str("illumination = plane\n"),
            Illumination::Gaussian { waist } => {
                out.push_str(&format!("illumination = gaussian {waist} m\n"))
            }
        }
        out.push_str("\n[object]\n");
        match &self.object {
            ObjectSpec::DoubleSlit { separation, width } => {
                out.push_str(&format!("separation = {separation} m\n"));
                out.push_str(&format!("width = {width} m\n"));
            }
            ObjectSpec::MaskFile { path } => out.push_str(&format!("mask_file = {path}\n")),
        }
        out.push_str("\n[grid]\n");
        out.push_str(&format!("samples = {}\n", self.samples));
        if let Some(spacing) = self.spacing {
            out.push_str(&format!("spacing = {spacing} m\n"));
        }
        out.push_str("\n[detection]\n");
        out.push_str(&format!("slit_width = {} m\n", self.detection.slit_width));
        match self.detection.mode {
            ScanMode::FixedSignal { signal_position } => {
                out.push_str("mode = fixed\n");
                out.push_str(&format!("fixed_position = {signal_position} m\n"));
            }
            ScanMode::FixedIdler { idler_position } => {
                out.push_str("mode = fixed_idler\n");
                out.push_str(&format!("fixed_position = {idler_position} m\n"));
            }
            ScanMode::SimultaneousSame => out.push_str("mode = same\n"),
            ScanMode::SimultaneousOpposite => out.push_str("mode = opposite\n"),
        }
        out.push_str(&format!("half_range = {} m\n", self.detection.half_range));
        out.push_str(&format!("steps = {}\n", self.detection.steps));
        out.push_str("\n[noise]\n");
        out.push_str(&format!("enabled = {}\n", self.noise.enabled));
        out.push_str(&format!("mean_counts = {}\n", self.noise.mean_counts));
        out.push_str(&format!("seed = {}\n", self.noise.seed));
        out
    }

    pub fn pump_wavenumber(&self) -> f64 {
        TAU / self.wavelength
    }

    /// Degenerate collinear twins carry half the pump wavenumber each.
    pub fn twin_wavenumber(&self) -> f64 {
        0.5 * self.pump_wavenumber()
    }

    /// Distance the pump flies freely before any lens (or all the way to
    /// the detection plane on a lens-free bench).
    fn pump_flight(&self) -> f64 {
        match &self.lens {
            Some(lens) => self.object_to_crystal + lens.crystal_to_lens,
            None => self.object_to_crystal + self.crystal_to_detector,
        }
    }

    /// Lens-to-detector distance, when a lens with a rear leg exists.
    fn rear_distance(&self) -> Option<f64> {
        self.lens.as_ref().and_then(|lens| {
            let rear = self.crystal_to_detector - lens.crystal_to_lens;
            (rear > 0.0).then_some(rear)
        })
    }

    /// Spacing ceilings: pairs of (largest admissible spacing, reason).
    fn spacing_ceilings(&self) -> Vec<(f64, &'static str)> {
        let mut ceilings = Vec::new();
        if let ObjectSpec::DoubleSlit { width, .. } = self.object {
            ceilings.push((width / CELLS_PER_SLIT, "slit resolution"));
        }
        if let (Some(lens), Some(rear)) = (&self.lens, self.rear_distance()) {
            // Folded lens-plus-rear-leg chirp rate; the sampled chirp must
            // advance less than pi per edge cell. The bound uses n rather
            // than n - 1 so the equality case clears the strict check.
            let n = self.samples as f64;
            for (k, label) in [
                (self.pump_wavenumber(), "pump lens chirp"),
                (self.twin_wavenumber(), "twin lens chirp"),
            ] {
                let gamma = 0.5 * k * (1.0 / rear - 1.0 / lens.focal_length);
                if gamma.abs() > 0.0 {
                    ceilings.push(((PI / (gamma.abs() * n)).sqrt(), label));
                }
            }
        }
        ceilings
    }

    /// Spacing matched to the pump's free flight: the finest grid on which
    /// that propagation still meets the edge-sampling criterion. Uses n in
    /// place of n - 1 so the matched value itself clears the strict check.
    fn matched_spacing(&self) -> f64 {
        (TAU * self.pump_flight() / (self.pump_wavenumber() * self.samples as f64)).sqrt()
    }

    /// The grid spacing this configuration runs at. An explicit `spacing`
    /// wins; otherwise the pump-flight-matched value is chosen and checked
    /// against every ceiling.
    pub fn resolved_spacing(&self) -> Result<SpacingChoice> {
        match self.spacing {
            Some(spacing) => Ok(SpacingChoice {
                spacing,
                auto: false,
            }),
            None => {
                let spacing = self.matched_spacing();
                for (ceiling, label) in self.spacing_ceilings() {
                    if spacing > ceiling {
                        return Err(SimError::ConfigGeneral(spacing_conflict_message(
                            self, spacing, ceiling, label,
                        )));
                    }
                }
                Ok(SpacingChoice {
                    spacing,
                    auto: true,
                })
            }
        }
    }

    /// Uniformly spaced scan positions over the configured range, built
    /// from integer numerators so the endpoints are exactly ±half_range
    /// and the center of an odd-step scan is exactly zero.
    pub fn scan_positions(&self) -> Vec<f64> {
        let spans = (self.detection.steps - 1) as f64;
        let half = self.detection.half_range;
        (0..self.detection.steps)
            .map(|j| (2.0 * j as f64 - spans) / spans * half)
            .collect()
    }

    /// Build the simulation inputs. Mask files resolve relative to
    /// `mask_dir` when given, otherwise to the working directory.
    pub fn bench(&self, mask_dir: Option<&Path>) -> Result<Bench> {
        let object = match &self.object {
            ObjectSpec::DoubleSlit { separation, width } => ObjectMask::DoubleSlit {
                separation: *separation,
                width: *width,
            },
            ObjectSpec::MaskFile { path } => {
                let resolved = match mask_dir {
                    Some(dir) => dir.join(path),
                    None => Path::new(path).to_path_buf(),
                };
                let text = std::fs::read_to_string(&resolved).map_err(|e| {
                    SimError::ConfigGeneral(format!(
                        "mask file {}: {e}",
                        resolved.display()
                    ))
                })?;
                ObjectMask::Table(parse_mask_table(&text)?)
            }
        };
        let pump = PumpSpec::new(self.wavelength, self.illumination.clone(), object)?;
        let layout = OpticalLayout::new(
            self.object_to_crystal,
            self.lens,
            self.crystal_to_detector,
        )?;
        let spacing_choice = self.resolved_spacing()?;
        let grid = Grid::new(self.samples, spacing_choice.spacing)?;
        Ok(Bench {
            pump,
            layout,
            grid,
            spacing_choice,
        })
    }

    /// Assemble the coincidence-scan request for an already built bench.
    pub fn coincidence_setup<'a>(&self, bench: &'a Bench) -> CoincidenceSetup<'a> {
        let mut setup = CoincidenceSetup::new(
            &bench.pump,
            &bench.layout,
            bench.grid,
            self.detection.mode,
            self.scan_positions(),
            self.detection.slit_width,
        );
        setup.noise = self.noise.spec();
        setup
    }

    /// Quarter of the usable detection window: scans must stay inside it
    /// so wrap-around from the periodic transforms cannot reach the
    /// pattern. Lensed benches measure on the output lattice, whose window
    /// is set by the rear leg; lens-free benches measure on the grid.
    fn guard_band_limit(&self, spacing: f64) -> f64 {
        let window = match self.rear_distance() {
            Some(rear) => TAU * rear / (self.twin_wavenumber() * spacing),
            None => self.samples as f64 * spacing,
        };
        window / 4.0
    }
}

fn spacing_conflict_message(
    config: &ExperimentConfig,
    matched: f64,
    ceiling: f64,
    label: &str,
) -> String {
    let base = format!(
        "no workable grid spacing at samples = {}: the pump flight needs \
         {matched:.3e} m but the {label} ceiling is {ceiling:.3e} m",
        config.samples
    );
    // The matched spacing falls as 1/sqrt(samples); a fixed ceiling (the
    // slit rule) is reachable by raising samples, a chirp ceiling (same
    // 1/sqrt scaling) is not.
    if label == "slit resolution" {
        let needed = next_power_of_two_at_least(
            config.samples as f64 * (matched / ceiling) * (matched / ceiling),
        );
        format!("{base}; raise samples to at least {needed} or set spacing explicitly")
    } else {
        format!(
            "{base}; this detection plane sits too far from the lens's \
             conjugate plane for any sample count — move z or set spacing \
             explicitly"
        )
    }
}

fn finish(raw: RawConfig) -> Result<ExperimentConfig> {
    let Some(z1) = &raw.z1 else {
        return Err(SimError::ConfigGeneral(
            "missing key 'z1' in [geometry]: the object-to-crystal distance is required".into(),
        ));
    };
    let object_to_crystal = require_positive(z1, "z1")?;
    let Some(z) = &raw.z else {
        return Err(SimError::ConfigGeneral(
            "missing key 'z' in [geometry]: the crystal-to-detector distance is required".into(),
        ));
    };
    let crystal_to_detector = require_positive(z, "z")?;

    let lens = match (&raw.z2, &raw.f) {
        (None, None) => None,
        (Some(z2), None) => {
            return Err(err(
                z2.line,
                "z2 is set but f is missing; a lensed bench needs both, a lens-free bench neither",
            ));
        }
        (None, Some(f)) => {
            return Err(err(
                f.line,
                "f is set but z2 is missing; a lensed bench needs both, a lens-free bench neither",
            ));
        }
        (Some(z2), Some(f)) => {
            if !(f.value > 0.0) || !f.value.is_finite() {
                return Err(err(
                    f.line,
                    format!(
                        "f = {} breaks the ThinLens invariant: a thin lens needs a positive, \
                         finite focal length; omit f (and z2) for a lens-free bench",
                        f.value
                    ),
                ));
            }
            let crystal_to_lens = require_positive(z2, "z2")?;
            if crystal_to_detector < crystal_to_lens {
                return Err(err(
                    z.line,
                    format!(
                        "z = {} m puts the detector before the lens at z2 = {} m",
                        z.value, z2.value
                    ),
                ));
            }
            Some(LensPlacement {
                crystal_to_lens,
                focal_length: f.value,
            })
        }
    };

    let wavelength = match &raw.wavelength {
        Some(slot) => require_positive(slot, "wavelength")?,
        None => DEFAULT_WAVELENGTH,
    };
    let illumination = raw
        .illumination
        .map(|slot| slot.value)
        .unwrap_or(Illumination::PlaneWave);

    let object = match (&raw.mask_file, &raw.separation, &raw.width) {
        (Some(mask), None, None) => ObjectSpec::MaskFile {
            path: mask.value.clone(),
        },
        (Some(mask), _, _) => {
            return Err(err(
                mask.line,
                "mask_file is mutually exclusive with separation/width",
            ));
        }
        (None, separation, width) => {
            let sep_value = match separation {
                Some(slot) => require_positive(slot, "separation")?,
                None => DEFAULT_SEPARATION,
            };
            let width_value = match width {
                Some(slot) => require_positive(slot, "width")?,
                None => DEFAULT_SLIT_WIDTH,
            };
            if sep_value <= width_value {
                let line = separation.as_ref().or(width.as_ref()).map(|s| s.line);
                let message = format!(
                    "slit separation ({sep_value} m, center to center) must exceed the \
                     slit width ({width_value} m) or the openings merge"
                );
                return Err(match line {
                    Some(line) => err(line, message),
                    None => SimError::ConfigGeneral(message),
                });
            }
            ObjectSpec::DoubleSlit {
                separation: sep_value,
                width: width_value,
            }
        }
    };

    let samples = match &raw.samples {
        Some(slot) => {
            if slot.value < 8 || !slot.value.is_power_of_two() {
                return Err(err(
                    slot.line,
                    format!("samples must be a power of two >= 8, got {}", slot.value),
                ));
            }
            slot.value
        }
        None => DEFAULT_SAMPLES,
    };
    let spacing = match &raw.spacing {
        Some(slot) => Some(require_positive(slot, "spacing")?),
        None => None,
    };

    let slit_width = match &raw.slit_width {
        Some(slot) => {
            if slot.value < 0.0 || !slot.value.is_finite() {
                return Err(err(
                    slot.line,
                    format!("slit_width must be non-negative, got {}", slot.value),
                ));
            }
            slot.value
        }
        None => DEFAULT_DETECTION_SLIT,
    };
    let mode_word = raw.mode.as_ref().map(|slot| slot.value);
    let fixed_position = raw.fixed_position.as_ref().map(|slot| slot.value);
    let mode = match mode_word.unwrap_or(ModeWord::Same) {
        ModeWord::FixedSignal => ScanMode::FixedSignal {
            signal_position: fixed_position.unwrap_or(0.0),
        },
        ModeWord::FixedIdler => ScanMode::FixedIdler {
            idler_position: fixed_position.unwrap_or(0.0),
        },
        word => {
            if let Some(slot) = &raw.fixed_position {
                return Err(err(
                    slot.line,
                    "fixed_position only applies when mode = fixed or fixed_idler",
                ));
            }
            match word {
                ModeWord::Same => ScanMode::SimultaneousSame,
                _ => ScanMode::SimultaneousOpposite,
            }
        }
    };
    // Lens-free patterns live at the detection plane's diffraction scale,
    // several times wider than a lensed image of the same object.
    let half_range = match &raw.half_range {
        Some(slot) => require_positive(slot, "half_range")?,
        None if lens.is_some() => 1.5e-3,
        None => 7e-3,
    };
    let steps = match &raw.steps {
        Some(slot) => {
            if slot.value < 2 {
                return Err(err(slot.line, format!("steps must be at least 2, got {}", slot.value)));
            }
            slot.value
        }
        None if lens.is_some() => 101,
        None => 201,
    };

    let noise = NoiseConfig {
        enabled: raw.enabled.as_ref().map(|s| s.value).unwrap_or(false),
        mean_counts: match &raw.mean_counts {
            Some(slot) => {
                if !(slot.value > 0.0) || !slot.value.is_finite() {
                    return Err(err(
                        slot.line,
                        format!("mean_counts must be positive, got {}", slot.value),
                    ));
                }
                slot.value
            }
            None => 1e4,
        },
        seed: raw.seed.as_ref().map(|s| s.value).unwrap_or(0),
    };

    let config = ExperimentConfig {
        object_to_crystal,
        lens,
        crystal_to_detector,
        wavelength,
        illumination,
        object,
        samples,
        spacing,
        detection: DetectionConfig {
            slit_width,
            mode,
            half_range,
            steps,
        },
        noise,
    };

    // Spacing feasibility: an explicit choice must at least resolve the
    // slits; the automatic choice must clear every ceiling.
    if let Some(slot) = &raw.spacing {
        if let ObjectSpec::DoubleSlit { width, .. } = config.object {
            let ceiling = width / CELLS_PER_SLIT;
            if slot.value > ceiling {
                return Err(err(
                    slot.line,
                    format!(
                        "spacing = {} m puts fewer than {CELLS_PER_SLIT} cells across one \
                         {width} m slit; need spacing <= {ceiling:.3e} m",
                        slot.value
                    ),
                ));
            }
        }
    }
    let resolved = config.resolved_spacing()?;

    // Scan reach (detector center plus half the analyzing slit) must stay
    // inside the guard band of the detection window.
    let limit = config.guard_band_limit(resolved.spacing);
    let mut reaches = vec![(
        "half_range",
        raw.half_range.as_ref().map(|s| s.line),
        half_range + 0.5 * slit_width,
    )];
    match mode {
        ScanMode::FixedSignal { signal_position: p } | ScanMode::FixedIdler { idler_position: p } => {
            reaches.push((
                "fixed_position",
                raw.fixed_position.as_ref().map(|s| s.line),
                p.abs() + 0.5 * slit_width,
            ));
        }
        _ => {}
    }
    for (key, line, reach) in reaches {
        if reach > limit {
            let mut message = format!(
                "{key} reaches {reach:.3e} m but the guard band allows {limit:.3e} m \
                 (a quarter of the {:.3e} m detection window)",
                4.0 * limit
            );
            if resolved.auto {
                let needed = next_power_of_two_at_least(
                    config.samples as f64 * (reach / limit) * (reach / limit),
                );
                message.push_str(&format!("; raise samples to at least {needed}"));
            } else if config.rear_distance().is_some() {
                message.push_str(&format!(
                    "; reduce spacing to at most {:.3e} m",
                    resolved.spacing * limit / reach
                ));
            } else {
                message.push_str(&format!(
                    "; raise samples to at least {}",
                    next_power_of_two_at_least(config.samples as f64 * reach / limit)
                ));
            }
            return Err(match line {
                Some(line) => err(line, message),
                None => SimError::ConfigGeneral(message),
            });
        }
    }

    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    const LENSED: &str = "\
[geometry]
z1 = 34 cm
z2 = 7 cm
z = 70 cm
f = 25 cm
";

    const LENS_FREE: &str = "\
[geometry]
z1 = 34 cm
z = 70 cm
";

    #[test]
    fn minimal_lensed_config_fills_the_documented_defaults() {
        let config = ExperimentConfig::parse(LENSED).unwrap();
        assert_eq!(config.object_to_crystal, 0.34);
        assert_eq!(config.crystal_to_detector, 0.70);
        let lens = config.lens.as_ref().unwrap();
        assert_eq!(lens.crystal_to_lens, 0.07);
        assert_eq!(lens.focal_length, 0.25);
        assert_eq!(config.wavelength, DEFAULT_WAVELENGTH);
        assert_eq!(config.illumination, Illumination::PlaneWave);
        assert_eq!(
            config.object,
            ObjectSpec::DoubleSlit {
                separation: DEFAULT_SEPARATION,
                width: DEFAULT_SLIT_WIDTH
            }
        );
        assert_eq!(config.samples, DEFAULT_SAMPLES);
        assert_eq!(config.spacing, None);
        assert_eq!(config.detection.slit_width, DEFAULT_DETECTION_SLIT);
        assert_eq!(config.detection.mode, ScanMode::SimultaneousSame);
        assert_eq!(config.detection.half_range, 1.5e-3);
        assert_eq!(config.detection.steps, 101);
        assert!(!config.noise.enabled);
    }

    #[test]
    fn automatic_spacing_matches_the_pump_flight_and_clears_the_chirp() {
        let config = ExperimentConfig::parse(LENSED).unwrap();
        let choice = config.resolved_spacing().unwrap();
        assert!(choice.auto);
        assert!(choice.spacing > 6.6e-6 && choice.spacing < 6.7e-6);
        // The twin chirp should come out with roughly a 2x margin.
        let rear: f64 = 0.63;
        let gamma = 0.5 * config.twin_wavenumber() * (1.0 / rear - 1.0 / 0.25);
        let edge = gamma.abs() * choice.spacing * choice.spacing * (config.samples as f64 - 1.0);
        assert!(edge < FRAC_PI_2, "twin chirp edge step {edge}");

        let free = ExperimentConfig::parse(LENS_FREE).unwrap();
        assert_eq!(free.detection.half_range, 7e-3);
        assert_eq!(free.detection.steps, 201);
        let choice = free.resolved_spacing().unwrap();
        assert!(choice.auto);
        assert!(choice.spacing > 1.05e-5 && choice.spacing < 1.07e-5);
    }

    #[test]
    fn lengths_convert_by_unit_suffix() {
        let text = "\
[geometry]
z1 = 340 mm
z = 0.7 m

[pump]
wavelength = 442 nm

[object]
separation = 0.03 cm
width = 100 um
";
        let config = ExperimentConfig::parse(text).unwrap();
        assert!((config.object_to_crystal - 0.34).abs() < 1e-15);
        assert!((config.wavelength - 442e-9).abs() < 1e-20);
        match config.object {
            ObjectSpec::DoubleSlit { separation, width } => {
                assert!((separation - 300e-6).abs() < 1e-15);
                assert!((width - 100e-6).abs() < 1e-15);
            }
            _ => panic!("expected a double slit"),
        }
    }

    #[test]
    fn zero_focal_length_names_the_thin_lens_invariant() {
        let text = "[geometry]\nz1 = 34 cm\nz2 = 7 cm\nz = 70 cm\nf = 0\n";
        let error = ExperimentConfig::parse(text).unwrap_err();
        match &error {
            SimError::Config { line, message } => {
                assert_eq!(*line, 5);
                assert!(message.contains("ThinLens"), "message: {message}");
            }
            other => panic!("expected a line-numbered config error, got {other:?}"),
        }
    }

    #[test]
    fn missing_units_and_unknown_names_are_rejected_with_lines() {
        let missing_unit = ExperimentConfig::parse("[geometry]\nz1 = 34\n").unwrap_err();
        assert!(missing_unit.to_string().contains("line 2"));
        assert!(missing_unit.to_string().contains("unit"));

        let unknown_key =
            ExperimentConfig::parse("[geometry]\nz1 = 34 cm\nzz = 1 m\n").unwrap_err();
        assert!(unknown_key.to_string().contains("line 3"));
        assert!(unknown_key.to_string().contains("unknown key"));

        let unknown_section = ExperimentConfig::parse("[benches]\n").unwrap_err();
        assert!(unknown_section.to_string().contains("unknown section"));

        let duplicate =
            ExperimentConfig::parse("[geometry]\nz1 = 34 cm\nz1 = 35 cm\nz = 70 cm\n").unwrap_err();
        assert!(duplicate.to_string().contains("duplicate key 'z1'"));
        assert!(duplicate.to_string().contains("line 3"));

        let stray = ExperimentConfig::parse("z1 = 34 cm\n").unwrap_err();
        assert!(stray.to_string().contains("before any [section]"));
    }

    #[test]
    fn serialize_then_parse_is_the_identity() {
        let texts = [
            LENSED.to_string(),
            LENS_FREE.to_string(),
            format!(
                "{LENSED}
[pump]
illumination = gaussian 2 mm

[detection]
mode = fixed
fixed_position = -0.2 mm

[noise]
enabled = true
mean_counts = 12500
seed = 99
"
            ),
            format!("{LENS_FREE}\n[object]\nmask_file = masks/object.txt\n"),
            format!("{LENSED}\n[grid]\nsamples = 512\nspacing = 12.5 um\n"),
        ];
        for text in texts {
            let config = ExperimentConfig::parse(&text).unwrap();
            let echoed = ExperimentConfig::parse(&config.serialize()).unwrap();
            assert_eq!(echoed, config, "round trip changed:\n{}", config.serialize());
        }
    }

    #[test]
    fn spec_style_aliases_map_to_the_canonical_keys() {
        let text = "\
[geometry]
z1 = 34 cm
z = 70 cm

[object]
d = 300 um
a = 100 um

[grid]
n = 8192
";
        let config = ExperimentConfig::parse(text).unwrap();
        assert_eq!(config.samples, 8192);
        assert_eq!(
            config.object,
            ObjectSpec::DoubleSlit {
                separation: 300e-6,
                width: 100e-6
            }
        );
    }

    #[test]
    fn fixed_position_requires_a_fixed_mode() {
        let text = format!("{LENSED}\n[detection]\nmode = same\nfixed_position = 0.1 mm\n");
        let error = ExperimentConfig::parse(&text).unwrap_err();
        assert!(error.to_string().contains("fixed_position"));

        let fixed = ExperimentConfig::parse(&format!("{LENSED}\n[detection]\nmode = fixed\n"))
            .unwrap();
        assert_eq!(
            fixed.detection.mode,
            ScanMode::FixedSignal {
                signal_position: 0.0
            }
        );
        let idler = ExperimentConfig::parse(&format!(
            "{LENSED}\n[detection]\nmode = fixed_idler\nfixed_position = 0.3 mm\n"
        ))
        .unwrap();
        assert_eq!(
            idler.detection.mode,
            ScanMode::FixedIdler {
                idler_position: 0.3e-3
            }
        );
    }

    #[test]
    fn mask_files_exclude_slit_keys_and_load_through_bench() {
        let text = format!("{LENSED}\n[object]\nmask_file = m.txt\nseparation = 1 mm\n");
        let error = ExperimentConfig::parse(&text).unwrap_err();
        assert!(error.to_string().contains("mutually exclusive"));

        let dir = std::env::temp_dir().join(format!("twinbeam-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(
            dir.join("mask.txt"),
            "-0.0002 0.0\n-0.0001 1.0\n0.0001 1.0\n0.0002 0.0\n",
        )
        .unwrap();
        let config =
            ExperimentConfig::parse(&format!("{LENSED}\n[object]\nmask_file = mask.txt\n"))
                .unwrap();
        let bench = config.bench(Some(&dir)).unwrap();
        match &bench.pump.object {
            ObjectMask::Table(rows) => assert_eq!(rows.len(), 4),
            other => panic!("expected a mask table, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).ok();

        let missing = config.bench(Some(Path::new("/nonexistent"))).unwrap_err();
        assert!(missing.to_string().contains("mask file"));
    }

    #[test]
    fn counting_and_range_invariants_are_enforced() {
        let steps = ExperimentConfig::parse(&format!("{LENSED}\n[detection]\nsteps = 1\n"))
            .unwrap_err();
        assert!(steps.to_string().contains("at least 2"));

        let samples =
            ExperimentConfig::parse(&format!("{LENSED}\n[grid]\nsamples = 1000\n")).unwrap_err();
        assert!(samples.to_string().contains("power of two"));

        let negative = ExperimentConfig::parse("[geometry]\nz1 = -1 cm\nz = 70 cm\n").unwrap_err();
        assert!(negative.to_string().contains("positive"));

        let behind = ExperimentConfig::parse("[geometry]\nz1 = 34 cm\nz2 = 7 cm\nz = 5 cm\nf = 25 cm\n")
            .unwrap_err();
        assert!(behind.to_string().contains("before the lens"));

        let paired = ExperimentConfig::parse("[geometry]\nz1 = 34 cm\nz2 = 7 cm\nz = 70 cm\n")
            .unwrap_err();
        assert!(paired.to_string().contains("f is missing"));
    }

    #[test]
    fn scans_beyond_the_guard_band_are_rejected_at_parse_time() {
        let error = ExperimentConfig::parse(&format!(
            "{LENS_FREE}\n[detection]\nhalf_range = 40 mm\n"
        ))
        .unwrap_err();
        assert!(error.to_string().contains("guard band"), "{error}");
        assert!(error.to_string().contains("samples"), "{error}");

        let fixed_far = ExperimentConfig::parse(&format!(
            "{LENSED}\n[detection]\nmode = fixed\nfixed_position = 30 mm\n"
        ))
        .unwrap_err();
        assert!(fixed_far.to_string().contains("guard band"), "{fixed_far}");
    }

    #[test]
    fn infeasible_automatic_spacing_reports_the_way_out() {
        // At 512 samples the pump-flight-matched spacing is ~19 um, above
        // the 12.5 um slit-resolution ceiling for 100 um slits.
        let error = ExperimentConfig::parse(&format!("{LENSED}\n[grid]\nsamples = 512\n"))
            .unwrap_err();
        let text = error.to_string();
        assert!(text.contains("slit resolution"), "{text}");
        assert!(text.contains("2048"), "{text}");

        let explicit = ExperimentConfig::parse(&format!(
            "{LENSED}\n[grid]\nsamples = 512\nspacing = 12.5 um\n"
        ))
        .unwrap();
        let choice = explicit.resolved_spacing().unwrap();
        assert!(!choice.auto);
        assert_eq!(choice.spacing, 12.5e-6);

        let coarse = ExperimentConfig::parse(&format!("{LENSED}\n[grid]\nspacing = 20 um\n"))
            .unwrap_err();
        assert!(coarse.to_string().contains("cells across"), "{coarse}");
    }

    #[test]
    fn bench_and_setup_carry_the_configured_pieces_through() {
        let config = ExperimentConfig::parse(&format!(
            "{LENSED}\n[noise]\nenabled = true\nmean_counts = 5000\nseed = 7\n"
        ))
        .unwrap();
        let bench = config.bench(None).unwrap();
        assert_eq!(bench.grid.n(), 4096);
        assert!(bench.spacing_choice.auto);
        assert_eq!(bench.layout.object_to_crystal, 0.34);

        let setup = config.coincidence_setup(&bench);
        assert_eq!(setup.positions.len(), 101);
        assert_eq!(setup.positions.first().copied().unwrap(), -1.5e-3);
        assert_eq!(setup.positions.last().copied().unwrap(), 1.5e-3);
        assert_eq!(setup.slit_width, DEFAULT_DETECTION_SLIT);
        assert_eq!(
            setup.noise,
            Some(NoiseSpec {
                mean_counts: 5000.0,
                seed: 7
            })
        );
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "\
# a bench
[geometry]   # trailing note
z1 = 34 cm   # object to crystal

z = 70 cm
";
        let config = ExperimentConfig::parse(text).unwrap();
        assert_eq!(config.object_to_crystal, 0.34);
        assert!(config.lens.is_none());
    }
}

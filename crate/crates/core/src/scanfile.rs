//! Scan serialization: plain two-column text (position in millimeters,
//! rate) under a commented header that carries the engine version, a
//! timestamp, the command that produced the file, the normalization, the
//! scan diagnostics, and the complete resolved configuration. Any plotting
//! tool can read the columns directly, and the embedded configuration
//! reproduces the rows bit for bit when run again.
//!
//! ```text
//! # twinbeam scan v0.1.0
//! # generated: 2026-08-14T00:00:00Z
//! # command: coincidence-scan --mode same
//! # scan: coincidence simultaneous-same
//! # normalization: peak rate scaled to 1
//! # twins: degenerate
//! # spectrum_tail_fraction: 5.066e-2
//! # detector_step: 2.044e-5 m
//! # config-begin
//! #   [geometry]
//! #   z1 = 0.34 m
//! #   ...
//! # config-end
//! # columns: position_mm rate
//! -1.50000000000000000e0 3.09019074983296762e-3
//! ...
//! ```

use std::fmt::Write as _;

use crate::config::{ExperimentConfig, SpacingChoice};
use crate::error::{Result, SimError};
use crate::scan::{Normalization, ScanResult};

/// Version stamp written into every scan file.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything the header records beyond the scan itself.
pub struct ScanFileMeta<'a> {
    /// The command line that produced the file, e.g. `pump-scan`.
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    pub spacing: SpacingChoice,
    /// Seconds since the Unix epoch for the `generated:` stamp. Callers
    /// honor `SOURCE_DATE_EPOCH` so builds can be reproduced byte for byte.
    pub epoch_seconds: u64,
}

fn check_rows(positions: &[f64], rates: &[f64]) -> Result<()> {
    if positions.is_empty() || positions.len() != rates.len() {
        return Err(SimError::Scan(format!(
            "scan file needs matching non-empty columns, got {} positions and {} rates",
            positions.len(),
            rates.len()
        )));
    }
    for pair in positions.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(SimError::Scan(format!(
                "scan positions must increase strictly: {:.6e} m before {:.6e} m",
                pair[0], pair[1]
            )));
        }
    }
    if let Some(bad) = rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(SimError::Scan(format!(
            "scan rates must be finite and non-negative, got {bad}"
        )));
    }
    Ok(())
}

/// Render one scan to the on-disk text form.
pub fn render_scan_file(meta: &ScanFileMeta, scan: &ScanResult) -> Result<String> {
    check_rows(&scan.positions, &scan.rates)?;
    let mut out = String::new();
    let _ = writeln!(out, "# twinbeam scan v{ENGINE_VERSION}");
    let _ = writeln!(out, "# generated: {}", rfc3339_utc(meta.epoch_seconds));
    let _ = writeln!(out, "# command: {}", meta.command);
    let _ = writeln!(out, "# scan: {}", scan.kind.label());
    match scan.normalization {
        Normalization::PeakOne => {
            let _ = writeln!(out, "# normalization: peak rate scaled to 1");
        }
        Normalization::PoissonCounts { mean_counts, seed } => {
            let _ = writeln!(
                out,
                "# normalization: Poisson counts, mean {mean_counts} at the peak, seed {seed}"
            );
        }
    }
    let twins = if scan.diagnostics.degenerate_twins {
        "degenerate"
    } else {
        "custom wavenumbers"
    };
    let _ = writeln!(out, "# twins: {twins}");
    let _ = writeln!(
        out,
        "# spectrum_tail_fraction: {:.3e}",
        scan.diagnostics.spectrum_tail_fraction
    );
    if let Some(wrap) = scan.diagnostics.detector_wrap_fraction {
        let _ = writeln!(out, "# detector_wrap_fraction: {wrap:.3e}");
    }
    if let Some(step) = scan.diagnostics.detector_step {
        let _ = writeln!(out, "# detector_step: {step:.6e} m");
    }
    let _ = writeln!(
        out,
        "# grid_spacing: {} m ({})",
        meta.spacing.spacing,
        if meta.spacing.auto { "auto" } else { "explicit" }
    );
    let _ = writeln!(out, "# config-begin");
    for line in meta.config.serialize().lines() {
        if line.is_empty() {
            let _ = writeln!(out, "#");
        } else {
            let _ = writeln!(out, "#   {line}");
        }
    }
    let _ = writeln!(out, "# config-end");
    let _ = writeln!(out, "# columns: position_mm rate");
    for (position, rate) in scan.positions.iter().zip(&scan.rates) {
        let _ = writeln!(out, "{:.17e} {:.17e}", position * 1e3, rate);
    }
    Ok(out)
}

/// A scan file read back: the header's key facts plus the data columns
/// (positions converted back to meters).
#[derive(Debug, Clone)]
pub struct ParsedScanFile {
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub positions: Vec<f64>,
    pub rates: Vec<f64>,
}

/// Parse the on-disk form, validating the row invariants and re-parsing
/// the embedded configuration.
pub fn parse_scan_file(text: &str) -> Result<ParsedScanFile> {
    let mut version = None;
    let mut command = None;
    let mut config_lines: Option<Vec<String>> = None;
    let mut config_text = None;
    let mut positions = Vec::new();
    let mut rates = Vec::new();

    for line in text.lines() {
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("twinbeam scan v") {
                version = Some(rest.trim().to_string());
            } else if let Some(rest) = comment.strip_prefix("command:") {
                command = Some(rest.trim().to_string());
            } else if comment == "config-begin" {
                config_lines = Some(Vec::new());
            } else if comment == "config-end" {
                let lines = config_lines.take().ok_or_else(|| {
                    SimError::Scan("scan file: config-end without config-begin".into())
                })?;
                config_text = Some(lines.join("\n"));
            } else if let Some(lines) = config_lines.as_mut() {
                lines.push(comment.to_string());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(position), Some(rate), None) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(SimError::Scan(format!(
                "scan file: expected 'position_mm rate', got '{line}'"
            )));
        };
        let position: f64 = position
            .parse()
            .map_err(|_| SimError::Scan(format!("scan file: bad position '{position}'")))?;
        let rate: f64 = rate
            .parse()
            .map_err(|_| SimError::Scan(format!("scan file: bad rate '{rate}'")))?;
        positions.push(position / 1e3);
        rates.push(rate);
    }

    let version =
        version.ok_or_else(|| SimError::Scan("scan file: missing the version line".into()))?;
    let command =
        command.ok_or_else(|| SimError::Scan("scan file: missing the command line".into()))?;
    let config_text = config_text
        .ok_or_else(|| SimError::Scan("scan file: missing the embedded config".into()))?;
    let config = ExperimentConfig::parse(&config_text)?;
    check_rows(&positions, &rates)?;
    Ok(ParsedScanFile {
        version,
        command,
        config,
        positions,
        rates,
    })
}

/// UTC timestamp like `2026-08-14T00:00:00Z` from Unix seconds.
pub fn rfc3339_utc(epoch_seconds: u64) -> String {
    let days = (epoch_seconds / 86_400) as i64;
    let secs = epoch_seconds % 86_400;
    let (year, month, day) = civil_from_days(days);
    format!(
        "{year:04}-{month:02}-{day:02}T{:02}:{:02}:{:02}Z",
        secs / 3600,
        (secs % 3600) / 60,
        secs % 60
    )
}

/// Proleptic-Gregorian date for a day count since 1970-01-01, by the
/// standard era decomposition (400-year cycles of 146097 days).
fn civil_from_days(days: i64) -> (i64, u32, u32) {
    let shifted = days + 719_468;
    let era = shifted.div_euclid(146_097);
    let day_of_era = shifted.rem_euclid(146_097);
    let year_of_era =
        (day_of_era - day_of_era / 1460 + day_of_era / 36_524 - day_of_era / 146_096) / 365;
    let day_of_year = day_of_era - (365 * year_of_era + year_of_era / 4 - year_of_era / 100);
    let shifted_month = (5 * day_of_year + 2) / 153;
    let day = (day_of_year - (153 * shifted_month + 2) / 5 + 1) as u32;
    let month = if shifted_month < 10 {
        shifted_month + 3
    } else {
        shifted_month - 9
    } as u32;
    let year = year_of_era + era * 400 + i64::from(month <= 2);
    (year, month, day)
}

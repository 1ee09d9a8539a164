//! Optical element primitives: apertures, paraxial free-space propagation,
//! and the thin lens, all acting on [`SampledField`]s.
//!
//! Quadratic phases are only ever applied to sampled arrays when the phase
//! advances by less than π between adjacent samples at the grid edge;
//! violating that would alias the chirp and silently corrupt fringe periods,
//! so it is an error carrying the spacing or sample count that would work.

use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

use crate::error::{Result, SimError};
use crate::grid::{Domain, Grid, SampledField};

/// One element of an optical chain.
#[derive(Debug, Clone)]
pub enum Element {
    /// Paraxial free-space segment of positive length (meters).
    FreeSpace { distance: f64 },
    /// Thin lens of nonzero focal length (meters).
    ThinLens { focal_length: f64 },
    /// Amplitude mask on the position grid, each value in [0, 1].
    Aperture { transmission: Vec<f64> },
}

impl Element {
    pub fn free_space(distance: f64) -> Result<Element> {
        if !(distance > 0.0) || !distance.is_finite() {
            return Err(SimError::Element(format!(
                "FreeSpace requires a positive distance, got {distance}"
            )));
        }
        Ok(Element::FreeSpace { distance })
    }

    pub fn thin_lens(focal_length: f64) -> Result<Element> {
        if focal_length == 0.0 || !focal_length.is_finite() {
            return Err(SimError::Element(format!(
                "ThinLens requires a nonzero focal length, got {focal_length}"
            )));
        }
        Ok(Element::ThinLens { focal_length })
    }

    pub fn aperture(transmission: Vec<f64>) -> Result<Element> {
        validate_mask(&transmission)?;
        Ok(Element::Aperture { transmission })
    }
}

/// Ordered elements traversed by one photon, with its wavenumber.
#[derive(Debug, Clone)]
pub struct ArmChain {
    pub photon_wavenumber: f64,
    pub elements: Vec<Element>,
}

impl ArmChain {
    pub fn new(photon_wavenumber: f64, elements: Vec<Element>) -> Result<Self> {
        if !(photon_wavenumber > 0.0) {
            return Err(SimError::Element(format!(
                "chain wavenumber must be positive, got {photon_wavenumber}"
            )));
        }
        Ok(ArmChain {
            photon_wavenumber,
            elements,
        })
    }

    /// Sum of the free-space distances in the chain.
    pub fn total_distance(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| match e {
                Element::FreeSpace { distance } => *distance,
                _ => 0.0,
            })
            .sum()
    }
}

fn validate_mask(mask: &[f64]) -> Result<()> {
    for (i, &t) in mask.iter().enumerate() {
        if !(0.0..=1.0 + 1e-12).contains(&t) || !t.is_finite() {
            return Err(SimError::Element(format!(
                "aperture transmission must lie in [0, 1]; sample {i} is {t}"
            )));
        }
    }
    Ok(())
}

/// Pointwise amplitude mask in the position domain.
pub fn apply_aperture(field: &SampledField, mask: &[f64]) -> Result<SampledField> {
    if field.domain != Domain::Position {
        return Err(SimError::Domain(
            "apertures act on position-domain fields".into(),
        ));
    }
    if mask.len() != field.grid.n() {
        return Err(SimError::Incompatible(format!(
            "mask length {} does not match grid sample count {}",
            mask.len(),
            field.grid.n()
        )));
    }
    validate_mask(mask)?;
    let values: Vec<Complex64> = field
        .values()
        .iter()
        .zip(mask)
        .map(|(v, &t)| v * t)
        .collect();
    SampledField::new(field.grid, field.domain, field.photon_wavenumber, values)
}

/// Largest adjacent-sample advance of the free-space phase q²z/(2k),
/// reached at the grid edge.
pub fn free_space_edge_increment(grid: &Grid, photon_wavenumber: f64, distance: f64) -> f64 {
    let dq = grid.dq();
    dq * dq * (grid.n() as f64 - 1.0) * distance.abs() / (2.0 * photon_wavenumber)
}

/// Smallest spacing for which free-space propagation over `distance` meets
/// the edge criterion on an n-sample grid.
pub fn free_space_min_dx(n: usize, photon_wavenumber: f64, distance: f64) -> f64 {
    let nf = n as f64;
    (TAU * (nf - 1.0) * distance.abs() / (photon_wavenumber * nf * nf)).sqrt()
}

/// Largest adjacent-sample advance of the lens chirp kx²/(2f), reached at
/// the grid edge.
pub fn lens_edge_increment(grid: &Grid, photon_wavenumber: f64, focal_length: f64) -> f64 {
    let dx = grid.dx();
    photon_wavenumber * dx * dx * (grid.n() as f64 - 1.0) / (2.0 * focal_length.abs())
}

/// Largest spacing for which the lens chirp meets the edge criterion.
pub fn lens_max_dx(n: usize, photon_wavenumber: f64, focal_length: f64) -> f64 {
    (TAU * focal_length.abs() / (photon_wavenumber * (n as f64 - 1.0))).sqrt()
}

pub(crate) fn next_power_of_two_at_least(x: f64) -> usize {
    let mut n = 8usize;
    while (n as f64) < x && n < (1 << 30) {
        n <<= 1;
    }
    n
}

/// Paraxial free-space propagation by `distance` meters: the spectrum is
/// multiplied by `exp(-i q² z / (2k))`. Accepts either domain and returns
/// the same domain; `distance` may be negative (conjugate kernel) or zero
/// (identity). Energy is conserved exactly (pure phase).
pub fn propagate_free(field: &SampledField, distance: f64) -> Result<SampledField> {
    if distance == 0.0 {
        return Ok(field.clone());
    }
    let k = field.photon_wavenumber;
    let increment = free_space_edge_increment(&field.grid, k, distance);
    if increment >= PI {
        let need_dx = free_space_min_dx(field.grid.n(), k, distance);
        let need_n = next_power_of_two_at_least(
            TAU * distance.abs() / (k * field.grid.dx() * field.grid.dx()) + 1.0,
        );
        return Err(SimError::Sampling(format!(
            "free-space propagation over {distance} m advances the edge phase by \
             {increment:.3} rad (>= pi) at dx={} m; need dx >= {need_dx:.3e} m \
             at n={}, or n >= {need_n} at this dx",
            field.grid.dx(),
            field.grid.n(),
        )));
    }
    let spectrum_in;
    let spectrum = match field.domain {
        Domain::Momentum => field,
        Domain::Position => {
            spectrum_in = field.forward_spectrum()?;
            &spectrum_in
        }
    };
    let mut out = spectrum.clone();
    for (m, v) in out.values_mut().iter_mut().enumerate() {
        let q = field.grid.transverse_wavenumber(m);
        *v *= Complex64::from_polar(1.0, -q * q * distance / (2.0 * k));
    }
    match field.domain {
        Domain::Momentum => Ok(out),
        Domain::Position => out.inverse_spectrum(),
    }
}

/// Thin-lens transmission in the position domain: multiply by
/// `exp(-i k x² / (2 f))`.
pub fn apply_thin_lens(field: &SampledField, focal_length: f64) -> Result<SampledField> {
    if field.domain != Domain::Position {
        return Err(SimError::Domain(
            "the thin lens acts on position-domain fields".into(),
        ));
    }
    if focal_length == 0.0 || !focal_length.is_finite() {
        return Err(SimError::Element(format!(
            "ThinLens requires a nonzero focal length, got {focal_length}"
        )));
    }
    let k = field.photon_wavenumber;
    let increment = lens_edge_increment(&field.grid, k, focal_length);
    if increment >= PI {
        let need_dx = lens_max_dx(field.grid.n(), k, focal_length);
        return Err(SimError::Sampling(format!(
            "lens chirp for f={focal_length} m advances the edge phase by \
             {increment:.3} rad (>= pi) at dx={} m; need dx <= {need_dx:.3e} m \
             at n={}",
            field.grid.dx(),
            field.grid.n(),
        )));
    }
    let mut out = field.clone();
    for (j, v) in out.values_mut().iter_mut().enumerate() {
        let x = field.grid.position(j);
        *v *= Complex64::from_polar(1.0, -k * x * x / (2.0 * focal_length));
    }
    Ok(out)
}

/// Area-weighted transmission of a single open slit: each grid cell carries
/// the fraction of [x - dx/2, x + dx/2] that falls inside the slit. Plain
/// point sampling would widen the effective slit by up to one cell and
/// measurably bias fringe periods.
pub fn slit_mask(grid: &Grid, center: f64, width: f64) -> Vec<f64> {
    let dx = grid.dx();
    let lo = center - width / 2.0;
    let hi = center + width / 2.0;
    (0..grid.n())
        .map(|j| {
            let x = grid.position(j);
            let overlap = (x + dx / 2.0).min(hi) - (x - dx / 2.0).max(lo);
            (overlap / dx).clamp(0.0, 1.0)
        })
        .collect()
}

/// Two identical slits of `width`, centers at ±`separation`/2.
pub fn double_slit_mask(grid: &Grid, separation: f64, width: f64) -> Vec<f64> {
    let left = slit_mask(grid, -separation / 2.0, width);
    let right = slit_mask(grid, separation / 2.0, width);
    left.iter()
        .zip(&right)
        .map(|(&l, &r)| (l + r).clamp(0.0, 1.0))
        .collect()
}

/// Interpolate a tabulated transmission (position in meters, value in
/// [0, 1]) onto the grid; positions must be strictly increasing and
/// positions outside the table are opaque.
pub fn mask_from_table(grid: &Grid, table: &[(f64, f64)]) -> Result<Vec<f64>> {
    if table.len() < 2 {
        return Err(SimError::Element(
            "mask table needs at least two rows".into(),
        ));
    }
    for window in table.windows(2) {
        if window[1].0 <= window[0].0 {
            return Err(SimError::Element(format!(
                "mask table positions must be strictly increasing ({} then {})",
                window[0].0, window[1].0
            )));
        }
    }
    for &(x, t) in table {
        if !(0.0..=1.0).contains(&t) || !t.is_finite() {
            return Err(SimError::Element(format!(
                "mask transmission at {x} m is {t}, outside [0, 1]"
            )));
        }
    }
    let mask = (0..grid.n())
        .map(|j| {
            let x = grid.position(j);
            if x < table[0].0 || x > table[table.len() - 1].0 {
                return 0.0;
            }
            let hi = table.partition_point(|&(p, _)| p < x).min(table.len() - 1);
            let lo = hi.saturating_sub(1);
            let (x0, t0) = table[lo];
            let (x1, t1) = table[hi];
            if hi == lo || x1 == x0 {
                t0
            } else {
                t0 + (t1 - t0) * (x - x0) / (x1 - x0)
            }
        })
        .collect();
    Ok(mask)
}

/// Parse a two-column mask file: position in millimeters, amplitude
/// transmission in [0, 1]. `#`-prefixed lines and blank lines are ignored.
/// Returns (position_meters, transmission) rows.
pub fn parse_mask_table(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split_whitespace();
        let pos: f64 = cols
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| SimError::Config {
                line: idx + 1,
                message: format!("mask row needs a numeric position, got '{line}'"),
            })?;
        let val: f64 = cols
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| SimError::Config {
                line: idx + 1,
                message: format!("mask row needs a numeric transmission, got '{line}'"),
            })?;
        if cols.next().is_some() {
            return Err(SimError::Config {
                line: idx + 1,
                message: "mask rows have exactly two columns".into(),
            });
        }
        if !(0.0..=1.0).contains(&val) {
            return Err(SimError::Config {
                line: idx + 1,
                message: format!("transmission {val} outside [0, 1]"),
            });
        }
        rows.push((pos * 1e-3, val));
    }
    if rows.len() < 2 {
        return Err(SimError::ConfigGeneral(
            "mask file needs at least two data rows".into(),
        ));
    }
    Ok(rows)
}

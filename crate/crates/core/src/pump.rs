//! Pump-beam model: illumination, the object it passes through, the
//! angular spectrum it carries to the crystal, and the classical intensity
//! scan of the transmitted beam at the detection plane.
//!
//! Detector positions for the classical scan are arbitrary (not lattice
//! bound): the lens-free route evaluates the truncated Fourier series of
//! the propagated spectrum pointwise, and the lensed route evaluates the
//! final Fresnel integral as a quadrature over the lens-plane field, which
//! the grid window captures with a guard band to spare.

use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::elements::{double_slit_mask, mask_from_table};
use crate::error::{Result, SimError};
use crate::grid::{Domain, Grid, SampledField};
use crate::kernel::{chain_shape, ChainShape};
use crate::layout::OpticalLayout;
use crate::scan::{Normalization, ScanDiagnostics, ScanKind, ScanResult};

/// Five-point Gauss-Legendre rule on [-1, 1]: (node, weight) pairs.
/// Exact through degree nine; used for slit apertures, whose integrands
/// vary on the much longer fringe scale.
pub(crate) const GAUSS_LEGENDRE_5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Transverse profile of the beam arriving at the object.
#[derive(Debug, Clone, PartialEq)]
pub enum Illumination {
    PlaneWave,
    /// Amplitude exp(-x²/waist²), so intensity falls as exp(-2x²/waist²).
    Gaussian { waist: f64 },
}

/// The object the pump illuminates.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectMask {
    DoubleSlit { separation: f64, width: f64 },
    /// Sampled transmission table: (position in meters, amplitude in [0,1]).
    Table(Vec<(f64, f64)>),
}

/// Everything the source side of the bench needs: pump color, what shines
/// on the object, and the object itself.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpSpec {
    pub wavelength: f64,
    pub illumination: Illumination,
    pub object: ObjectMask,
}

impl PumpSpec {
    pub fn new(wavelength: f64, illumination: Illumination, object: ObjectMask) -> Result<Self> {
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(SimError::Domain(format!(
                "pump wavelength must be positive, got {wavelength}"
            )));
        }
        if let Illumination::Gaussian { waist } = illumination {
            if !(waist > 0.0) || !waist.is_finite() {
                return Err(SimError::Domain(format!(
                    "illumination waist must be positive, got {waist}"
                )));
            }
        }
        if let ObjectMask::DoubleSlit { separation, width } = object {
            if !(separation > 0.0) || !(width > 0.0) {
                return Err(SimError::Domain(format!(
                    "double slit needs positive separation and width, got \
                     {separation} and {width}"
                )));
            }
        }
        Ok(PumpSpec {
            wavelength,
            illumination,
            object,
        })
    }

    pub fn pump_wavenumber(&self) -> f64 {
        TAU / self.wavelength
    }

    /// Wavenumber of each photon of a degenerate pair: half the pump's.
    pub fn twin_wavenumber(&self) -> f64 {
        TAU / (2.0 * self.wavelength)
    }

    /// Illumination times object transmission, sampled on `grid` at the
    /// object plane.
    pub fn object_field(&self, grid: &Grid) -> Result<SampledField> {
        let mask = match &self.object {
            ObjectMask::DoubleSlit { separation, width } => {
                if width / grid.dx() < 8.0 {
                    return Err(SimError::Support(format!(
                        "slit width {width:.3e} m spans fewer than 8 grid \
                         cells; need dx <= {:.3e} m",
                        width / 8.0
                    )));
                }
                if separation + width >= grid.span() {
                    return Err(SimError::Support(format!(
                        "double slit (outer extent {:.3e} m) does not fit \
                         the {:.3e} m grid window",
                        separation + width,
                        grid.span()
                    )));
                }
                double_slit_mask(grid, *separation, *width)
            }
            ObjectMask::Table(table) => mask_from_table(grid, table)?,
        };
        let values = mask
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let amplitude = match &self.illumination {
                    Illumination::PlaneWave => 1.0,
                    Illumination::Gaussian { waist } => {
                        let x = grid.position(j);
                        (-x * x / (waist * waist)).exp()
                    }
                };
                Complex64::new(amplitude * t, 0.0)
            })
            .collect();
        SampledField::new(*grid, Domain::Position, self.pump_wavenumber(), values)
    }
}

/// Angular spectrum of the object field after free flight to the crystal:
/// the transform of the object, each component dephased by its
/// free-propagation phase. The phase is exact per component, so no
/// sampling criterion applies on this route.
pub fn spectrum_at_crystal(object: &SampledField, object_to_crystal: f64) -> Result<SampledField> {
    if object.domain != Domain::Position {
        return Err(SimError::Domain(
            "spectrum_at_crystal expects the object field in the position \
             domain"
                .into(),
        ));
    }
    if object_to_crystal < 0.0 || !object_to_crystal.is_finite() {
        return Err(SimError::Geometry(format!(
            "object-to-crystal distance must be non-negative, got {object_to_crystal}"
        )));
    }
    let mut spectrum = object.forward_spectrum()?;
    let k = spectrum.photon_wavenumber;
    let phases: Vec<f64> = spectrum
        .grid
        .transverse_wavenumbers()
        .iter()
        .map(|&q| -q * q * object_to_crystal / (2.0 * k))
        .collect();
    for (v, &phi) in spectrum.values_mut().iter_mut().zip(&phases) {
        *v *= Complex64::from_polar(1.0, phi);
    }
    Ok(spectrum)
}

/// Fraction of spectral energy outside the central half of the wavenumber
/// window.
pub(crate) fn spectral_tail_fraction(spectrum: &SampledField) -> f64 {
    crate::grid::outer_half_energy_fraction(spectrum.values())
}

/// Intensity of the transmitted pump at the detection plane, scanned with
/// a slit of width `slit_width` (zero for a point detector) over the given
/// positions. Rates are max-normalized.
pub fn pump_intensity_scan(
    spec: &PumpSpec,
    layout: &OpticalLayout,
    grid: &Grid,
    positions: &[f64],
    slit_width: f64,
) -> Result<ScanResult> {
    if positions.is_empty() {
        return Err(SimError::Scan("pump scan needs at least one position".into()));
    }
    if slit_width < 0.0 || !slit_width.is_finite() {
        return Err(SimError::Scan(format!(
            "slit width must be non-negative, got {slit_width}"
        )));
    }
    let k = spec.pump_wavenumber();
    let object = spec.object_field(grid)?;
    let chain = layout.pump_chain(k)?;
    let shape = chain_shape(&chain)?;

    let evaluator: Box<dyn Fn(f64) -> f64>;
    let scan_window;
    let wrap_fraction;
    match shape {
        ChainShape::Phases { total_distance } | ChainShape::LensAtEnd { pre_distance: total_distance, .. } => {
            // A trailing lens only adds a unit-modulus chirp at the
            // detector plane, so the intensity evaluator is shared.
            let spectrum = spectrum_at_crystal(&object, total_distance)?;
            scan_window = grid.span();
            wrap_fraction = outer_quarter_fraction(&spectrum.inverse_spectrum()?);
            let wavenumbers = grid.transverse_wavenumbers();
            let values = spectrum.values().to_vec();
            let measure = grid.dq() / TAU;
            evaluator = Box::new(move |rho: f64| {
                let field: Complex64 = values
                    .iter()
                    .zip(&wavenumbers)
                    .map(|(&v, &q)| v * Complex64::from_polar(measure, q * rho))
                    .sum();
                field.norm_sqr()
            });
        }
        ChainShape::Lensed {
            pre_distance,
            focal_length,
            rear_distance,
        } => {
            let gamma = 0.5 * k * (1.0 / rear_distance - 1.0 / focal_length);
            crate::kernel::check_folded_chirp_rate(grid, gamma)?;
            let lens_plane = spectrum_at_crystal(&object, pre_distance)?.inverse_spectrum()?;
            wrap_fraction = outer_quarter_fraction(&lens_plane);
            let chirped: Vec<Complex64> = lens_plane
                .values()
                .iter()
                .enumerate()
                .map(|(j, &g)| {
                    let x = grid.position(j);
                    g * Complex64::from_polar(grid.dx(), gamma * x * x)
                })
                .collect();
            let xs = grid.positions();
            let amplitude = (k / (TAU * rear_distance)).sqrt();
            scan_window = TAU * rear_distance / (k * grid.dx());
            evaluator = Box::new(move |rho: f64| {
                let sum: Complex64 = chirped
                    .iter()
                    .zip(&xs)
                    .map(|(&g, &x)| g * Complex64::from_polar(1.0, -k * rho * x / rear_distance))
                    .sum();
                // The Fresnel prefactor phase drops out of the intensity.
                (amplitude * sum.norm()).powi(2)
            });
        }
    }

    let reach = positions.iter().fold(0.0f64, |acc, &p| acc.max(p.abs())) + slit_width / 2.0;
    if reach > scan_window / 4.0 {
        return Err(SimError::Geometry(format!(
            "scan reaches {reach:.3e} m but the guard band allows only a \
             quarter of the {scan_window:.3e} m detection window; enlarge \
             the grid"
        )));
    }

    let rates: Vec<f64> = positions
        .iter()
        .map(|&rho| {
            if slit_width == 0.0 {
                evaluator(rho)
            } else {
                GAUSS_LEGENDRE_5
                    .iter()
                    .map(|&(node, weight)| 0.5 * weight * evaluator(rho + 0.5 * slit_width * node))
                    .sum()
            }
        })
        .collect();
    let peak = rates.iter().cloned().fold(0.0, f64::max);
    let rates = if peak > 0.0 {
        rates.iter().map(|r| r / peak).collect()
    } else {
        rates
    };

    let spectrum_tail = spectral_tail_fraction(&object.forward_spectrum()?);
    Ok(ScanResult {
        positions: positions.to_vec(),
        rates,
        kind: ScanKind::PumpIntensity,
        normalization: Normalization::PeakOne,
        diagnostics: ScanDiagnostics {
            spectrum_tail_fraction: spectrum_tail,
            detector_wrap_fraction: Some(wrap_fraction),
            detector_step: None,
            degenerate_twins: true,
        },
    })
}

/// Fraction of field energy outside the central half of the position
/// window: the wrap-around health metric of the quadrature plane.
fn outer_quarter_fraction(field: &SampledField) -> f64 {
    crate::grid::outer_half_energy_fraction(field.values())
}

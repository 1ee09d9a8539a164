//! Detection-arm transfer kernels: the complex response at each detector
//! position to every plane-wave component leaving the crystal plane.
//!
//! Chains without a lens (and chains ending exactly at the lens) have
//! pointwise-exact transfer phases, so their kernels are evaluated at
//! arbitrary detector positions. A chain with a lens followed by free
//! propagation is handled by folding the lens chirp and the final Fresnel
//! chirp into a single quadratic phase whose sampled spectrum is computed
//! once per build; each detector row is then a cyclic shift of that
//! spectrum. This costs one transform per kernel instead of one per
//! plane-wave column, and is bit-identical to summing the discretized
//! Fresnel integral column by column. The price is that detector positions
//! must lie on the output lattice (spacing 2π·z_rear/(k·n·dx)); requested
//! positions are snapped and the snapped values are reported back.
//! On a matched grid (n·dx² = π/|γ|, with γ the folded chirp rate) the
//! sampled chirp spectrum reproduces the continuous Gaussian integral to
//! rounding error, which is how the closed-form cross-checks are run.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_4, PI, TAU};

use crate::elements::{next_power_of_two_at_least, ArmChain, Element};
use crate::error::{Result, SimError};
use crate::grid::{Domain, Grid, SampledField};

/// Canonical form of a detection chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainShape {
    /// Free segments only: a pure momentum phase.
    Phases { total_distance: f64 },
    /// Free segments ending at a lens, detector at the lens exit plane.
    LensAtEnd {
        pre_distance: f64,
        focal_length: f64,
    },
    /// Free segments, one lens, then free propagation to the detector.
    Lensed {
        pre_distance: f64,
        focal_length: f64,
        rear_distance: f64,
    },
}

/// Classify a chain into its canonical form, merging adjacent free
/// segments. Detection chains hold at most one lens and no apertures.
pub fn chain_shape(chain: &ArmChain) -> Result<ChainShape> {
    let mut pre = 0.0;
    let mut focal: Option<f64> = None;
    let mut rear = 0.0;
    for element in &chain.elements {
        match element {
            Element::FreeSpace { distance } => {
                if focal.is_some() {
                    rear += distance;
                } else {
                    pre += distance;
                }
            }
            Element::ThinLens { focal_length } => {
                if focal.is_some() {
                    return Err(SimError::Element(
                        "detection chains support at most one lens".into(),
                    ));
                }
                focal = Some(*focal_length);
            }
            Element::Aperture { .. } => {
                return Err(SimError::Element(
                    "apertures are unsupported inside detection chains; \
                     apply them to the source field instead"
                        .into(),
                ));
            }
        }
    }
    Ok(match focal {
        None => ChainShape::Phases {
            total_distance: pre,
        },
        Some(focal_length) if rear == 0.0 => ChainShape::LensAtEnd {
            pre_distance: pre,
            focal_length,
        },
        Some(focal_length) => ChainShape::Lensed {
            pre_distance: pre,
            focal_length,
            rear_distance: rear,
        },
    })
}

/// Transfer matrix of one detection arm: `rows[r][c]` is the complex field
/// a unit plane wave of transverse wavenumber `grid.transverse_wavenumber(c)`
/// produces at detector position `positions[r]`.
#[derive(Debug, Clone)]
pub struct ArmKernel {
    /// Actual detector positions represented by the rows (snapped to the
    /// output lattice when the chain carries a lens plus free propagation).
    pub positions: Vec<f64>,
    /// One row of length `grid.n()` per detector position.
    pub rows: Vec<Vec<Complex64>>,
    pub grid: Grid,
    pub photon_wavenumber: f64,
    /// Output-lattice spacing when positions are snapped; `None` when the
    /// chain admits arbitrary detector positions.
    pub detector_step: Option<f64>,
}

/// Folded quadratic-phase rate of the lens plus rear free leg.
fn folded_chirp_rate(photon_wavenumber: f64, focal_length: f64, rear_distance: f64) -> f64 {
    0.5 * photon_wavenumber * (1.0 / rear_distance - 1.0 / focal_length)
}

/// Output-lattice spacing of a lensed chain on this grid, or `None` when
/// the chain allows arbitrary detector positions.
pub fn detector_lattice_step(chain: &ArmChain, grid: &Grid) -> Result<Option<f64>> {
    Ok(match chain_shape(chain)? {
        ChainShape::Lensed { rear_distance, .. } => Some(
            TAU * rear_distance / (chain.photon_wavenumber * grid.n() as f64 * grid.dx()),
        ),
        _ => None,
    })
}

/// Replace a uniform scan request over `[-half_range, half_range]` with
/// approximately `count` points by the closest uniform-stride walk of the
/// output lattice: positions stay exactly equidistant (a requirement of
/// the slit convolution), centered on the origin, and never denser than
/// the lattice itself.
pub fn snap_positions_to_lattice(half_range: f64, count: usize, step: f64) -> Vec<f64> {
    if count <= 1 || half_range < step {
        return vec![0.0];
    }
    let target_step = 2.0 * half_range / (count - 1) as f64;
    let stride = ((target_step / step).round() as i64).max(1);
    let reach = (half_range / (stride as f64 * step)).floor() as i64;
    (-reach..=reach)
        .map(|m| (m * stride) as f64 * step)
        .collect()
}

pub(crate) fn check_folded_chirp_rate(grid: &Grid, gamma: f64) -> Result<()> {
    let n = grid.n();
    let increment = gamma.abs() * grid.dx() * grid.dx() * (n - 1) as f64;
    if increment < PI {
        return Ok(());
    }
    let max_dx = (PI / (gamma.abs() * (n - 1) as f64)).sqrt();
    let span = grid.span();
    let need_n = next_power_of_two_at_least(gamma.abs() * span * span / PI);
    Err(SimError::Sampling(format!(
        "lens-to-detector chirp aliases on this grid (edge phase step \
         {increment:.3} rad >= pi): need dx <= {max_dx:.3e} m at n = {n}, \
         or n >= {need_n} at the current {span:.3e} m span"
    )))
}

/// Build the transfer kernel of `chain` on `grid` for the requested
/// detector positions. Lens-free chains and chains ending at the lens are
/// evaluated pointwise at the exact positions given. A lensed chain with a
/// rear free leg snaps each position to the output lattice and refuses
/// positions outside the propagated window.
pub fn build_arm_kernel(chain: &ArmChain, grid: &Grid, positions: &[f64]) -> Result<ArmKernel> {
    let k = chain.photon_wavenumber;
    let shape = chain_shape(chain)?;
    match shape {
        ChainShape::Phases { total_distance } => {
            let rows = pointwise_rows(grid, positions, |rho, q| {
                Complex64::from_polar(1.0, q * rho - q * q * total_distance / (2.0 * k))
            });
            Ok(ArmKernel {
                positions: positions.to_vec(),
                rows,
                grid: *grid,
                photon_wavenumber: k,
                detector_step: None,
            })
        }
        ChainShape::LensAtEnd {
            pre_distance,
            focal_length,
        } => {
            let rows = pointwise_rows(grid, positions, |rho, q| {
                Complex64::from_polar(
                    1.0,
                    q * rho - q * q * pre_distance / (2.0 * k)
                        - k * rho * rho / (2.0 * focal_length),
                )
            });
            Ok(ArmKernel {
                positions: positions.to_vec(),
                rows,
                grid: *grid,
                photon_wavenumber: k,
                detector_step: None,
            })
        }
        ChainShape::Lensed {
            pre_distance,
            focal_length,
            rear_distance,
        } => build_lensed_kernel(
            grid,
            k,
            pre_distance,
            focal_length,
            rear_distance,
            positions,
        ),
    }
}

fn pointwise_rows<F>(grid: &Grid, positions: &[f64], entry: F) -> Vec<Vec<Complex64>>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    let wavenumbers = grid.transverse_wavenumbers();
    positions
        .par_iter()
        .map(|&rho| wavenumbers.iter().map(|&q| entry(rho, q)).collect())
        .collect()
}

fn build_lensed_kernel(
    grid: &Grid,
    k: f64,
    pre_distance: f64,
    focal_length: f64,
    rear_distance: f64,
    positions: &[f64],
) -> Result<ArmKernel> {
    let n = grid.n();
    let gamma = folded_chirp_rate(k, focal_length, rear_distance);
    check_folded_chirp_rate(grid, gamma)?;
    let step = TAU * rear_distance / (k * n as f64 * grid.dx());
    let max_index = (n / 2 - 1) as i64;

    let snapped: Vec<i64> = positions
        .iter()
        .map(|&rho| {
            let index = (rho / step).round() as i64;
            if index.abs() > max_index {
                return Err(SimError::Geometry(format!(
                    "detector position {rho:.3e} m is outside the propagated \
                     window (|position| <= {:.3e} m at this grid); increase \
                     the grid size",
                    max_index as f64 * step
                )));
            }
            Ok(index)
        })
        .collect::<Result<_>>()?;

    // Spectrum of the folded chirp; its bins extend n-periodically, so one
    // transform serves every detector row as a cyclic shift.
    let chirp: Vec<Complex64> = (0..n)
        .map(|j| {
            let x = grid.position(j);
            Complex64::from_polar(1.0, gamma * x * x)
        })
        .collect();
    let chirp_spectrum = SampledField::new(*grid, Domain::Position, k, chirp)?
        .forward_spectrum()?
        .values()
        .to_vec();
    let pre_phase: Vec<Complex64> = grid
        .transverse_wavenumbers()
        .iter()
        .map(|&q| Complex64::from_polar(1.0, -q * q * pre_distance / (2.0 * k)))
        .collect();

    let amplitude = (k / (TAU * rear_distance)).sqrt();
    let rows: Vec<Vec<Complex64>> = snapped
        .par_iter()
        .map(|&index| {
            let rho = index as f64 * step;
            let fresnel = Complex64::from_polar(
                amplitude,
                -FRAC_PI_4 + k * rho * rho / (2.0 * rear_distance),
            );
            (0..n)
                .map(|col| {
                    let bin = (index - col as i64 + n as i64).rem_euclid(n as i64) as usize;
                    fresnel * pre_phase[col] * chirp_spectrum[bin]
                })
                .collect()
        })
        .collect();

    Ok(ArmKernel {
        positions: snapped.iter().map(|&i| i as f64 * step).collect(),
        rows,
        grid: *grid,
        photon_wavenumber: k,
        detector_step: Some(step),
    })
}

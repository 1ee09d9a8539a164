//! Coincidence-rate engine: builds the twin-photon spectrum the pump
//! deposits at the crystal, contracts it with the two detection-arm
//! kernels, and walks the requested detector scan.
//!
//! The defining contraction is
//! `A(ρ_i, ρ_s) = Σ_a Σ_b V[q_a + q_b] · h_i(ρ_i, q_a) · h_s(ρ_s, q_b) · dq²`,
//! where V is the pump spectrum at the crystal and h are the arm kernels.
//! The direct double sum is kept as the ground-truth oracle; production
//! scans use an exactly equivalent factorization: V depends on the bin sum
//! a+b only, so padding V to length 2n and transforming once turns every
//! amplitude into a single O(n) pointwise sum over transformed kernel rows.
//! Counting noise is applied post hoc from one seeded stream, so thread
//! count never touches the draws.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::grid::{fft_in_place, outer_half_energy_fraction, Grid};
use crate::kernel::{build_arm_kernel, detector_lattice_step, ArmKernel};
use crate::layout::OpticalLayout;
use crate::pump::{spectrum_at_crystal, PumpSpec, GAUSS_LEGENDRE_5};
use crate::scan::{Normalization, ScanDiagnostics, ScanKind, ScanMode, ScanResult};

/// Largest tolerated fraction of pump-spectrum energy outside the central
/// half of the wavenumber window. Beyond this the bin-sum indexing would
/// silently drop real spectral weight; the remedy is a finer grid spacing
/// (which widens the wavenumber window).
pub const SPECTRUM_TAIL_LIMIT: f64 = 0.10;

/// Pump angular spectrum at the crystal exit plane: the entangled-pair
/// source term, indexed by the sum of the twins' transverse wavenumbers.
#[derive(Debug, Clone)]
pub struct BiphotonSpectrum {
    grid: Grid,
    pump_wavenumber: f64,
    values: Vec<Complex64>,
    tail_fraction: f64,
}

impl BiphotonSpectrum {
    /// Wrap raw centered-bin spectrum samples, refusing spectra whose
    /// tails spill past the central half of the window.
    pub fn from_values(grid: Grid, pump_wavenumber: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(SimError::Incompatible(format!(
                "spectrum has {} samples on an n = {} grid",
                values.len(),
                grid.n()
            )));
        }
        let tail_fraction = outer_half_energy_fraction(&values);
        if tail_fraction > SPECTRUM_TAIL_LIMIT {
            return Err(SimError::Support(format!(
                "pump spectrum leaves {:.1}% of its energy outside the \
                 central half of the wavenumber window (limit {:.0}%); \
                 reduce the grid spacing",
                100.0 * tail_fraction,
                100.0 * SPECTRUM_TAIL_LIMIT
            )));
        }
        Ok(BiphotonSpectrum {
            grid,
            pump_wavenumber,
            values,
            tail_fraction,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn pump_wavenumber(&self) -> f64 {
        self.pump_wavenumber
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Fraction of spectral energy outside the central half-window.
    pub fn tail_fraction(&self) -> f64 {
        self.tail_fraction
    }

    /// V at the summed bin index `a + b - n/2`; bins outside the sampled
    /// window carry no weight.
    fn pair_value(&self, a: usize, b: usize) -> Complex64 {
        let index = a as i64 + b as i64 - (self.grid.n() / 2) as i64;
        if (0..self.grid.n() as i64).contains(&index) {
            self.values[index as usize]
        } else {
            Complex64::default()
        }
    }
}

/// The pump's angular spectrum delivered to the crystal exit plane for
/// this bench: object field, free flight, wrapped with the support check.
pub fn crystal_spectrum(
    pump: &PumpSpec,
    layout: &OpticalLayout,
    grid: &Grid,
) -> Result<BiphotonSpectrum> {
    let object = pump.object_field(grid)?;
    let spectrum = spectrum_at_crystal(&object, layout.object_to_crystal)?;
    BiphotonSpectrum::from_values(*grid, pump.pump_wavenumber(), spectrum.values().to_vec())
}

fn check_kernel_compatible(spectrum: &BiphotonSpectrum, kernel: &ArmKernel) -> Result<()> {
    if !spectrum.grid.same_lattice(&kernel.grid) {
        return Err(SimError::Incompatible(
            "spectrum and kernel live on different grids".into(),
        ));
    }
    Ok(())
}

/// Ground-truth double sum over both wavenumber indices. Quadratic cost;
/// kept as the oracle the fast path is validated against.
pub fn coincidence_amplitude_direct(
    spectrum: &BiphotonSpectrum,
    idler: &ArmKernel,
    signal: &ArmKernel,
    idler_row: usize,
    signal_row: usize,
) -> Result<Complex64> {
    check_kernel_compatible(spectrum, idler)?;
    check_kernel_compatible(spectrum, signal)?;
    let row_i = idler
        .rows
        .get(idler_row)
        .ok_or_else(|| SimError::Incompatible(format!("no idler row {idler_row}")))?;
    let row_s = signal
        .rows
        .get(signal_row)
        .ok_or_else(|| SimError::Incompatible(format!("no signal row {signal_row}")))?;
    let n = spectrum.grid.n();
    let mut acc = Complex64::default();
    for a in 0..n {
        for b in 0..n {
            acc += spectrum.pair_value(a, b) * row_i[a] * row_s[b];
        }
    }
    let dq = spectrum.grid.dq();
    Ok(acc * dq * dq)
}

/// One-time factorization of the contraction: since V couples only to the
/// bin sum, its length-2n transform U turns each amplitude into
/// `dq² · Σ_κ R_i[κ] · R_s[κ] · U[κ]` with R the zero-padded transforms of
/// the kernel rows. Algebraically identical to the direct double sum.
pub struct FastContraction {
    grid: Grid,
    summed_bins: Vec<Complex64>,
}

impl FastContraction {
    pub fn new(spectrum: &BiphotonSpectrum) -> Self {
        let n = spectrum.grid.n();
        let mut padded = vec![Complex64::default(); 2 * n];
        padded[n / 2..3 * n / 2].copy_from_slice(&spectrum.values);
        fft_in_place(&mut padded, rustfft::FftDirection::Inverse);
        let scale = 1.0 / (2 * n) as f64;
        for v in &mut padded {
            *v *= scale;
        }
        FastContraction {
            grid: spectrum.grid,
            summed_bins: padded,
        }
    }

    /// Zero-pad one kernel row to length 2n and transform it.
    pub fn transform_row(&self, row: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.n();
        debug_assert_eq!(row.len(), n);
        let mut padded = vec![Complex64::default(); 2 * n];
        padded[..n].copy_from_slice(row);
        fft_in_place(&mut padded, rustfft::FftDirection::Forward);
        padded
    }

    /// Amplitude for one transformed row pair. Swapping the two arguments
    /// returns the bit-identical value: complex products commute exactly,
    /// so exchange symmetry of identical arms is exact, not approximate.
    pub fn amplitude(&self, idler_row: &[Complex64], signal_row: &[Complex64]) -> Complex64 {
        let acc: Complex64 = idler_row
            .iter()
            .zip(signal_row)
            .zip(&self.summed_bins)
            .map(|((&ri, &rs), &u)| ri * rs * u)
            .sum();
        let dq = self.grid.dq();
        acc * dq * dq
    }
}

/// Coincidence rates for every row pair of the two kernels; quadratic in
/// the number of rows, intended for small exploratory maps.
pub fn coincidence_rate_map(
    spectrum: &BiphotonSpectrum,
    idler: &ArmKernel,
    signal: &ArmKernel,
) -> Result<Vec<Vec<f64>>> {
    check_kernel_compatible(spectrum, idler)?;
    check_kernel_compatible(spectrum, signal)?;
    let fast = FastContraction::new(spectrum);
    let rows_i: Vec<Vec<Complex64>> = idler
        .rows
        .par_iter()
        .map(|row| fast.transform_row(row))
        .collect();
    let rows_s: Vec<Vec<Complex64>> = signal
        .rows
        .par_iter()
        .map(|row| fast.transform_row(row))
        .collect();
    Ok(rows_i
        .par_iter()
        .map(|ri| {
            rows_s
                .iter()
                .map(|rs| fast.amplitude(ri, rs).norm_sqr())
                .collect()
        })
        .collect())
}

fn uniform_step(positions: &[f64]) -> Result<f64> {
    if positions.len() < 2 {
        return Err(SimError::Scan(
            "slit integration needs at least two scan positions".into(),
        ));
    }
    let step = positions[1] - positions[0];
    if !(step > 0.0) {
        return Err(SimError::Scan(
            "scan positions must be strictly increasing".into(),
        ));
    }
    for w in positions.windows(2) {
        if ((w[1] - w[0]) - step).abs() > 1e-6 * step {
            return Err(SimError::Scan(
                "slit integration needs uniformly spaced scan positions".into(),
            ));
        }
    }
    Ok(step)
}

/// Convolve a scan curve with the unit-area top-hat of one detector slit.
/// Sample cells partially covered by the slit enter with their covered
/// fraction; near the scan ends the window is renormalized over the
/// samples that exist. Zero width is the identity.
pub fn integrate_slit(positions: &[f64], rates: &[f64], slit_width: f64) -> Result<Vec<f64>> {
    if positions.len() != rates.len() {
        return Err(SimError::Incompatible(
            "positions and rates differ in length".into(),
        ));
    }
    if slit_width < 0.0 || !slit_width.is_finite() {
        return Err(SimError::Scan(format!(
            "slit width must be non-negative, got {slit_width}"
        )));
    }
    if slit_width == 0.0 {
        return Ok(rates.to_vec());
    }
    let step = uniform_step(positions)?;
    let half = slit_width / 2.0;
    let reach = ((half + step / 2.0) / step).ceil() as i64;
    let weights: Vec<f64> = (-reach..=reach)
        .map(|k| {
            let cell_lo = k as f64 * step - step / 2.0;
            let cell_hi = k as f64 * step + step / 2.0;
            (cell_hi.min(half) - cell_lo.max(-half)).max(0.0)
        })
        .collect();
    let n = rates.len() as i64;
    Ok((0..n)
        .map(|j| {
            let mut acc = 0.0;
            let mut norm = 0.0;
            for (w, k) in weights.iter().zip(-reach..=reach) {
                let i = j + k;
                if *w > 0.0 && (0..n).contains(&i) {
                    acc += w * rates[i as usize];
                    norm += w;
                }
            }
            acc / norm
        })
        .collect())
}

/// Counting-noise settings: peak-normalized rates are scaled to
/// `mean_counts` expected counts at the peak before drawing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub mean_counts: f64,
    pub seed: u64,
}

/// Everything one coincidence scan needs. Twin wavenumbers default to the
/// degenerate collinear case (half the pump wavenumber each); explicit
/// values are accepted but flagged in the scan diagnostics, because only
/// the degenerate case is validated against the reference experiments.
#[derive(Debug, Clone)]
pub struct CoincidenceSetup<'a> {
    pub pump: &'a PumpSpec,
    pub layout: &'a OpticalLayout,
    pub grid: Grid,
    pub mode: ScanMode,
    /// Requested scan positions, strictly increasing. Arms with a lens are
    /// sampled on their output lattice: the request is replaced by the
    /// closest uniform-stride lattice walk, reported in the result.
    pub positions: Vec<f64>,
    pub slit_width: f64,
    pub noise: Option<NoiseSpec>,
    pub signal_wavenumber: Option<f64>,
    pub idler_wavenumber: Option<f64>,
}

impl<'a> CoincidenceSetup<'a> {
    pub fn new(
        pump: &'a PumpSpec,
        layout: &'a OpticalLayout,
        grid: Grid,
        mode: ScanMode,
        positions: Vec<f64>,
        slit_width: f64,
    ) -> Self {
        CoincidenceSetup {
            pump,
            layout,
            grid,
            mode,
            positions,
            slit_width,
            noise: None,
            signal_wavenumber: None,
            idler_wavenumber: None,
        }
    }
}

/// Replace a uniform scan request by the closest uniform-stride walk of a
/// detector lattice with spacing `step`.
fn lattice_walk(requested: &[f64], step: f64) -> Result<Vec<f64>> {
    if requested.len() == 1 {
        return Ok(vec![(requested[0] / step).round() * step]);
    }
    let first = (requested[0] / step).round() as i64;
    let last = (requested[requested.len() - 1] / step).round() as i64;
    let mean_step =
        (requested[requested.len() - 1] - requested[0]) / (requested.len() - 1) as f64;
    let stride = ((mean_step / step).round() as i64).max(1);
    let mut positions = Vec::new();
    let mut index = first;
    while index <= last {
        positions.push(index as f64 * step);
        index += stride;
    }
    if positions.is_empty() {
        positions.push(first as f64 * step);
    }
    Ok(positions)
}

/// Quadrature nodes and unit-sum weights covering a fixed detector's slit.
/// Lens-free arms take the five-point Gauss-Legendre rule at exact
/// positions; lattice-bound arms take every lattice cell the slit covers,
/// weighted by its covered fraction.
fn fixed_slit_nodes(
    center: f64,
    slit_width: f64,
    lattice_step: Option<f64>,
) -> (Vec<f64>, Vec<f64>) {
    match lattice_step {
        None => {
            if slit_width == 0.0 {
                (vec![center], vec![1.0])
            } else {
                let nodes = GAUSS_LEGENDRE_5
                    .iter()
                    .map(|&(x, _)| center + 0.5 * slit_width * x)
                    .collect();
                let weights = GAUSS_LEGENDRE_5.iter().map(|&(_, w)| 0.5 * w).collect();
                (nodes, weights)
            }
        }
        Some(step) => {
            if slit_width == 0.0 {
                return (vec![(center / step).round() * step], vec![1.0]);
            }
            let lo = center - slit_width / 2.0;
            let hi = center + slit_width / 2.0;
            let first = ((lo / step) - 0.5).floor() as i64;
            let last = ((hi / step) + 0.5).ceil() as i64;
            let mut nodes = Vec::new();
            let mut weights = Vec::new();
            for m in first..=last {
                let x = m as f64 * step;
                let overlap = (x + step / 2.0).min(hi) - (x - step / 2.0).max(lo);
                if overlap > 0.0 {
                    nodes.push(x);
                    weights.push(overlap);
                }
            }
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            (nodes, weights)
        }
    }
}

fn check_guard_band(
    label: &str,
    reach: f64,
    grid: &Grid,
    lattice_step: Option<f64>,
) -> Result<()> {
    let window = lattice_step.map_or(grid.span(), |t| grid.n() as f64 * t);
    if reach > window / 4.0 {
        return Err(SimError::Geometry(format!(
            "{label} detector reaches {reach:.3e} m but the guard band \
             allows only a quarter of its {window:.3e} m window; enlarge \
             the grid"
        )));
    }
    Ok(())
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
}

/// Run one coincidence scan: rates per scan position, max-normalized,
/// with optional counting noise drawn afterwards.
pub fn run_scan(setup: &CoincidenceSetup) -> Result<ScanResult> {
    let grid = setup.grid;
    if setup.positions.is_empty() {
        return Err(SimError::Scan("scan needs at least one position".into()));
    }
    for pair in setup.positions.windows(2) {
        if pair[1] <= pair[0] {
            return Err(SimError::Scan(
                "scan positions must be strictly increasing".into(),
            ));
        }
    }
    if setup.slit_width < 0.0 || !setup.slit_width.is_finite() {
        return Err(SimError::Scan(format!(
            "slit width must be non-negative, got {}",
            setup.slit_width
        )));
    }

    let spectrum = crystal_spectrum(setup.pump, setup.layout, &grid)?;
    let degenerate_wavenumber = setup.pump.twin_wavenumber();
    let idler_wavenumber = setup.idler_wavenumber.unwrap_or(degenerate_wavenumber);
    let signal_wavenumber = setup.signal_wavenumber.unwrap_or(degenerate_wavenumber);
    let degenerate_twins = idler_wavenumber == degenerate_wavenumber
        && signal_wavenumber == degenerate_wavenumber;
    let idler_chain = setup.layout.twin_chain(idler_wavenumber)?;
    let signal_chain = setup.layout.twin_chain(signal_wavenumber)?;
    let idler_step = detector_lattice_step(&idler_chain, &grid)?;
    let signal_step = detector_lattice_step(&signal_chain, &grid)?;

    // The scan axis follows the moving detector's lattice when it has one.
    let scanned_step = match setup.mode {
        ScanMode::FixedSignal { .. } => idler_step,
        ScanMode::FixedIdler { .. } => signal_step,
        // Both detectors move; degenerate arms share one lattice.
        ScanMode::SimultaneousSame | ScanMode::SimultaneousOpposite => idler_step,
    };
    let scan_positions = match scanned_step {
        Some(step) => lattice_walk(&setup.positions, step)?,
        None => setup.positions.clone(),
    };
    let scan_reach = max_abs(&scan_positions) + setup.slit_width / 2.0;

    // Per-arm detector positions, index-aligned with the scan.
    let (idler_positions, signal_positions, fixed_weights): (Vec<f64>, Vec<f64>, Option<Vec<f64>>) =
        match setup.mode {
            ScanMode::SimultaneousSame => {
                (scan_positions.clone(), scan_positions.clone(), None)
            }
            ScanMode::SimultaneousOpposite => (
                scan_positions.clone(),
                scan_positions.iter().map(|&p| -p).collect(),
                None,
            ),
            ScanMode::FixedSignal { signal_position } => {
                let (nodes, weights) =
                    fixed_slit_nodes(signal_position, setup.slit_width, signal_step);
                (scan_positions.clone(), nodes, Some(weights))
            }
            ScanMode::FixedIdler { idler_position } => {
                let (nodes, weights) =
                    fixed_slit_nodes(idler_position, setup.slit_width, idler_step);
                (nodes, scan_positions.clone(), Some(weights))
            }
        };

    match setup.mode {
        ScanMode::FixedSignal { .. } => {
            check_guard_band("scanned idler", scan_reach, &grid, idler_step)?;
            check_guard_band("fixed signal", max_abs(&signal_positions), &grid, signal_step)?;
        }
        ScanMode::FixedIdler { .. } => {
            check_guard_band("scanned signal", scan_reach, &grid, signal_step)?;
            check_guard_band("fixed idler", max_abs(&idler_positions), &grid, idler_step)?;
        }
        _ => {
            check_guard_band("idler", scan_reach, &grid, idler_step)?;
            check_guard_band("signal", scan_reach, &grid, signal_step)?;
        }
    }

    let idler_kernel = build_arm_kernel(&idler_chain, &grid, &idler_positions)?;
    let signal_kernel = build_arm_kernel(&signal_chain, &grid, &signal_positions)?;
    let fast = FastContraction::new(&spectrum);
    let idler_rows: Vec<Vec<Complex64>> = idler_kernel
        .rows
        .par_iter()
        .map(|row| fast.transform_row(row))
        .collect();
    let signal_rows: Vec<Vec<Complex64>> = signal_kernel
        .rows
        .par_iter()
        .map(|row| fast.transform_row(row))
        .collect();

    let rates: Vec<f64> = match setup.mode {
        ScanMode::SimultaneousSame | ScanMode::SimultaneousOpposite => (0..scan_positions
            .len())
            .into_par_iter()
            .map(|j| fast.amplitude(&idler_rows[j], &signal_rows[j]).norm_sqr())
            .collect(),
        ScanMode::FixedSignal { .. } => {
            let weights = fixed_weights.as_ref().expect("fixed mode carries weights");
            (0..scan_positions.len())
                .into_par_iter()
                .map(|j| {
                    signal_rows
                        .iter()
                        .zip(weights)
                        .map(|(node_row, &w)| {
                            w * fast.amplitude(&idler_rows[j], node_row).norm_sqr()
                        })
                        .sum()
                })
                .collect()
        }
        ScanMode::FixedIdler { .. } => {
            let weights = fixed_weights.as_ref().expect("fixed mode carries weights");
            (0..scan_positions.len())
                .into_par_iter()
                .map(|j| {
                    idler_rows
                        .iter()
                        .zip(weights)
                        .map(|(node_row, &w)| {
                            w * fast.amplitude(node_row, &signal_rows[j]).norm_sqr()
                        })
                        .sum()
                })
                .collect()
        }
    };

    // Slit convolution along the scan axis, once per moving detector.
    let rates = match setup.mode {
        ScanMode::SimultaneousSame | ScanMode::SimultaneousOpposite => {
            let once = integrate_slit(&scan_positions, &rates, setup.slit_width)?;
            integrate_slit(&scan_positions, &once, setup.slit_width)?
        }
        _ => integrate_slit(&scan_positions, &rates, setup.slit_width)?,
    };

    let peak = rates.iter().cloned().fold(0.0, f64::max);
    let mut rates: Vec<f64> = if peak > 0.0 {
        rates.iter().map(|r| r / peak).collect()
    } else {
        rates
    };
    let normalization = match setup.noise {
        None => Normalization::PeakOne,
        Some(noise) => {
            rates = add_poisson_noise(&rates, noise.mean_counts, noise.seed)?;
            Normalization::PoissonCounts {
                mean_counts: noise.mean_counts,
                seed: noise.seed,
            }
        }
    };

    Ok(ScanResult {
        positions: scan_positions,
        rates,
        kind: ScanKind::Coincidence(setup.mode),
        normalization,
        diagnostics: ScanDiagnostics {
            spectrum_tail_fraction: spectrum.tail_fraction(),
            detector_wrap_fraction: None,
            detector_step: scanned_step,
            degenerate_twins,
        },
    })
}

/// Replace each rate by a Poisson draw with mean `rate * mean_counts`,
/// using a stream seeded only by `seed`. Zero rates stay exactly zero and
/// consume no randomness, so masking a scan region never shifts the draws
/// of another run with the same seed.
pub fn add_poisson_noise(rates: &[f64], mean_counts: f64, seed: u64) -> Result<Vec<f64>> {
    if !(mean_counts > 0.0) || !mean_counts.is_finite() {
        return Err(SimError::Scan(format!(
            "mean_counts must be positive and finite, got {mean_counts}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rates
        .iter()
        .map(|&rate| {
            if rate < 0.0 || !rate.is_finite() {
                return Err(SimError::Scan(format!(
                    "rates must be finite and non-negative, got {rate}"
                )));
            }
            if rate == 0.0 {
                return Ok(0.0);
            }
            let poisson = Poisson::new(rate * mean_counts).map_err(|e| {
                SimError::Scan(format!(
                    "invalid Poisson mean {}: {e}",
                    rate * mean_counts
                ))
            })?;
            Ok(poisson.sample(&mut rng))
        })
        .collect()
}

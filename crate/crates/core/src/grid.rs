//! Uniform 1D sampling and a calibrated discrete Fourier transform between
//! transverse position x and transverse wavenumber q.
//!
//! The transform pair approximates the continuous conventions
//!
//! ```text
//!   V(q) = ∫ f(x) e^{-iqx} dx          f(x) = (1/2π) ∫ V(q) e^{+iqx} dq
//! ```
//!
//! on axes centered at zero: `x_j = (j - n/2)·dx`, `q_m = (m - n/2)·dq`,
//! `dq = 2π/(n·dx)`. With `n` a power of two (hence divisible by four) the
//! centering phases reduce to alternating signs and the pair is exact: round
//! trips and Parseval sums close to machine rounding, and multiplying the
//! spectrum by `e^{-iq·j₀dx}` circularly shifts the samples by exactly `j₀`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

use crate::error::{Result, SimError};

/// Uniform symmetric sampling lattice shared by a position axis and its
/// conjugate wavenumber axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    dx: f64,
}

/// Which axis a field's samples live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Position,
    Momentum,
}

/// Build a grid with `n` samples spaced `dx` meters apart.
pub fn make_grid(n: usize, dx: f64) -> Result<Grid> {
    Grid::new(n, dx)
}

impl Grid {
    /// `n` must be a power of two and at least 8; `dx` must be positive.
    pub fn new(n: usize, dx: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(SimError::Grid(format!(
                "sample count must be a power of two >= 8, got {n}"
            )));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(SimError::Grid(format!(
                "sample spacing must be positive and finite, got {dx}"
            )));
        }
        Ok(Grid { n, dx })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Position spacing in meters.
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Wavenumber spacing in rad/m: `2π/(n·dx)`.
    pub fn dq(&self) -> f64 {
        TAU / (self.n as f64 * self.dx)
    }

    /// Full position-axis extent `n·dx` in meters.
    pub fn span(&self) -> f64 {
        self.n as f64 * self.dx
    }

    /// Position of sample `index`: `(index - n/2)·dx`.
    pub fn position(&self, index: usize) -> f64 {
        (index as f64 - (self.n / 2) as f64) * self.dx
    }

    /// Transverse wavenumber of sample `index`: `(index - n/2)·dq`.
    pub fn transverse_wavenumber(&self, index: usize) -> f64 {
        (index as f64 - (self.n / 2) as f64) * self.dq()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.position(j)).collect()
    }

    pub fn transverse_wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.transverse_wavenumber(m)).collect()
    }

    /// True when two grids share the sampling lattice to rounding.
    pub fn same_lattice(&self, other: &Grid) -> bool {
        self.n == other.n && (self.dx - other.dx).abs() <= 1e-15 * self.dx.abs()
    }
}

/// Complex amplitude sampled on a [`Grid`], tagged with its domain and the
/// photon wavenumber it propagates with.
#[derive(Debug, Clone)]
pub struct SampledField {
    pub grid: Grid,
    pub domain: Domain,
    /// Photon wavenumber k in rad/m (2π/λ).
    pub photon_wavenumber: f64,
    pub(crate) values: Vec<Complex64>,
}

impl SampledField {
    /// Wrap complex samples; the length must match the grid.
    pub fn new(
        grid: Grid,
        domain: Domain,
        photon_wavenumber: f64,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(SimError::Incompatible(format!(
                "field length {} does not match grid sample count {}",
                values.len(),
                grid.n()
            )));
        }
        if !(photon_wavenumber > 0.0) {
            return Err(SimError::Grid(format!(
                "photon wavenumber must be positive, got {photon_wavenumber}"
            )));
        }
        Ok(SampledField {
            grid,
            domain,
            photon_wavenumber,
            values,
        })
    }

    /// Wrap real samples as complex amplitudes.
    pub fn from_real(
        grid: Grid,
        domain: Domain,
        photon_wavenumber: f64,
        reals: &[f64],
    ) -> Result<Self> {
        let values = reals.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        SampledField::new(grid, domain, photon_wavenumber, values)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Integration step on this field's axis: `dx` in position,
    /// `dq/2π` in momentum (the inverse-transform measure).
    pub fn step_measure(&self) -> f64 {
        match self.domain {
            Domain::Position => self.grid.dx(),
            Domain::Momentum => self.grid.dq() / TAU,
        }
    }

    /// Σ|f|² times the axis measure; Parseval-invariant under the
    /// transform pair.
    pub fn energy(&self) -> f64 {
        let step = self.step_measure();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * step
    }

    /// Calibrated forward transform: position field to momentum spectrum,
    /// `V(q_m) = dx·Σ_j f_j e^{-i q_m x_j}`.
    pub fn forward_spectrum(&self) -> Result<SampledField> {
        if self.domain != Domain::Position {
            return Err(SimError::Domain(
                "forward_spectrum requires a position-domain field".into(),
            ));
        }
        let mut buf = alternate_signs(&self.values);
        fft_in_place(&mut buf, rustfft::FftDirection::Forward);
        let dx = self.grid.dx();
        for (m, v) in buf.iter_mut().enumerate() {
            let sign = if m & 1 == 0 { dx } else { -dx };
            *v *= sign;
        }
        Ok(SampledField {
            grid: self.grid,
            domain: Domain::Momentum,
            photon_wavenumber: self.photon_wavenumber,
            values: buf,
        })
    }

    /// Calibrated inverse transform: momentum spectrum to position field,
    /// `f(x_j) = (dq/2π)·Σ_m V_m e^{+i q_m x_j}`.
    pub fn inverse_spectrum(&self) -> Result<SampledField> {
        if self.domain != Domain::Momentum {
            return Err(SimError::Domain(
                "inverse_spectrum requires a momentum-domain field".into(),
            ));
        }
        let mut buf = alternate_signs(&self.values);
        fft_in_place(&mut buf, rustfft::FftDirection::Inverse);
        let scale = 1.0 / (self.grid.n() as f64 * self.grid.dx());
        for (j, v) in buf.iter_mut().enumerate() {
            let sign = if j & 1 == 0 { scale } else { -scale };
            *v *= sign;
        }
        Ok(SampledField {
            grid: self.grid,
            domain: Domain::Position,
            photon_wavenumber: self.photon_wavenumber,
            values: buf,
        })
    }
}

fn alternate_signs(values: &[Complex64]) -> Vec<Complex64> {
    values
        .iter()
        .enumerate()
        .map(|(j, v)| if j & 1 == 0 { *v } else { -*v })
        .collect()
}

/// Unnormalized in-place FFT (rustfft conventions: forward sums with
/// `e^{-2πi jm/n}`, inverse with `e^{+2πi jm/n}`, neither divides by n).
pub(crate) fn fft_in_place(buf: &mut [Complex64], direction: rustfft::FftDirection) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft(buf.len(), direction);
    fft.process(buf);
}

/// Fraction of the total squared magnitude lying outside the central half
/// of the sample range: the standard support diagnostic for both spectra
/// (aliasing risk) and fields (wrap-around risk).
pub(crate) fn outer_half_energy_fraction(values: &[Complex64]) -> f64 {
    let total: f64 = values.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let n = values.len();
    let central: f64 = values[n / 4..3 * n / 4].iter().map(|v| v.norm_sqr()).sum();
    1.0 - central / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerances::EXACT_REL;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const PUMP_K: f64 = TAU / 442e-9;

    fn max_abs(values: &[Complex64]) -> f64 {
        values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn rel_linf(a: &[Complex64], b: &[Complex64]) -> f64 {
        let scale = max_abs(a).max(max_abs(b)).max(f64::MIN_POSITIVE);
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
            / scale
    }

    #[test]
    fn axes_match_definitions() {
        let g = make_grid(8, 1.0).unwrap();
        let xs = g.positions();
        assert_eq!(xs, vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        assert!((g.dq() - TAU / 8.0).abs() < 1e-15);
    }

    #[test]
    fn axes_scale_with_spacing() {
        let g = make_grid(1024, 10e-6).unwrap();
        assert!((g.span() - 10.24e-3).abs() < 1e-12);
        let expected_dq = TAU / (1024.0 * 10e-6);
        assert!((g.dq() - expected_dq).abs() / expected_dq < 1e-12);
        // ~613.6 rad/m
        assert!((g.dq() - 613.59).abs() < 0.01);
    }

    #[test]
    fn grid_preconditions_are_enforced() {
        assert!(make_grid(7, 1.0).is_err());
        assert!(make_grid(4, 1.0).is_err());
        assert!(make_grid(0, 1.0).is_err());
        assert!(make_grid(8, 0.0).is_err());
        assert!(make_grid(8, -1e-6).is_err());
        assert!(make_grid(8, f64::NAN).is_err());
        assert!(make_grid(8, 1.0).is_ok());
    }

    #[test]
    fn field_length_must_match_grid() {
        let g = make_grid(8, 1.0).unwrap();
        assert!(SampledField::from_real(g, Domain::Position, PUMP_K, &[0.0; 7]).is_err());
        assert!(SampledField::from_real(g, Domain::Position, PUMP_K, &[0.0; 8]).is_ok());
    }

    #[test]
    fn constant_field_transforms_to_central_spike() {
        let n = 64;
        let g = make_grid(n, 0.5e-3).unwrap();
        let f = SampledField::from_real(g, Domain::Position, PUMP_K, &vec![1.0; n]).unwrap();
        let v = f.forward_spectrum().unwrap();
        let weight = n as f64 * g.dx();
        assert!((v.values()[n / 2].re - weight).abs() / weight < EXACT_REL);
        assert!(v.values()[n / 2].im.abs() / weight < EXACT_REL);
        for (m, val) in v.values().iter().enumerate() {
            if m != n / 2 {
                assert!(val.norm() / weight < 1e-12, "leakage at bin {m}");
            }
        }
    }

    #[test]
    fn central_spike_inverts_to_constant_field() {
        let n = 64;
        let g = make_grid(n, 0.5e-3).unwrap();
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        spec[n / 2] = Complex64::new(n as f64 * g.dx(), 0.0);
        let v = SampledField::new(g, Domain::Momentum, PUMP_K, spec).unwrap();
        let f = v.inverse_spectrum().unwrap();
        for val in f.values() {
            assert!((val.re - 1.0).abs() < EXACT_REL);
            assert!(val.im.abs() < EXACT_REL);
        }
    }

    #[test]
    fn gaussian_transforms_to_analytic_gaussian() {
        // f(x) = exp(-x²/w²)  =>  V(q) = w·sqrt(π)·exp(-q²w²/4),
        // 1/e half-width 2/w. Checked where the analytic value is above the
        // window-truncation floor.
        let w = 1e-3;
        let g = make_grid(1024, 10e-6).unwrap();
        let samples: Vec<f64> = g
            .positions()
            .iter()
            .map(|&x| (-x * x / (w * w)).exp())
            .collect();
        let f = SampledField::from_real(g, Domain::Position, PUMP_K, &samples).unwrap();
        let v = f.forward_spectrum().unwrap();
        let peak = w * PI.sqrt();
        for m in 0..g.n() {
            let q = g.transverse_wavenumber(m);
            if q.abs() * w <= 4.0 {
                let analytic = peak * (-q * q * w * w / 4.0).exp();
                let err = (v.values()[m] - Complex64::new(analytic, 0.0)).norm() / peak;
                assert!(err < 1e-6, "q={q}: err={err}");
            }
        }
        // 1/e half-width of |V| is 2/w: interpolate the crossing.
        let target = peak * (-1.0f64).exp();
        let mut crossing = None;
        for m in g.n() / 2..g.n() - 1 {
            let (a, b) = (v.values()[m].norm(), v.values()[m + 1].norm());
            if a >= target && b < target {
                let frac = (a - target) / (a - b);
                crossing = Some(g.transverse_wavenumber(m) + frac * g.dq());
                break;
            }
        }
        // Linear interpolation across one coarse bin limits this to ~2%.
        let q_e = crossing.expect("1/e crossing inside the window");
        assert!((q_e - 2.0 / w).abs() / (2.0 / w) < 0.02, "1/e width at {q_e}");
    }

    #[test]
    fn two_slit_spectrum_matches_the_analytic_envelope() {
        // |V(q)| ∝ |cos(qd/2)|·|sinc(qa/2)| for two slits of width a
        // separated by d. Area-weighted cells multiply the continuous
        // spectrum by one extra cell factor sinc(q·dx/2), exactly.
        let d = 300e-6;
        let a = 100e-6;
        let g = make_grid(2048, a / 16.0).unwrap();
        let mask = crate::elements::double_slit_mask(&g, d, a);
        let f = SampledField::from_real(g, Domain::Position, PUMP_K, &mask).unwrap();
        let v = f.forward_spectrum().unwrap();
        let sinc = |u: f64| if u.abs() < 1e-12 { 1.0 } else { u.sin() / u };
        let peak = 2.0 * a;
        for m in 0..g.n() {
            let q = g.transverse_wavenumber(m);
            if q.abs() <= 6.0 * PI / a {
                let expected = peak
                    * ((q * d / 2.0).cos() * sinc(q * a / 2.0) * sinc(q * g.dx() / 2.0)).abs();
                let err = (v.values()[m].norm() - expected).abs() / peak;
                assert!(err < 0.01, "q={q}: |V|={} vs {expected}", v.values()[m].norm());
            }
        }
        // Spot values: dark interference node at q = π/d, dark envelope
        // node at q = 2π/a, bright secondary maximum at q = 2π/d.
        let nearest = |q: f64| ((q / g.dq()).round() as isize + (g.n() / 2) as isize) as usize;
        assert!(v.values()[nearest(PI / d)].norm() / peak < 0.05);
        assert!(v.values()[nearest(TAU / a)].norm() / peak < 0.02);
        let sec = v.values()[nearest(TAU / d)].norm() / peak;
        let expected_sec = sinc(PI * a / d);
        assert!((sec - expected_sec).abs() < 0.02, "secondary {sec} vs {expected_sec}");
    }

    #[test]
    fn shift_theorem_is_exact_on_lattice() {
        // Multiplying the spectrum by e^{-iq·x₀} with x₀ = 5·dx circularly
        // shifts the samples by exactly 5 bins.
        let n = 256;
        let g = make_grid(n, 20e-6).unwrap();
        let samples: Vec<Complex64> = g
            .positions()
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                Complex64::new(
                    (-x * x / 1e-6).exp() * (1.0 + 0.3 * (j as f64 * 0.7).sin()),
                    0.2 * (j as f64 * 1.3).cos(),
                )
            })
            .collect();
        let f = SampledField::new(g, Domain::Position, PUMP_K, samples.clone()).unwrap();
        let mut v = f.forward_spectrum().unwrap();
        let x0 = 5.0 * g.dx();
        for m in 0..n {
            let q = g.transverse_wavenumber(m);
            v.values_mut()[m] *= Complex64::from_polar(1.0, -q * x0);
        }
        let shifted = v.inverse_spectrum().unwrap();
        let expected: Vec<Complex64> = (0..n).map(|j| samples[(j + n - 5) % n]).collect();
        assert!(rel_linf(shifted.values(), &expected) < EXACT_REL);
    }

    #[test]
    fn wrong_domain_is_rejected() {
        let g = make_grid(8, 1.0).unwrap();
        let f = SampledField::from_real(g, Domain::Position, PUMP_K, &[1.0; 8]).unwrap();
        let v = f.forward_spectrum().unwrap();
        assert!(matches!(v.forward_spectrum(), Err(SimError::Domain(_))));
        assert!(matches!(f.inverse_spectrum(), Err(SimError::Domain(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn round_trip_is_identity(
            parts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 256)
        ) {
            let g = make_grid(256, 12.5e-6).unwrap();
            let values: Vec<Complex64> =
                parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
            let f = SampledField::new(g, Domain::Position, PUMP_K, values.clone()).unwrap();
            let back = f.forward_spectrum().unwrap().inverse_spectrum().unwrap();
            prop_assert!(rel_linf(back.values(), &values) < EXACT_REL);
        }

        #[test]
        fn parseval_sum_is_preserved(
            parts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 128)
        ) {
            let g = make_grid(128, 7e-6).unwrap();
            let values: Vec<Complex64> =
                parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
            let f = SampledField::new(g, Domain::Position, PUMP_K, values).unwrap();
            let e_x = f.energy();
            let e_q = f.forward_spectrum().unwrap().energy();
            if e_x > 0.0 {
                prop_assert!((e_x - e_q).abs() / e_x < EXACT_REL);
            }
        }
    }
}

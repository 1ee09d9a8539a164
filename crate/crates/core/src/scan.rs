//! Scan-level types shared by the pump model, the coincidence engine, and
//! the serializers.

/// How the two detectors move during a coincidence scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanMode {
    /// Scan the idler detector with the signal detector parked.
    FixedSignal { signal_position: f64 },
    /// Scan the signal detector with the idler detector parked.
    FixedIdler { idler_position: f64 },
    /// Move both detectors together: positions (ρ, ρ).
    SimultaneousSame,
    /// Move both detectors oppositely: positions (ρ, -ρ).
    SimultaneousOpposite,
}

impl ScanMode {
    pub fn label(&self) -> String {
        match self {
            ScanMode::FixedSignal { signal_position } => {
                format!("fixed-signal at {:.6e} m", signal_position)
            }
            ScanMode::FixedIdler { idler_position } => {
                format!("fixed-idler at {:.6e} m", idler_position)
            }
            ScanMode::SimultaneousSame => "simultaneous-same".into(),
            ScanMode::SimultaneousOpposite => "simultaneous-opposite".into(),
        }
    }
}

/// What a scan measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanKind {
    /// Classical intensity of the detected pump beam.
    PumpIntensity,
    /// Coincidence rate between the two arms.
    Coincidence(ScanMode),
}

impl ScanKind {
    pub fn label(&self) -> String {
        match self {
            ScanKind::PumpIntensity => "pump-intensity".into(),
            ScanKind::Coincidence(mode) => format!("coincidence {}", mode.label()),
        }
    }
}

/// How the rates column is scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Noiseless curve scaled so its maximum is 1.
    PeakOne,
    /// Poisson counts drawn after peak normalization.
    PoissonCounts { mean_counts: f64, seed: u64 },
}

/// Health metrics recorded with every scan.
#[derive(Debug, Clone, Copy)]
pub struct ScanDiagnostics {
    /// Fraction of spectrum energy outside the central half of the
    /// wavenumber window before truncation (coincidence scans) or outside
    /// the guarded detector window (not applicable: 0).
    pub spectrum_tail_fraction: f64,
    /// Fraction of detected energy outside the guarded central half of the
    /// detector window, when the full window was available (pump scans).
    pub detector_wrap_fraction: Option<f64>,
    /// Output-lattice step that scan positions were snapped to, when the
    /// arm has a lens.
    pub detector_step: Option<f64>,
    /// True when both photons carry the same wavenumber (the only regime
    /// validated against the reference experiments).
    pub degenerate_twins: bool,
}

impl Default for ScanDiagnostics {
    fn default() -> Self {
        ScanDiagnostics {
            spectrum_tail_fraction: 0.0,
            detector_wrap_fraction: None,
            detector_step: None,
            degenerate_twins: true,
        }
    }
}

/// Detector positions with their measured (or drawn) rates.
#[derive(Debug, Clone)]
pub struct ScanResult {
    pub positions: Vec<f64>,
    pub rates: Vec<f64>,
    pub kind: ScanKind,
    pub normalization: Normalization,
    pub diagnostics: ScanDiagnostics,
}

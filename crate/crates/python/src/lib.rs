//! Python bindings: run both scan kinds from a config string and apply the
//! curve estimators, mirroring the command-line interface.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use twinbeam::config::ExperimentConfig;
use twinbeam::engine::run_scan;
use twinbeam::oracles;
use twinbeam::pump::pump_intensity_scan;
use twinbeam::scan::ScanMode;
use twinbeam::SimError;

fn py_err(error: SimError) -> PyErr {
    PyValueError::new_err(error.to_string())
}

/// Crate version of the underlying engine.
#[pyfunction]
fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Transmitted pump intensity along the detection plane.
/// Returns (positions_m, normalized_rates).
#[pyfunction]
fn pump_scan(config_text: &str) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let config = ExperimentConfig::parse(config_text).map_err(py_err)?;
    let bench = config.bench(None).map_err(py_err)?;
    let scan = pump_intensity_scan(
        &bench.pump,
        &bench.layout,
        &bench.grid,
        &config.scan_positions(),
        config.detection.slit_width,
    )
    .map_err(py_err)?;
    Ok((scan.positions, scan.rates))
}

fn override_mode(config: &mut ExperimentConfig, mode: &str, parked: f64) -> PyResult<()> {
    config.detection.mode = match mode {
        "fixed" => ScanMode::FixedSignal {
            signal_position: parked,
        },
        "fixed-idler" => ScanMode::FixedIdler {
            idler_position: parked,
        },
        "same" => ScanMode::SimultaneousSame,
        "opposite" => ScanMode::SimultaneousOpposite,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown mode '{other}'; expected fixed, fixed-idler, same, or opposite"
            )))
        }
    };
    Ok(())
}

/// Coincidence rate scan in the configured mode, or in `mode` when given
/// (fixed, fixed-idler, same, opposite; `fixed_position` in meters parks
/// the still detector). Returns (positions_m, normalized_rates).
#[pyfunction]
#[pyo3(signature = (config_text, mode=None, fixed_position=0.0))]
fn coincidence_scan(
    config_text: &str,
    mode: Option<&str>,
    fixed_position: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let mut config = ExperimentConfig::parse(config_text).map_err(py_err)?;
    if let Some(mode) = mode {
        override_mode(&mut config, mode, fixed_position)?;
    }
    let bench = config.bench(None).map_err(py_err)?;
    let scan = run_scan(&config.coincidence_setup(&bench)).map_err(py_err)?;
    Ok((scan.positions, scan.rates))
}

/// Fringe period of an oscillatory scan, in meters.
#[pyfunction]
fn fringe_period(positions: Vec<f64>, rates: Vec<f64>) -> PyResult<f64> {
    oracles::fringe_period_of(&positions, &rates).map_err(py_err)
}

/// Distance between the two half-maximum lobes of a double-peaked scan.
#[pyfunction]
fn peak_separation(positions: Vec<f64>, rates: Vec<f64>) -> PyResult<f64> {
    oracles::peak_separation_of(&positions, &rates).map_err(py_err)
}

/// Image distance conjugate to `object_distance` for a converging lens.
#[pyfunction]
fn thin_lens_image_distance(object_distance: f64, focal_length: f64) -> PyResult<f64> {
    let geometry = oracles::thin_lens_solve(Some(object_distance), None, Some(focal_length))
        .map_err(py_err)?;
    Ok(geometry.image_distance)
}

/// Far-field double-slit fringe period at the observation plane.
#[pyfunction]
fn fraunhofer_fringe_period(wavelength: f64, distance: f64, separation: f64) -> f64 {
    oracles::fraunhofer_fringe_period(wavelength, distance, separation)
}

#[pymodule]
fn twinbeam_rs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(version, m)?)?;
    m.add_function(wrap_pyfunction!(pump_scan, m)?)?;
    m.add_function(wrap_pyfunction!(coincidence_scan, m)?)?;
    m.add_function(wrap_pyfunction!(fringe_period, m)?)?;
    m.add_function(wrap_pyfunction!(peak_separation, m)?)?;
    m.add_function(wrap_pyfunction!(thin_lens_image_distance, m)?)?;
    m.add_function(wrap_pyfunction!(fraunhofer_fringe_period, m)?)?;
    Ok(())
}

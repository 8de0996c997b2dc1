//! Python bindings for `bincdr`.
//!
//! Signals cross the boundary as lists of floats, complex coherences as Python `complex`,
//! and grids as nested lists (`[frame][bin]` or `[theta][freq]`).

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use bincdr::analysis::{default_freq_grid, default_theta_grid, itd_table as itd_rows};
use bincdr::cdr::{db_to_linear, estimate_cdr as estimate, EstimatorInputs};
use bincdr::spatial::{self, Geometry};
use bincdr::synth::{gen_field, FieldKind, FieldSpec};
use bincdr::{DiffuseModel, Error, Estimator, FieldModel, PipelineConfig};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::MissingFile(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn geometry(distance: f64, speed_of_sound: f64) -> PyResult<Geometry> {
    Geometry::new(distance, speed_of_sound).map_err(to_py)
}

/// Pipeline settings. The DOA is given in degrees.
#[pyclass(name = "Config", module = "bincdr_py", skip_from_py_object)]
#[derive(Clone)]
struct Config {
    inner: PipelineConfig,
}

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (
        estimator = "schwarz3",
        doa_deg = None,
        field = "binaural",
        diffuse = "binaural",
        distance = 0.17,
        speed_of_sound = 343.0,
        frame_len = 512,
        hop = 128,
        forgetting = 0.68,
        mu = 1.3,
        gmin = 0.1,
        cdr_cap_db = 40.0,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        estimator: &str,
        doa_deg: Option<f64>,
        field: &str,
        diffuse: &str,
        distance: f64,
        speed_of_sound: f64,
        frame_len: usize,
        hop: usize,
        forgetting: f64,
        mu: f64,
        gmin: f64,
        cdr_cap_db: f64,
    ) -> PyResult<Self> {
        let inner = PipelineConfig {
            mic_distance_m: distance,
            speed_of_sound,
            doa_rad: doa_deg.map(f64::to_radians),
            estimator: estimator.parse().map_err(to_py)?,
            field_model: field.parse().map_err(to_py)?,
            diffuse_model: diffuse.parse().map_err(to_py)?,
            frame_len,
            hop,
            forgetting,
            mu,
            gmin,
            cdr_cap_db,
            gain_smoothing: None,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Loads a `key = value` config file on top of the defaults.
    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let inner = PipelineConfig::from_file(path).map_err(to_py)?;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn estimator(&self) -> &'static str {
        self.inner.estimator.name()
    }

    #[getter]
    fn doa_deg(&self) -> Option<f64> {
        self.inner.doa_rad.map(f64::to_degrees)
    }

    #[getter]
    fn field(&self) -> &'static str {
        self.inner.field_model.name()
    }

    #[getter]
    fn diffuse(&self) -> &'static str {
        self.inner.diffuse_model.name()
    }

    #[getter]
    fn frame_len(&self) -> usize {
        self.inner.frame_len
    }

    #[getter]
    fn hop(&self) -> usize {
        self.inner.hop
    }

    #[getter]
    fn gmin(&self) -> f64 {
        self.inner.gmin
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "Config(estimator='{}', doa_deg={}, field='{}', diffuse='{}', distance={}, frame_len={}, hop={}, forgetting={}, mu={}, gmin={})",
            c.estimator,
            c.doa_rad
                .map(|d| d.to_degrees().to_string())
                .unwrap_or_else(|| "None".into()),
            c.field_model,
            c.diffuse_model,
            c.mic_distance_m,
            c.frame_len,
            c.hop,
            c.forgetting,
            c.mu,
            c.gmin
        )
    }
}

/// Two-channel signal.
#[pyclass(name = "StereoSignal", module = "bincdr_py", skip_from_py_object)]
#[derive(Clone)]
struct PyStereo {
    inner: bincdr::StereoSignal,
}

#[pymethods]
impl PyStereo {
    #[new]
    fn new(left: Vec<f64>, right: Vec<f64>, sample_rate: u32) -> PyResult<Self> {
        Ok(Self {
            inner: bincdr::StereoSignal::new(left, right, sample_rate).map_err(to_py)?,
        })
    }

    #[getter]
    fn left(&self) -> Vec<f64> {
        self.inner.left.clone()
    }

    #[getter]
    fn right(&self) -> Vec<f64> {
        self.inner.right.clone()
    }

    #[getter]
    fn sample_rate(&self) -> u32 {
        self.inner.sample_rate
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "StereoSignal(len={}, sample_rate={})",
            self.inner.len(),
            self.inner.sample_rate
        )
    }
}

#[pyfunction]
fn read_wav(path: PathBuf) -> PyResult<PyStereo> {
    Ok(PyStereo {
        inner: bincdr::signal_io::read_wav(path).map_err(to_py)?,
    })
}

/// Writes 16-bit PCM (or 32-bit float) and returns the number of clipped samples.
#[pyfunction]
#[pyo3(signature = (path, signal, float32 = false))]
fn write_wav(path: PathBuf, signal: PyRef<'_, PyStereo>, float32: bool) -> PyResult<usize> {
    let encoding = if float32 {
        bincdr::WavEncoding::Float32
    } else {
        bincdr::WavEncoding::Pcm16
    };
    bincdr::signal_io::write_wav(path, &signal.inner, encoding).map_err(to_py)
}

fn grid_rows(grid: &bincdr::TfGrid<f64>) -> Vec<Vec<f64>> {
    grid.frames().map(<[f64]>::to_vec).collect()
}

/// Runs the full pipeline. Returns a dict with `output` (StereoSignal), `cdr_db` and
/// `gains` (`[frame][bin]`) and `freqs_hz`.
#[pyfunction]
#[pyo3(signature = (signal, config = None))]
fn process<'py>(
    py: Python<'py>,
    signal: PyRef<'py, PyStereo>,
    config: Option<PyRef<'py, Config>>,
) -> PyResult<Bound<'py, PyDict>> {
    let config = config.map(|c| c.inner.clone()).unwrap_or_default();
    let input = signal.inner.clone();
    let p = py
        .detach(|| bincdr::dereverb::process_detailed(&input, &config))
        .map_err(to_py)?;
    let cap = config.cdr_cap_db;
    let out = PyDict::new(py);
    out.set_item("output", PyStereo { inner: p.output })?;
    out.set_item("cdr_db", grid_rows(&p.cdr.map(|c| c.db().max(-cap))))?;
    out.set_item("gains", grid_rows(&p.mask.gains))?;
    out.set_item("freqs_hz", p.bin_freqs)?;
    Ok(out)
}

/// Dereverberated copy of `signal`.
#[pyfunction]
#[pyo3(signature = (signal, config = None))]
fn dereverb(
    py: Python<'_>,
    signal: PyRef<'_, PyStereo>,
    config: Option<PyRef<'_, Config>>,
) -> PyResult<PyStereo> {
    let config = config.map(|c| c.inner.clone()).unwrap_or_default();
    let input = signal.inner.clone();
    let output = py
        .detach(|| bincdr::dereverb::process(&input, &config))
        .map_err(to_py)?;
    Ok(PyStereo { inner: output })
}

/// Linear CDR estimate from one mixture coherence, floored at 0 and capped.
#[pyfunction]
#[pyo3(signature = (estimator, gamma_x, gamma_diff, gamma_coh = Complex64::new(1.0, 0.0), cap_db = 40.0))]
fn estimate_cdr(
    estimator: &str,
    gamma_x: Complex64,
    gamma_diff: f64,
    gamma_coh: Complex64,
    cap_db: f64,
) -> PyResult<f64> {
    let estimator: Estimator = estimator.parse().map_err(to_py)?;
    let inputs = EstimatorInputs {
        gamma_x,
        gamma_coh,
        gamma_diff,
    };
    Ok(estimate(estimator, &inputs, db_to_linear(cap_db)).linear())
}

#[pyfunction]
fn mix_coherence(cdr: f64, gamma_coh: Complex64, gamma_diff: f64) -> Complex64 {
    bincdr::cdr::mix_coherence(cdr, gamma_coh, gamma_diff)
}

/// Direct-path coherence for a source at `theta_deg`.
#[pyfunction]
#[pyo3(signature = (theta_deg, freq, field = "binaural", distance = 0.17, speed_of_sound = 343.0))]
fn desired_coherence(
    theta_deg: f64,
    freq: f64,
    field: &str,
    distance: f64,
    speed_of_sound: f64,
) -> PyResult<Complex64> {
    let field: FieldModel = field.parse().map_err(to_py)?;
    let geo = geometry(distance, speed_of_sound)?;
    Ok(spatial::desired_coherence(
        theta_deg.to_radians(),
        freq,
        &geo,
        field,
    ))
}

#[pyfunction]
#[pyo3(signature = (freq, model = "binaural", distance = 0.17, speed_of_sound = 343.0))]
fn diffuse_coherence(freq: f64, model: &str, distance: f64, speed_of_sound: f64) -> PyResult<f64> {
    let model: DiffuseModel = model.parse().map_err(to_py)?;
    let geo = geometry(distance, speed_of_sound)?;
    Ok(spatial::diffuse_coherence(freq, &geo, model))
}

/// Binaural ITD in seconds.
#[pyfunction]
#[pyo3(signature = (theta_deg, freq, distance = 0.17, speed_of_sound = 343.0))]
fn itd_binaural(theta_deg: f64, freq: f64, distance: f64, speed_of_sound: f64) -> PyResult<f64> {
    let geo = geometry(distance, speed_of_sound)?;
    Ok(spatial::itd_binaural(theta_deg.to_radians(), freq, &geo))
}

/// Free-field TDOA in seconds.
#[pyfunction]
#[pyo3(signature = (theta_deg, distance = 0.17, speed_of_sound = 343.0))]
fn tdoa_free_field(theta_deg: f64, distance: f64, speed_of_sound: f64) -> PyResult<f64> {
    let geo = geometry(distance, speed_of_sound)?;
    Ok(spatial::tdoa_free_field(theta_deg.to_radians(), &geo))
}

/// Synthetic field; returns a dict with `mixture`, `coherent` and `diffuse` signals.
#[pyfunction]
#[pyo3(signature = (
    kind = "mixture",
    theta_deg = 0.0,
    cdr_db = 0.0,
    duration_s = 1.0,
    seed = 0,
    sample_rate = 16000,
    level = 0.1,
    field = "binaural",
    diffuse = "binaural",
    modulation_hz = None,
    per_bin = false,
    distance = 0.17,
    speed_of_sound = 343.0,
))]
#[allow(clippy::too_many_arguments)]
fn synth<'py>(
    py: Python<'py>,
    kind: &str,
    theta_deg: f64,
    cdr_db: f64,
    duration_s: f64,
    seed: u64,
    sample_rate: u32,
    level: f64,
    field: &str,
    diffuse: &str,
    modulation_hz: Option<f64>,
    per_bin: bool,
    distance: f64,
    speed_of_sound: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = match kind {
        "plane" | "plane_wave" => FieldKind::PlaneWave,
        "diffuse" => FieldKind::Diffuse,
        "mixture" => FieldKind::Mixture,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown field kind '{other}'"
            )))
        }
    };
    let spec = FieldSpec {
        kind,
        theta: theta_deg.to_radians(),
        cdr_db,
        field_model: field.parse().map_err(to_py)?,
        diffuse_model: diffuse.parse().map_err(to_py)?,
        duration_s,
        sample_rate,
        seed,
        level,
        per_bin_calibration: per_bin,
        source_modulation_hz: modulation_hz,
    };
    let geo = geometry(distance, speed_of_sound)?;
    let m = py.detach(|| gen_field(&spec, &geo)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("mixture", PyStereo { inner: m.mixture })?;
    out.set_item("coherent", PyStereo { inner: m.coherent })?;
    out.set_item("diffuse", PyStereo { inner: m.diffuse })?;
    Ok(out)
}

/// Estimator error surface on the default grids; `delta_db` is `[theta][freq]`.
#[pyfunction]
#[pyo3(signature = (eta_in_db, estimator = "schwarz2", estimator_field = "free_field", distance = 0.17, speed_of_sound = 343.0))]
fn robustness_surface<'py>(
    py: Python<'py>,
    eta_in_db: f64,
    estimator: &str,
    estimator_field: &str,
    distance: f64,
    speed_of_sound: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let geo = geometry(distance, speed_of_sound)?;
    let s = bincdr::analysis::robustness_surface(
        eta_in_db,
        &default_theta_grid(),
        &default_freq_grid(),
        &geo,
        estimator.parse().map_err(to_py)?,
        estimator_field.parse().map_err(to_py)?,
    )
    .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item(
        "theta_deg",
        s.theta_grid
            .iter()
            .map(|t| t.to_degrees())
            .collect::<Vec<_>>(),
    )?;
    out.set_item("freq_hz", s.freq_grid)?;
    out.set_item("delta_db", s.delta_db)?;
    Ok(out)
}

/// Rows of `(theta_deg, freq_hz, tau12_s, tau_lr_s)`.
#[pyfunction]
#[pyo3(signature = (thetas_deg, freqs_hz, distance = 0.17, speed_of_sound = 343.0))]
fn itd_table(
    thetas_deg: Vec<f64>,
    freqs_hz: Vec<f64>,
    distance: f64,
    speed_of_sound: f64,
) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let geo = geometry(distance, speed_of_sound)?;
    let thetas: Vec<f64> = thetas_deg.iter().map(|t| t.to_radians()).collect();
    Ok(itd_rows(&thetas, &freqs_hz, &geo)
        .into_iter()
        .map(|r| (r.theta.to_degrees(), r.freq, r.tau12, r.tau_lr))
        .collect())
}

#[pymodule]
fn bincdr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Config>()?;
    m.add_class::<PyStereo>()?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(write_wav, m)?)?;
    m.add_function(wrap_pyfunction!(process, m)?)?;
    m.add_function(wrap_pyfunction!(dereverb, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_cdr, m)?)?;
    m.add_function(wrap_pyfunction!(mix_coherence, m)?)?;
    m.add_function(wrap_pyfunction!(desired_coherence, m)?)?;
    m.add_function(wrap_pyfunction!(diffuse_coherence, m)?)?;
    m.add_function(wrap_pyfunction!(itd_binaural, m)?)?;
    m.add_function(wrap_pyfunction!(tdoa_free_field, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(robustness_surface, m)?)?;
    m.add_function(wrap_pyfunction!(itd_table, m)?)?;
    m.add("ESTIMATORS", Estimator::ALL.map(Estimator::name).to_vec())?;
    Ok(())
}

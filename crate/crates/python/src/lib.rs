//! Python bindings: parameter records, thresholds, crossovers and the
//! nonlinear integrator.

use std::collections::BTreeMap;

use magnetomech::dynamics::{self, AtomicState, Model, Perturbation, PerturbationTarget, RunError, SimConfig};
use magnetomech::lsa::{self, GrowthRate, OrientationOptions, Relaxation, RepumpModel, ThresholdResult};
use magnetomech::physics::{self, AtomSpecies, Derived};
use magnetomech::spectral::TransverseGrid;
use magnetomech::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParam { .. }
        | Error::Domain(_)
        | Error::NoFeedback
        | Error::IncompatibleOptions(_)
        | Error::NotOnGrid(_)
        | Error::ShapeMismatch { .. }
        | Error::TimeStep { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Physical parameters in SI units (detunings in linewidths).
#[pyclass(name = "SystemParams", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct PyParams {
    delta: f64,
    b0: f64,
    reflectivity: f64,
    mirror_distance: f64,
    cloud_length: f64,
    lattice_period: f64,
    temperature: f64,
    molasses_detuning: f64,
    molasses_sat: f64,
    pump_sat: f64,
}

impl From<magnetomech::SystemParams> for PyParams {
    fn from(p: magnetomech::SystemParams) -> Self {
        Self {
            delta: p.delta,
            b0: p.b0,
            reflectivity: p.reflectivity,
            mirror_distance: p.mirror_distance,
            cloud_length: p.cloud_length,
            lattice_period: p.lattice_period,
            temperature: p.temperature,
            molasses_detuning: p.molasses_detuning,
            molasses_sat: p.molasses_sat,
            pump_sat: p.pump_sat,
        }
    }
}

impl PyParams {
    fn core(&self) -> magnetomech::SystemParams {
        magnetomech::SystemParams {
            delta: self.delta,
            b0: self.b0,
            reflectivity: self.reflectivity,
            mirror_distance: self.mirror_distance,
            cloud_length: self.cloud_length,
            lattice_period: self.lattice_period,
            temperature: self.temperature,
            molasses_detuning: self.molasses_detuning,
            molasses_sat: self.molasses_sat,
            pump_sat: self.pump_sat,
        }
    }
}

#[pymethods]
impl PyParams {
    /// Keyword arguments override the defaults; a lattice period without a
    /// mirror distance places the mirror at the quarter Talbot distance.
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut p = PyParams::from(magnetomech::SystemParams::default());
        let mut mirror_given = false;
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                let val: f64 = v.extract()?;
                match key.as_str() {
                    "delta" => p.delta = val,
                    "b0" => p.b0 = val,
                    "reflectivity" => p.reflectivity = val,
                    "mirror_distance" => {
                        p.mirror_distance = val;
                        mirror_given = true;
                    }
                    "cloud_length" => p.cloud_length = val,
                    "lattice_period" => p.lattice_period = val,
                    "temperature" => p.temperature = val,
                    "molasses_detuning" => p.molasses_detuning = val,
                    "molasses_sat" => p.molasses_sat = val,
                    "pump_sat" => p.pump_sat = val,
                    other => return Err(PyValueError::new_err(format!("unknown parameter `{other}`"))),
                }
            }
        }
        if !mirror_given {
            p.mirror_distance = physics::quarter_talbot_distance(p.lattice_period, &AtomSpecies::rb87_d2());
        }
        p.core().validate().map_err(to_py)?;
        Ok(p)
    }

    fn validate(&self) -> PyResult<()> {
        self.core().validate().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.core())
    }
}

fn species() -> AtomSpecies {
    AtomSpecies::rb87_d2()
}

fn options(include_optomech: bool, include_molasses: bool, relaxation: &str, repump: &str) -> PyResult<OrientationOptions> {
    let relaxation = match relaxation {
        "diffusive" => Relaxation::Diffusive,
        "ballistic" => Relaxation::Ballistic,
        other => return Err(PyValueError::new_err(format!("unknown relaxation `{other}`"))),
    };
    let repump = match repump {
        "literal" => RepumpModel::Literal,
        "scaled" => RepumpModel::ScaledByAPrime,
        other => return Err(PyValueError::new_err(format!("unknown repump model `{other}`"))),
    };
    Ok(OrientationOptions {
        include_optomech,
        include_molasses,
        relaxation,
        repump,
    })
}

fn terms(py: Python<'_>, map: &BTreeMap<&'static str, f64>) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in map {
        d.set_item(*k, *v)?;
    }
    Ok(d.unbind())
}

fn threshold_dict(py: Python<'_>, th: &ThresholdResult) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mode", format!("{:?}", th.mode).to_lowercase())?;
    d.set_item("s0_th", th.s0_th)?;
    d.set_item("p0_th", th.p0_th)?;
    d.set_item("exists", th.exists())?;
    d.set_item("numerator", th.numerator)?;
    d.set_item("denominator", th.denominator)?;
    d.set_item("decay_terms", terms(py, &th.decay_terms)?)?;
    d.set_item("drive_terms", terms(py, &th.drive_terms)?)?;
    Ok(d.unbind())
}

fn rate_dict(py: Python<'_>, g: &GrowthRate) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("rate", g.rate)?;
    d.set_item("decay_terms", terms(py, &g.decay_terms)?)?;
    d.set_item("drive_terms", terms(py, &g.drive_terms)?)?;
    Ok(d.unbind())
}

/// Derived coefficients (σ, phases, molasses constants, rates, Θ(q)).
#[pyfunction]
fn derived(py: Python<'_>, params: PyRef<'_, PyParams>) -> PyResult<Py<PyDict>> {
    let d = Derived::new(&species(), &params.core()).map_err(to_py)?;
    let out = PyDict::new(py);
    for (k, v) in [
        ("k", d.k),
        ("q", d.q),
        ("sigma", d.sigma),
        ("a", d.coeffs.a),
        ("a_prime", d.coeffs.a_prime),
        ("phi_lin", d.coeffs.phi_lin),
        ("phi_s", d.coeffs.phi_s),
        ("alpha", d.molasses.alpha),
        ("diffusion", d.molasses.diff),
        ("momentum_diffusion", d.molasses.d_p),
        ("p0", d.p0),
        ("p_m", d.p_m),
        ("ballistic_rate", d.ballistic_rate),
        ("theta", d.theta),
    ] {
        out.set_item(k, v)?;
    }
    Ok(out.unbind())
}

#[pyfunction]
#[pyo3(signature = (params, sin_theta = 1.0))]
fn threshold_density(py: Python<'_>, params: PyRef<'_, PyParams>, sin_theta: f64) -> PyResult<Py<PyDict>> {
    let th = lsa::threshold_density(&species(), &params.core(), sin_theta).map_err(to_py)?;
    threshold_dict(py, &th)
}

#[pyfunction]
#[pyo3(signature = (params, sin_theta = 1.0, include_optomech = true, include_molasses = true, relaxation = "diffusive", repump = "literal"))]
fn threshold_orientation(
    py: Python<'_>,
    params: PyRef<'_, PyParams>,
    sin_theta: f64,
    include_optomech: bool,
    include_molasses: bool,
    relaxation: &str,
    repump: &str,
) -> PyResult<Py<PyDict>> {
    let o = options(include_optomech, include_molasses, relaxation, repump)?;
    let th = lsa::threshold_orientation(&species(), &params.core(), sin_theta, o).map_err(to_py)?;
    threshold_dict(py, &th)
}

#[pyfunction]
#[pyo3(signature = (params, q, p0, sin_theta = 1.0))]
fn growth_rate_density(py: Python<'_>, params: PyRef<'_, PyParams>, q: f64, p0: f64, sin_theta: f64) -> PyResult<Py<PyDict>> {
    let g = lsa::growth_rate_density(&species(), &params.core(), q, p0, sin_theta).map_err(to_py)?;
    rate_dict(py, &g)
}

#[pyfunction]
#[pyo3(signature = (params, q, p0, p_m = 0.0, sin_theta = 1.0, include_optomech = true, include_molasses = true, relaxation = "diffusive", repump = "literal"))]
#[allow(clippy::too_many_arguments)]
fn growth_rate_orientation(
    py: Python<'_>,
    params: PyRef<'_, PyParams>,
    q: f64,
    p0: f64,
    p_m: f64,
    sin_theta: f64,
    include_optomech: bool,
    include_molasses: bool,
    relaxation: &str,
    repump: &str,
) -> PyResult<Py<PyDict>> {
    let o = options(include_optomech, include_molasses, relaxation, repump)?;
    let g = lsa::growth_rate_orientation(&species(), &params.core(), q, p0, p_m, sin_theta, o).map_err(to_py)?;
    rate_dict(py, &g)
}

#[pyfunction]
#[pyo3(signature = (delta, reflectivity = 1.0))]
fn min_b0(delta: f64, reflectivity: f64) -> PyResult<f64> {
    lsa::min_b0(delta, reflectivity).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (params, sin_theta = 1.0, include_optomech = true))]
fn crossover_period(params: PyRef<'_, PyParams>, sin_theta: f64, include_optomech: bool) -> PyResult<f64> {
    let o = options(include_optomech, true, "diffusive", "literal")?;
    lsa::crossover_period(&species(), &params.core(), sin_theta, o, lsa::PERIOD_BRACKET).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (params, sin_theta = 1.0, include_optomech = true))]
fn crossover_molasses(params: PyRef<'_, PyParams>, sin_theta: f64, include_optomech: bool) -> PyResult<f64> {
    let o = options(include_optomech, true, "diffusive", "literal")?;
    lsa::crossover_molasses(&species(), &params.core(), sin_theta, o, lsa::MOLASSES_BRACKET).map_err(to_py)
}

/// Pump intensity [mW/cm²] for a saturation parameter.
#[pyfunction]
fn sat_to_intensity(s0: f64, delta: f64) -> f64 {
    physics::sat_to_intensity(s0, delta, &species())
}

#[pyfunction]
fn intensity_to_sat(intensity: f64, delta: f64) -> f64 {
    physics::intensity_to_sat(intensity, delta, &species())
}

/// Log-linear fit; returns (rate, intercept, rms residual).
#[pyfunction]
fn measure_growth_rate(times: Vec<f64>, amplitudes: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let fit = dynamics::measure_growth_rate(&times, &amplitudes).map_err(to_py)?;
    Ok((fit.rate, fit.intercept, fit.residual))
}

fn model(params: &PyParams, optomech: bool, relaxation: &str, repump: &str) -> PyResult<Model> {
    let o = options(optomech, true, relaxation, repump)?;
    Ok(Model {
        species: species(),
        params: params.core(),
        relaxation: o.relaxation,
        optomech,
        repump: o.repump,
    })
}

/// Spectral integrator for ρ and w on a periodic grid.
#[pyclass(name = "Simulation")]
struct PySimulation {
    inner: dynamics::Simulation,
}

#[pymethods]
impl PySimulation {
    #[new]
    #[pyo3(signature = (params, dims = 1, points = 256, periods = 4, optomech = true, relaxation = "diffusive", repump = "literal"))]
    fn new(
        params: PyRef<'_, PyParams>,
        dims: usize,
        points: usize,
        periods: usize,
        optomech: bool,
        relaxation: &str,
        repump: &str,
    ) -> PyResult<Self> {
        let m = model(&params, optomech, relaxation, repump)?;
        let grid = TransverseGrid::new(dims, points, params.lattice_period, periods).map_err(to_py)?;
        Ok(Self {
            inner: dynamics::Simulation::new(m, grid).map_err(to_py)?,
        })
    }

    fn default_dt(&self) -> f64 {
        self.inner.default_dt()
    }

    fn dt_bound(&self) -> f64 {
        self.inner.dt_bound()
    }

    /// Grid coordinates along x [m].
    fn x(&self) -> Vec<f64> {
        let g = self.inner.grid();
        (0..g.points_per_axis()).map(|i| g.x(i)).collect()
    }

    fn rhs(&self, rho: Vec<f64>, w: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        self.inner.rhs(&AtomicState { rho, w, time: 0.0 }).map_err(to_py)
    }

    /// Advance `steps` steps; returns (rho, w, time).
    #[pyo3(signature = (rho, w, dt, steps = 1, time = 0.0))]
    fn step(&self, rho: Vec<f64>, w: Vec<f64>, dt: f64, steps: usize, time: f64) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
        let mut s = AtomicState { rho, w, time };
        for _ in 0..steps {
            s = self.inner.step(&s, dt).map_err(to_py)?;
        }
        Ok((s.rho, s.w, s.time))
    }

    /// Pump rates (P₊, P₋) produced by the feedback loop.
    fn pump_rates(&self, rho_plus: Vec<f64>, rho_minus: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let p = self.inner.pump_rates(&rho_plus, &rho_minus).map_err(to_py)?;
        Ok((p.p_plus, p.p_minus))
    }
}

/// Seeded run; returns a dict with dt, diagnostics rows and the final state.
#[pyfunction]
#[pyo3(signature = (params, steps, perturbation = "orientation", amplitude = 1e-6, dt = None, seed = 0, diagnostics_every = 10, dims = 1, points = 256, periods = 4, optomech = true))]
#[allow(clippy::too_many_arguments)]
fn run_simulation(
    py: Python<'_>,
    params: PyRef<'_, PyParams>,
    steps: usize,
    perturbation: &str,
    amplitude: f64,
    dt: Option<f64>,
    seed: u64,
    diagnostics_every: usize,
    dims: usize,
    points: usize,
    periods: usize,
    optomech: bool,
) -> PyResult<Py<PyDict>> {
    let target = match perturbation {
        "density" => PerturbationTarget::Density,
        "orientation" => PerturbationTarget::Orientation,
        "noise" => PerturbationTarget::Noise,
        other => return Err(PyValueError::new_err(format!("unknown perturbation `{other}`"))),
    };
    let m = model(&params, optomech, "diffusive", "literal")?;
    let grid = TransverseGrid::new(dims, points, params.lattice_period, periods).map_err(to_py)?;
    let mut cfg = SimConfig::new(grid, steps, Perturbation { target, amplitude });
    cfg.dt = dt;
    cfg.seed = seed;
    cfg.diagnostics_every = diagnostics_every.max(1);
    let out = py.detach(|| dynamics::run(m, &cfg)).map_err(|e| match e {
        RunError::Setup(e) => to_py(e),
        RunError::Aborted(a) => PyRuntimeError::new_err(a.to_string()),
    })?;
    let rows = out
        .diagnostics
        .records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("step", r.step)?;
            d.set_item("time", r.time)?;
            d.set_item("amp_rho_q", r.amp_rho_q)?;
            d.set_item("amp_w_q", r.amp_w_q)?;
            d.set_item("min_rho_pm", r.min_rho_pm)?;
            d.set_item("mean_rho", r.mean_rho)?;
            d.set_item("max_w", r.max_w)?;
            Ok(d.unbind())
        })
        .collect::<PyResult<Vec<_>>>()?;
    let d = PyDict::new(py);
    d.set_item("dt", out.dt)?;
    d.set_item("diagnostics", rows)?;
    d.set_item("rho", out.final_state.rho)?;
    d.set_item("w", out.final_state.w)?;
    d.set_item("time", out.final_state.time)?;
    d.set_item("warnings", out.warnings)?;
    Ok(d.unbind())
}

#[pymodule]
#[pyo3(name = "magnetomech")]
fn magnetomech_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(derived, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_density, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_orientation, m)?)?;
    m.add_function(wrap_pyfunction!(growth_rate_density, m)?)?;
    m.add_function(wrap_pyfunction!(growth_rate_orientation, m)?)?;
    m.add_function(wrap_pyfunction!(min_b0, m)?)?;
    m.add_function(wrap_pyfunction!(crossover_period, m)?)?;
    m.add_function(wrap_pyfunction!(crossover_molasses, m)?)?;
    m.add_function(wrap_pyfunction!(sat_to_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(intensity_to_sat, m)?)?;
    m.add_function(wrap_pyfunction!(measure_growth_rate, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    Ok(())
}

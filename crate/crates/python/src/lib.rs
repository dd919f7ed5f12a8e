//! Python bindings for the chemokin kinetic chemotaxis laboratory.
//!
//! Fields cross the boundary as flat lists of floats in the same layout the
//! Rust side uses: space-major, velocity-minor for distributions.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use chemokin::chemo::Delta;
use chemokin::config::parse_config;
use chemokin::diagnostics::{self, BoundReport};
use chemokin::geometry::{SpatialGrid, VelocitySet};
use chemokin::io::{self, Snapshot};
use chemokin::kernels;
use chemokin::kinetic::{self, VelocityProfile};
use chemokin::macroscopic;
use chemokin::tumbling::{ResponseFunction, ResponseKind, SpeciesParams};
use chemokin::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Config { .. } | Error::InvalidParameter { .. } | Error::Cfl { .. } | Error::GridMismatch(_) => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn delta_from(d: u8) -> PyResult<Delta> {
    Delta::try_from(d).map_err(PyValueError::new_err)
}

fn profile_from(fraction: Option<f64>) -> PyResult<VelocityProfile> {
    let p = match fraction {
        None => VelocityProfile::Equilibrium,
        Some(fraction) => VelocityProfile::Quadratic { fraction },
    };
    p.validate().map_err(to_py)?;
    Ok(p)
}

fn bounds_dict<'py>(py: Python<'py>, report: &BoundReport) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    for c in &report.checks {
        let row = PyDict::new(py);
        row.set_item("value", c.value)?;
        row.set_item("limit", c.limit)?;
        row.set_item("pass", c.pass)?;
        out.set_item(&c.name, row)?;
    }
    Ok(out)
}

/// Response and base tumbling rate of one species.
#[pyclass(name = "Species", frozen, from_py_object)]
#[derive(Clone)]
struct PySpecies {
    inner: SpeciesParams,
}

#[pymethods]
impl PySpecies {
    /// `kind` is "tanh" or "clamped-linear"; `amp = 0` switches the response off.
    #[new]
    #[pyo3(signature = (psi, kind = "tanh", amp = 0.0, sigma = 1.0))]
    fn new(psi: f64, kind: &str, amp: f64, sigma: f64) -> PyResult<Self> {
        let kind = match kind {
            "tanh" => ResponseKind::Tanh,
            "clamped-linear" => ResponseKind::ClampedLinear,
            other => return Err(PyValueError::new_err(format!("unknown response kind {other:?}"))),
        };
        let theta = ResponseFunction::new(kind, amp, sigma).map_err(to_py)?;
        Ok(Self {
            inner: SpeciesParams::new(psi, theta).map_err(to_py)?,
        })
    }

    #[getter]
    fn psi(&self) -> f64 {
        self.inner.psi()
    }

    #[getter]
    fn amp(&self) -> f64 {
        self.inner.theta().amp()
    }

    /// `θ(z)`.
    fn theta(&self, z: f64) -> f64 {
        self.inner.theta().eval(z)
    }

    fn __repr__(&self) -> String {
        let t = self.inner.theta();
        format!("Species(psi={}, amp={}, sigma={})", self.inner.psi(), t.amp(), t.sigma())
    }
}

fn grid_and_velocities(extent: Vec<f64>, cells: Vec<usize>, vmax: f64, nodes_per_axis: usize) -> PyResult<(SpatialGrid, VelocitySet)> {
    let grid = SpatialGrid::new(extent.len(), &extent, &cells).map_err(to_py)?;
    let vs = VelocitySet::build(grid.dim(), vmax, nodes_per_axis).map_err(to_py)?;
    Ok((grid, vs))
}

#[pyclass(name = "KineticState", frozen, from_py_object)]
#[derive(Clone)]
struct PyKineticState {
    inner: kinetic::KineticState,
}

#[pymethods]
impl PyKineticState {
    #[getter]
    fn time(&self) -> f64 {
        self.inner.time
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }

    #[getter]
    fn f1(&self) -> Vec<f64> {
        self.inner.f[0].clone()
    }

    #[getter]
    fn f2(&self) -> Vec<f64> {
        self.inner.f[1].clone()
    }

    /// Chemoattractant concentration per cell.
    #[getter]
    fn s(&self) -> Vec<f64> {
        self.inner.chem.s.clone()
    }
}

/// The scaled two-species kinetic system on a periodic grid.
#[pyclass(name = "KineticModel", frozen)]
struct PyKineticModel {
    inner: kinetic::KineticSystem,
}

#[pymethods]
impl PyKineticModel {
    #[new]
    #[pyo3(signature = (extent, cells, species, eps, delta = 0, vmax = 1.0, nodes_per_axis = 16))]
    fn new(
        extent: Vec<f64>,
        cells: Vec<usize>,
        species: (PySpecies, PySpecies),
        eps: f64,
        delta: u8,
        vmax: f64,
        nodes_per_axis: usize,
    ) -> PyResult<Self> {
        let (grid, vs) = grid_and_velocities(extent, cells, vmax, nodes_per_axis)?;
        let sys = kinetic::KineticSystem::new(grid, vs, [species.0.inner, species.1.inner], delta_from(delta)?, eps).map_err(to_py)?;
        Ok(Self { inner: sys })
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps()
    }

    #[getter]
    fn velocity_nodes(&self) -> usize {
        self.inner.velocities().len()
    }

    #[getter]
    fn velocity_measure(&self) -> f64 {
        self.inner.velocities().measure()
    }

    /// Cell centres as `[x, y]` pairs (`y = 0` in 1D).
    fn centers(&self) -> Vec<[f64; 2]> {
        self.inner.grid().centers()
    }

    /// `f_i(x, v) = ρ_i(x) g(v)`; `fraction` selects a blend of `F` and a
    /// quadratic profile, `None` gives the local equilibrium `ρ_i F`.
    #[pyo3(signature = (rho1, rho2, fraction = None))]
    fn state_from_densities(&self, rho1: Vec<f64>, rho2: Vec<f64>, fraction: Option<f64>) -> PyResult<PyKineticState> {
        let n = self.inner.grid().num_cells();
        if rho1.len() != n || rho2.len() != n {
            return Err(PyValueError::new_err(format!("densities need {n} entries")));
        }
        let g = profile_from(fraction)?.values(self.inner.velocities());
        let f1 = self.inner.tensor_distribution(&rho1, &g);
        let f2 = self.inner.tensor_distribution(&rho2, &g);
        self.state(f1, f2)
    }

    /// State from explicit distributions.
    fn state(&self, f1: Vec<f64>, f2: Vec<f64>) -> PyResult<PyKineticState> {
        Ok(PyKineticState {
            inner: self.inner.initial_state(f1, f2).map_err(to_py)?,
        })
    }

    fn step(&self, py: Python<'_>, state: &PyKineticState, dt: f64) -> PyResult<PyKineticState> {
        let next = py.detach(|| self.inner.step(&state.inner, dt)).map_err(to_py)?;
        Ok(PyKineticState { inner: next })
    }

    /// Returns `{"rho": [ρ1, ρ2], "flux": [J1, J2], "r": [r1, r2]}`.
    fn moments<'py>(&self, py: Python<'py>, state: &PyKineticState) -> PyResult<Bound<'py, PyDict>> {
        let m = self.inner.moments(&state.inner);
        let out = PyDict::new(py);
        out.set_item("rho", m.rho.to_vec())?;
        out.set_item("flux", m.flux.to_vec())?;
        out.set_item("r", m.r.to_vec())?;
        Ok(out)
    }

    /// Runs to `t_end`; returns `(final_state, samples, bounds)` with samples
    /// as dicts and bounds keyed by check name.
    #[pyo3(signature = (state, dt, t_end, stride = 10))]
    fn run<'py>(
        &self,
        py: Python<'py>,
        state: &PyKineticState,
        dt: f64,
        t_end: f64,
        stride: usize,
    ) -> PyResult<(PyKineticState, Vec<Bound<'py, PyDict>>, Bound<'py, PyDict>)> {
        let traj = py.detach(|| self.inner.run(&state.inner, dt, t_end, stride)).map_err(to_py)?;
        let report = diagnostics::kinetic_bound_checks(&self.inner, &traj);
        let samples = traj
            .samples
            .iter()
            .map(|s| {
                let d = PyDict::new(py);
                d.set_item("time", s.time)?;
                d.set_item("mass", s.mass)?;
                d.set_item("linf", s.linf)?;
                d.set_item("l2", s.lq_sum2.map(f64::sqrt))?;
                d.set_item("r_l2_integral", s.r_l2_integral)?;
                d.set_item("min_f", s.min_f)?;
                Ok(d)
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok((PyKineticState { inner: traj.final_state }, samples, bounds_dict(py, &report)?))
    }

    /// Relative L² distance between the fluctuation and the first-order corrector.
    fn corrector_residual(&self, state: &PyKineticState, species: usize) -> PyResult<f64> {
        if species > 1 {
            return Err(PyValueError::new_err("species index must be 0 or 1"));
        }
        Ok(diagnostics::corrector_residual(&self.inner, &state.inner, species).value)
    }

    fn write_snapshot(&self, state: &PyKineticState, path: std::path::PathBuf) -> PyResult<()> {
        io::write_snapshot(&Snapshot::kinetic(&self.inner, &state.inner), &path).map_err(to_py)
    }
}

#[pyclass(name = "MacroState", frozen, from_py_object)]
#[derive(Clone)]
struct PyMacroState {
    inner: macroscopic::MacroState,
}

#[pymethods]
impl PyMacroState {
    #[getter]
    fn time(&self) -> f64 {
        self.inner.time
    }

    #[getter]
    fn rho1(&self) -> Vec<f64> {
        self.inner.rho[0].clone()
    }

    #[getter]
    fn rho2(&self) -> Vec<f64> {
        self.inner.rho[1].clone()
    }

    #[getter]
    fn s(&self) -> Vec<f64> {
        self.inner.chem.s.clone()
    }
}

/// The limiting drift-diffusion system.
#[pyclass(name = "MacroModel", frozen)]
struct PyMacroModel {
    inner: macroscopic::MacroSystem,
}

#[pymethods]
impl PyMacroModel {
    #[new]
    #[pyo3(signature = (extent, cells, species, delta = 0, vmax = 1.0, nodes_per_axis = 16))]
    fn new(extent: Vec<f64>, cells: Vec<usize>, species: (PySpecies, PySpecies), delta: u8, vmax: f64, nodes_per_axis: usize) -> PyResult<Self> {
        let (grid, vs) = grid_and_velocities(extent, cells, vmax, nodes_per_axis)?;
        let sys = macroscopic::MacroSystem::new(grid, vs, [species.0.inner, species.1.inner], delta_from(delta)?).map_err(to_py)?;
        Ok(Self { inner: sys })
    }

    /// Diagonal of the diffusion tensor of one species.
    fn diffusion(&self, species: usize) -> PyResult<Vec<f64>> {
        if species > 1 {
            return Err(PyValueError::new_err("species index must be 0 or 1"));
        }
        let d = self.inner.diffusion(species);
        Ok((0..d.nrows()).map(|a| d[(a, a)]).collect())
    }

    fn centers(&self) -> Vec<[f64; 2]> {
        self.inner.grid().centers()
    }

    fn state(&self, rho1: Vec<f64>, rho2: Vec<f64>) -> PyResult<PyMacroState> {
        Ok(PyMacroState {
            inner: self.inner.initial_state(rho1, rho2).map_err(to_py)?,
        })
    }

    fn step(&self, py: Python<'_>, state: &PyMacroState, dt: f64) -> PyResult<PyMacroState> {
        let next = py.detach(|| self.inner.step(&state.inner, dt)).map_err(to_py)?;
        Ok(PyMacroState { inner: next })
    }

    /// Runs to `t_end`; returns `(final_state, bounds)`.
    #[pyo3(signature = (state, dt, t_end, stride = 10))]
    fn run<'py>(&self, py: Python<'py>, state: &PyMacroState, dt: f64, t_end: f64, stride: usize) -> PyResult<(PyMacroState, Bound<'py, PyDict>)> {
        let traj = py.detach(|| self.inner.run(&state.inner, dt, t_end, stride)).map_err(to_py)?;
        let report = diagnostics::macro_bound_checks(&self.inner, &traj);
        Ok((PyMacroState { inner: traj.final_state }, bounds_dict(py, &report)?))
    }
}

/// `G(x)` of the free-space Bessel potential.
#[pyfunction]
fn eval_g(dim: usize, x: Vec<f64>) -> PyResult<f64> {
    kernels::eval_g(dim, &x).map_err(to_py)
}

/// `K(x, t)` of the damped heat kernel.
#[pyfunction]
fn eval_k(dim: usize, x: Vec<f64>, t: f64) -> PyResult<f64> {
    kernels::eval_k(dim, &x, t).map_err(to_py)
}

/// Rows of the kernel norm report as dicts.
#[pyfunction]
fn verify_norm_table<'py>(py: Python<'py>, dim: usize, p: f64, t: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    kernels::verify_norm_table(dim, p, t)
        .map_err(to_py)?
        .into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("kind", r.kind.to_string())?;
            d.set_item("dim", r.dim)?;
            d.set_item("p", r.p)?;
            d.set_item("t", r.t)?;
            d.set_item("computed", r.computed)?;
            d.set_item("reference", r.reference)?;
            d.set_item("pass", r.pass)?;
            Ok(d)
        })
        .collect()
}

#[pyfunction]
#[pyo3(signature = (field, q, measure = 1.0))]
fn lq_norm(field: Vec<f64>, q: f64, measure: f64) -> PyResult<f64> {
    diagnostics::lq_norm(&field, q, measure).map_err(to_py)
}

/// Validates a JSON configuration; raises `ValueError` with the offending
/// JSON pointer on failure.
#[pyfunction]
fn check_config(text: &str) -> PyResult<()> {
    parse_config(text).map(|_| ()).map_err(to_py)
}

/// Runs the ε-sweep described by a JSON configuration; returns
/// `(csv, summary_json)`.
#[pyfunction]
fn sweep(py: Python<'_>, config_text: &str) -> PyResult<(String, String)> {
    let cfg = parse_config(config_text).map_err(to_py)?;
    let (scenario, eps) = chemokin::cli::sweep_scenario(&cfg).map_err(to_py)?;
    let report = py.detach(|| diagnostics::eps_sweep(&scenario, &eps)).map_err(to_py)?;
    Ok((report.to_csv(), report.summary_json()))
}

/// Reads a snapshot; returns a dict with the header fields and payload.
#[pyfunction]
fn read_snapshot<'py>(py: Python<'py>, path: std::path::PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let s = io::read_snapshot(&path).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("dim", s.dim)?;
    d.set_item("cells", s.cells)?;
    d.set_item("velocity_nodes", s.velocity_nodes)?;
    d.set_item("extent", s.extent)?;
    d.set_item("time", s.time)?;
    d.set_item("eps", s.eps)?;
    d.set_item("payload", s.payload)?;
    Ok(d)
}

/// Runs the command-line interface with `args` (without the program name)
/// and returns its exit code.
#[pyfunction]
fn main(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("chemokin".to_string()).chain(args).collect();
    py.detach(|| chemokin::cli::run(argv))
}

#[pymodule]
fn chemokin_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpecies>()?;
    m.add_class::<PyKineticState>()?;
    m.add_class::<PyKineticModel>()?;
    m.add_class::<PyMacroState>()?;
    m.add_class::<PyMacroModel>()?;
    m.add_function(wrap_pyfunction!(eval_g, m)?)?;
    m.add_function(wrap_pyfunction!(eval_k, m)?)?;
    m.add_function(wrap_pyfunction!(verify_norm_table, m)?)?;
    m.add_function(wrap_pyfunction!(lq_norm, m)?)?;
    m.add_function(wrap_pyfunction!(check_config, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(read_snapshot, m)?)?;
    m.add_function(wrap_pyfunction!(main, m)?)?;
    Ok(())
}

//! Python bindings for the qpflow numerical laboratory.
//!
//! The module mirrors the Rust API at the granularity a notebook needs:
//! grids, fields, problems, the stationary solver, the parabolic flow, the
//! qualitative diagnostics, and the named experiment presets.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::sync::Arc;

use qpflow::diagnostics;
use qpflow::flow::{self, FlowConfig, Scheme};
use qpflow::grid::{self, Domain};
use qpflow::operators::Problem;
use qpflow::stationary;

fn err(e: qpflow::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(frozen, name = "Grid", skip_from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: Arc<qpflow::Grid>,
}

#[pymethods]
impl PyGrid {
    #[staticmethod]
    fn interval(x_lo: f64, x_hi: f64, resolution: usize) -> PyResult<Self> {
        let inner = grid::build_grid(Domain::Interval { x_lo, x_hi }, resolution).map_err(err)?;
        Ok(PyGrid { inner })
    }

    #[staticmethod]
    fn rectangle(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, resolution: usize) -> PyResult<Self> {
        let domain = Domain::Rectangle { x_lo, x_hi, y_lo, y_hi };
        let inner = grid::build_grid(domain, resolution).map_err(err)?;
        Ok(PyGrid { inner })
    }

    #[staticmethod]
    fn disk(radius: f64, resolution: usize) -> PyResult<Self> {
        let inner = grid::build_grid(Domain::Disk { radius }, resolution).map_err(err)?;
        Ok(PyGrid { inner })
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn interior_count(&self) -> usize {
        self.inner.interior_count()
    }

    #[getter]
    fn measure(&self) -> f64 {
        self.inner.measure()
    }

    fn coords(&self, idx: usize) -> PyResult<(f64, f64)> {
        if idx >= self.inner.node_count() {
            return Err(PyValueError::new_err(format!(
                "node index {idx} out of range ({} nodes)",
                self.inner.node_count()
            )));
        }
        Ok(self.inner.coords(idx))
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid({:?}, h={:.4}, {} interior nodes)",
            self.inner.domain,
            self.inner.h,
            self.inner.interior_count()
        )
    }
}

#[pyclass(name = "Field", skip_from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: qpflow::Field,
}

impl PyField {
    fn check_same_grid(&self, other: &PyField) -> PyResult<()> {
        if !Arc::ptr_eq(self.inner.grid(), other.inner.grid()) {
            return Err(PyValueError::new_err("fields live on different grids"));
        }
        Ok(())
    }
}

#[pymethods]
impl PyField {
    #[staticmethod]
    fn zeros(grid: &PyGrid) -> Self {
        PyField { inner: qpflow::Field::zeros(&grid.inner) }
    }

    /// Samples a Python callable (x, y) -> value at every interior node.
    #[staticmethod]
    fn from_callable(grid: &PyGrid, f: &Bound<'_, PyAny>) -> PyResult<Self> {
        let g = &grid.inner;
        let mut values = vec![0.0; g.node_count()];
        for &idx in g.interior_indices() {
            let (x, y) = g.coords(idx);
            values[idx] = f.call1((x, y))?.extract::<f64>()?;
        }
        Ok(PyField { inner: qpflow::Field::from_values(g, values).map_err(err)? })
    }

    /// Builds a field from one value per node (boundary entries are zeroed).
    #[staticmethod]
    fn from_values(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        Ok(PyField { inner: qpflow::Field::from_values(&grid.inner, values).map_err(err)? })
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid { inner: Arc::clone(self.inner.grid()) }
    }

    #[getter]
    fn sup(&self) -> f64 {
        self.inner.max_abs()
    }

    #[getter]
    fn min_value(&self) -> f64 {
        self.inner.min_value()
    }

    #[getter]
    fn max_value(&self) -> f64 {
        self.inner.max_value()
    }

    fn scale(&self, alpha: f64) -> Self {
        PyField { inner: self.inner.scale(alpha) }
    }

    fn sub(&self, other: &PyField) -> PyResult<Self> {
        self.check_same_grid(other)?;
        Ok(PyField { inner: self.inner.sub(&other.inner) })
    }

    fn axpy(&self, alpha: f64, other: &PyField) -> PyResult<Self> {
        self.check_same_grid(other)?;
        Ok(PyField { inner: self.inner.axpy(alpha, &other.inner) })
    }

    fn clip_min(&self, floor: f64) -> Self {
        PyField { inner: self.inner.clip_min(floor) }
    }

    /// Value at the node nearest to (x, y).
    fn sample_nearest(&self, x: f64, y: f64) -> f64 {
        let g = self.inner.grid();
        let mut best = (f64::INFINITY, 0usize);
        for idx in 0..g.node_count() {
            let (nx, ny) = g.coords(idx);
            let d = (nx - x).powi(2) + (ny - y).powi(2);
            if d < best.0 {
                best = (d, idx);
            }
        }
        self.inner.values()[best.1]
    }

    fn norm_w1p(&self, p: f64) -> f64 {
        grid::norm_w1p(&self.inner, p)
    }

    fn lq_norm(&self, q: f64) -> f64 {
        grid::lq_norm(self.inner.grid(), self.inner.values(), q)
    }

    fn integral(&self) -> f64 {
        grid::integrate(self.inner.grid(), self.inner.values())
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(frozen, name = "Problem")]
struct PyProblem {
    inner: Problem,
}

#[pymethods]
impl PyProblem {
    /// coefficient: "const" or "quadratic"; nonlinearity: "zero", "const:<c>",
    /// "power:<q>" or "critical". eps defaults to the grid-calibrated
    /// regularization.
    #[new]
    #[pyo3(signature = (grid, coefficient="const", nonlinearity="zero", p=2.0, eps=None))]
    fn new(
        grid: &PyGrid,
        coefficient: &str,
        nonlinearity: &str,
        p: f64,
        eps: Option<f64>,
    ) -> PyResult<Self> {
        let spec = qpflow::experiment::ModelSpec {
            a: coefficient.to_string(),
            f: nonlinearity.to_string(),
            p,
            eps,
        };
        let inner = spec.build_problem(&grid.inner).map_err(err)?;
        Ok(PyProblem { inner })
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }

    fn energy(&self, u: &PyField) -> f64 {
        self.inner.energy(&u.inner)
    }

    /// (gradient part, reaction part, total).
    fn energy_parts(&self, u: &PyField) -> (f64, f64, f64) {
        let e = self.inner.energy_parts(&u.inner);
        (e.gradient, e.reaction, e.total)
    }

    fn residual(&self, u: &PyField) -> PyField {
        PyField { inner: self.inner.residual(&u.inner) }
    }

    fn residual_l2(&self, u: &PyField) -> f64 {
        let r = self.inner.residual(&u.inner);
        grid::lq_norm(r.grid(), r.values(), 2.0)
    }

    /// d/dt E(u + t v) at t = 0.
    fn directional_derivative(&self, u: &PyField, v: &PyField) -> f64 {
        self.inner.directional_derivative(&u.inner, &v.inner).total
    }

    /// The duality pairing <R(u), v>.
    fn residual_pairing(&self, u: &PyField, v: &PyField) -> f64 {
        self.inner.residual_pairing(&u.inner, &v.inner)
    }
}

#[pyclass(frozen, name = "StationaryResult")]
struct PyStationaryResult {
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    residual_norm: f64,
    #[pyo3(get)]
    iterations: usize,
    z: qpflow::Field,
}

#[pymethods]
impl PyStationaryResult {
    #[getter]
    fn z(&self) -> PyField {
        PyField { inner: self.z.clone() }
    }
}

#[pyfunction]
#[pyo3(signature = (problem, guess, tol=1e-9))]
fn solve_stationary(problem: &PyProblem, guess: &PyField, tol: f64) -> PyResult<PyStationaryResult> {
    let sol = stationary::solve_stationary(&problem.inner, &guess.inner, tol).map_err(err)?;
    Ok(PyStationaryResult {
        converged: sol.converged,
        residual_norm: sol.residual_norm,
        iterations: sol.iterations,
        z: sol.z,
    })
}

#[pyfunction]
fn exact_p_torsion(grid: &PyGrid, p: f64) -> PyResult<PyField> {
    Ok(PyField { inner: stationary::exact_p_torsion(&grid.inner, p).map_err(err)? })
}

#[pyclass(frozen, name = "Trajectory")]
struct PyTrajectory {
    inner: flow::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn flag(&self) -> String {
        format!("{:?}", self.inner.flag)
    }

    #[getter]
    fn min_nodal(&self) -> f64 {
        self.inner.min_nodal
    }

    #[getter]
    fn max_undershoot(&self) -> f64 {
        self.inner.max_undershoot
    }

    #[getter]
    fn final_time(&self) -> f64 {
        self.inner.final_time()
    }

    fn final_field(&self) -> PyField {
        PyField { inner: self.inner.final_field().clone() }
    }

    fn times(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.t).collect()
    }

    fn energies(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.energy).collect()
    }

    fn dissipation_rates(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.ut_l2).collect()
    }

    /// (pass, max_violation, budget) for the per-step energy inequality.
    fn energy_inequality(&self) -> (bool, f64, f64) {
        let rep = flow::verify_energy_inequality(&self.inner);
        (rep.pass, rep.max_violation, rep.budget)
    }

    /// Omega-limit sample over windows [tau, tau+1]; returns
    /// (verdict, candidate field, W1p norm, residual L2).
    fn omega_limit(&self, windows: Vec<f64>) -> PyResult<(String, PyField, f64, f64)> {
        let om = flow::sample_omega_limit(&self.inner, &windows).map_err(err)?;
        Ok((
            format!("{:?}", om.verdict),
            PyField { inner: om.z },
            om.z_norm_w1p,
            om.z_residual_l2,
        ))
    }
}

#[pyfunction]
#[pyo3(signature = (
    problem, u0, dt0, t_end, scheme="implicit", snapshot_stride=1,
    newton_rtol=1e-10, newton_max_iter=40, blowup_ceiling=1e6, dt_min=None
))]
#[allow(clippy::too_many_arguments)]
fn run_flow(
    problem: &PyProblem,
    u0: &PyField,
    dt0: f64,
    t_end: f64,
    scheme: &str,
    snapshot_stride: usize,
    newton_rtol: f64,
    newton_max_iter: usize,
    blowup_ceiling: f64,
    dt_min: Option<f64>,
) -> PyResult<PyTrajectory> {
    let scheme = match scheme {
        "implicit" => Scheme::Implicit,
        "semi_implicit" => Scheme::SemiImplicit,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown scheme {other:?}; use \"implicit\" or \"semi_implicit\""
            )))
        }
    };
    let mut cfg = FlowConfig::new(dt0, t_end, scheme);
    cfg.snapshot_stride = snapshot_stride.max(1);
    cfg.newton_rtol = newton_rtol;
    cfg.newton_max_iter = newton_max_iter;
    cfg.blowup_ceiling = blowup_ceiling;
    if let Some(m) = dt_min {
        cfg.dt_min = m;
    }
    cfg.validate().map_err(err)?;
    let tr = flow::run_flow(&problem.inner, &u0.inner, &cfg).map_err(err)?;
    Ok(PyTrajectory { inner: tr })
}

/// (asymmetry_x1, radial_deviation or None, monotonicity_defect).
#[pyfunction]
fn symmetry_report(u: &PyField) -> PyResult<(f64, Option<f64>, f64)> {
    let rep = diagnostics::symmetry_report(&u.inner).map_err(err)?;
    Ok((rep.asymmetry_x1, rep.radial_deviation, rep.monotonicity_defect))
}

/// Largest reflection-ordering defect over the plane sweep.
#[pyfunction]
#[pyo3(signature = (u, lambda_count=9))]
fn moving_plane_defect(u: &PyField, lambda_count: usize) -> PyResult<f64> {
    Ok(diagnostics::moving_plane_sweep(&u.inner, lambda_count)
        .map_err(err)?
        .max_defect)
}

/// Area fractions of {|grad u| < delta} plus the inverse-gradient integral:
/// returns (fractions, inverse_gradient_integral, inverse_gradient_by_y).
#[pyfunction]
#[pyo3(signature = (u, p, deltas, r_exp=0.5, beta=0.5, gamma=0.0, y_samples=None))]
fn critical_set(
    u: &PyField,
    p: f64,
    deltas: Vec<f64>,
    r_exp: f64,
    beta: f64,
    gamma: f64,
    y_samples: Option<Vec<(f64, f64)>>,
) -> PyResult<(Vec<f64>, f64, Vec<f64>)> {
    let samples = y_samples.unwrap_or_else(|| vec![(0.0, 0.0)]);
    let rep = diagnostics::critical_set_report(&u.inner, p, &deltas, r_exp, beta, gamma, &samples)
        .map_err(err)?;
    Ok((rep.fractions, rep.inverse_gradient_integral, rep.inverse_gradient_by_y))
}

#[pyfunction]
#[pyo3(signature = (weight, p=2.0, trials=64, seed=7))]
fn weighted_poincare_constant(weight: &PyField, p: f64, trials: usize, seed: u64) -> PyResult<f64> {
    diagnostics::weighted_poincare_constant(&weight.inner, p, trials, seed).map_err(err)
}

#[pyfunction]
fn list_presets() -> Vec<(String, String)> {
    qpflow::experiment::PRESETS
        .iter()
        .map(|p| (p.name.to_string(), p.summary.to_string()))
        .collect()
}

#[pyfunction]
fn default_config_toml(name: &str) -> PyResult<String> {
    let cfg = qpflow::default_config(name).map_err(err)?;
    Ok(cfg.to_toml_string())
}

/// Runs a preset (or an explicit TOML config) and returns the manifest as a
/// JSON string. output_dir overrides the config's output directory.
#[pyfunction]
#[pyo3(signature = (name=None, config_toml=None, output_dir=None))]
fn run_preset(
    name: Option<&str>,
    config_toml: Option<&str>,
    output_dir: Option<&str>,
) -> PyResult<String> {
    let mut cfg = match (name, config_toml) {
        (Some(n), None) => qpflow::default_config(n).map_err(err)?,
        (None, Some(t)) => qpflow::ExperimentConfig::from_toml_str(t).map_err(err)?,
        _ => {
            return Err(PyValueError::new_err(
                "pass exactly one of name or config_toml",
            ))
        }
    };
    if let Some(dir) = output_dir {
        cfg.output = Some(dir.to_string());
    }
    let manifest = qpflow::run_preset(&cfg).map_err(err)?;
    serde_json::to_string_pretty(&manifest).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

#[pymodule]
fn qpflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyStationaryResult>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(solve_stationary, m)?)?;
    m.add_function(wrap_pyfunction!(exact_p_torsion, m)?)?;
    m.add_function(wrap_pyfunction!(run_flow, m)?)?;
    m.add_function(wrap_pyfunction!(symmetry_report, m)?)?;
    m.add_function(wrap_pyfunction!(moving_plane_defect, m)?)?;
    m.add_function(wrap_pyfunction!(critical_set, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_poincare_constant, m)?)?;
    m.add_function(wrap_pyfunction!(list_presets, m)?)?;
    m.add_function(wrap_pyfunction!(default_config_toml, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    Ok(())
}

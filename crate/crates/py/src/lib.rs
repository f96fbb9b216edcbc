//! Python bindings for the `askewsgd` crate.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use askewsgd::harness::{config::RunConfig, fig1, logistic};
use askewsgd::models::{DiffModel, Logistic};
use askewsgd::optimizer::{Method, Trainer};
use askewsgd::{quantizer, skew, Error, Levels};

fn to_py(e: Error) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Quantization levels for every coordinate.
#[pyclass(name = "QuantGrid", frozen)]
struct PyQuantGrid {
    inner: askewsgd::QuantGrid,
}

#[pymethods]
impl PyQuantGrid {
    /// Same sorted levels for all `dim` coordinates.
    #[new]
    fn new(levels: Vec<f64>, dim: usize) -> PyResult<Self> {
        let lv = Levels::new(levels).map_err(to_py)?;
        Ok(Self {
            inner: askewsgd::QuantGrid::uniform(lv, dim),
        })
    }

    #[staticmethod]
    fn binary(dim: usize) -> Self {
        Self {
            inner: askewsgd::QuantGrid::binary(dim),
        }
    }

    #[staticmethod]
    fn int_bits(bits: u32, dim: usize) -> PyResult<Self> {
        Ok(Self {
            inner: askewsgd::QuantGrid::int_bits(bits, dim).map_err(to_py)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn epsilon_bound(&self) -> f64 {
        self.inner.epsilon_bound()
    }

    fn levels(&self, i: usize) -> PyResult<Vec<f64>> {
        self.check(i)?;
        Ok(self.inner.levels(i).values().to_vec())
    }

    fn phi(&self, i: usize, w: f64) -> PyResult<f64> {
        self.check(i)?;
        Ok(self.inner.phi(i, w))
    }

    fn phi_prime(&self, i: usize, w: f64) -> PyResult<f64> {
        self.check(i)?;
        Ok(self.inner.phi_prime(i, w))
    }

    fn project(&self, w: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.check_dim(w.len()).map_err(to_py)?;
        Ok(quantizer::project_to_grid(&self.inner, &w))
    }

    fn __repr__(&self) -> String {
        format!(
            "QuantGrid(dim={}, epsilon_bound={})",
            self.inner.dim(),
            self.inner.epsilon_bound()
        )
    }
}

impl PyQuantGrid {
    fn check(&self, i: usize) -> PyResult<()> {
        if i >= self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "coordinate {i} out of range"
            )));
        }
        Ok(())
    }
}

/// Smoothing `epsilon`, skew strength `alpha` and clipping bound `m_clip`.
#[pyclass(name = "ConstraintParams", frozen)]
struct PyConstraintParams {
    inner: askewsgd::ConstraintParams,
}

#[pymethods]
impl PyConstraintParams {
    #[new]
    #[pyo3(signature = (epsilon, alpha, m_clip = 1.0))]
    fn new(epsilon: f64, alpha: f64, m_clip: f64) -> PyResult<Self> {
        let inner = askewsgd::ConstraintParams::new(epsilon, alpha).with_m_clip(m_clip);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn m_clip(&self) -> f64 {
        self.inner.m_clip
    }

    fn psi(&self, grid: &PyQuantGrid, i: usize, w: f64) -> PyResult<f64> {
        grid.check(i)?;
        Ok(self.inner.psi(&grid.inner, i, w))
    }

    fn __repr__(&self) -> String {
        format!(
            "ConstraintParams(epsilon={}, alpha={}, m_clip={})",
            self.inner.epsilon, self.inner.alpha, self.inner.m_clip
        )
    }
}

/// Result of `skew_direction`.
#[pyclass(name = "SkewStep", frozen, get_all)]
struct PySkewStep {
    v: Vec<f64>,
    pre_clip: Vec<f64>,
    active: Vec<usize>,
    lambdas: Vec<f64>,
    clipped: Vec<bool>,
    midpoint_hits: Vec<usize>,
}

fn check_pair(grid: &PyQuantGrid, u: &[f64], w: &[f64]) -> PyResult<()> {
    grid.inner.check_dim(w.len()).map_err(to_py)?;
    grid.inner.check_dim(u.len()).map_err(to_py)
}

#[pyfunction]
fn skew_direction(
    params: &PyConstraintParams,
    grid: &PyQuantGrid,
    u: Vec<f64>,
    w: Vec<f64>,
) -> PyResult<PySkewStep> {
    check_pair(grid, &u, &w)?;
    let s = skew::skew_direction(&params.inner, &grid.inner, &u, &w);
    Ok(PySkewStep {
        v: s.v,
        pre_clip: s.pre_clip,
        active: s.active,
        lambdas: s.lambdas,
        clipped: s.clipped,
        midpoint_hits: s.midpoint_hits,
    })
}

/// Reference projection; `None` marks coordinates with an empty constraint.
#[pyfunction]
fn qp_oracle(
    params: &PyConstraintParams,
    grid: &PyQuantGrid,
    u: Vec<f64>,
    w: Vec<f64>,
) -> PyResult<Vec<Option<f64>>> {
    check_pair(grid, &u, &w)?;
    Ok(skew::qp_oracle(&params.inner, &grid.inner, &u, &w)
        .into_iter()
        .map(|c| match c {
            skew::OracleCoord::Value(v) => Some(v),
            skew::OracleCoord::Infeasible => None,
        })
        .collect())
}

#[pyfunction]
fn feasibility_gap(params: &PyConstraintParams, grid: &PyQuantGrid, w: Vec<f64>) -> PyResult<f64> {
    grid.inner.check_dim(w.len()).map_err(to_py)?;
    Ok(quantizer::feasibility_gap(&params.inner, &grid.inner, &w))
}

#[pyfunction]
#[pyo3(signature = (params, grid, full_grad, w, boundary_tol = None))]
fn kkt_residual(
    params: &PyConstraintParams,
    grid: &PyQuantGrid,
    full_grad: Vec<f64>,
    w: Vec<f64>,
    boundary_tol: Option<f64>,
) -> PyResult<f64> {
    check_pair(grid, &full_grad, &w)?;
    let tol = boundary_tol.unwrap_or(params.inner.boundary_tol);
    Ok(skew::kkt_residual(
        &params.inner,
        &grid.inner,
        &full_grad,
        &w,
        tol,
    ))
}

/// `(features, labels, target)` with features as a list of rows.
#[pyfunction]
#[pyo3(signature = (n = 6000, d = 10, seed = 0))]
fn gen_logistic(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let (ds, target) = askewsgd::data::gen_logistic(n, d, seed);
    let rows = (0..ds.len()).map(|i| ds.row(i).to_vec()).collect();
    (rows, ds.labels().to_vec(), target)
}

/// Trains one method on seeded logistic data; returns the final latent
/// weights and the per-step training losses.
#[pyfunction]
#[pyo3(signature = (method = "askew", seed = 0, epochs = 25))]
fn train_logistic(method: &str, seed: u64, epochs: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let m: Method = method.parse().map_err(to_py)?;
    let mut cfg = RunConfig::logistic();
    cfg.train.epochs = epochs;
    let (data, _) = askewsgd::data::gen_logistic(cfg.data.n, cfg.data.dim, seed);
    let model = Logistic::new(cfg.data.dim);
    let grid = cfg.validate(model.dim()).map_err(to_py)?;
    let trainer =
        Trainer::new(&model, &data, None, &grid, cfg.train_config(m, seed)).map_err(to_py)?;
    let w0 = askewsgd::data::init_weights(cfg.data.dim, cfg.train.init_scale, seed);
    let out = trainer.run(w0).map_err(to_py)?;
    Ok((
        out.final_w,
        out.records.iter().map(|r| r.train_loss).collect(),
    ))
}

/// Summary of the logistic comparison as a JSON string.
#[pyfunction]
#[pyo3(signature = (seeds = 1, seed = 0))]
fn logistic_summary(seeds: usize, seed: u64) -> PyResult<String> {
    let cfg = RunConfig {
        seed,
        seeds,
        ..RunConfig::logistic()
    };
    let res = logistic::run(&cfg, None).map_err(to_py)?;
    serde_json::to_string(&res).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Summary of the velocity-field experiment as a JSON string.
#[pyfunction]
fn fig1_summary() -> PyResult<String> {
    let grid = askewsgd::QuantGrid::binary(2);
    let out = fig1::run(&RunConfig::default().fig1, &grid).map_err(to_py)?;
    serde_json::to_string(&out.summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn askewsgd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuantGrid>()?;
    m.add_class::<PyConstraintParams>()?;
    m.add_class::<PySkewStep>()?;
    m.add_function(wrap_pyfunction!(skew_direction, m)?)?;
    m.add_function(wrap_pyfunction!(qp_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(feasibility_gap, m)?)?;
    m.add_function(wrap_pyfunction!(kkt_residual, m)?)?;
    m.add_function(wrap_pyfunction!(gen_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(train_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(logistic_summary, m)?)?;
    m.add_function(wrap_pyfunction!(fig1_summary, m)?)?;
    Ok(())
}

//! Python bindings: `import mpbarrier`.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ::mpbarrier::complex::{CubicalComplex, TorusGrid};
use ::mpbarrier::cycles::{self, FlatMethod, WidthQuery};
use ::mpbarrier::fixtures;
use ::mpbarrier::maps::{self, Target};
use ::mpbarrier::mountainpass::{self, GLConfig, StringOptions};
use ::mpbarrier::paths::{self, PathOptions, SequenceOptions, SwapOrder};
use ::mpbarrier::{io, Error};

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn grid(n: usize, m: usize) -> PyResult<TorusGrid> {
    TorusGrid::unit(n, m).map_err(err)
}

fn path_options(samples_per_stage: usize, swap_order: &str) -> PyResult<PathOptions> {
    let swap_order = match swap_order {
        "base_axis" => SwapOrder::BaseAxis,
        "edge_index" => SwapOrder::EdgeIndex,
        other => return Err(PyValueError::new_err(format!("unknown swap order {other:?}"))),
    };
    Ok(PathOptions { samples_per_stage, swap_order })
}

/// A map from the vertices of a uniform torus grid to S^1, S^2 or R^k.
#[pyclass(name = "GridMap", module = "mpbarrier", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGridMap {
    inner: maps::GridMap,
}

#[pymethods]
impl PyGridMap {
    #[staticmethod]
    fn circle(n: usize, m: usize, angles: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: maps::GridMap::circle(grid(n, m)?, angles).map_err(err)? })
    }

    #[staticmethod]
    fn constant(n: usize, m: usize, angle: f64) -> PyResult<Self> {
        Ok(Self { inner: maps::GridMap::constant_circle(grid(n, m)?, angle) })
    }

    #[staticmethod]
    fn winding(m: usize, q: Vec<i64>) -> PyResult<Self> {
        Ok(Self { inner: fixtures::winding_map(grid(q.len(), m)?, &q).map_err(err)? })
    }

    #[staticmethod]
    fn vortex_pair(m: usize, a: [f64; 2], b: [f64; 2]) -> PyResult<Self> {
        Ok(Self { inner: fixtures::vortex_pair(grid(2, m)?, a, b).map_err(err)? })
    }

    #[staticmethod]
    fn random(n: usize, m: usize, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: maps::GridMap::random_circle(grid(n, m)?, seed) })
    }

    #[staticmethod]
    fn hedgehog(m: usize, center: [f64; 3]) -> PyResult<Self> {
        Ok(Self { inner: fixtures::hedgehog(grid(3, m)?, center).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: io::load_map(&path).map_err(err)? })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: io::read_map(text).map_err(err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_map(&path, &self.inner).map_err(err)
    }

    fn to_text(&self) -> PyResult<String> {
        io::write_map(&self.inner).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.grid().n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.grid().m()
    }

    #[getter]
    fn target(&self) -> String {
        match self.inner.target() {
            Target::Circle => "circle".into(),
            Target::Sphere => "sphere".into(),
            Target::Ambient(d) => format!("ambient{d}"),
        }
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn p_energy(&self, p: f64) -> PyResult<f64> {
        maps::p_energy(&self.inner, p).map_err(err)
    }

    /// p-energy of the map pulled back through the retraction onto the k-skeleton.
    #[pyo3(signature = (k, p, refine = 4))]
    fn retracted_energy(&self, k: usize, p: f64, refine: usize) -> PyResult<f64> {
        let r = maps::retract_to_skeleton(&self.inner, k, refine).map_err(err)?;
        maps::p_energy_masked(&r.map, &r.mask, p).map_err(err)
    }

    fn plaquette_windings(&self) -> PyResult<Vec<i64>> {
        ::mpbarrier::degrees::plaquette_windings(&self.inner).map_err(err)
    }

    fn winding_vector(&self) -> PyResult<Vec<i64>> {
        cycles::winding_vector(&self.inner).map_err(err)
    }

    fn jacobian(&self) -> PyResult<PyChain> {
        Ok(PyChain { inner: cycles::jacobian_cycle(&self.inner).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!("GridMap(n={}, m={}, target={})", self.n(), self.m(), self.target())
    }
}

/// An integer chain on a cubical torus complex.
#[pyclass(name = "Chain", module = "mpbarrier", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyChain {
    inner: cycles::Chain,
}

#[pymethods]
impl PyChain {
    #[new]
    fn new(n: usize, m: usize, dim: usize, terms: Vec<(usize, i64)>) -> PyResult<Self> {
        let cx = CubicalComplex::build(n, m, &vec![0.0; n]).map_err(err)?;
        Ok(Self { inner: cycles::Chain::from_terms(&cx, dim, terms).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: io::load_chain(&path).map_err(err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_chain(&path, &self.inner).map_err(err)
    }

    fn to_text(&self) -> String {
        io::write_chain(&self.inner)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn terms(&self) -> Vec<(usize, i64)> {
        self.inner.terms().collect()
    }

    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    fn is_cycle(&self) -> bool {
        self.inner.is_cycle()
    }

    fn homology_class(&self) -> PyResult<Vec<i64>> {
        cycles::homology_class(&self.inner).map_err(err)
    }

    /// Flat norm by min-cost flow (`"exact_flow"`) or enumeration (`"exhaustive"`).
    #[pyo3(signature = (method = "exact_flow"))]
    fn flat_norm(&self, method: &str) -> PyResult<f64> {
        let method = match method {
            "exact_flow" => FlatMethod::ExactFlow,
            "exhaustive" => FlatMethod::Exhaustive,
            other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
        };
        Ok(cycles::flat_norm(&self.inner, method).map_err(err)?.value)
    }

    fn __repr__(&self) -> String {
        format!("Chain(dim={}, terms={})", self.inner.dim(), self.inner.terms().count())
    }
}

/// Result of the GL string method.
#[pyclass(name = "StringResult", module = "mpbarrier", frozen, get_all)]
pub struct PyStringResult {
    gamma_hat: f64,
    interior_max: f64,
    energies: Vec<f64>,
    history: Vec<f64>,
    iterations: usize,
    saddle: usize,
    saddle_gradient_norm: f64,
}

/// Energies along the sampled Hang-Lin path and their supremum.
#[pyfunction]
#[pyo3(signature = (u, v, p, samples_per_stage = 4, swap_order = "base_axis"))]
fn hang_lin_profile(
    u: &PyGridMap,
    v: &PyGridMap,
    p: f64,
    samples_per_stage: usize,
    swap_order: &str,
) -> PyResult<(Vec<f64>, f64)> {
    let path = paths::hang_lin_path(&u.inner, &v.inner, path_options(samples_per_stage, swap_order)?).map_err(err)?;
    paths::profile_energy(&path, p).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (u, v, p, samples_per_stage = 4, swap_order = "base_axis"))]
fn hang_lin_barrier(u: &PyGridMap, v: &PyGridMap, p: f64, samples_per_stage: usize, swap_order: &str) -> PyResult<f64> {
    let opts = path_options(samples_per_stage, swap_order)?;
    Ok(paths::hang_lin_barrier(&u.inner, &v.inner, p, opts).map_err(err)?.gamma_hat)
}

/// Delta-fine sequence barrier; returns `(gamma_hat, samples, max_step)`.
#[pyfunction]
#[pyo3(signature = (u, v, p, delta, relax_iters = 0, refine = 4))]
fn sequence_barrier(
    u: &PyGridMap,
    v: &PyGridMap,
    p: f64,
    delta: f64,
    relax_iters: usize,
    refine: usize,
) -> PyResult<(f64, usize, f64)> {
    let opts = SequenceOptions { refine, ..SequenceOptions::default() };
    let b = paths::sequence_barrier(&u.inner, &v.inner, p, delta, relax_iters, opts).map_err(err)?;
    Ok((b.gamma_hat, b.samples, b.max_step))
}

/// Log-log fit `sup ~ C (k - p)^(-beta)`; returns `(C, beta)`.
#[pyfunction]
fn fit_scaling(ps: Vec<f64>, sups: Vec<f64>, k: usize) -> PyResult<(f64, f64)> {
    paths::fit_scaling(&ps, &sups, k).map_err(err)
}

#[pyfunction]
fn gl_energy(w: &PyGridMap, p: f64, epsilon: f64) -> PyResult<f64> {
    let cfg = GLConfig::new(p, epsilon).map_err(err)?;
    mountainpass::gl_energy(&w.inner, &cfg).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (u, v, p, epsilon, beads = 12, iters = 2000, tol = 1e-9))]
#[allow(clippy::too_many_arguments)]
fn string_method(
    py: Python<'_>,
    u: &PyGridMap,
    v: &PyGridMap,
    p: f64,
    epsilon: f64,
    beads: usize,
    iters: usize,
    tol: f64,
) -> PyResult<PyStringResult> {
    let cfg = GLConfig::new(p, epsilon).map_err(err)?;
    let opts = StringOptions { beads, iters, init: None, tol };
    let r = py
        .detach(|| mountainpass::string_method(&u.inner, &v.inner, &cfg, &opts))
        .map_err(err)?;
    Ok(PyStringResult {
        gamma_hat: r.gamma_hat,
        interior_max: r.interior_max,
        energies: r.energies,
        history: r.history,
        iterations: r.iterations,
        saddle: r.saddle,
        saddle_gradient_norm: r.saddle_gradient_norm,
    })
}

/// Min-max width of the class `xi` over balanced 0-chains on the m x m torus.
#[pyfunction]
fn minmax_width(m: usize, xi: Vec<i64>, delta: f64, mass_cap: f64) -> PyResult<f64> {
    let cx = CubicalComplex::build(2, m, &[0.0, 0.0]).map_err(err)?;
    Ok(cycles::minmax_width(&cx, &WidthQuery { xi, delta, mass_cap }).map_err(err)?.value)
}

#[pyfunction]
fn difference_class(u: &PyGridMap, v: &PyGridMap) -> PyResult<Vec<i64>> {
    cycles::difference_class(&u.inner, &v.inner).map_err(err)
}

#[pymodule]
#[pyo3(name = "mpbarrier")]
fn mpbarrier_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds every class and function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGridMap>()?;
    m.add_class::<PyChain>()?;
    m.add_class::<PyStringResult>()?;
    m.add_function(wrap_pyfunction!(hang_lin_profile, m)?)?;
    m.add_function(wrap_pyfunction!(hang_lin_barrier, m)?)?;
    m.add_function(wrap_pyfunction!(sequence_barrier, m)?)?;
    m.add_function(wrap_pyfunction!(fit_scaling, m)?)?;
    m.add_function(wrap_pyfunction!(gl_energy, m)?)?;
    m.add_function(wrap_pyfunction!(string_method, m)?)?;
    m.add_function(wrap_pyfunction!(minmax_width, m)?)?;
    m.add_function(wrap_pyfunction!(difference_class, m)?)?;
    Ok(())
}

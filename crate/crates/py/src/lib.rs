//! Python bindings: point sets, the constructors, and the exact verifier.

use gridlines::composer;
use gridlines::construct::{construct as build, ConstructOptions};
use gridlines::geometry::{self, Line};
use gridlines::oracle;
use gridlines::pipeline2d::{stage_diagnostics as diagnostics, PracticalConfig};
use gridlines::regularizer::{regularize as regular_subset, Regularized};
use gridlines::rng::rng_from_seed;
use gridlines::{io, Error, GridParams, GridPoint};
use num_rational::Ratio;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(gridlines_py, BudgetExhausted, PyException);

fn to_py(e: Error) -> PyErr {
    if e.is_budget() {
        BudgetExhausted::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn line_tuple(line: &Line, count: u32) -> (i64, i64, i64, u32) {
    (line.a, line.b, line.c, count)
}

/// A subset of `[n]^d`, 1-based.
#[pyclass(name = "PointSet", module = "gridlines_py", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyPointSet {
    inner: gridlines::PointSet,
}

#[pymethods]
impl PyPointSet {
    #[new]
    #[pyo3(signature = (n, points, d = 2))]
    fn new(n: u32, points: Vec<Vec<i32>>, d: usize) -> PyResult<Self> {
        let g = GridParams::new(n, d).map_err(to_py)?;
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(PyValueError::new_err(format!("point {p:?} does not have {d} coordinates")));
        }
        let inner = gridlines::PointSet::from_points(g, points.iter().map(|p| GridPoint::new(p))).map_err(to_py)?;
        if inner.len() != points.len() {
            return Err(PyValueError::new_err("duplicate points"));
        }
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.grid().n
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.grid().d
    }

    /// Points in lexicographic order.
    fn points(&self) -> Vec<Vec<i32>> {
        self.inner.iter().map(|p| p.coords().to_vec()).collect()
    }

    /// Points per coordinate value along `axis` (0 for rows).
    fn axis_counts(&self, axis: usize) -> PyResult<Vec<u32>> {
        if axis >= self.d() {
            return Err(PyValueError::new_err(format!("axis {axis} out of range")));
        }
        Ok(self.inner.axis_counts(axis))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, p: Vec<i32>) -> bool {
        p.len() == self.d() && self.inner.contains(&GridPoint::new(&p))
    }

    fn __repr__(&self) -> String {
        format!("PointSet(n={}, d={}, len={})", self.n(), self.d(), self.inner.len())
    }

    fn to_json(&self) -> String {
        io::to_json(&self.inner)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: io::from_json(text).map_err(to_py)? })
    }

    fn to_csv(&self) -> String {
        io::to_csv(&self.inner)
    }

    #[pyo3(signature = (overlay_lines = 0))]
    fn render_svg(&self, overlay_lines: usize) -> PyResult<String> {
        io::render_svg(&self.inner, overlay_lines).map_err(to_py)
    }
}

/// Exact line counts of a planar set against the bound `k`.
#[pyclass(name = "ViolationReport", module = "gridlines_py", frozen, get_all)]
pub struct PyViolationReport {
    k: u32,
    /// `(a, b, c, count)` of the heaviest line, or `None` for fewer than two points.
    max_line: Option<(i64, i64, i64, u32)>,
    /// `(a, b, c, count)` of every line over `k`.
    violations: Vec<(i64, i64, i64, u32)>,
    exact_ok: bool,
    relaxed_ok: bool,
}

#[pymethods]
impl PyViolationReport {
    fn __repr__(&self) -> String {
        format!("ViolationReport(k={}, exact_ok={}, violations={})", self.k, self.exact_ok, self.violations.len())
    }
}

#[pyfunction]
fn count_violations(set: &PyPointSet, k: u32) -> PyResult<PyViolationReport> {
    let r = oracle::count_violations(&set.inner, k).map_err(to_py)?;
    Ok(PyViolationReport {
        k,
        max_line: r.max_line.map(|(l, c)| line_tuple(&l, c)),
        violations: r.violations.iter().map(|v| line_tuple(&v.line, v.count)).collect(),
        exact_ok: r.exact_ok,
        relaxed_ok: r.relaxed_ok,
    })
}

/// Lines `ax + by = c` through `p` with at least `alpha · n` grid points.
#[pyfunction]
fn heavy_lines_through(p: (i32, i32), n: u32, alpha: (u64, u64)) -> PyResult<Vec<(i64, i64, i64, u32)>> {
    if alpha.1 == 0 {
        return Err(PyValueError::new_err("alpha denominator is zero"));
    }
    let g = GridParams::plane(n).map_err(to_py)?;
    let lines = geometry::heavy_lines_through(&GridPoint::xy(p.0, p.1), &g, Ratio::new(alpha.0, alpha.1)).map_err(to_py)?;
    Ok(lines.iter().map(|s| line_tuple(&s.line, s.count)).collect())
}

/// Exactly `k` points per row and column with at most `k` on any line.
#[pyfunction]
#[pyo3(signature = (n, k, seed = 0, retries = 20))]
fn construct(py: Python<'_>, n: u32, k: u32, seed: u64, retries: u32) -> PyResult<PyPointSet> {
    let g = GridParams::plane(n).map_err(to_py)?;
    let mut opts = ConstructOptions::new(k, seed);
    opts.cfg.retry_budget = retries;
    let c = py.detach(|| build(&g, &opts)).map_err(to_py)?;
    Ok(PyPointSet { inner: c.set })
}

/// Sixteen independently built blocks with quotas summing to `k` per row.
#[pyfunction]
#[pyo3(signature = (n, k, seed = 0, retries = 20))]
fn compose(py: Python<'_>, n: u32, k: u32, seed: u64, retries: u32) -> PyResult<PyPointSet> {
    let cfg = PracticalConfig { retry_budget: retries, ..PracticalConfig::desk(seed) };
    let c = py.detach(|| composer::compose(n, k, &cfg, &mut rng_from_seed(seed))).map_err(to_py)?;
    Ok(PyPointSet { inner: c.set })
}

/// A subset with exactly `k` per row and column, or `None` with the
/// violating row and column sets.
#[pyfunction]
fn regularize(set: &PyPointSet, k: u32) -> PyResult<(Option<PyPointSet>, Option<(Vec<u32>, Vec<u32>)>)> {
    Ok(match regular_subset(&set.inner, k).map_err(to_py)? {
        Regularized::Regular(inner) => (Some(PyPointSet { inner }), None),
        Regularized::Infeasible(c) => (None, Some((c.rows.into_iter().collect(), c.cols.into_iter().collect()))),
    })
}

/// Largest subset of `[n]^2` with at most `k` points on every line (`n ≤ 5`).
#[pyfunction]
#[pyo3(signature = (n, k, budget = 10_000_000))]
fn brute_force_max_set(n: u32, k: u32, budget: u64) -> PyResult<PyPointSet> {
    let g = GridParams::plane(n).map_err(to_py)?;
    Ok(PyPointSet { inner: oracle::brute_force_max_set(&g, k, budget).map_err(to_py)?.witness })
}

/// `(ln 4qΔ, theory_satisfied)` for one stage.
#[pyfunction]
fn stage_diagnostics(m0: f64, m: f64) -> PyResult<(f64, bool)> {
    let d = diagnostics(m0, m).map_err(to_py)?;
    Ok((d.ln_lll_product, d.theory_satisfied))
}

#[pymodule]
pub fn gridlines_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointSet>()?;
    m.add_class::<PyViolationReport>()?;
    m.add("BudgetExhausted", m.py().get_type::<BudgetExhausted>())?;
    m.add_function(wrap_pyfunction!(count_violations, m)?)?;
    m.add_function(wrap_pyfunction!(heavy_lines_through, m)?)?;
    m.add_function(wrap_pyfunction!(construct, m)?)?;
    m.add_function(wrap_pyfunction!(compose, m)?)?;
    m.add_function(wrap_pyfunction!(regularize, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_max_set, m)?)?;
    m.add_function(wrap_pyfunction!(stage_diagnostics, m)?)?;
    Ok(())
}

use pyo3::prelude::*;
use pyo3::types::PyDict;
use pyo3::wrap_pymodule;

#[test]
fn module_round_trip() {
    Python::initialize();
    Python::attach(|py| {
        let m = wrap_pymodule!(gridlines_py::gridlines_py)(py);
        let locals = PyDict::new(py);
        locals.set_item("gl", m).unwrap();
        py.run(
            c"
s = gl.construct(16, 4, seed=2)
assert len(s) == 64
assert gl.count_violations(s, 4).exact_ok
assert gl.PointSet.from_json(s.to_json()) == s
try:
    gl.construct(64, 16, seed=0, retries=0)
    raise AssertionError('zero retries accepted')
except ValueError:
    pass
",
            None,
            Some(&locals),
        )
        .unwrap();
    });
}

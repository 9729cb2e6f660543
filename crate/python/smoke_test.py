"""Smoke test for the gridlines_py extension.

Builds the extension with cargo when it is not importable, then exercises
construction, verification, regularization and serialization.
"""

import json
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load():
    try:
        import gridlines_py
        return gridlines_py
    except ImportError:
        pass
    subprocess.run(["cargo", "build", "--release", "-p", "gridlines-py"], cwd=ROOT, check=True)
    lib = ROOT / "target" / "release" / "libgridlines_py.so"
    dest = pathlib.Path(tempfile.mkdtemp()) / "gridlines_py.so"
    shutil.copy(lib, dest)
    sys.path.insert(0, str(dest.parent))
    import gridlines_py
    return gridlines_py


def main():
    gl = load()

    s = gl.construct(32, 8, seed=5)
    assert len(s) == 256 and s.n == 32 and s.d == 2
    assert s.axis_counts(0) == [8] * 32 and s.axis_counts(1) == [8] * 32
    report = gl.count_violations(s, 8)
    assert report.exact_ok and not report.violations, report

    back = gl.PointSet.from_json(s.to_json())
    assert back == s
    doc = json.loads(s.to_json())
    assert doc["points"] == sorted(doc["points"])
    assert s.to_csv().splitlines()[0] == "x1,x2"

    diag = gl.PointSet(4, [[i, i] for i in range(1, 5)])
    bad = gl.count_violations(diag, 3)
    assert not bad.exact_ok and bad.violations[0][3] == 4
    assert [2, 2] in diag and [1, 2] not in diag

    sub, cert = gl.regularize(diag, 2)
    assert sub is None and cert is not None
    full = gl.PointSet(4, [[x, y] for x in range(1, 5) for y in range(1, 5)])
    sub, cert = gl.regularize(full, 2)
    assert cert is None and len(sub) == 8

    assert len(gl.brute_force_max_set(3, 2)) == 6
    assert len(gl.heavy_lines_through((1, 1), 3, (1, 1))) == 3
    assert gl.stage_diagnostics(1e108, 1e36)[0] < 0
    assert len(gl.compose(40, 10, seed=1)) == 400
    assert "<svg" in s.render_svg(overlay_lines=2)

    try:
        gl.PointSet(3, [[1, 1], [1, 1]])
    except ValueError:
        pass
    else:
        raise AssertionError("duplicate points accepted")

    print("python smoke test ok")


if __name__ == "__main__":
    main()

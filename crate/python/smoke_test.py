"""Quick end-to-end check of the Python bindings.

    pip install --no-build-isolation -e .
    python python/smoke_test.py
"""

import pathlib

import bmsymp

ROOT = pathlib.Path(__file__).resolve().parent.parent


def sphere(m):
    chart = bmsymp.Chart(["h", "theta"], periodic=["theta"], defining="h", m=m)
    form = bmsymp.Form(chart, [("1", [f"dh/h^{m}", "dtheta"])])
    return chart, form, bmsymp.Action.rotation(chart, "theta")


def main():
    chart, w, a = sphere(2)
    assert w.is_closed()
    (mm,) = bmsymp.moment_map(w, a)
    assert mm["mu"] == "-h^-1", mm
    assert mm["c"] == "0, -1", mm

    alphas, beta, residual = bmsymp.laurent(w)
    assert str(alphas[1]) == "(1) dtheta" and beta.is_zero() and residual == 0.0

    rows = bmsymp.convergence(w, [0.2, 0.1, 0.05])
    for order in (0, 1):
        col = [dev for _, o, dev in rows if o == order]
        assert col == sorted(col, reverse=True), col

    _, w1, _ = sphere(1)
    assert any(p[0] == 0.0 for p in bmsymp.folds(w1, 0.1))

    model = bmsymp.CotangentModel(3, 1, ["1"], planes=[1])
    reduced = model.reduce([(1, "1/2")])
    assert str(reduced) == "(1) dx2 dy2"
    stages = bmsymp.CotangentModel(3, 2, ["0", "1"], planes=[1])
    assert stages.check_commutation(0.1, [(1, "1/2")]) < 1e-9

    s = bmsymp.QuasiSpace.exponentiate(w, a)
    torus_chart = bmsymp.Chart(["theta1", "theta2"], periodic=["theta1", "theta2"])
    torus = bmsymp.QuasiSpace.with_angles(
        bmsymp.Form(torus_chart, [("1", ["dtheta1", "dtheta2"])]),
        bmsymp.Action.rotation(torus_chart, "theta2"),
        ["theta1"],
    )
    fused = s.fuse(torus)
    assert fused.angles == ["-h^-1 + theta1"], fused.angles
    assert fused.reduce(0, "1/3").degree == 2

    assert str(bmsymp.ab_form(1, mark="b")) == "(-b^-1) da db"
    far = [row[1] for row in bmsymp.b2_limit([0.2, 0.1])]
    assert far == [0.0, 0.0]

    try:
        bmsymp.Form(chart, [("1", ["dz", "dh"])])
    except bmsymp.BmError as e:
        assert "z" in str(e)
    else:
        raise AssertionError("unknown coordinate accepted")

    passed, text = bmsymp.run_manifest(str(ROOT / "manifests" / "stages.toml"))
    assert passed, text

    h = bmsymp.moment_map(*_torus_b2())[0]["mu"]
    assert h == "-sin(theta1)^-1*cos(theta1)", h
    print("smoke test passed")


def _torus_b2():
    chart = bmsymp.Chart(["theta1", "theta2"], periodic=["theta2"], defining="theta1", m=2)
    form = bmsymp.Form(chart, [("sin(theta1)^-2", ["dtheta1", "dtheta2"])])
    return form, bmsymp.Action.rotation(chart, "theta2")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Smoke test for the qfi_lab Python extension.

Builds the cdylib if needed, loads it as the `qfi_lab` module, and exercises
the main types end to end: metric geometry, on-shell initialization, QFI
construction, conservation drift, and a full scenario report.
"""

import json
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    lib = None
    for profile in ("release", "debug"):
        candidate = ROOT / "target" / profile / "libqfi_lab.so"
        if candidate.exists():
            lib = candidate
            break
    if lib is None:
        subprocess.run(
            ["cargo", "build", "-p", "qfi-py", "--release"], cwd=ROOT, check=True
        )
        lib = ROOT / "target" / "release" / "libqfi_lab.so"

    stage = Path(tempfile.mkdtemp(prefix="qfi-lab-py-"))
    shutil.copy(lib, stage / "qfi_lab.so")
    sys.path.insert(0, str(stage))
    import qfi_lab

    return qfi_lab


def approx(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    qfi_lab = load_module()

    # Geometry: the constant-curvature member has R = -4/k everywhere and
    # Gamma^1_11 = -2/(x+y).
    m = qfi_lab.Metric.constant_curvature(2.0)
    approx(m.ricci_scalar([0.7, 0.9]), -2.0, 1e-10)
    gamma = m.christoffel([1.0, 1.0])
    approx(gamma[0][0][0], -1.0, 1e-12)

    # CKV certificate: the homothetic vector of E^2 has zero residual and
    # unit conformal factor.
    e2 = qfi_lab.Metric.e2()
    res, psis = e2.ckv_certificate("x", "y")
    assert res < 1e-12, res
    assert all(abs(p - 1.0) < 1e-12 for p in psis)

    # A perturbed candidate fails.
    res_bad, _ = e2.ckv_certificate("x", "1.01*y")
    assert res_bad > 1e-3, res_bad

    # Constrained system: the Newton-Cotes potential at zero energy.
    sys_ = qfi_lab.System.with_potential(e2, "k/r^2", 0.0, {"k": -1.0})
    q0, qd0 = sys_.initial_state([1.0, 0.0], [1.0, 1.0])
    assert sys_.on_shell(q0, qd0, 1e-12)
    approx(qd0[0], 1.0, 1e-12)

    # Hamiltonian QFI: certified, evaluates to E0 on shell, conserved.
    ham = qfi_lab.Qfi.hamiltonian(sys_)
    assert ham.max_condition_residual < 1e-9
    approx(ham.evaluate(0.0, q0, qd0), 0.0, 1e-12)
    assert ham.drift(q0, qd0, 2.0) < 1e-8

    # LFI from the homothetic vector: r rdot, conserved, and the flow
    # derivative factors through the constraint multiplier off shell.
    lfi = qfi_lab.Qfi.lfi_from_ckv(sys_, "hv")
    approx(lfi.evaluate(0.0, [1.0, 0.0], [1.0, 1.0]), 1.0, 1e-12)
    assert lfi.drift(q0, qd0, 2.0) < 1e-8
    lhs, rhs = lfi.flow_derivative(0.3, [1.2, 0.4], [0.5, -0.2])
    approx(lhs, rhs, 1e-10)

    # Trajectory integration: r(t)^2 = 2 t + 1 on the spiral orbit.
    traj = sys_.integrate(q0, qd0, 2.0)
    assert traj["max_energy_drift"] < 1e-8
    for t, q in zip(traj["t"], traj["q"]):
        approx(q[0] ** 2 + q[1] ** 2, 2.0 * t + 1.0, 1e-7)

    # Scenario runner returns the same report schema as the CLI.
    names = qfi_lab.scenario_names()
    assert "ermakov-spiral" in names and len(names) == 6
    report = qfi_lab.run_scenario("ermakov-spiral", k=-1.0, I2=1.0)
    assert report["name"] == "ermakov-spiral"
    assert all(c["pass"] for c in report["checks"]), json.dumps(report, indent=2)
    slope = next(
        c for c in report["checks"] if "logarithmic-spiral slope" in c["description"]
    )
    approx(slope["observed"], 1.0, 1e-5)

    # Geodesic system on the no-KV metric.
    nokv = qfi_lab.Metric.no_kv()
    gsys = qfi_lab.System.geodesic(nokv, -0.5)
    x0 = 2.2
    y0 = math.log(x0 * x0 - 2.0 * x0)
    xd0 = math.sqrt(0.25) / (x0**3 - x0**2)
    f0 = gsys.hamiltonian([x0, y0], [1.0, 0.0])  # not used; just exercises call
    del f0
    report = qfi_lab.run_scenario("no-kv")
    assert all(c["pass"] for c in report["checks"])
    del xd0, y0

    print("smoke test passed")


if __name__ == "__main__":
    main()

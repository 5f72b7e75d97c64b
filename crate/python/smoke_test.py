#!/usr/bin/env python3
"""Smoke test for the coord_py extension module.

Builds the cdylib if needed, loads it, and walks through the main
workflow: graph construction, gain verification, error matrices and their
contraction constants, a switching-schedule certificate, and a seeded
simulation judged against the coordination tolerance.
"""

import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def load_module():
    lib = ROOT / "target" / "debug" / "libcoord_py.so"
    if not lib.exists():
        subprocess.run(
            ["cargo", "build", "-p", "coord-py"], cwd=ROOT, check=True
        )
    stage = Path(tempfile.mkdtemp(prefix="coord_py_"))
    shutil.copy2(lib, stage / "coord_py.so")
    sys.path.insert(0, str(stage))
    import coord_py

    return coord_py


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def matrix_close(m, ref, tol):
    return all(
        close(m[i][j], ref[i][j], tol)
        for i in range(len(ref))
        for j in range(len(ref[0]))
    )


def main():
    cp = load_module()
    checks = []

    def check(name, ok):
        checks.append((name, ok))
        print(f"{'ok' if ok else 'FAIL':4s} {name}")

    # -- graphs -----------------------------------------------------------
    g = cp.Digraph(3)
    g.add_edge(0, 2)
    g.add_edge(2, 0)
    g.add_edge(0, 1)
    g.add_edge(2, 1)
    check("roots of the two-source graph", g.find_roots() == [0, 2])
    check("spanning tree detected", g.has_spanning_tree())
    lap = g.laplacian()
    check(
        "laplacian rows sum to zero",
        all(close(sum(row), 0.0, 1e-12) for row in lap),
    )

    # -- gains on an antagonistic pair of rooted agents -------------------
    cfg = cp.SystemConfig([-1.0, -1.0], [1.0, -2.5], 0.2, 3)
    verdict = cp.verify_gains(g, cfg, leaders=[0, 2])
    check("mixed-magnitude gains feasible", verdict.feasible)
    bad = cp.verify_gains(
        g, cp.SystemConfig([-1.0, -1.0], [1.5, 1.5], 0.2, 3), leaders=[0, 2]
    )
    check("sign-matched gains rejected", not bad.feasible)
    bound = cp.epsilon_bound(g, cfg, leaders=[0, 2])
    check("step-size ceiling", close(bound, 1.0, 1e-6))

    # -- seeded run reaches scaled agreement ------------------------------
    x0 = cp.random_state(7, 3)
    traj = cp.simulate([g], cfg, [0] * 2000, x0, leaders=[0, 2])
    check("run completes", len(traj) == 2001 and traj.truncated_at is None)
    cv = cp.check_coordination(traj, cfg)
    check("coordination achieved", cv.achieved)
    check(
        "common scaled value",
        cv.coordination_value is not None
        and close(abs(cv.coordination_value), 1.413047847, 1e-6),
    )

    # -- switching pair: error matrices, constants, certificate -----------
    sparse = cp.Digraph(4)
    sparse.add_edge(2, 3)
    rooted = cp.Digraph(4)
    for frm, to in [(1, 0), (0, 1), (0, 2), (3, 2), (2, 3)]:
        rooted.add_edge(frm, to)
    scfg = cp.SystemConfig([0.75, -0.85], [0.75, -0.8], 0.15, 4)
    leaders = [0, 1]

    a1 = cp.error_matrix(sparse, scfg, leaders=leaders)
    a2 = cp.error_matrix(rooted, scfg, leaders=leaders)
    check(
        "sparse-topology error matrix",
        matrix_close(a1, [[1, 0, 0], [0, 1, 0], [0, 0, 0.85]], 1e-3),
    )
    check(
        "rooted-topology error matrix",
        matrix_close(
            a2,
            [[0.8136, 0, 0], [-0.048, 0.85, 0.15], [0.15, 0.15, 0.7]],
            1e-3,
        ),
    )

    dim1, lam1, _ = cp.contraction_constants(a1)
    dim2, lam2, _ = cp.contraction_constants(a2)
    check(
        "sparse topology holds a two-dimensional persistent part",
        dim1 == 2 and close(lam1, 0.85, 1e-3),
    )
    check(
        "rooted topology contracts everything",
        dim2 == 0 and close(lam2, 0.9427, 1e-3),
    )

    # 214 whole pattern cycles: a schedule cut mid-dwell would (rightly)
    # fail the chatter audit
    sigma = ([1] * 5 + [0] * 9) * 214
    cert = cp.certify(
        [a1, a2],
        sigma,
        gamma=[1.01, 1.03],
        decay=[0.9975, 0.9975],
        class1=[0],
        class2=[1],
        min_dwell=[3, 5],
    )
    check(
        "schedule certified with uniform decay 0.9975",
        cert.certified and close(cert.decay, 0.9975, 1e-12),
    )
    check("every certificate condition holds", all(h for *_, h in cert.conditions))

    straj = cp.simulate(
        [sparse, rooted], scfg, sigma, cp.random_state(42, 4), leaders=leaders
    )
    scv = cp.check_coordination(straj, scfg)
    check(
        "switched run coordinates at the certified rate",
        scv.achieved
        and scv.coordination_value is not None
        and close(scv.coordination_value, -0.197216694, 1e-6),
    )

    failed = [name for name, ok in checks if not ok]
    print(f"\n{len(checks) - len(failed)}/{len(checks)} checks passed")
    if failed:
        sys.exit(1)
    print("smoke test passed")


if __name__ == "__main__":
    main()

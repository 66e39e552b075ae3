"""Smoke test for the Python extension.

Build and run from the repository root:

    cargo build -p localwick-py --release --features extension-module
    cp target/release/liblocalwick_py.so python/localwick.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import localwick as lw


def main():
    m = lw.Mollifier(0.05)
    c = m.c_eps(0.5)
    assert abs(c * 0.05 - lw.Mollifier(0.025).c_eps(0.5) * 0.025) < 1e-10 * c

    b = lw.sample_bm(1024, seed=3)
    assert len(b) == 1025 and b[0] == 0.0
    assert b == lw.sample_bm(1024, seed=3)
    lin = [0.7 * j / 1024 for j in range(1025)]
    assert abs(m.mollified_derivative(lin, 0.4) - 0.7) < 1e-12

    occ = lw.local_time(b, 0.0)
    tan = lw.local_time(b, 0.0, method="tanaka")
    assert all(x <= y for x, y in zip(occ, occ[1:]))
    assert all(x <= y for x, y in zip(tan, tan[1:]))

    h = lw.TestFunction.bump(0.3, 0.7)
    k = lw.Direction.constant(1.0)
    lhs, rhs = lw.ibp_lhs(h, k, 0.1), lw.ibp_rhs(h, k, 0.1)
    assert abs(lhs - rhs) < 1e-6, (lhs, rhs)
    assert lw.laplace_rhs(h, lw.Direction.zero(), 0.2) == lw.mean_g(h, 0.2)
    e1 = lw.Direction.eigen(1)
    assert abs(e1.qk_norm() - 4 / math.pi**2) < 1e-10
    assert abs(lw.quadratic_rhs(e1) - math.exp(e1.qk_norm() / 2) * e1.qk_norm()) < 1e-8

    g = lw.g_eps_a(b, h, 0.0, lw.Mollifier(0.02))
    assert math.isfinite(g)

    rep = json.loads(lw.run_experiment("ibp", ["M=200", "n=1024", 'k_kind="constant"']))
    assert rep["checks"][0]["pass"]
    assert any(c["name"].startswith("reflected") and c["value"] == 0.0 for c in rep["checks"])

    try:
        lw.Mollifier(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative width accepted")

    print("python smoke test ok: ibp lhs %.8f rhs %.8f, G %.6f" % (lhs, rhs, g))


if __name__ == "__main__":
    main()

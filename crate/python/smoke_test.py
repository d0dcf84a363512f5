"""Smoke test for the mpbarrier Python extension.

Build first: pip install --no-build-isolation -e crates/py
"""

import math
import os
import tempfile

import mpbarrier


def main():
    u = mpbarrier.GridMap.constant(2, 16, 0.0)
    v = mpbarrier.GridMap.winding(16, [1, 0])
    assert (v.n, v.m, v.target) == (2, 16, "circle")
    assert u.p_energy(1.5) == 0.0
    assert v.winding_vector() == [1, 0]
    assert mpbarrier.difference_class(u, v) == [0, 1]

    pair = mpbarrier.GridMap.vortex_pair(32, [0.27, 0.52], [0.73, 0.48])
    t = pair.jacobian()
    assert t.is_cycle() and len(t.terms) == 2
    assert sorted(c for _, c in t.terms) == [-1, 1]

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "pair.gmap")
        pair.save(path)
        assert mpbarrier.GridMap.load(path).values == pair.values
        cpath = os.path.join(d, "pair.chain")
        t.save(cpath)
        assert mpbarrier.Chain.load(cpath).terms == t.terms

    ps = [1.9, 1.95, 1.975, 1.99]
    sups = [mpbarrier.hang_lin_barrier(u, v, p) for p in ps]
    _, beta = mpbarrier.fit_scaling(ps, sups, 2)
    assert 0.8 <= beta <= 1.2, beta

    r = mpbarrier.string_method(u, v, 1.9, 0.2, beads=8, iters=100)
    assert r.gamma_hat <= sups[0] * 1.05
    assert math.isfinite(r.saddle_gradient_norm)

    try:
        mpbarrier.GridMap.winding(2, [1, 0])
    except ValueError:
        pass
    else:
        raise AssertionError("invalid grid accepted")

    print("smoke test ok: beta = %.3f, gamma_GL = %.3f" % (beta, r.gamma_hat))


if __name__ == "__main__":
    main()

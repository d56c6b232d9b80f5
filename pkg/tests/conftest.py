import math

import numpy as np
import pytest

from resospec.lattice import BoxDomain


@pytest.fixture
def unit_box():
    return BoxDomain((math.pi, math.pi))


@pytest.fixture
def coarse_box():
    return BoxDomain((math.pi / 2, math.pi / 2))


def gauss_grid(box, n=40):
    """Tensor Gauss-Legendre nodes and weights on the box."""
    x, w = np.polynomial.legendre.leggauss(n)
    axes = [(0.5 * a * (x + 1), 0.5 * a * w) for a in box.a]
    pts = np.stack(np.meshgrid(*[p for p, _ in axes], indexing="ij"), axis=-1).reshape(-1, box.d)
    wts = np.prod(np.stack(np.meshgrid(*[q for _, q in axes], indexing="ij"), axis=-1), axis=-1).ravel()
    return pts, wts


@pytest.fixture(scope="session")
def generic_run():
    """The generic slope sweep, run once per session with its wall time."""
    import time

    from resospec.corpus import generic_config
    from resospec.verify import run

    cfg = generic_config()
    t0 = time.perf_counter()
    result = run(cfg, jobs=1)
    return cfg, result, time.perf_counter() - t0

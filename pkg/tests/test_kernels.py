import os
import subprocess
import sys

import numpy as np
import pytest

from diodeq import _kernels
from diodeq._kernels import compiled_kernels, python_kernels

needs_compiled = pytest.mark.skipif(compiled_kernels is None, reason="compiled kernels not built")


@needs_compiled
@pytest.mark.parametrize("p", [1.0, 2.0, 4.0])
def test_knn_search_backends_agree(rng, p):
    train = rng.normal(size=(80, 3))
    query = rng.normal(size=(15, 3))
    ic, dc = compiled_kernels.knn_search(train, query, 5, p)
    ip, dp = python_kernels.knn_search(train, query, 5, p)
    np.testing.assert_array_equal(ic, ip)
    np.testing.assert_allclose(dc, dp, rtol=1e-12)


@needs_compiled
def test_best_split_backends_agree(rng):
    X = np.round(rng.uniform(size=(50, 2)), 2)
    y = rng.normal(size=50)
    order = np.argsort(X, axis=0, kind="stable")
    for leaf in (1, 5):
        fc, tc, gc = compiled_kernels.best_split(X, y, order, leaf)
        fp, tp, gp = python_kernels.best_split(X, y, order, leaf)
        assert (fc, tc) == (fp, tp) and gc == pytest.approx(gp, rel=1e-12)


def test_env_var_selects_fallback():
    code = "from diodeq import _kernels; print(_kernels.BACKEND)"
    env = {**os.environ, "DIODEQ_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_active_backend_consistent():
    assert _kernels.BACKEND == ("cython" if compiled_kernels is not None else "python")

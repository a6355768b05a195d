"""The numba and pure-numpy builds of the hot kernels must agree.

The backend is fixed at import time, so each side runs in a fresh interpreter.
"""
import json
import os
import subprocess
import sys

import numpy as np

SCRIPT = r"""
import json
import numpy as np
from magdirac import backend, kernels, specfun
from magdirac._segments import polyline_crossings
rng = np.random.default_rng(5)
x = rng.uniform(-30, 30, 64)
p = kernels.ModelParams(4.0, 0.05, 1.0, 0.02)
X = rng.uniform(-0.4, 0.4, (24, 2))
Y = rng.uniform(-0.4, 0.4, (24, 2))
k = kernels.model_kernel_pairs(p, X, Y)
t = np.linspace(0, 40, 4000)
P = np.column_stack([np.cos(t) + 0.01 * t, np.sin(t)])
i, j, s, u = polyline_crossings(P)
print(json.dumps({
    "backend": backend(),
    "hermite": specfun.hermite_table(30, x).tolist(),
    "laguerre": specfun.laguerre_fn_rows(20, np.abs(x)).tolist(),
    "j1": specfun.bessel_j1_array(np.abs(x) + 0.1).tolist(),
    "kre": k.real.tolist(), "kim": k.imag.tolist(),
    "cross": [i.tolist(), j.tolist(), s.tolist(), u.tolist()],
}))
"""


def _run(flag):
    env = dict(os.environ, MAGDIRAC_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True,
                         check=True)
    return json.loads(out.stdout)


def test_numba_and_numpy_backends_agree():
    a, b = _run("1"), _run("0")
    assert a["backend"] == "numba" and b["backend"] == "numpy"
    for key in ("hermite", "laguerre", "j1", "kre", "kim"):
        np.testing.assert_allclose(a[key], b[key], rtol=1e-12, atol=1e-14)
    for u, v in zip(a["cross"][:2], b["cross"][:2]):
        assert u == v
    for u, v in zip(a["cross"][2:], b["cross"][2:]):
        np.testing.assert_allclose(u, v, rtol=1e-12, atol=1e-14)
    assert len(a["cross"][0]) > 10

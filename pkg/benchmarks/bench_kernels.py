"""Compare the numba and pure-numpy builds of the hot kernels.

Each backend runs in its own interpreter because the switch is read at import.
Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from magdirac import backend, kernels, specfun
from magdirac._segments import polyline_crossings

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
x = rng.uniform(-20, 20, 2000)
p = kernels.ModelParams(8.0, 0.02, 1.0)
X = rng.uniform(-0.3, 0.3, (400, 2))
Y = rng.uniform(-0.3, 0.3, (400, 2))
t = np.linspace(0, 400, 40000)
P = np.column_stack([np.cos(t) + 0.002 * t, np.sin(t)])
cases = {
    "hermite_table n=200": lambda: specfun.hermite_table(200, x),
    "bessel_j1 2000 pts": lambda: specfun.bessel_j1_array(np.abs(x) + 0.1),
    "model_kernel_pairs 400": lambda: kernels.model_kernel_pairs(p, X, Y),
    "polyline_crossings 40k": lambda: polyline_crossings(P),
}
out = {"backend": backend()}
for name, fn in cases.items():
    t0 = time.perf_counter(); fn(); first = time.perf_counter() - t0
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter(); fn(); times.append(time.perf_counter() - t0)
    out[name] = {"first": first, "best": min(times)}
print(json.dumps(out))
"""


def run(flag, repeat):
    env = dict(os.environ, MAGDIRAC_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", CHILD, str(repeat)], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    fast, slow = run("1", a.repeat), run("0", a.repeat)
    print(f"{'case':<26}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'numba 1st [s]':>15}")
    for name in fast:
        if name == "backend":
            continue
        f, s = fast[name]["best"], slow[name]["best"]
        print(f"{name:<26}{f:>12.4f}{s:>12.4f}{s / f:>10.1f}{fast[name]['first']:>15.3f}")


if __name__ == "__main__":
    main()

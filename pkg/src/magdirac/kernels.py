"""Spectral-projector kernels of the constant-field model operator.

The model operator is ``1/2 ((hD_2)^2 + (hD_1 - mu x_2)^2 - W - 2 v x_2)`` on
the plane. Fourier transforming in ``x_1`` turns it into a family of shifted
oscillators; writing the ``xi_1`` integral with the dimensionless variable
``u = sqrt(mu/h) zeta`` gives, for ``s = sqrt(mu/h)``,
``D = s (x_2 - y_2) / 2`` and ``K = s (x_1 - y_1)``,

    e(x, y) = mu / (2 pi h) * G(x, y)
              * sum_n  int_{level n filled}  U_n(D - u) U_n(-D - u) exp(i K u) du

with ``U_n`` the orthonormal Hermite functions and ``G`` the gauge factor
``exp(i mu/h (x_2/2 + y_2/2 - v/mu^2)(x_1 - y_1))``. Level ``n`` is filled
where ``(2n+1) mu h <= W_eff + 2 v u / s`` with
``W_eff = W + v (x_2 + y_2) - v^2 / mu^2``. For ``v = 0`` the condition does not
depend on ``u`` and each term has the Laguerre closed form used as an
independent oracle below.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import landau
from ._accel import jit
from .errors import AccuracyError, InvalidInputError, TruncationError
from .specfun import j1_array, laguerre_fn_rows, legendre_nodes

_LADDER = (16, 24, 32, 48, 64, 96, 128, 192, 256, 384, 512, 768, 1024, 1536, 2048, 3072, 4096)


def _ladder_arrays():
    nodes, weights, start = [], [], [0]
    for q in _LADDER:
        x, w = legendre_nodes(q)
        nodes.append(x)
        weights.append(w)
        start.append(start[-1] + q)
    return (np.concatenate(nodes), np.concatenate(weights),
            np.array(start, dtype=np.int64), np.array(_LADDER, dtype=np.int64))


_GL = _ladder_arrays()


# ---------------------------------------------------------------------------
# numerical core


@jit
def _count_levels(energy, gap):
    if energy < gap:
        return 0
    n = int(math.floor((energy / gap - 1.0) / 2.0)) + 1
    while n > 0 and (2 * n - 1) * gap > energy:
        n -= 1
    while (2 * n + 1) * gap <= energy:
        n += 1
    return n


@jit
def _pair_product_sum(n_lo, n_hi, a, b):
    """sum_{n_lo <= n < n_hi} U_n(a) U_n(b), with the Gaussian kept in log form."""
    logs = -0.5 * (a * a + b * b)
    pa, ca = 0.0, 0.7511255444649425
    pb, cb = 0.0, 0.7511255444649425
    acc = 0.0
    for k in range(n_hi):
        if k >= n_lo:
            acc += ca * cb
        if k + 1 == n_hi:
            break
        r1 = math.sqrt(2.0 / (k + 1.0))
        r0 = math.sqrt(k / (k + 1.0))
        na = r1 * a * ca - r0 * pa
        nb = r1 * b * cb - r0 * pb
        pa, ca = ca, na
        pb, cb = cb, nb
        if abs(ca) > 1.8446744073709552e19:
            ca *= 5.421010862427522e-20
            pa *= 5.421010862427522e-20
            acc *= 5.421010862427522e-20
            logs += 44.3614195558365
        if abs(cb) > 1.8446744073709552e19:
            cb *= 5.421010862427522e-20
            pb *= 5.421010862427522e-20
            acc *= 5.421010862427522e-20
            logs += 44.3614195558365
    if acc == 0.0:
        return 0.0
    return math.copysign(math.exp(logs + math.log(abs(acc))), acc)


@jit
def _segment_at(q_idx, lo, hi, n_lo, n_hi, D, K, even, gl_x, gl_w, gl_start):
    s0 = gl_start[q_idx]
    s1 = gl_start[q_idx + 1]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    re = 0.0
    im = 0.0
    for j in range(s0, s1):
        if even and gl_x[j] < 0.0:
            continue
        u = mid + half * gl_x[j]
        f = _pair_product_sum(n_lo, n_hi, D - u, -D - u) * gl_w[j]
        re += f * math.cos(K * u)
        if not even:
            im += f * math.sin(K * u)
    if even:
        # symmetric window and an even level-sum: twice the right half, no sine part
        return 2.0 * re * half, 0.0
    return re * half, im * half


@jit
def _segment(lo, hi, n_lo, n_hi, D, K, even, gl_x, gl_w, gl_start, gl_orders, rtol):
    """Integral of the level-sum over [lo, hi]; status 2 when not converged.

    The starting order comes from the oscillation bandwidth; it is accepted
    when the next lower rule agrees, otherwise the order keeps climbing.
    """
    length = hi - lo
    band = 2.0 * math.sqrt(2.0 * n_hi + 1.0) + abs(K)
    want = 32.0 + 0.75 * length * band
    n_rules = gl_orders.shape[0]
    q_idx = 1
    while q_idx < n_rules - 1 and gl_orders[q_idx] < want:
        q_idx += 1
    re0, im0 = _segment_at(q_idx - 1, lo, hi, n_lo, n_hi, D, K, even, gl_x, gl_w, gl_start)
    while True:
        re1, im1 = _segment_at(q_idx, lo, hi, n_lo, n_hi, D, K, even, gl_x, gl_w, gl_start)
        diff = math.hypot(re1 - re0, im1 - im0)
        scale = max(math.hypot(re1, im1), 1.0)
        if diff <= rtol * scale:
            return re1, im1, 0
        if q_idx + 1 >= n_rules:
            return re1, im1, 2
        re0, im0 = re1, im1
        q_idx += 1


@jit
def _pair_kernel(mu, h, W, v, x1, x2, y1, y2, n_keep, gl_x, gl_w, gl_start, gl_orders, rtol):
    """(re, im, status, levels_used); status 1 truncation, 2 accuracy."""
    s = math.sqrt(mu / h)
    D = 0.5 * s * (x2 - y2)
    K = s * (x1 - y1)
    aD = abs(D)
    gap = mu * h
    weff = W + v * (x2 + y2) - v * v / (mu * mu)
    re = 0.0
    im = 0.0
    status = 0
    used = 0
    if v == 0.0:
        n_act = _count_levels(weff, gap)
        if n_keep >= 0 and n_act > n_keep:
            return 0.0, 0.0, 1, n_act
        used = n_act
        half = math.sqrt(2.0 * n_act - 1.0) + 8.0 - aD if n_act > 0 else 0.0
        # each level term has modulus exp(-t/2)|L_n(t)|, t = (4D^2 + K^2)/2, and
        # |L_n(t)| <= 2^n (n+1) t^n / n! once t >= n; skip pairs below exp(-40)
        t = 0.5 * (4.0 * D * D + K * K)
        if n_act > 0 and t > 4.0 * n_act + 2.0:
            n_top = n_act - 1.0
            env = (-0.5 * t + n_top * (math.log(t) + 0.6931471805599453)
                   - math.lgamma(n_top + 1.0) + 2.0 * math.log(n_act))
            if env < -40.0:
                half = 0.0
        if half > 0.0:
            re, im, status = _segment(-half, half, 0, n_act, D, K, True, gl_x, gl_w, gl_start,
                                      gl_orders, rtol)
    else:
        av = abs(v)
        step = s * gap / av
        n = 0
        while True:
            c = s * ((2.0 * n + 1.0) * gap - weff) / (2.0 * av)
            w = math.sqrt(2.0 * n + 1.0) + 8.0 - aD
            if v > 0.0:
                lo = max(-w, c)
                hi = w
            else:
                lo = -w
                hi = min(w, -c)
            active = w > 0.0 and hi > lo
            if active:
                if n_keep >= 0 and n >= n_keep:
                    return re, im, 1, n + 1
                r, i, st = _segment(lo, hi, n, n + 1, D, K, False, gl_x, gl_w, gl_start,
                                    gl_orders, rtol)
                re += r
                im += i
                if st != 0:
                    status = st
                used = n + 1
            elif c >= w and step * math.sqrt(2.0 * n + 1.0) >= 1.0:
                # threshold now outruns the window for good
                break
            n += 1
            if n > 2048:
                return re, im, 1, n
    pref = mu / (2.0 * math.pi * h)
    ph = (mu / h) * (0.5 * (x2 + y2) - v / (mu * mu)) * (x1 - y1)
    cp = math.cos(ph)
    sp = math.sin(ph)
    return pref * (re * cp - im * sp), pref * (re * sp + im * cp), status, used


@jit
def _pairs_kernel(mu, h, W, v, X, Y, n_keep, gl_x, gl_w, gl_start, gl_orders, rtol):
    m = X.shape[0]
    out = np.empty(m, dtype=np.complex128)
    status = np.zeros(m, dtype=np.int64)
    used = np.zeros(m, dtype=np.int64)
    for i in range(m):
        re, im, st, nu = _pair_kernel(mu, h, W, v, X[i, 0], X[i, 1], Y[i, 0], Y[i, 1], n_keep,
                                      gl_x, gl_w, gl_start, gl_orders, rtol)
        out[i] = complex(re, im)
        status[i] = st
        used[i] = nu
    return out, status, used


# ---------------------------------------------------------------------------
# public API


@dataclass(frozen=True)
class ModelParams:
    """Constants of the model operator.

    ``n_max`` is the number of Landau levels kept (levels ``0..n_max-1``);
    ``None`` keeps every level that is filled somewhere in the sampled window.
    """

    mu: float
    h: float
    W: float
    v: float = 0.0
    n_max: int | None = None

    def __post_init__(self):
        for name in ("mu", "h", "W", "v"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} must be finite")
        if self.mu <= 0 or not 0 < self.h <= 1:
            raise InvalidInputError("need mu > 0 and h in (0, 1]")
        if self.mu * self.h > 1 + 1e-12:
            raise InvalidInputError(f"mu*h must not exceed 1, got {self.mu * self.h}")
        if self.W <= 0:
            raise InvalidInputError("W must be positive")
        if self.n_max is not None and (int(self.n_max) != self.n_max or self.n_max < 0):
            raise InvalidInputError("n_max must be a nonnegative integer or None")

    def level_count_at(self, x2: float = 0.0, y2: float | None = None) -> int:
        """Filled levels for v = 0, or the count at zeta = 0 for v != 0."""
        y2 = x2 if y2 is None else y2
        weff = self.W + self.v * (x2 + y2) - self.v**2 / self.mu**2
        return landau.count_levels(weff, self.mu * self.h)

    def diag_value(self) -> float:
        """mu/(2 pi h) * N; the exact diagonal for v = 0."""
        return self.mu * self.level_count_at() / (2 * math.pi * self.h)

    @property
    def magnetic_length(self) -> float:
        return math.sqrt(self.h / self.mu)


def gauge_phase(p: ModelParams, x, y):
    """The factor exp(i mu/h (x_2/2 + y_2/2 - v/mu^2)(x_1 - y_1)) (vectorised)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ph = (p.mu / p.h) * (0.5 * (x[..., 1] + y[..., 1]) - p.v / p.mu**2) * (x[..., 0] - y[..., 0])
    return np.exp(1j * ph)


def _as_pairs(x, y):
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=float)))
    Y = np.ascontiguousarray(np.atleast_2d(np.asarray(y, dtype=float)))
    if X.shape[-1] != 2 or Y.shape[-1] != 2:
        raise InvalidInputError("points must be 2-vectors")
    X, Y = np.broadcast_arrays(X, Y)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise InvalidInputError("points must be finite")
    return np.ascontiguousarray(X), np.ascontiguousarray(Y)


def model_kernel_pairs(p: ModelParams, X, Y, rtol: float = 1e-10, return_levels: bool = False):
    """e(X_i, Y_i) for row-paired point arrays of shape (m, 2)."""
    X, Y = _as_pairs(X, Y)
    n_keep = -1 if p.n_max is None else int(p.n_max)
    out, status, used = _pairs_kernel(float(p.mu), float(p.h), float(p.W), float(p.v), X, Y,
                                      n_keep, *_GL, float(rtol))
    if np.any(status == 1):
        i = int(np.argmax(status == 1))
        raise TruncationError(
            f"n_max={p.n_max} too small: level {int(used[i]) - 1} is filled at "
            f"x={X[i].tolist()}, y={Y[i].tolist()}")
    if np.any(status == 2):
        i = int(np.argmax(status == 2))
        raise AccuracyError(f"zeta quadrature did not converge at x={X[i].tolist()}, "
                            f"y={Y[i].tolist()}")
    if return_levels:
        return out, used
    return out


def model_kernel(p: ModelParams, x, y) -> complex:
    """e(x, y, 0) of the model operator by quadrature in zeta."""
    return complex(model_kernel_pairs(p, x, y)[0])


class ModelKernel:
    """Vectorised callable ``e(X, Y)`` for the model operator."""

    def __init__(self, p: ModelParams, rtol: float = 1e-10):
        self.params = p
        self.rtol = rtol

    def __call__(self, X, Y):
        return model_kernel_pairs(self.params, X, Y, rtol=self.rtol)


def landau_projector_kernel(n: int, mu: float, h: float, x, y) -> complex:
    """Kernel of the n-th Landau level projector, Laguerre closed form."""
    if int(n) != n or n < 0:
        raise InvalidInputError("level index must be a nonnegative integer")
    return complex(laguerre_kernel_pairs(int(n), int(n) + 1, mu, h, x, y)[0])


def laguerre_kernel_pairs(n_lo: int, n_hi: int, mu: float, h: float, X, Y) -> np.ndarray:
    """sum_{n_lo <= n < n_hi} of the Landau projector kernels (v = 0 gauge)."""
    X, Y = _as_pairs(X, Y)
    r2 = np.sum((X - Y) ** 2, axis=1)
    t = mu * r2 / (2.0 * h)
    if n_hi <= n_lo:
        return np.zeros(len(t), dtype=complex)
    rows = laguerre_fn_rows(n_hi - 1, np.ascontiguousarray(t))
    radial = rows[n_lo:n_hi].sum(axis=0) * mu / (2.0 * math.pi * h)
    ph = (mu / h) * 0.5 * (X[:, 1] + Y[:, 1]) * (X[:, 0] - Y[:, 0])
    return radial * np.exp(1j * ph)


class LaguerreKernel:
    """Closed-form v = 0 kernel summing the filled Landau levels."""

    def __init__(self, p: ModelParams):
        if p.v != 0:
            raise InvalidInputError("the Laguerre closed form needs v = 0")
        self.params = p
        self.levels = p.level_count_at()
        if p.n_max is not None and self.levels > p.n_max:
            raise TruncationError(f"n_max={p.n_max} below the {self.levels} filled levels")

    def __call__(self, X, Y):
        p = self.params
        return laguerre_kernel_pairs(0, self.levels, p.mu, p.h, X, Y)

    def radial_sq(self, r):
        """|e|^2 as a function of the separation r."""
        p = self.params
        r = np.asarray(r, dtype=float)
        t = np.ascontiguousarray(p.mu * r.ravel() ** 2 / (2.0 * p.h))
        if self.levels == 0:
            return np.zeros(r.shape)
        rad = laguerre_fn_rows(self.levels - 1, t).sum(axis=0) * p.mu / (2 * math.pi * p.h)
        return (rad**2).reshape(r.shape)


def _check_metric(metric):
    G = np.asarray(metric, dtype=float)
    if G.shape != (2, 2) or not np.all(np.isfinite(G)):
        raise InvalidInputError("metric must be a finite 2x2 matrix")
    if abs(G[0, 1] - G[1, 0]) > 1e-12 * max(1.0, np.abs(G).max()):
        raise InvalidInputError("metric must be symmetric")
    G = 0.5 * (G + G.T)
    lam, vec = np.linalg.eigh(G)
    if lam[0] <= 0:
        raise InvalidInputError("metric must be positive definite")
    return G, lam, vec


def weyl_kernel_pairs(V: float, h: float, tau: float, metric, X, Y) -> np.ndarray:
    """Non-magnetic Weyl kernel (2 pi h)^-2 int_{g(xi) <= V+2tau} exp(i<x-y, xi>/h) dxi."""
    G, lam, vec = _check_metric(metric)
    E = V + 2.0 * tau
    if E < 0:
        raise InvalidInputError("V + 2 tau must be nonnegative")
    X, Y = _as_pairs(X, Y)
    sqrt_g = 1.0 / math.sqrt(lam[0] * lam[1])
    R = math.sqrt(E)
    # xi = G^{-1/2} eta maps the ellipse to the disk |eta| <= R
    inv_half = vec @ np.diag(lam**-0.5) @ vec.T
    z = (X - Y) @ inv_half
    s = np.hypot(z[:, 0], z[:, 1])
    out = np.empty(len(s))
    small = s < 1e-12
    if not h > 0:
        raise InvalidInputError("h must be positive")
    # diagonal: (2 pi h)^-2 times the ellipse area pi E sqrt_g
    out[small] = E * sqrt_g / (4 * math.pi * h * h)
    big = ~small
    if np.any(big):
        sb = s[big]
        out[big] = sqrt_g * R * j1_array(np.ascontiguousarray(R * sb / h)) / (2 * math.pi * h * sb)
    return out


def weyl_kernel(V: float, h: float, tau: float, metric, x, y) -> float:
    return float(weyl_kernel_pairs(V, h, tau, metric, x, y)[0])


class WeylKernel:
    """Vectorised callable for the non-magnetic Weyl kernel (real valued)."""

    def __init__(self, V: float, h: float, tau: float = 0.0, metric=None):
        self.V, self.h, self.tau = float(V), float(h), float(tau)
        self.metric = np.eye(2) if metric is None else np.asarray(metric, dtype=float)
        _check_metric(self.metric)

    def __call__(self, X, Y):
        return weyl_kernel_pairs(self.V, self.h, self.tau, self.metric, X, Y).astype(complex)


# ---------------------------------------------------------------------------
# tabulated fields


@dataclass(frozen=True, eq=False)
class SpectralKernelField:
    """Kernel values on a pair grid (``mode='grid'``) or on row pairs (``'pairs'``).

    In grid mode ``values[i, j] = e(points_x[i], points_y[j])``; in pairs mode
    ``values[i] = e(points_x[i], points_y[i])``.
    """

    points_x: np.ndarray
    points_y: np.ndarray
    values: np.ndarray
    gauge: dict
    params: ModelParams | None
    mode: str = "grid"
    _index: dict = field(default_factory=dict, repr=False)

    def pairs(self):
        """Flattened (X, Y, values) rows."""
        if self.mode == "pairs":
            return self.points_x, self.points_y, self.values
        nx, ny = len(self.points_x), len(self.points_y)
        X = np.repeat(self.points_x, ny, axis=0)
        Y = np.tile(self.points_y, (nx, 1))
        return X, Y, self.values.reshape(-1)

    def lookup(self, X, Y):
        """Vectorised exact lookup of tabulated pairs; a missing pair is an error."""
        if not self._index:
            Xs, Ys, vals = self.pairs()
            for a, b, val in zip(map(tuple, Xs), map(tuple, Ys), vals):
                self._index[a + b] = val
        X, Y = _as_pairs(X, Y)
        out = np.empty(len(X), dtype=complex)
        for i, (a, b) in enumerate(zip(map(tuple, X), map(tuple, Y))):
            try:
                out[i] = self._index[a + b]
            except KeyError:
                raise InvalidInputError(f"pair {a} -> {b} is not tabulated in this field") from None
        return out

    __call__ = lookup

    def hermitian_defect(self) -> float:
        if self.mode != "grid" or len(self.points_x) != len(self.points_y) \
                or not np.array_equal(self.points_x, self.points_y):
            raise InvalidInputError("Hermitian check needs a square grid on one axis")
        M = self.values
        return float(np.abs(M - M.conj().T).max() / max(np.abs(M).max(), 1e-300))

    def to_csv(self, path):
        X, Y, vals = self.pairs()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "y1", "y2", "re", "im"])
            for a, b, val in zip(X, Y, vals):
                w.writerow([format(t, ".17g") for t in (a[0], a[1], b[0], b[1], val.real, val.imag)])

    def to_json(self, path):
        X, Y, vals = self.pairs()
        fmt = lambda t: format(float(t), ".17g")  # noqa: E731
        doc = {
            "mode": self.mode,
            "params": None if self.params is None else {
                k: (None if val is None else fmt(val))
                for k, val in vars(self.params).items()},
            "gauge": {k: (fmt(val) if isinstance(val, (int, float)) else val)
                      for k, val in self.gauge.items()},
            "points_x": [[fmt(a), fmt(b)] for a, b in self.points_x],
            "points_y": [[fmt(a), fmt(b)] for a, b in self.points_y],
            "values": [[fmt(val.real), fmt(val.imag)] for val in np.ravel(self.values)],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)

    @classmethod
    def from_json(cls, path) -> "SpectralKernelField":
        with open(path) as fh:
            doc = json.load(fh)
        px = np.array(doc["points_x"], dtype=float).reshape(-1, 2)
        py = np.array(doc["points_y"], dtype=float).reshape(-1, 2)
        raw = np.array(doc["values"], dtype=float).reshape(-1, 2)
        vals = raw[:, 0] + 1j * raw[:, 1]
        if doc["mode"] == "grid":
            vals = vals.reshape(len(px), len(py))
        params = None
        if doc.get("params"):
            pr = doc["params"]
            params = ModelParams(mu=float(pr["mu"]), h=float(pr["h"]), W=float(pr["W"]),
                                 v=float(pr["v"]),
                                 n_max=None if pr["n_max"] is None else int(float(pr["n_max"])))
        gauge = {k: (float(val) if _is_number(val) else val) for k, val in doc["gauge"].items()}
        return cls(px, py, vals, gauge, params, doc["mode"])

    @classmethod
    def from_csv(cls, path, params: ModelParams | None = None) -> "SpectralKernelField":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        vals = data[:, 4] + 1j * data[:, 5]
        return cls(data[:, 0:2].copy(), data[:, 2:4].copy(), vals,
                   {"phase_convention": "unknown"}, params, "pairs")


def _is_number(s):
    try:
        float(s)
    except (TypeError, ValueError):
        return False
    return True


def _gauge_meta(p: ModelParams):
    return {"phase_convention": "landau_x2", "center": "0,0",
            "phase": "exp(i mu/h (x2/2 + y2/2 - v/mu^2)(x1 - y1))"}


def kernel_grid(p: ModelParams, axis: Sequence) -> SpectralKernelField:
    """All pairwise kernel values over one list of points."""
    pts = np.atleast_2d(np.asarray(axis, dtype=float))
    if pts.size == 0:
        raise InvalidInputError("axis must be nonempty")
    n = len(pts)
    iu, ju = np.triu_indices(n)
    vals = model_kernel_pairs(p, pts[iu], pts[ju])
    M = np.empty((n, n), dtype=complex)
    M[iu, ju] = vals
    M[ju, iu] = vals.conj()
    # a projector diagonal is real; drop the rounding-level imaginary part
    M[np.diag_indices(n)] = M[np.diag_indices(n)].real
    return SpectralKernelField(pts.copy(), pts.copy(), M, _gauge_meta(p), p, "grid")


def kernel_pairs_field(p: ModelParams, X, Y) -> SpectralKernelField:
    X, Y = _as_pairs(X, Y)
    vals = model_kernel_pairs(p, X, Y)
    return SpectralKernelField(X.copy(), Y.copy(), vals, _gauge_meta(p), p, "pairs")


def local_count(p: ModelParams, psi: Callable, quad, box=((-1.0, 1.0), (-1.0, 1.0))) -> float:
    """J = int e(x, x) psi(x) dx by tensor quadrature over ``box``.

    ``quad`` is a Gauss-Legendre (or tanh-sinh) rule used on both axes; psi
    must be vectorised over an (m, 2) array and vanish outside ``box``.
    """
    (a1, b1), (a2, b2) = box
    x1, w1 = quad.on_interval(a1, b1)
    x2, w2 = quad.on_interval(a2, b2)
    P1, P2 = np.meshgrid(x1, x2, indexing="ij")
    pts = np.column_stack([P1.ravel(), P2.ravel()])
    wts = np.outer(w1, w2).ravel()
    vals = np.asarray(psi(pts), dtype=float)
    keep = vals != 0
    if not np.any(keep):
        return 0.0
    if p.v == 0:
        diag = np.full(keep.sum(), p.diag_value())
    else:
        # the diagonal only depends on x_2; evaluate once per distinct row
        u2, inv = np.unique(pts[keep, 1], return_inverse=True)
        probe = np.column_stack([np.zeros_like(u2), u2])
        diag = model_kernel_pairs(p, probe, probe).real[inv]
    return float(np.sum(wts[keep] * vals[keep] * diag))

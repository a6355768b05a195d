"""Scalar special functions and quadrature rules.

Hermite functions are the L2-orthonormal ``Upsilon_n(x) = H_n(x) exp(-x^2/2) /
sqrt(2^n n! sqrt(pi))``. They are generated by the three-term recurrence on the
functions themselves, with the Gaussian factor kept as a separate logarithm so
that neither the start value ``exp(-x^2/2)`` nor the growing recurrence
mantissa leaves double range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special as _sp

from ._accel import jit
from .errors import InvalidInputError, TruncationError

PI_M14 = math.pi ** -0.25
HERMITE_N_MAX = 2048
LAGUERRE_N_MAX = 512

# rescaling by a power of two is exact, so mantissas never pick up rounding
_BIG = 2.0 ** 64
_SMALL = 2.0 ** -64
_LOG_BIG = 64.0 * math.log(2.0)


@jit
def hermite_rows(n_max, x):
    """Table ``out[k, j] = Upsilon_k(x[j])`` for ``k = 0..n_max``."""
    npts = x.shape[0]
    out = np.empty((n_max + 1, npts))
    logs = -0.5 * x * x
    scale = np.exp(logs)
    prev = np.zeros(npts)
    cur = np.full(npts, PI_M14)
    out[0] = cur * scale
    for k in range(n_max):
        a = math.sqrt(2.0 / (k + 1.0))
        b = math.sqrt(k / (k + 1.0))
        nxt = a * x * cur - b * prev
        prev = cur
        cur = nxt
        big = np.abs(cur) > _BIG
        if np.any(big):
            f = np.where(big, _SMALL, 1.0)
            cur = cur * f
            prev = prev * f
            logs = logs + np.where(big, _LOG_BIG, 0.0)
            scale = np.exp(logs)
        out[k + 1] = cur * scale
    return out


@jit
def laguerre_fn_rows(n_max, t):
    """Table ``out[k, j] = exp(-t_j/2) L_k(t_j)`` for ``k = 0..n_max``."""
    npts = t.shape[0]
    out = np.empty((n_max + 1, npts))
    logs = -0.5 * t
    scale = np.exp(logs)
    prev = np.zeros(npts)
    cur = np.ones(npts)
    out[0] = scale.copy()
    for k in range(n_max):
        nxt = ((2.0 * k + 1.0 - t) * cur - k * prev) / (k + 1.0)
        prev = cur
        cur = nxt
        big = np.abs(cur) > _BIG
        if np.any(big):
            f = np.where(big, _SMALL, 1.0)
            cur = cur * f
            prev = prev * f
            logs = logs + np.where(big, _LOG_BIG, 0.0)
            scale = np.exp(logs)
        out[k + 1] = cur * scale
    return out


@jit
def j1_array(x):
    """Bessel J1 for a 1-D array of nonnegative arguments."""
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = _j1_scalar(x[i])
    return out


@jit
def _j1_scalar(x):
    if x < 8.0:
        # power series; largest term at x=8 is ~23, so cancellation costs < 2 digits
        half = 0.5 * x
        q = half * half
        term = half
        total = term
        for k in range(1, 60):
            term *= -q / (k * (k + 1.0))
            total += term
            if abs(term) < 1e-18 * (abs(total) + 1e-300):
                break
        return total
    if x < 25.0:
        # Miller backward recurrence normalised by J0 + 2 sum J_2k = 1
        n_start = 2 * (int(x) // 2) + 60
        jp1 = 0.0
        jk = 1e-30
        norm = 0.0
        j1 = 0.0
        for k in range(n_start, 0, -1):
            jm1 = (2.0 * k / x) * jk - jp1
            jp1 = jk
            jk = jm1
            # jk now holds J_{k-1}
            if k - 1 == 1:
                j1 = jk
            if (k - 1) % 2 == 0:
                norm += jk if k - 1 == 0 else 2.0 * jk
        return j1 / norm
    # Hankel asymptotic expansion; smallest term ~ exp(-2x) < 1e-21 here
    mu4 = 4.0
    p = 1.0
    q = 0.0
    term = 1.0
    inv8x = 1.0 / (8.0 * x)
    k = 1
    while k < 80:
        term *= (mu4 - (2 * k - 1) ** 2) * inv8x / k
        if k % 2 == 1:
            q += term if (k // 2) % 2 == 0 else -term
        else:
            p += term if (k // 2) % 2 == 0 else -term
        if abs(term) < 1e-17:
            break
        k += 1
    chi = x - 0.75 * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def _check_x(x):
    x = float(x)
    if not math.isfinite(x):
        raise InvalidInputError(f"argument must be finite, got {x!r}")
    return x


def _check_n(n, n_max, what):
    if int(n) != n or n < 0:
        raise InvalidInputError(f"{what} order must be a nonnegative integer, got {n!r}")
    if n > n_max:
        raise TruncationError(f"{what} order {n} exceeds configured maximum {n_max}")
    return int(n)


def hermite_fn(n: int, x: float) -> float:
    """Orthonormal Hermite function Upsilon_n(x)."""
    n = _check_n(n, HERMITE_N_MAX, "Hermite")
    x = _check_x(x)
    return float(hermite_rows(n, np.array([x]))[n, 0])


def hermite_batch(n_max: int, x: float) -> np.ndarray:
    """Upsilon_0(x) .. Upsilon_{n_max}(x) from a single recurrence pass."""
    n_max = _check_n(n_max, HERMITE_N_MAX, "Hermite")
    x = _check_x(x)
    return hermite_rows(n_max, np.array([x]))[:, 0].copy()


def hermite_table(n_max: int, x) -> np.ndarray:
    """Vectorised form: shape ``(n_max + 1, len(x))``."""
    n_max = _check_n(n_max, HERMITE_N_MAX, "Hermite")
    x = np.ascontiguousarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("Hermite arguments must be finite")
    return hermite_rows(n_max, x)


def laguerre_poly(n: int, x: float) -> float:
    """Laguerre polynomial L_n(x) by the three-term recurrence."""
    n = _check_n(n, LAGUERRE_N_MAX, "Laguerre")
    x = _check_x(x)
    prev, cur = 0.0, 1.0
    for k in range(n):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
    return cur


def laguerre_fn(n: int, t: float) -> float:
    """exp(-t/2) L_n(t), safe for large t where L_n itself overflows."""
    n = _check_n(n, LAGUERRE_N_MAX, "Laguerre")
    t = _check_x(t)
    return float(laguerre_fn_rows(n, np.array([t]))[n, 0])


def bessel_j1(x: float) -> float:
    """J1(x) for x >= 0: series below 8, Miller recurrence to 25, Hankel beyond."""
    x = _check_x(x)
    if x < 0:
        raise InvalidInputError(f"bessel_j1 needs x >= 0, got {x}")
    return float(_j1_scalar(x))


def bessel_j1_array(x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=float)
    shape = x.shape
    flat = x.ravel()
    if flat.size and (not np.all(np.isfinite(flat)) or flat.min() < 0):
        raise InvalidInputError("bessel_j1 needs finite x >= 0")
    return j1_array(flat).reshape(shape)


# ---------------------------------------------------------------------------
# quadrature

KINDS = ("gauss_hermite", "gauss_legendre", "tanh_sinh")
TANH_SINH_TMAX = 3.5


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Immutable 1-D rule.

    ``gauss_legendre`` and ``tanh_sinh`` live on [-1, 1]. ``gauss_hermite``
    lives on the real line and stores weights already multiplied by
    ``exp(x_i^2)``: ``sum(w * f(x))`` approximates the plain integral of ``f``,
    and is exact for ``f = exp(-x^2) * poly`` up to degree ``2*order - 1``.
    For ``tanh_sinh`` the nodes crowd the endpoints below double resolution,
    so ``offsets`` keeps each node's exact distance to its nearest endpoint.
    """

    kind: str
    nodes: np.ndarray
    weights: np.ndarray
    order: int
    offsets: np.ndarray | None = None

    def on_interval(self, a: float, b: float):
        if self.kind == "gauss_hermite":
            raise InvalidInputError("gauss_hermite is a whole-line rule; use on_line")
        half = 0.5 * (b - a)
        if self.offsets is None:
            x = a + half * (self.nodes + 1.0)
        else:
            x = np.where(self.nodes < 0, a + half * self.offsets, b - half * self.offsets)
        return x, half * self.weights

    def on_line(self, center: float = 0.0, scale: float = 1.0):
        if self.kind != "gauss_hermite":
            raise InvalidInputError(f"{self.kind} is not a whole-line rule")
        return center + scale * self.nodes, scale * self.weights

    def integrate(self, f: Callable, a: float = -1.0, b: float = 1.0) -> float:
        if self.kind == "gauss_hermite":
            x, w = self.on_line()
        else:
            x, w = self.on_interval(a, b)
        return float(np.dot(w, f(x)))

    def is_increasing(self) -> bool:
        """Strict ordering, judged on offsets where nodes saturate at +-1."""
        if self.offsets is None:
            return bool(np.all(np.diff(self.nodes) > 0))
        left = self.nodes < 0
        # distance to -1 grows on the left half, distance to +1 shrinks on the right
        ok_left = np.all(np.diff(self.offsets[left]) > 0)
        ok_right = np.all(np.diff(self.offsets[~left]) < 0)
        ok_nodes = np.all(np.diff(self.nodes) >= 0)
        return bool(ok_left and ok_right and ok_nodes)


def _freeze(*arrays):
    for a in arrays:
        if a is not None:
            a.setflags(write=False)


def _gauss_hermite(order):
    x, _ = _sp.roots_hermite(order)
    # one Newton polish with the stable recurrence: U_n' = sqrt(2n) U_{n-1} - x U_n
    tab = hermite_rows(order, x)
    un, unm1 = tab[order], tab[order - 1]
    x = x - un / (math.sqrt(2.0 * order) * unm1 - x * un)
    tab = hermite_rows(order - 1, x)
    # Christoffel numbers of the orthonormal functions, exp(x^2)-compensated
    w = 1.0 / np.sum(tab * tab, axis=0)
    return x, w


def _tanh_sinh(order):
    tmax = TANH_SINH_TMAX
    t = np.linspace(-tmax, tmax, order)
    step = t[1] - t[0]
    a = 0.5 * math.pi * np.sinh(np.abs(t))
    e = np.exp(-2.0 * a)
    comp = 2.0 * e / (1.0 + e)                 # 1 - |tanh(a)| without cancellation
    u = np.sign(t) * (1.0 - comp)
    w = step * 0.5 * math.pi * np.cosh(t) * comp * (2.0 - comp)
    return u, w, comp


@lru_cache(maxsize=64)
def make_rule(kind: str, order: int) -> QuadratureRule:
    if kind not in KINDS:
        raise InvalidInputError(f"unsupported quadrature kind {kind!r}")
    if int(order) != order or not 2 <= order <= 4096:
        raise InvalidInputError(f"quadrature order must be an integer in [2, 4096], got {order!r}")
    order = int(order)
    offsets = None
    if kind == "gauss_legendre":
        x, w = _sp.roots_legendre(order)
    elif kind == "gauss_hermite":
        x, w = _gauss_hermite(order)
    else:
        x, w, offsets = _tanh_sinh(order)
    x = np.ascontiguousarray(x, dtype=float)
    w = np.ascontiguousarray(w, dtype=float)
    _freeze(x, w, offsets)
    return QuadratureRule(kind, x, w, order, offsets)


@lru_cache(maxsize=32)
def legendre_nodes(order: int):
    """Raw (nodes, weights) on [-1, 1]; cached for the inner kernels."""
    r = make_rule("gauss_legendre", order)
    return r.nodes, r.weights

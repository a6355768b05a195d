"""The singular pair functional

    I = int int omega(x, y) e(x, y) psi_2(x) e(y, x) psi_1(y) dx dy

for weights homogeneous of degree -kappa in x - y.

The outer integral over x runs on a tensor Gauss-Legendre grid covering the
support of psi_2. Around each outer node the inner y-integral is split by a
smooth partition chi(|x - y| / gamma): a polar patch (tanh-sinh in the radius,
which absorbs r^(1 - kappa), Gauss-Legendre in the angle) carries chi, and a
far zone carries 1 - chi. The far zone is either a Cartesian tensor grid over
the support of psi_1 or a polar grid about x; the polar form is the one that
resolves kernels with slowly decaying radial oscillations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import AccuracyError, InvalidInputError, SymmetryError
from .kernels import LaguerreKernel, ModelParams, SpectralKernelField, WeylKernel
from .specfun import QuadratureRule, make_rule

IMAG_RTOL = 1e-9
REFINE_RTOL = 5e-3


# ---------------------------------------------------------------------------
# weights and cutoffs


@dataclass(frozen=True, eq=False)
class SingularWeight:
    """omega(x, y) = Omega(x, y; x - y), homogeneous of degree -kappa in the last slot.

    ``Omega`` is vectorised: ``Omega(X, Y, Z)`` with (m, 2) arrays. ``kappa = 0``
    denotes a regular weight, integrated without the polar patch.
    ``radial_coef`` is set when the weight is ``coef * |x - y|^-kappa``.
    """

    kappa: float
    Omega: Callable
    homogeneity_checked: bool = False
    radial_coef: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.kappa < 2.0) or not math.isfinite(self.kappa):
            raise InvalidInputError(f"kappa must lie in (0, 2) (or 0 for a plain weight), got {self.kappa}")
        if not self.homogeneity_checked:
            _check_homogeneity(self)
            object.__setattr__(self, "homogeneity_checked", True)

    def omega(self, X, Y, Z=None):
        """Weight values; pass ``Z = X - Y`` when it is known more precisely than X, Y."""
        X = np.asarray(X, float)
        Y = np.asarray(Y, float)
        Z = X - Y if Z is None else np.asarray(Z, float)
        return np.asarray(self.Omega(X, Y, Z), dtype=float)


def _check_homogeneity(w: SingularWeight):
    rng = np.random.default_rng(12345)
    X = rng.uniform(-1, 1, (4, 2))
    Y = rng.uniform(-1, 1, (4, 2))
    Z = X - Y
    base = np.asarray(w.Omega(X, Y, Z), float)
    for t in (0.5, 2.0, 4.0):
        scaled = np.asarray(w.Omega(X, Y, t * Z), float)
        want = t ** (-w.kappa) * base
        if np.any(np.abs(scaled - want) > 1e-8 * np.maximum(np.abs(want), 1e-300)):
            raise InvalidInputError(f"weight is not homogeneous of degree -{w.kappa}")


def power_weight(kappa: float, coef: float = 1.0) -> SingularWeight:
    """coef * |x - y|^-kappa."""
    def Omega(X, Y, Z):
        r = np.hypot(Z[..., 0], Z[..., 1])
        return coef * r ** (-kappa)
    return SingularWeight(kappa, Omega, radial_coef=coef)


def plain_weight(value: float = 1.0) -> SingularWeight:
    return SingularWeight(0.0, lambda X, Y, Z: np.full(np.shape(Z)[:-1], float(value)),
                          radial_coef=value)


@dataclass(frozen=True, eq=False)
class CutoffPair:
    """psi_1, psi_2 vanish outside the square of half-width ``support_radius`` about ``center``."""

    psi1: Callable
    psi2: Callable
    support_radius: float
    center: tuple = (0.0, 0.0)
    label: str = "custom"
    sigma: float | None = None

    def __post_init__(self):
        if not self.support_radius > 0:
            raise InvalidInputError("support radius must be positive")

    def box(self):
        c1, c2 = self.center
        R = self.support_radius
        return (c1 - R, c1 + R), (c2 - R, c2 + R)


def gaussian_cutoffs(sigma: float, trunc: float = 8.0, center=(0.0, 0.0)) -> CutoffPair:
    """exp(-|x - c|^2 / 2 sigma^2) cut off at |x - c| = trunc * sigma, for both psi."""
    c = np.asarray(center, float)

    def psi(X):
        r2 = np.sum((np.asarray(X, float) - c) ** 2, axis=-1)
        return np.where(r2 <= (trunc * sigma) ** 2, np.exp(-0.5 * r2 / sigma**2), 0.0)

    return CutoffPair(psi, psi, trunc * sigma, tuple(center), "gaussian", sigma)


def _bump(t):
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


def bump_cutoffs(radius: float, center=(0.0, 0.0)) -> CutoffPair:
    """exp(1 - 1/(1 - |x - c|^2/radius^2)) inside the disk, 0 outside."""
    c = np.asarray(center, float)

    def psi(X):
        r = np.sqrt(np.sum((np.asarray(X, float) - c) ** 2, axis=-1))
        return _bump(r / radius)

    return CutoffPair(psi, psi, radius, tuple(center), "bump")


def box_cutoffs(lo=(0.0, 0.0), hi=(1.0, 1.0)) -> CutoffPair:
    """Indicator of an axis-aligned square (for regular weights only)."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if not np.allclose(hi - lo, (hi - lo)[0]):
        raise InvalidInputError("box cutoffs need a square")

    def psi(X):
        X = np.asarray(X, float)
        return np.all((X >= lo) & (X <= hi), axis=-1).astype(float)

    half = 0.5 * float(hi[0] - lo[0])
    return CutoffPair(psi, psi, half, tuple(0.5 * (lo + hi)), "box")


def partition(rho):
    """Smooth chi: 1 on [0, 1/2], 0 on [1, inf), C-infinity in between."""
    rho = np.asarray(rho, float)
    a = 1.0 - rho
    b = rho - 0.5
    fa = np.where(a > 0, np.exp(-1.0 / np.where(a > 0, a, 1.0)), 0.0)
    fb = np.where(b > 0, np.exp(-1.0 / np.where(b > 0, b, 1.0)), 0.0)
    return fa / (fa + fb)


# ---------------------------------------------------------------------------
# quadrature plan


@dataclass(frozen=True, eq=False)
class QuadratureSpec:
    outer_rule: QuadratureRule
    radial_rule: QuadratureRule
    split_radius: float
    angular_order: int = 32
    far_rule: QuadratureRule | None = None
    far_mode: str = "tensor"

    def __post_init__(self):
        if self.radial_rule.kind != "tanh_sinh":
            raise InvalidInputError("the polar patch needs a tanh_sinh radial rule")
        if self.outer_rule.kind != "gauss_legendre":
            raise InvalidInputError("the outer rule must be gauss_legendre")
        if not self.split_radius > 0:
            raise InvalidInputError("split radius must be positive")
        if self.far_mode not in ("tensor", "polar"):
            raise InvalidInputError("far_mode must be 'tensor' or 'polar'")
        if self.angular_order < 2:
            raise InvalidInputError("angular order must be at least 2")

    @property
    def far(self) -> QuadratureRule:
        return self.far_rule if self.far_rule is not None else self.outer_rule

    def refined(self) -> "QuadratureSpec":
        far = None
        if self.far_mode == "polar" or self.far_rule is not None:
            far = make_rule("gauss_legendre", min(2 * self.far.order, 4096))
        return replace(self, radial_rule=make_rule("tanh_sinh", 2 * self.radial_rule.order),
                       angular_order=2 * self.angular_order, far_rule=far)


def default_split(c: CutoffPair, length: float) -> float:
    """gamma = min(R / 4, 8 * length) with ``length`` the kernel's core width."""
    return min(c.support_radius / 4.0, 8.0 * length)


def model_spec(p: ModelParams, c: CutoffPair, outer_order: int = 48,
               radial_order: int | None = None, angular_order: int = 32,
               far_order: int = 96, far_mode: str = "polar") -> QuadratureSpec:
    """Defaults for the magnetic model kernel: the core width is the magnetic length.

    |e|^2 carries about one radial oscillation per filled level inside the
    patch, so the radial order grows with the level count.
    """
    gamma = default_split(c, p.magnetic_length)
    if radial_order is None:
        radial_order = min(4096, 48 + 8 * max(p.level_count_at(), 1))
    return QuadratureSpec(make_rule("gauss_legendre", outer_order),
                          make_rule("tanh_sinh", radial_order), gamma, angular_order,
                          make_rule("gauss_legendre", far_order), far_mode)


def weyl_spec(V: float, h: float, c: CutoffPair, tau: float = 0.0, outer_order: int = 48,
              radial_order: int | None = None, angular_order: int = 32,
              far_order: int | None = None) -> QuadratureSpec:
    """Defaults for the Weyl kernel, whose |e|^2 oscillates with period pi h / sqrt(V + 2 tau)."""
    gamma = c.support_radius / 4.0
    period = math.pi * h / math.sqrt(V + 2 * tau)
    if radial_order is None:
        radial_order = int(min(4096, 48 + 4 * math.ceil(gamma / period)))
    if far_order is None:
        span = 2.0 * math.sqrt(2.0) * c.support_radius
        far_order = int(min(4096, 48 + 2 * math.ceil(span / period)))
    return QuadratureSpec(make_rule("gauss_legendre", outer_order),
                          make_rule("tanh_sinh", radial_order), gamma, angular_order,
                          make_rule("gauss_legendre", far_order), "polar")


# ---------------------------------------------------------------------------
# evaluation


def _as_callable(e):
    if isinstance(e, SpectralKernelField):
        return e.lookup
    if not callable(e):
        raise InvalidInputError("kernel must be a callable or a SpectralKernelField")
    return e


def _tensor(rule, box):
    (a1, b1), (a2, b2) = box
    x1, w1 = rule.on_interval(a1, b1)
    x2, w2 = rule.on_interval(a2, b2)
    P1, P2 = np.meshgrid(x1, x2, indexing="ij")
    return np.column_stack([P1.ravel(), P2.ravel()]), np.outer(w1, w2).ravel()


def _outer_nodes(c: CutoffPair, q: QuadratureSpec):
    X, wx = _tensor(q.outer_rule, c.box())
    psi2 = np.asarray(c.psi2(X), float)
    keep = psi2 != 0
    return X[keep], wx[keep] * psi2[keep]


def _inner_pattern(c: CutoffPair, q: QuadratureSpec, polar: bool):
    """Offsets (dy, weight, r) of the polar patch, or None for a regular weight."""
    if not polar:
        return None
    gamma = q.split_radius
    r, wr = q.radial_rule.on_interval(0.0, gamma)
    th, wth = make_rule("gauss_legendre", q.angular_order).on_interval(0.0, 2 * math.pi)
    R, TH = np.meshgrid(r, th, indexing="ij")
    d = np.column_stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])
    w = (np.outer(wr * r, wth)).ravel() * partition(R.ravel() / gamma)
    keep = w != 0
    return d[keep], w[keep]


def _far_pattern_polar(q: QuadratureSpec, r_max: float, polar: bool):
    lo = 0.5 * q.split_radius if polar else 0.0
    if r_max <= lo:
        return np.zeros((0, 2)), np.zeros(0), np.zeros(0)
    r, wr = q.far.on_interval(lo, r_max)
    th, wth = make_rule("gauss_legendre", q.angular_order).on_interval(0.0, 2 * math.pi)
    R, TH = np.meshgrid(r, th, indexing="ij")
    d = np.column_stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])
    return d, np.outer(wr * r, wth).ravel(), R.ravel()


def _evaluate(e, weights: Sequence[SingularWeight], c: CutoffPair, q: QuadratureSpec,
              chunk: int = 32):
    """Complex I for each weight, sharing one set of kernel evaluations."""
    ecall = _as_callable(e)
    polar = any(w.kappa > 0 for w in weights)
    if polar and any(w.kappa == 0 for w in weights):
        raise InvalidInputError("cannot mix regular and singular weights in one pass")
    X, wx = _outer_nodes(c, q)
    gamma = q.split_radius
    near = _inner_pattern(c, q, polar)
    if q.far_mode == "tensor":
        Yf, wyf = _tensor(q.far, c.box())
        psi1f = np.asarray(c.psi1(Yf), float)
        kf = psi1f != 0
        Yf, wyf = Yf[kf], wyf[kf] * psi1f[kf]
    else:
        cen = np.asarray(c.center, float)
        reach = c.support_radius * math.sqrt(2.0)
    per_node = np.zeros((len(weights), len(X)), dtype=complex)

    def accumulate(Xs, Ys, Zs, wts, idx):
        if len(Xs) == 0:
            return
        kv = ecall(Xs, Ys) * ecall(Ys, Xs) * wts
        for j, w in enumerate(weights):
            contrib = w.omega(Xs, Ys, Zs) * kv
            per_node[j] += np.bincount(idx, weights=contrib.real, minlength=len(X)) \
                + 1j * np.bincount(idx, weights=contrib.imag, minlength=len(X))

    for start in range(0, len(X), chunk):
        sl = slice(start, min(start + chunk, len(X)))
        xs = X[sl]
        ids = np.arange(sl.start, sl.stop)
        if near is not None:
            d, wn = near
            Ys = (xs[:, None, :] + d[None, :, :]).reshape(-1, 2)
            Xs = np.repeat(xs, len(d), axis=0)
            psi = np.asarray(c.psi1(Ys), float)
            wts = np.tile(wn, len(xs)) * psi
            keep = wts != 0
            # the patch offsets are exact even where x + d rounds back to x
            Zs = np.tile(-d, (len(xs), 1))
            accumulate(Xs[keep], Ys[keep], Zs[keep], wts[keep], np.repeat(ids, len(d))[keep])
        if q.far_mode == "tensor":
            Xs = np.repeat(xs, len(Yf), axis=0)
            Ys = np.tile(Yf, (len(xs), 1))
            wts = np.tile(wyf, len(xs))
            if polar:
                r = np.hypot(*(Xs - Ys).T)
                wts = wts * (1.0 - partition(r / gamma))
            keep = wts != 0
            accumulate(Xs[keep], Ys[keep], Xs[keep] - Ys[keep], wts[keep],
                       np.repeat(ids, len(Yf))[keep])
        else:
            for k, x in zip(ids, xs):
                r_max = float(np.hypot(*(x - cen))) + reach
                d, wf, r = _far_pattern_polar(q, r_max, polar)
                Ys = x[None, :] + d
                wts = wf * np.asarray(c.psi1(Ys), float)
                if polar:
                    wts = wts * (1.0 - partition(r / gamma))
                keep = wts != 0
                accumulate(np.repeat(x[None, :], keep.sum(), axis=0), Ys[keep], -d[keep],
                           wts[keep], np.full(keep.sum(), k))
    return np.array([np.sum(wx * row) for row in per_node])


def _settle(values: np.ndarray) -> np.ndarray:
    for val in values:
        if abs(val.imag) > IMAG_RTOL * max(abs(val.real), 1e-300):
            raise SymmetryError(f"imaginary residual {val.imag:.3e} exceeds tolerance for I={val.real:.6e}")
    return values.real


def _check_outer(c: CutoffPair, q: QuadratureSpec):
    """The outer integrand is psi2 times a smoothed psi1; psi2 psi1 must settle under doubling."""
    def mass(rule):
        X, w = _outer_nodes(c, replace(q, outer_rule=rule))
        return float(np.sum(w * np.asarray(c.psi1(X), float)))
    coarse = mass(q.outer_rule)
    fine = mass(make_rule("gauss_legendre", 2 * q.outer_rule.order))
    if abs(fine - coarse) > REFINE_RTOL * abs(fine):
        raise AccuracyError(f"outer rule of order {q.outer_rule.order} under-resolves the cutoffs")


def dirac_energy_multi(e, weights: Sequence[SingularWeight], c: CutoffPair, q: QuadratureSpec,
                       check: bool = True, details: bool = False):
    """I for several weights with shared kernel evaluations; optional refinement check."""
    vals = _settle(_evaluate(e, weights, c, q))
    info = {"orders": (q.outer_rule.order, q.radial_rule.order, q.angular_order, q.far.order),
            "split_radius": q.split_radius}
    if check:
        _check_outer(c, q)
        fine = _settle(_evaluate(e, weights, c, q.refined()))
        change = np.abs(fine - vals) / np.maximum(np.abs(fine), 1e-300)
        info["refinement_change"] = change.tolist()
        if np.any(change > REFINE_RTOL):
            raise AccuracyError(f"doubling the polar orders changed I by {change.max():.3%}")
        vals = fine
    return (vals, info) if details else vals


def dirac_energy(e, w: SingularWeight, c: CutoffPair, q: QuadratureSpec, check: bool = True,
                 details: bool = False):
    """The pair functional I for kernel ``e`` (callable ``e(X, Y)`` or a tabulated field)."""
    out = dirac_energy_multi(e, [w], c, q, check=check, details=details)
    if details:
        return float(out[0][0]), out[1]
    return float(out[0])


def weyl_reference(V: float, h: float, tau: float, metric, w: SingularWeight, c: CutoffPair,
                   q: QuadratureSpec | None = None, check: bool = True) -> float:
    """The same functional with the non-magnetic Weyl kernel in place of e."""
    if q is None:
        q = weyl_spec(V, h, c, tau)
    return dirac_energy(WeylKernel(V, h, tau, metric), w, c, q, check=check)


def request_pairs(c: CutoffPair, q: QuadratureSpec, polar: bool = True):
    """Every (x, y) pair the pipeline evaluates, for building a tabulated field."""
    seen = []

    def record(X, Y):
        seen.append((np.array(X), np.array(Y)))
        return np.ones(len(X), dtype=complex)

    kappa = 1.0 if polar else 0.0
    w = power_weight(kappa) if polar else plain_weight()
    _evaluate(record, [w], c, q)
    X = np.concatenate([s[0] for s in seen])
    Y = np.concatenate([s[1] for s in seen])
    both = np.unique(np.concatenate([np.hstack([X, Y]), np.hstack([Y, X])]), axis=0)
    return both[:, :2], both[:, 2:]


# ---------------------------------------------------------------------------
# radial reduction


def pair_correlation(c: CutoffPair, s, outer_order: int = 48, angular_order: int = 32):
    """M(s) = int dtheta int psi_2(x) psi_1(x + s e_theta) dx, by tensor quadrature."""
    s = np.atleast_1d(np.asarray(s, float))
    X, wx = _tensor(make_rule("gauss_legendre", outer_order), c.box())
    p2 = np.asarray(c.psi2(X), float)
    keep = p2 != 0
    X, wx = X[keep], wx[keep] * p2[keep]
    th, wth = make_rule("gauss_legendre", angular_order).on_interval(0.0, 2 * math.pi)
    dirs = np.column_stack([np.cos(th), np.sin(th)])
    out = np.empty(len(s))
    for i, si in enumerate(s):
        Y = (X[:, None, :] + si * dirs[None, :, :]).reshape(-1, 2)
        vals = np.asarray(c.psi1(Y), float).reshape(len(X), len(th))
        out[i] = np.sum(wx * (vals @ wth))
    return out


def radial_dirac_energy(p: ModelParams, w: SingularWeight, c: CutoffPair, radial_order: int = 96,
                        outer_order: int = 48, angular_order: int = 32,
                        radial_kernel: Callable | None = None, check: bool = True) -> float:
    """I as int_0^inf coef s^(1 - kappa) |e|^2(s) M(s) ds for the isotropic v = 0 model.

    |e|^2 comes from the Laguerre closed form; ``radial_kernel`` overrides it
    (for instance with a constant, as a test mode).
    """
    if p.v != 0:
        raise InvalidInputError("the radial reduction needs v = 0")
    if w.radial_coef is None:
        raise InvalidInputError("the radial reduction needs an isotropic power weight")
    if radial_kernel is None:
        radial_kernel = LaguerreKernel(p).radial_sq
        n = p.level_count_at()
        # |e|^2 < exp(-40) relative beyond this separation
        s_core = p.magnetic_length * (2.0 * math.sqrt(4.0 * n + 2.0) + 13.0)
    else:
        s_core = np.inf
    s_max = min(2.0 * math.sqrt(2.0) * c.support_radius, s_core)

    def run(order, oo, ao):
        val = 0.0
        # panels in s: tanh-sinh on the first (singular end), Gauss-Legendre after
        edges = np.linspace(0.0, s_max, 5)
        for j in range(4):
            rule = make_rule("tanh_sinh" if j == 0 else "gauss_legendre", order)
            s, ws = rule.on_interval(edges[j], edges[j + 1])
            M = pair_correlation(c, s, oo, ao)
            val += np.sum(ws * s ** (1.0 - w.kappa) * np.asarray(radial_kernel(s), float) * M)
        return w.radial_coef * val

    val = run(radial_order, outer_order, angular_order)
    if check:
        fine = run(2 * radial_order, outer_order, 2 * angular_order)
        if abs(fine - val) > REFINE_RTOL * max(abs(fine), 1e-300):
            raise AccuracyError("radial reduction not converged under order doubling")
        val = fine
    return float(val)


def gaussian_pair_closed_form(sigma: float, kappa: float, coef: float = 1.0) -> float:
    """Exact I for |e|^2 = 1 and untruncated Gaussian cutoffs of width sigma.

    M(s) = 2 pi^2 sigma^2 exp(-s^2 / 4 sigma^2), so
    I = coef * pi^2 sigma^2 (4 sigma^2)^(1 - kappa/2) Gamma(1 - kappa/2).
    """
    return coef * math.pi**2 * sigma**2 * (4 * sigma**2) ** (1 - kappa / 2) * math.gamma(1 - kappa / 2)

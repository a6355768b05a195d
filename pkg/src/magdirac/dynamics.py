"""Classical magnetic Hamiltonian flow and the geometry of its windings.

The symbol is ``H(x, xi) = 1/2 (sum g^jk p_j p_k - V)`` with ``p = xi - mu A``.
For a constant field the velocity ``p`` turns clockwise at rate ``mu F`` on a
circle of radius ``sqrt(V) / (mu F)``; a gradient of ``V / F`` makes the
circle drift with velocity ``R_{-pi/2} grad(V/F) / (2 mu)``.

Angles on a winding are measured around the instantaneous guiding center,
from the direction of ``grad(V/F)`` (the "north pole"), positive towards the
drift direction. The right part of a winding is the half with positive angle.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from ._segments import polyline_crossings
from .errors import InsufficientDataError, IntegrationError, InvalidInputError

FD_STEP = 1e-5
DEGENERATE_ANGLE = 1e-6


def _rot_minus(v):
    """Rotate by -pi/2: (a, b) -> (b, -a)."""
    v = np.asarray(v, float)
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def _rot_plus(v):
    v = np.asarray(v, float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def _richardson_grad(fun, x, step=FD_STEP):
    """Central differences with one Richardson step; fun maps 2-vector -> array."""
    x = np.asarray(x, float)
    out = []
    for k in range(2):
        e = np.zeros(2)
        e[k] = 1.0

        def d(hh):
            return (np.asarray(fun(x + hh * e)) - np.asarray(fun(x - hh * e))) / (2 * hh)

        out.append((4 * d(step / 2) - d(step)) / 3)
    return np.stack(out, axis=-1)            # last axis is the derivative direction


@dataclass(frozen=True, eq=False)
class ModelField:
    """Metric g^jk(x), vector potential A(x), potential V(x) and coupling mu.

    The optional derivative callables speed up integration; when absent they
    are replaced by Richardson-extrapolated central differences.
    ``d_metric(x)[j, k, l] = d_l g^jk``, ``d_vecpot(x)[j, l] = d_l A_j``.
    """

    metric: Callable
    vecpot: Callable
    potential: Callable
    mu: float
    d_metric: Callable | None = None
    d_vecpot: Callable | None = None
    grad_potential: Callable | None = None
    label: str = "custom"

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidInputError("mu must be positive")

    def G(self, x):
        return np.asarray(self.metric(np.asarray(x, float)), float)

    def dG(self, x):
        if self.d_metric is not None:
            return np.asarray(self.d_metric(x), float)
        return _richardson_grad(self.G, x)

    def dA(self, x):
        if self.d_vecpot is not None:
            return np.asarray(self.d_vecpot(x), float)
        return _richardson_grad(lambda y: np.asarray(self.vecpot(y), float), x)

    def dV(self, x):
        if self.grad_potential is not None:
            return np.asarray(self.grad_potential(x), float)
        return _richardson_grad(lambda y: np.array(self.potential(y), float), x)

    def sqrt_g(self, x):
        """Volume factor sqrt(det g_jk) = det(g^jk)^(-1/2)."""
        return 1.0 / math.sqrt(np.linalg.det(self.G(x)))

    def check_conditions(self, points, eps: float = 1e-3, eps0: float = 1e-3) -> dict:
        """Sampled checks of V >= eps, |F| >= eps and |grad(V/F)| >= eps0."""
        pts = np.atleast_2d(np.asarray(points, float))
        V = np.array([float(self.potential(p)) for p in pts])
        F = np.array([field_intensity(self, p) for p in pts])
        gvf = np.array([np.hypot(*_grad_v_over_f(self, p)) for p in pts])
        return {"potential": bool(np.all(V >= eps)), "intensity": bool(np.all(np.abs(F) >= eps)),
                "drift": bool(np.all(gvf >= eps0)), "min_V": float(V.min()),
                "min_abs_F": float(np.abs(F).min()), "min_grad_V_over_F": float(gvf.min())}


def linear_field(mu: float, V0: float = 1.0, grad=(0.0, 0.2), F: float = 1.0,
                 gauge: str = "symmetric", chi: Callable | None = None,
                 grad_chi: Callable | None = None, hess_chi: Callable | None = None) -> ModelField:
    """Flat metric, constant intensity F, V = V0 + grad . x.

    ``chi`` adds a gauge term grad(chi) to the vector potential (with its
    gradient and Hessian supplied by the caller).
    """
    g = np.asarray(grad, float)
    if gauge == "symmetric":
        base = lambda x: np.array([-0.5 * F * x[1], 0.5 * F * x[0]])  # noqa: E731
        dbase = np.array([[0.0, -0.5 * F], [0.5 * F, 0.0]])
    elif gauge == "landau":
        base = lambda x: np.array([0.0, F * x[0]])  # noqa: E731
        dbase = np.array([[0.0, 0.0], [F, 0.0]])
    else:
        raise InvalidInputError(f"unknown gauge {gauge!r}")
    if chi is None:
        vecpot = base
        d_vecpot = lambda x: dbase  # noqa: E731
    else:
        vecpot = lambda x: base(x) + np.asarray(grad_chi(x), float)  # noqa: E731
        d_vecpot = lambda x: dbase + np.asarray(hess_chi(x), float)  # noqa: E731
    eye = np.eye(2)
    zero3 = np.zeros((2, 2, 2))
    return ModelField(metric=lambda x: eye, vecpot=vecpot,
                      potential=lambda x: V0 + float(g @ np.asarray(x, float)), mu=mu,
                      d_metric=lambda x: zero3, d_vecpot=d_vecpot,
                      grad_potential=lambda x: g, label=f"linear[{gauge}]")


def constant_field(mu: float, V: float = 1.0, F: float = 1.0, gauge: str = "symmetric") -> ModelField:
    return linear_field(mu, V, (0.0, 0.0), F, gauge)


def field_intensity(f: ModelField, x) -> float:
    """F = g^(-1/2) (d_1 A_2 - d_2 A_1)."""
    J = f.dA(np.asarray(x, float))
    curl = J[1, 0] - J[0, 1]
    return float(curl * math.sqrt(np.linalg.det(f.G(x))))


def _grad_v_over_f(f: ModelField, x):
    return _richardson_grad(lambda y: np.array(float(f.potential(y)) / field_intensity(f, y)), x)


@dataclass(frozen=True)
class FlowState:
    x: tuple
    xi: tuple
    t: float = 0.0


def hamiltonian(f: ModelField, s: FlowState) -> float:
    x = np.asarray(s.x, float)
    p = np.asarray(s.xi, float) - f.mu * np.asarray(f.vecpot(x), float)
    return float(0.5 * (p @ f.G(x) @ p - float(f.potential(x))))


def flow_rhs(f: ModelField):
    """Hamilton's equations as a function of (t, y), y = (x1, x2, xi1, xi2)."""
    mu = f.mu

    def rhs(t, y):
        x = y[:2]
        p = y[2:] - mu * np.asarray(f.vecpot(x), float)
        G = f.G(x)
        v = G @ p
        dG = f.dG(x)
        dA = f.dA(x)
        dV = f.dV(x)
        xidot = -0.5 * np.einsum("j,jkl,k->l", p, dG, p) + mu * (v @ dA) + 0.5 * dV
        return np.concatenate([v, xidot])

    return rhs


def energy_preserving_xi(f: ModelField, x, direction=(1.0, 0.0)) -> np.ndarray:
    """xi with H(x, xi) = 0 and kinetic momentum along ``direction``."""
    x = np.asarray(x, float)
    d = np.asarray(direction, float)
    G = f.G(x)
    V = float(f.potential(x))
    if V < 0:
        raise InvalidInputError("energy level 0 needs V >= 0")
    scale = math.sqrt(V / float(d @ G @ d))
    return scale * d + f.mu * np.asarray(f.vecpot(x), float)


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    xi: np.ndarray
    H: np.ndarray
    energy0: float
    guiding_center: np.ndarray
    winding_index: np.ndarray
    field: ModelField
    sol: object = field(repr=False, default=None)
    angle: np.ndarray | None = None

    @property
    def states(self):
        return [FlowState(tuple(a), tuple(b), float(c)) for a, b, c in zip(self.x, self.xi, self.t)]

    @property
    def n_windings(self) -> int:
        return int(self.winding_index[-1]) + 1 if len(self.winding_index) else 0

    def state_at(self, t):
        """Dense-output states, shape (4, m)."""
        return np.atleast_2d(self.sol(np.asarray(t, float)).T).T

    def kinetic(self, t):
        y = self.state_at(t)
        A = np.array([self.field.vecpot(c) for c in y[:2].T]).T
        return y[2:] - self.field.mu * A

    def velocity(self, t):
        y = self.state_at(t)
        p = self.kinetic(t)
        return np.stack([self.field.G(c) @ q for c, q in zip(y[:2].T, p.T)], axis=1)

    def guiding_center_at(self, t):
        y = self.state_at(t)
        p = self.kinetic(t)
        F = np.array([field_intensity(self.field, c) for c in y[:2].T])
        return y[:2] + _rot_minus(p.T).T / (self.field.mu * F)

    def winding_bounds(self, k: int):
        """Time interval of winding k (by velocity-angle unwinding)."""
        if not 0 <= k < self.n_windings:
            raise IndexError(f"winding {k} not present (0..{self.n_windings - 1})")
        # boundaries where the unwound angle crosses a multiple of 2 pi
        lo = self.t[0] if k == 0 else self._crossing_time(k)
        hi = self.t[-1] if k + 1 >= self.n_windings else self._crossing_time(k + 1)
        return lo, hi

    def _crossing_time(self, k):
        target = 2 * math.pi * k
        i = int(np.searchsorted(np.maximum.accumulate(self.angle), target))
        i = min(max(i, 1), len(self.t) - 1)
        t0, t1 = self.t[i - 1], self.t[i]

        def g(tt):
            return self._angle_at(tt) - target

        return brentq(g, t0, t1, xtol=1e-14, rtol=1e-15)

    def _angle_at(self, tt):
        """Unwound clockwise turning angle of the velocity at time tt."""
        i = int(np.clip(np.searchsorted(self.t, tt), 1, len(self.t) - 1))
        v = self.velocity(np.array([tt]))[:, 0]
        raw = -math.atan2(v[1], v[0]) if self._clockwise else math.atan2(v[1], v[0])
        ref = self.angle[i - 1]
        return ref + ((raw - ref + math.pi) % (2 * math.pi) - math.pi)

    @property
    def _clockwise(self):
        return field_intensity(self.field, self.x[0]) * np.sign(self.t[-1] - self.t[0]) > 0

    def to_csv(self, path):
        data = np.column_stack([self.t, self.x, self.xi, self.H])
        np.savetxt(path, data, delimiter=",", fmt="%.17g", header="t,x1,x2,xi1,xi2,H", comments="")


def integrate_flow(f: ModelField, s0: FlowState, T: float, tol: float = 1e-10,
                   samples_per_period: int = 128, rtol: float = 1e-12) -> Trajectory:
    """Adaptive DOP853 integration with dense output and winding bookkeeping."""
    y0 = np.concatenate([np.asarray(s0.x, float), np.asarray(s0.xi, float)])
    H0 = hamiltonian(f, s0)
    if abs(H0) > tol:
        raise InvalidInputError(f"initial energy {H0:.3e} is not within {tol:g} of zero")
    F0 = field_intensity(f, s0.x)
    period = 2 * math.pi / (f.mu * abs(F0))
    scale = math.sqrt(max(float(f.potential(s0.x)), 1e-300)) / (f.mu * abs(F0))
    atol = np.array([scale, scale, f.mu * scale, f.mu * scale]) * rtol
    atol[2:] = np.maximum(atol[2:], rtol * np.abs(y0[2:]))
    t0 = float(s0.t)
    try:
        res = solve_ivp(flow_rhs(f), (t0, t0 + T), y0, method="DOP853", rtol=rtol, atol=atol,
                        dense_output=True)
    except Exception as exc:  # pragma: no cover - scipy raises on malformed input only
        raise IntegrationError(f"integration failed: {exc}") from exc
    if not res.success:
        raise IntegrationError(f"integration failed: {res.message}")
    n = max(2, int(math.ceil(abs(T) / period * samples_per_period)) + 1)
    t = t0 + np.linspace(0.0, T, n)
    Y = res.sol(t)
    x = Y[:2].T.copy()
    xi = Y[2:].T.copy()
    H = np.array([hamiltonian(f, FlowState(a, b)) for a, b in zip(x, xi)])
    drift = np.abs(H - H0).max()
    if drift > 100 * tol:
        raise IntegrationError(f"energy drift {drift:.3e} exceeds {100 * tol:g}")
    A = np.array([f.vecpot(c) for c in x])
    p = xi - f.mu * A
    v = np.array([f.G(c) @ q for c, q in zip(x, p)])
    F = np.array([field_intensity(f, c) for c in x])
    gc = x + _rot_minus(p) / (f.mu * F[:, None])
    raw = np.unwrap(np.arctan2(v[:, 1], v[:, 0]))
    # clockwise for F > 0 in forward time; count turns so the index never decreases
    sense = -1.0 if F0 * np.sign(T if T != 0 else 1.0) > 0 else 1.0
    ang = sense * (raw - raw[0])
    idx = np.floor(np.maximum.accumulate(ang) / (2 * math.pi) + 1e-12).astype(int)
    idx = np.maximum(idx, 0)
    return Trajectory(t, x, xi, H, H0, gc, idx, f, res.sol, ang)


def cyclotron_period(f: ModelField, x) -> float:
    return 2 * math.pi / (f.mu * abs(field_intensity(f, x)))


def cyclotron_radius(f: ModelField, x) -> float:
    return math.sqrt(float(f.potential(x))) / (f.mu * abs(field_intensity(f, x)))


def drift_velocity(f: ModelField, x) -> np.ndarray:
    """Guiding-center velocity R_{-pi/2} grad(V/F) / (2 mu) of the flow above."""
    return _rot_minus(_grad_v_over_f(f, x)) / (2.0 * f.mu)


def nominal_drift_speed(f: ModelField, x) -> float:
    """|grad(V/F)| / mu, the drift scale without the factor 1/2 of the flow."""
    return float(np.hypot(*_grad_v_over_f(f, x))) / f.mu


def measured_drift(traj: Trajectory, windings: int | None = None) -> np.ndarray:
    """Least-squares slope of the guiding center against time."""
    t = traj.t
    gc = traj.guiding_center
    if windings is not None:
        keep = traj.winding_index < windings
        t, gc = t[keep], gc[keep]
    A = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, gc, rcond=None)
    return coef[0]


# ---------------------------------------------------------------------------
# winding geometry


def _frame(traj: Trajectory):
    """North direction (grad(V/F)) and drift direction at the start point."""
    g = _grad_v_over_f(traj.field, traj.x[0])
    norm = float(np.hypot(*g))
    if norm == 0:
        north = np.array([0.0, 1.0])
    else:
        north = g / norm
    F = field_intensity(traj.field, traj.x[0])
    east = _rot_minus(north) if F > 0 else _rot_plus(north)
    return north, east


def phase_angle(traj: Trajectory, t) -> np.ndarray:
    """Signed angle of x - X(t) from north, positive towards the drift direction."""
    north, east = _frame(traj)
    y = traj.state_at(t)
    rel = y[:2].T - traj.guiding_center_at(t).T
    return np.arctan2(rel @ east, rel @ north)


@dataclass(frozen=True)
class IntersectionEvent:
    t_early: float
    t_late: float
    point: tuple
    winding_pair: tuple
    phi: float
    angle: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        """JSON-ready record; floats as 17-digit decimal strings for exact round-trips."""
        f = lambda v: format(float(v), ".17g")  # noqa: E731
        return {"t_early": f(self.t_early), "t_late": f(self.t_late), "point": [f(v) for v in self.point],
                "winding_pair": [int(k) for k in self.winding_pair], "phi": f(self.phi),
                "angle": f(self.angle), "degenerate": bool(self.degenerate)}


def events_to_json(events, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([e.to_dict() for e in events], fh, indent=1)


def self_intersections(traj: Trajectory, involving=None, backend: str | None = None,
                       newton_tol: float = 1e-12) -> list:
    """Transversal crossings of the projected path, refined on the dense output.

    ``involving`` restricts the search to crossings that touch the given
    windings (all windings when None).
    """
    if traj.n_windings < 2:
        return []
    P = traj.x
    seg_w = traj.winding_index[:-1]
    active = None
    if involving is not None:
        active = np.isin(seg_w, np.atleast_1d(involving))
    i, j, s, u = polyline_crossings(P, active, backend)
    if len(i) == 0:
        return []
    t = traj.t
    t1 = t[i] + s * (t[i + 1] - t[i])
    t2 = t[j] + u * (t[j + 1] - t[j])
    t1, t2, ok = _refine(traj, t1, t2, newton_tol)
    x1 = traj.state_at(t1)[:2].T
    v1 = traj.velocity(t1).T
    v2 = traj.velocity(t2).T
    cross = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    ang = np.abs(np.arctan2(cross, np.sum(v1 * v2, axis=1)))
    ang = np.minimum(ang, math.pi - ang)
    phi = phase_angle(traj, t1)
    w1 = _winding_of(traj, t1)
    w2 = _winding_of(traj, t2)
    events = []
    for k in range(len(t1)):
        if not ok[k]:
            continue
        deg = bool(ang[k] < DEGENERATE_ANGLE)
        if deg and _coincident(traj, t1[k], t2[k]):
            # overlapping branches (a closed orbit retracing itself) are not crossings
            continue
        events.append(IntersectionEvent(float(t1[k]), float(t2[k]), tuple(x1[k]),
                                        (int(w1[k]), int(w2[k])), float(phi[k]),
                                        float(ang[k]), deg))
    return events


def _winding_of(traj, tt):
    k = np.clip(np.searchsorted(traj.t, tt, side="right") - 1, 0, len(traj.t) - 1)
    return traj.winding_index[k]


def _refine(traj, t1, t2, tol, iters=12):
    """Newton on x(t1) = x(t2) using the dense output."""
    t1 = t1.copy()
    t2 = t2.copy()
    ok = np.ones(len(t1), dtype=bool)
    lo, hi = traj.t.min(), traj.t.max()
    for _ in range(iters):
        d = traj.state_at(t1)[:2] - traj.state_at(t2)[:2]
        v1 = traj.velocity(t1)
        v2 = traj.velocity(t2)
        # [v1, -v2] [dt1, dt2]^T = -d
        det = -v1[0] * v2[1] + v1[1] * v2[0]
        safe = np.abs(det) > 1e-300
        det = np.where(safe, det, 1.0)
        dt1 = (-d[0] * -v2[1] - -d[1] * -v2[0]) / det
        dt2 = (v1[0] * -d[1] - v1[1] * -d[0]) / det
        dt1 = np.where(safe, dt1, 0.0)
        dt2 = np.where(safe, dt2, 0.0)
        t1 = np.clip(t1 + dt1, lo, hi)
        t2 = np.clip(t2 + dt2, lo, hi)
        if np.all(np.abs(dt1) + np.abs(dt2) < tol * max(1.0, hi - lo)):
            break
    d = traj.state_at(t1)[:2] - traj.state_at(t2)[:2]
    scale = cyclotron_radius(traj.field, traj.x[0])
    ok &= np.hypot(*d) < 1e-8 * max(scale, 1e-300)
    ok &= t1 < t2
    return t1, t2, ok


def _coincident(traj, t1, t2):
    dt = min(cyclotron_period(traj.field, traj.x[0]) / 16, t1 - traj.t[0], traj.t[-1] - t2)
    if dt <= 0:
        return True
    probe = np.array([-dt, dt])
    a = traj.state_at(t1 + probe)[:2].T
    b = traj.state_at(t2 + probe)[:2].T
    scale = cyclotron_radius(traj.field, traj.x[0])
    return bool(np.all(np.hypot(*(a - b).T) < 1e-7 * scale))


def _winding_samples(traj, k, m=512):
    lo, hi = traj.winding_bounds(k)
    return np.linspace(lo, hi, m)


def winding_distance(traj: Trajectory, phi: float, n: int, ref: int | None = None) -> float:
    """Distance from the angle-phi point of winding ``ref`` to the right part of winding ref+n."""
    if ref is None:
        ref = traj.n_windings // 2
    if not (0 < ref < traj.n_windings - 1):
        raise IndexError("reference winding must have complete windings around it")
    target = ref + n
    if not (0 < target < traj.n_windings - 1):
        raise IndexError(f"winding {target} not present as a complete winding")
    ts = _winding_samples(traj, ref)
    ph = phase_angle(traj, ts)
    diff = np.angle(np.exp(1j * (ph - phi)))
    k = np.nonzero((diff[:-1] > 0) & (diff[1:] <= 0) | (diff[:-1] <= 0) & (diff[1:] > 0))[0]
    k = [kk for kk in k if abs(diff[kk] - diff[kk + 1]) < math.pi]
    if not k:
        raise InsufficientDataError(f"angle {phi} not reached on winding {ref}")

    def g(tt):
        return float(np.angle(np.exp(1j * (phase_angle(traj, np.array([tt]))[0] - phi))))

    t_star = brentq(g, ts[k[0]], ts[k[0] + 1], xtol=1e-15)
    P = traj.state_at(np.array([t_star]))[:2, 0]
    cand = _winding_samples(traj, target, 2048)
    right = phase_angle(traj, cand) > 0
    if not np.any(right):
        raise InsufficientDataError("no right part on the target winding")
    X = traj.state_at(cand)[:2].T
    dist = np.hypot(*(X - P).T)
    dist[~right] = np.inf
    m = int(np.argmin(dist))
    a = cand[max(m - 1, 0)]
    b = cand[min(m + 1, len(cand) - 1)]

    def obj(tt):
        return float(np.hypot(*(traj.state_at(np.array([tt]))[:2, 0] - P)))

    res = minimize_scalar(obj, bounds=(a, b), method="bounded", options={"xatol": 1e-14})
    return float(min(res.fun, dist[m]))


def tick_structure(traj: Trajectory, ref: int | None = None, events=None):
    """Angles phi_n of crossings of winding ref with ref+n on its north-right quarter.

    Returns [(phi_n, ell_n)] for n = 1, 2, ... with ell_n = |phi_n - phi_{n+1}|
    (the last entry has ell = nan).
    """
    if ref is None:
        ref = traj.n_windings // 2
    if events is None:
        events = self_intersections(traj, involving=[ref]) if traj.n_windings >= 2 else []
    by_n = {}
    for ev in events:
        w0, w1 = ev.winding_pair
        if w0 == ref and w1 > ref and 0 < ev.phi < math.pi / 2 and not ev.degenerate:
            by_n.setdefault(w1 - ref, []).append(ev.phi)
    if len(by_n) < 3:
        raise InsufficientDataError("too few crossings near the equator for a tick structure")
    ns = sorted(by_n)
    phis = [max(by_n[n]) for n in ns]
    out = []
    for a, b in zip(phis, phis[1:] + [float("nan")]):
        out.append((a, abs(a - b) if b == b else float("nan")))
    return out, ns


def tick_regression(ticks, ns, zone: float = math.pi / 4):
    """Fit log(pi/2 - phi_n) against log(nbar - n) over the near-equator zone.

    ``nbar`` is the last crossing winding offset; the fit excludes n = nbar.
    Returns dict with slope, intercept, r2, nbar, last_gap (pi/2 - phi_nbar).
    """
    phis = np.array([p for p, _ in ticks])
    ns = np.asarray(ns)
    nbar = int(ns.max())
    gap = math.pi / 2 - phis
    sel = (gap <= zone) & (ns < nbar) & (gap > 0)
    if sel.sum() < 3:
        raise InsufficientDataError("fewer than three ticks in the regression zone")
    lx = np.log(nbar - ns[sel])
    ly = np.log(gap[sel])
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    # continuous version: gap^2 = a (nbar_c - n), free of the integer rounding of nbar
    a_neg, b = np.polyfit(ns[sel], gap[sel] ** 2, 1)
    return {"slope": float(slope), "intercept": float(icpt), "r2": float(r2), "nbar": nbar,
            "last_gap": float(gap[ns == nbar][0]), "points": int(sel.sum()),
            "gap_sq_rate": float(-a_neg), "nbar_continuous": float(-b / a_neg)}


def crossings_per_winding(events, ref: int) -> int:
    return sum(1 for ev in events if ref in ev.winding_pair and not ev.degenerate)

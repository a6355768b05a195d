"""Threshold time scales, field-strength regimes and remainder expressions.

All unnamed constants are 1 and ``|log h|`` is the natural logarithm, so the
values describe the shape of the bounds rather than their calibration.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

from .errors import InvalidInputError

DEFAULT_DELTA = 0.05
WEAK, INTERMEDIATE, STRONG = "weak", "intermediate", "strong"


def _check(mu, h):
    if not (mu > 0 and math.isfinite(mu)):
        raise InvalidInputError("mu must be positive and finite")
    if not 0 < h < 1:
        raise InvalidInputError("h must lie in (0, 1)")


def _hl(h):
    return h * abs(math.log(h))


def weak_boundary(h: float) -> float:
    """mu below which the weak-field estimate applies: (h|log h|)^(-1/4)."""
    return _hl(h) ** -0.25


def strong_boundary(h: float) -> float:
    """mu above which the field counts as strong: (h|log h|)^(-2/5)."""
    return _hl(h) ** -0.4


@dataclass(frozen=True)
class RegimeReport:
    mu: float
    h: float
    m: int
    kappa: float
    T_star: float
    T2_star: float
    T3_star: float
    T4_star: float
    rho_bar: float
    regime: str
    bound_2_81: float
    bound_2_67: float
    bound_2_48: float
    applicable: str

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in d.items()},
                          indent=2)


def regime_classify(mu: float, h: float) -> str:
    _check(mu, h)
    if mu <= weak_boundary(h):
        return WEAK
    if mu <= strong_boundary(h):
        return INTERMEDIATE
    return STRONG


def thresholds(mu: float, h: float, m: int = 2, delta: float = DEFAULT_DELTA) -> dict:
    _check(mu, h)
    if m not in (2, 3):
        raise InvalidInputError("perturbation order m must be 2 or 3")
    if not delta >= 0:
        raise InvalidInputError("delta must be non-negative")
    L = abs(math.log(h))
    q = mu * h * L
    T3 = q ** (2 / 3) if mu >= strong_boundary(h) else 1.0 / mu
    return {"T_star": min(mu**m * h ** (1 + delta), 1.0), "T2_star": q ** (1 / 3), "T3_star": T3,
            "T4_star": mu**3 * h * L, "rho_bar": math.sqrt(q)}


def bound_weak(mu, h, kappa):
    L = abs(math.log(h))
    return (mu ** (2 * kappa + 1) / h + mu ** (3 * kappa) / h + mu**2 * h ** (-0.5 - kappa) * math.sqrt(L)
            + h ** (-1 - kappa) / mu)


def bound_intermediate(mu, h, kappa):
    L = abs(math.log(h))
    return (mu**4 * h * L) ** (2 / 3) * h ** (-1 - kappa) + mu ** (2 * kappa + 1) / h


def bound_general(mu, h, kappa):
    return ((mu ** (2 * kappa + 1) + mu ** (3 * kappa)) / h + mu**2.5 * h ** (-0.5 - kappa)
            + h ** (-1 - kappa) / mu)


def remainder_estimate(mu: float, h: float, kappa: float) -> dict:
    """Remainder of the Weyl principal part, branch picked by the regime."""
    _check(mu, h)
    if not 0 < kappa < 2:
        raise InvalidInputError("kappa must lie in (0, 2)")
    regime = regime_classify(mu, h)
    if regime == WEAK:
        return {"value": bound_weak(mu, h, kappa), "branch": "b281"}
    if regime == INTERMEDIATE:
        return {"value": bound_intermediate(mu, h, kappa), "branch": "b267"}
    return {"value": math.nan, "branch": "none"}


def report(mu: float, h: float, m: int = 2, kappa: float = 1.0, delta: float = DEFAULT_DELTA) -> RegimeReport:
    th = thresholds(mu, h, m, delta)
    est = remainder_estimate(mu, h, kappa)
    return RegimeReport(mu=float(mu), h=float(h), m=int(m), kappa=float(kappa), **th,
                        regime=regime_classify(mu, h), bound_2_81=bound_weak(mu, h, kappa),
                        bound_2_67=bound_intermediate(mu, h, kappa),
                        bound_2_48=bound_general(mu, h, kappa), applicable=est["branch"])

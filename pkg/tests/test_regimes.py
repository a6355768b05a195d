import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magdirac import regimes as rg
from magdirac.errors import InvalidInputError

LOG4 = math.log(1e4)  # |ln 1e-4| = 9.2103...


def test_threshold_example():
    th = rg.thresholds(10, 1e-4, 2, delta=0.0)
    assert th["T_star"] == pytest.approx(0.01, rel=1e-12)
    assert th["T2_star"] == pytest.approx(0.2096, abs=5e-5)
    assert th["T4_star"] == pytest.approx(0.9210, abs=5e-5)
    assert th["rho_bar"] == pytest.approx(0.09597, abs=5e-6)
    q = 10 * 1e-4 * LOG4
    assert th["T2_star"] == pytest.approx(q ** (1 / 3), rel=1e-14)
    # intermediate point: T3 = 1/mu
    assert th["T3_star"] == pytest.approx(0.1, rel=1e-14)


def test_threshold_unit_mu():
    for h in (1e-2, 3e-3, 1e-6):
        assert rg.thresholds(1.0, h)["T2_star"] == (h * abs(math.log(h))) ** (1 / 3)


def test_t_star_capped_and_delta():
    assert rg.thresholds(1e3, 0.5, 2)["T_star"] == 1.0
    a = rg.thresholds(10, 1e-4, 3, delta=0.05)["T_star"]
    assert a == pytest.approx(1e3 * 1e-4 ** 1.05, rel=1e-12)


def test_threshold_ordering_on_lattice():
    # T3 = q^(2/3) <= T2 = q^(1/3) holds exactly while q = mu h |log h| <= 1;
    # beyond that both times exceed 1 and the order reverses
    checked = reversed_ = 0
    for h in np.geomspace(1e-8, 0.3, 25):
        for mu in np.geomspace(0.5, 1e4, 40):
            th = rg.thresholds(mu, h)
            assert all(v > 0 for v in th.values())
            if mu >= rg.strong_boundary(h):
                if mu * h * abs(math.log(h)) <= 1:
                    assert th["T3_star"] <= th["T2_star"] * (1 + 1e-12)
                    checked += 1
                else:
                    assert th["T3_star"] > th["T2_star"] > 1
                    reversed_ += 1
    assert checked > 100 and reversed_ > 0


def test_threshold_validation():
    for bad in [dict(mu=-1, h=0.1), dict(mu=1, h=1.0), dict(mu=1, h=0.0), dict(mu=1, h=0.1, m=4),
                dict(mu=1, h=0.1, delta=-0.1)]:
        with pytest.raises(InvalidInputError):
            rg.thresholds(**bad)


def test_boundaries_at_small_h():
    hl = 1e-4 * LOG4
    assert rg.weak_boundary(1e-4) == pytest.approx(math.exp(-0.25 * math.log(hl)), rel=1e-14)
    assert rg.weak_boundary(1e-4) == pytest.approx(5.741, abs=1e-3)
    assert rg.strong_boundary(1e-4) == pytest.approx(math.exp(-0.4 * math.log(hl)), rel=1e-14)
    assert rg.strong_boundary(1e-4) == pytest.approx(16.38, abs=5e-3)


@pytest.mark.parametrize("mu,want", [(3, "weak"), (10, "intermediate"), (100, "strong")])
def test_classification(mu, want):
    assert rg.regime_classify(mu, 1e-4) == want


def test_weak_bound_example():
    L = math.log(100)
    v = rg.bound_weak(10, 1e-2, 1.0)
    assert v == pytest.approx(1e5 + 1e5 + 1e5 * 2.1460 + 1e3, rel=1e-4)
    assert v == pytest.approx(4.156e5, rel=1e-3)
    assert v == pytest.approx(1e5 + 1e5 + 1e2 * 1e-2 ** -1.5 * math.sqrt(L) + 1e3, rel=1e-14)
    # the point itself sits in the strong regime, where no estimate is stated
    assert rg.remainder_estimate(10, 1e-2, 1.0) == {"value": pytest.approx(math.nan, nan_ok=True),
                                                    "branch": "none"}


def test_weak_bound_small_kappa_limit():
    h = 1e-3
    L = abs(math.log(h))
    assert rg.bound_weak(1.0, h, 1e-12) == pytest.approx(2 / h + math.sqrt(L / h) + 1 / h, rel=1e-9)


def test_other_bound_expressions():
    mu, h, k = 7.0, 1e-3, 0.5
    L = abs(math.log(h))
    assert rg.bound_intermediate(mu, h, k) == pytest.approx(
        (mu**4 * h * L) ** (2 / 3) * h ** -1.5 + mu**2 / h, rel=1e-14)
    assert rg.bound_general(mu, h, k) == pytest.approx(
        (mu**2 + mu**1.5) / h + mu**2.5 * h**-1 + h**-1.5 / mu, rel=1e-14)


def test_branch_flips_at_weak_boundary():
    h = 1e-4
    b = rg.weak_boundary(h)
    assert rg.remainder_estimate(b, h, 1.0)["branch"] == "b281"
    assert rg.remainder_estimate(math.nextafter(b, math.inf), h, 1.0)["branch"] == "b267"
    s = rg.strong_boundary(h)
    assert rg.remainder_estimate(s, h, 1.0)["branch"] == "b267"
    assert rg.remainder_estimate(math.nextafter(s, math.inf), h, 1.0)["branch"] == "none"


@given(st.floats(1e-9, 0.5), st.floats(0.01, 1.99), st.floats(0.0, 1.0))
def test_shared_predicate_and_positivity(h, kappa, frac):
    mu = 0.1 + frac * 30
    est = rg.remainder_estimate(mu, h, kappa)
    reg = rg.regime_classify(mu, h)
    assert est["branch"] == {"weak": "b281", "intermediate": "b267", "strong": "none"}[reg]
    if est["branch"] != "none":
        assert est["value"] > 0
    for f in (rg.bound_weak, rg.bound_intermediate, rg.bound_general):
        assert f(mu, h, kappa) > 0


@given(st.floats(1e-9, 0.5), st.floats(0.01, 1.99))
def test_weak_bound_monotone_in_mu(h, kappa):
    mus = np.linspace(0.05, rg.weak_boundary(h), 30)
    vals = [rg.bound_weak(m, h, kappa) for m in mus]
    # mu^-1 h^(-1-kappa) decreases; the sum is monotone once past its minimum
    i = int(np.argmin(vals))
    assert np.all(np.diff(vals[i:]) > 0)


def test_weak_bound_growing_terms_monotone():
    h, kappa = 1e-4, 1.0
    mus = np.linspace(0.05, rg.weak_boundary(h), 50)
    grow = [rg.bound_weak(m, h, kappa) - h ** (-1 - kappa) / m for m in mus]
    assert np.all(np.diff(grow) > 0)
    # the mu^-1 h^(-1-kappa) term makes the full bound decrease first
    assert rg.bound_weak(1.0, h, kappa) > rg.bound_weak(2.0, h, kappa)


def test_kappa_range():
    for k in (0.0, 2.0, -1.0):
        with pytest.raises(InvalidInputError):
            rg.remainder_estimate(3, 1e-3, k)


def test_report_json_round_trip():
    r = rg.report(10, 1e-4, 2, 1.0, delta=0.0)
    d = json.loads(r.to_json())
    assert d["regime"] == "intermediate" and d["applicable"] == "b267"
    assert float(d["T_star"]) == r.T_star and d["T_star"] == "0.01"
    assert float(d["bound_2_48"]) == r.bound_2_48
    assert rg.report(10, 1e-4) == rg.report(10, 1e-4)

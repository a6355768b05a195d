"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""
import math
import time

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss

from magdirac import dirac_energy as de
from magdirac import dynamics as dyn
from magdirac import harness as hs
from magdirac import kernels, regimes
from magdirac import perturbation as pt
from magdirac.kernels import ModelParams


@pytest.fixture
def verdict(capsys):
    def emit(k, ok, detail, t0):
        with capsys.disabled():
            print(f"\nACCEPTANCE {k:>2}: {'PASS' if ok else 'FAIL'}  ({time.perf_counter() - t0:.1f} s)  {detail}")
        return ok
    return emit


def herm(M):
    return pt.OperatorMatrix(np.asarray(M, complex), True)


def test_criterion_01_trace_identity(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    # mu*h from 0.05 to 0.95, with mu*h chosen off the level thresholds (2n+1) mu h = 1
    muh = np.geomspace(0.05, 0.95, 12) * (1 + 1e-3)
    mus = [0.5, 1, 2, 3, 4, 6, 8, 10, 12, 14, 16, 18]
    for mu, q in zip(mus, muh):
        h = q / mu
        N = sum(1 for n in range(1000) if (2 * n + 1) * q < 1.0)
        want = mu * N / (2 * math.pi * h)
        got = kernels.model_kernel(ModelParams(mu, h, 1.0), (0.3, -0.2), (0.3, -0.2)).real
        worst = max(worst, abs(got - want) / want)
    ok = worst <= 1e-8 and time.perf_counter() - t0 < 10
    assert verdict(1, ok, f"max rel err {worst:.2e} over 12 triples", t0)


def test_criterion_02_kernel_oracles(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    p = ModelParams(6.0, 0.04, 1.0)
    X = rng.uniform(-0.5, 0.5, (16, 2))
    Y = X + rng.uniform(-0.3, 0.3, (16, 2))
    lag = kernels.LaguerreKernel(p)(X, Y)
    rel_lag = np.abs(kernels.model_kernel_pairs(p, X, Y) - lag).max() / np.abs(lag).max()
    q = ModelParams(4, 0.1, 1)
    Xd = np.array([[0.3, 0.4], [0.5, -0.2], [0.6, 0.6]])
    Yd = np.array([[-0.2, 0.1], [0.1, 0.3], [0.2, 0.5]])
    exact = kernels.model_kernel_pairs(q, Xd, Yd)
    errs = []
    for n in (32, 48, 64):
        dm = pt.discretize_model(q, 2.0, n)
        errs.append(np.abs(dm.projector_kernel(Xd, Yd) - exact).max() / np.abs(exact).max())
    ok = rel_lag <= 1e-8 and errs[2] <= 0.05 and errs[0] > errs[1] > errs[2]
    ok = ok and time.perf_counter() - t0 < 300
    assert verdict(2, ok, f"zeta vs Laguerre {rel_lag:.2e}; eigensolver errs "
                          f"{errs[0]:.3f}/{errs[1]:.3f}/{errs[2]:.3f} at n=32/48/64", t0)


def _weyl_direct(V, h, z, n=400):
    # (2 pi h)^-2 * integral over |xi|^2 <= V of exp(i z.xi/h), polar Gauss-Legendre
    t, w = leggauss(n)
    R = math.sqrt(V)
    rho, wr = 0.5 * R * (t + 1), 0.5 * R * w
    th, wt = math.pi * (t + 1), math.pi * w
    ph = (z[0] * np.cos(th)[None, :] + z[1] * np.sin(th)[None, :]) * rho[:, None] / h
    return float(np.sum(wr[:, None] * rho[:, None] * wt[None, :] * np.cos(ph))) / (2 * math.pi * h) ** 2


def test_criterion_03_weyl_closed_form(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10):
        V, h = rng.uniform(0.5, 2.0), rng.uniform(0.1, 0.5)
        z = rng.uniform(-0.5, 0.5, 2)
        got = kernels.weyl_kernel(V, h, 0.0, np.eye(2), z, (0.0, 0.0))
        want = _weyl_direct(V, h, z)
        worst = max(worst, abs(got - want) / abs(want))
    ok = worst <= 1e-6 and time.perf_counter() - t0 < 10
    assert verdict(3, ok, f"max rel err {worst:.2e} over 10 samples", t0)


def test_criterion_04_dirac_cross_path(verdict):
    t0 = time.perf_counter()
    p = ModelParams(4.0, 0.1, 1.0)
    c = de.gaussian_cutoffs(0.25)
    kappas = (0.5, 1.0, 1.5)
    q = de.model_spec(p, c)
    base = kernels.LaguerreKernel(p)
    direct = de.dirac_energy_multi(base, [de.power_weight(k) for k in kappas], c, q)
    radial = [de.radial_dirac_energy(p, de.power_weight(k), c) for k in kappas]
    rel = [abs(a - b) / abs(b) for a, b in zip(direct, radial)]
    rng = np.random.default_rng(4)
    a, b, c0 = rng.normal(size=3)
    theta = lambda X: a * np.sin(3 * X[:, 0]) + b * X[:, 1] ** 2 + c0 * X[:, 0] * X[:, 1]  # noqa: E731
    twisted = lambda X, Y: np.exp(1j * (theta(X) - theta(Y))) * base(X, Y)  # noqa: E731
    w = de.power_weight(0.5)
    i0 = de.dirac_energy(base, w, c, q, check=False)
    i1 = de.dirac_energy(twisted, w, c, q, check=False)
    gauge = abs(i1 - i0) / abs(i0)
    positive = all(v > 0 for v in list(direct) + radial)
    ok = max(rel) <= 1e-3 and gauge <= 1e-10 and positive and time.perf_counter() - t0 < 300
    assert verdict(4, ok, "rel diff " + "/".join(f"{r:.1e}" for r in rel)
                   + f" at kappa 0.5/1/1.5; gauge {gauge:.1e}; positive={positive}", t0)


def test_criterion_05_remainder_order(verdict):
    t0 = time.perf_counter()
    # octave-spaced h with the spectral threshold midway between Landau levels
    cfg = hs.SweepConfig("dirac_gap", (2.0,), ladder=(2, 4, 8, 16), kappa=0.5)
    rows, fits = hs.sweep_dirac_gap(cfg)
    fit = fits[2.0]
    ok = (fit is not None and all(r["status"] == "ok" for r in rows)
          and abs(fit.exponent - 1.0) <= 0.3 and time.perf_counter() - t0 < 1200)
    hs_ = "/".join(f"{r['h']:.4f}" for r in rows)
    assert verdict(5, ok, f"exponent {fit.exponent:.3f} (r2 {fit.r_squared:.4f}) over h={hs_}", t0)


def test_criterion_06_duhamel(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(4, 13))
        A0 = herm(pt.random_hermitian(n, rng))
        nu, t, h = 0.2, 0.7, 0.3
        B = herm(pt.random_hermitian(n, rng, norm=nu))
        U = pt.propagator(herm(A0.entries + B.entries), t, h).entries
        for K in (1, 2, 3):
            S, _ = pt.duhamel_series(A0, B, t, h, K)
            worst = max(worst, np.linalg.norm(U - S.entries, 2) / pt.remainder_bound(nu, t, h, K))
    A0 = herm(pt.random_hermitian(8, rng))
    zero = max(np.abs(pt.duhamel_series(A0, herm(np.zeros((8, 8))), 0.9, 0.3, K)[0].entries
                      - pt.propagator(A0, 0.9, 0.3).entries).max() for K in (1, 2, 3))
    Q, _ = np.linalg.qr(rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)))
    A0c = herm(Q @ np.diag(rng.normal(size=8)) @ Q.conj().T)
    Bc = Q @ np.diag(0.3 * rng.normal(size=8)) @ Q.conj().T
    comm = 0.0
    for K in (1, 2, 3):
        S, _ = pt.duhamel_series(A0c, herm(Bc), 0.8, 0.5, K)
        taylor = sum(np.linalg.matrix_power(1.6j * Bc, k) / math.factorial(k) for k in range(K + 1))
        comm = max(comm, np.abs(S.entries - taylor @ pt.propagator(A0c, 0.8, 0.5).entries).max())
    ok = worst <= 1.0 and zero <= 1e-12 and comm <= 1e-12 and time.perf_counter() - t0 < 60
    assert verdict(6, ok, f"max err/bound {worst:.3f}; B=0 {zero:.1e}; commuting {comm:.1e}", t0)


def test_criterion_07_ladder(verdict):
    t0 = time.perf_counter()
    mu, h = 2.5, 0.08
    Z, Zs = pt.build_ladder(10, 2, mu, h)
    m = pt.interior_mask(10, 2)
    C = Zs.entries @ Z.entries - Z.entries @ Zs.entries
    comm = np.abs(C[np.ix_(m, m)] - 2 * mu * h * np.eye(m.sum())).max() / (2 * mu * h)
    A0 = herm(0.5 * Zs.entries @ Z.entries)
    heis = 0.0
    for t in (0.1, 1.7, 12.0):
        Zt = pt.heisenberg_evolve(A0, Z, t, h).entries
        heis = max(heis, np.abs((Zt - np.exp(1j * mu * t) * Z.entries)[np.ix_(m, m)]).max())
    ok = comm <= 1e-12 and heis <= 1e-9 and time.perf_counter() - t0 < 10
    assert verdict(7, ok, f"commutator {comm:.1e}; phase law {heis:.1e}", t0)


def test_criterion_08_classical_geometry(verdict):
    t0 = time.perf_counter()
    res = {}
    f = dyn.linear_field(12.0, 1.0, (0.1, 0.15))
    s = dyn.FlowState((0.0, 0.0), tuple(dyn.energy_preserving_xi(f, (0.0, 0.0))))
    tr = dyn.integrate_flow(f, s, 10 * dyn.cyclotron_period(f, (0, 0)))
    res["energy"] = float(np.abs(tr.H - tr.energy0).max())
    fc = dyn.constant_field(10.0)
    P = dyn.cyclotron_period(fc, (0, 0))
    sc = dyn.FlowState((0.0, 0.0), tuple(dyn.energy_preserving_xi(fc, (0.0, 0.0))))
    tc = dyn.integrate_flow(fc, sc, P)
    r = np.hypot(*(tc.x - tc.guiding_center[0]).T)
    res["radius"] = float(np.abs(r - 0.1).max())
    res["period"] = float(np.hypot(*(tc.x[-1] - tc.x[0])) / 0.1 + abs(P - 0.2 * math.pi))
    nominal, corrected = [], []
    for mu in (20.0, 40.0):
        fd = dyn.linear_field(mu, 1.0, (0.0, 0.1))
        sd = dyn.FlowState((0.0, 0.0), tuple(dyn.energy_preserving_xi(fd, (0.0, 0.0))))
        td = dyn.integrate_flow(fd, sd, 20 * dyn.cyclotron_period(fd, (0, 0)))
        vm = dyn.measured_drift(td)
        nominal.append(abs(np.hypot(*vm) / dyn.nominal_drift_speed(fd, (0, 0)) - 1))
        vp = dyn.drift_velocity(fd, (0, 0))
        corrected.append(np.hypot(*(vm - vp)) / np.hypot(*vp))
    counts, ratios, slopes = [], [], []
    for mu in (16, 32, 64):
        fl = dyn.linear_field(mu, 1.0, (0.0, 0.2))
        nw = 2 * int(math.ceil(2 * mu / (math.pi * 0.2))) + 12
        sl = dyn.FlowState((0.0, 0.0), tuple(dyn.energy_preserving_xi(fl, (0.0, 0.0))))
        tl = dyn.integrate_flow(fl, sl, (nw + 0.5) * dyn.cyclotron_period(fl, (0, 0)))
        ref = tl.n_windings // 2
        ev = dyn.self_intersections(tl, involving=[ref])
        counts.append(dyn.crossings_per_winding(ev, ref))
        for phi in (math.pi / 8, math.pi / 4, 3 * math.pi / 8):
            for n in (1, 2, 3):
                ratios.append(dyn.winding_distance(tl, phi, n, ref) * mu**2 / (n * math.sin(phi)))
        slopes.append(dyn.tick_regression(*dyn.tick_structure(tl, ref, ev))["slope"])
    expo = hs.fit_power_law(list(zip((16, 32, 64), counts))).exponent
    spread = max(ratios) / min(ratios)
    clauses = {
        "energy<=1e-9": res["energy"] <= 1e-9,
        "radius/period<=1e-6": res["radius"] <= 1e-6 and res["period"] <= 1e-6,
        "drift vs mu^-1|grad(V/F)| within 2%": max(nominal) <= 0.02,
        "count exponent 1+-0.15": abs(expo - 1.0) <= 0.15,
        "distance ratio within x4": spread <= 4.0,
        "tick slope 0.5+-0.1": all(abs(s - 0.5) <= 0.1 for s in slopes),
    }
    ok = all(clauses.values()) and time.perf_counter() - t0 < 600
    failed = [k for k, v in clauses.items() if not v]
    detail = (f"energy {res['energy']:.1e}; radius {res['radius']:.1e}; nominal-drift dev "
              f"{max(nominal):.1%}; corrected-drift dev {max(corrected):.2%}; count exponent {expo:.3f}; "
              f"ratio spread {spread:.2f}; tick slopes " + "/".join(f"{s:.2f}" for s in slopes)
              + (f"; failed: {', '.join(failed)}" if failed else ""))
    assert verdict(8, ok, detail, t0)


def test_criterion_09_regimes(verdict):
    t0 = time.perf_counter()
    th = regimes.thresholds(10, 1e-4, 2, delta=0.0)
    b = regimes.weak_boundary(1e-4)
    consistent = True
    for h in (1e-2, 1e-4, 1e-6):
        for mu in np.geomspace(0.5, 100, 60):
            br = regimes.remainder_estimate(mu, h, 1.0)["branch"]
            consistent &= br == {"weak": "b281", "intermediate": "b267",
                                 "strong": "none"}[regimes.regime_classify(mu, h)]
        consistent &= regimes.remainder_estimate(regimes.weak_boundary(h), h, 1.0)["branch"] == "b281"
        consistent &= regimes.remainder_estimate(
            math.nextafter(regimes.weak_boundary(h), 1e9), h, 1.0)["branch"] == "b267"
    ok = (th["T_star"] == 0.01 and abs(th["T2_star"] / 0.2096 - 1) <= 1e-3 and abs(b / 5.741 - 1) <= 1e-3
          and consistent and time.perf_counter() - t0 < 1)
    assert verdict(9, ok, f"T*={th['T_star']!r}, T2*={th['T2_star']:.6f}, weak boundary {b:.6f}; "
                          f"branches consistent={consistent}", t0)


def test_criterion_10_determinism(verdict, tmp_path):
    t0 = time.perf_counter()
    a = hs.rows_to_csv(hs.selftest(20240101))
    b = hs.rows_to_csv(hs.selftest(20240101))
    cfg = hs.SweepConfig("duhamel_residual", (4.0, 8.0, 16.0), instances=4, dim=6, K=2, seed=99)
    _, _, m1 = hs.run_config(cfg, str(tmp_path / "r1"), n_workers=1)
    _, _, m2 = hs.run_config(cfg, str(tmp_path / "r2"), n_workers=2)
    s1 = (tmp_path / "r1" / m1["outputs"]["csv"]).read_bytes()
    s2 = (tmp_path / "r2" / m2["outputs"]["csv"]).read_bytes()
    ok = a == b and s1 == s2 and len(s1) > 0
    assert verdict(10, ok, f"selftest identical={a == b}; sweep identical={s1 == s2}", t0)

"""Command line entry point: ``magdirac <subcommand> ...`` or ``python -m magdirac``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import dirac_energy as de
from . import dynamics as dyn
from . import harness, kernels, landau, regimes
from .errors import ConfigError, InvalidInputError, MagdiracError, NumericalError


def _pair(text):
    try:
        a, b = (float(t) for t in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}") from exc
    return (a, b)


def _emit(obj):
    print(json.dumps(harness._jsonable(obj), indent=2, sort_keys=True))


def cmd_levels(a):
    s = landau.ModelScalars(a.mu, a.h, f=a.F, V=a.V, tau=a.tau)
    n = landau.level_count(s)
    print(f"N = {n}")
    print(f"e_MW = {harness.fmt(landau.magnetic_weyl_density(s))}")
    print(f"weyl_diag = {harness.fmt(landau.weyl_density_diag(s))}")
    return 0


def cmd_kernel(a):
    p = kernels.ModelParams(a.mu, a.h, a.W, a.v)
    val = kernels.model_kernel(p, a.x, a.y)
    out = {"re": val.real, "im": val.imag, "abs": abs(val), "levels": p.level_count_at(a.x[1], a.y[1])}
    if a.v == 0:
        lag = kernels.LaguerreKernel(p)(np.array([a.x]), np.array([a.y]))[0]
        out["laguerre_re"], out["laguerre_im"] = lag.real, lag.imag
    _emit(out)
    return 0


def cmd_dirac(a):
    p = kernels.ModelParams(a.mu, a.h, a.W)
    c = de.gaussian_cutoffs(a.sigma)
    w = de.power_weight(a.kappa)
    t0 = time.perf_counter()
    q = de.model_spec(p, c, a.outer_order)
    kern = kernels.LaguerreKernel(p) if a.kernel == "laguerre" else kernels.ModelKernel(p)
    I = de.dirac_energy(kern, w, c, q, check=not a.no_check)
    out = {"I": I, "I_radial": de.radial_dirac_energy(p, w, c, check=not a.no_check),
           "I_weyl": de.weyl_reference(a.W, a.h, 0.0, np.eye(2), w, c, check=not a.no_check)}
    out["rel_gap"] = abs(out["I"] - out["I_weyl"]) / out["I_weyl"]
    out["wall_time_s"] = round(time.perf_counter() - t0, 3)
    _emit(out)
    return 0


def cmd_flow(a):
    f = dyn.linear_field(a.mu, a.V0, a.grad)
    x0 = (0.0, 0.0)
    xi = dyn.energy_preserving_xi(f, x0)
    T = a.windings * dyn.cyclotron_period(f, x0)
    tr = dyn.integrate_flow(f, dyn.FlowState(x0, tuple(xi)), T)
    out = {"windings": tr.n_windings, "energy_drift": float(np.abs(tr.H - tr.energy0).max()),
           "drift_measured": dyn.measured_drift(tr).tolist(),
           "drift_predicted": dyn.drift_velocity(f, x0).tolist(),
           "radius": dyn.cyclotron_radius(f, x0), "period": dyn.cyclotron_period(f, x0)}
    if a.intersections and tr.n_windings >= 3:
        ref = tr.n_windings // 2
        ev = dyn.self_intersections(tr, involving=[ref])
        out["crossings_on_reference"] = dyn.crossings_per_winding(ev, ref)
        if a.events:
            dyn.events_to_json(ev, a.events)
    if a.out:
        tr.to_csv(a.out)
    _emit(out)
    return 0


def cmd_sweep(a):
    cfg = harness.load_config(a.config)
    _, fits, manifest = harness.run_config(cfg, a.out)
    _emit({"outputs": manifest["outputs"], "fits": fits})
    return 0


def cmd_regimes(a):
    print(regimes.report(a.mu, a.h, a.m, a.kappa, a.delta).to_json())
    return 0


def cmd_selftest(a):
    t0 = time.perf_counter()
    rows = harness.selftest(a.seed)
    if a.out:
        harness.write_outputs(a.out, "selftest", rows, {}, {"seed": a.seed}, a.seed,
                              time.perf_counter() - t0)
    for r in rows:
        print(f"{'PASS' if r['pass'] else 'FAIL'}  {r['check']:<24} {harness.fmt(r['value'])}")
    return 0 if all(r["pass"] for r in rows) else 3


def build_parser():
    ap = argparse.ArgumentParser(prog="magdirac", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("levels", help="filled Landau levels and magnetic Weyl density")
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--V", type=float, default=1.0)
    s.add_argument("--F", type=float, default=1.0)
    s.add_argument("--tau", type=float, default=0.0)
    s.set_defaults(fn=cmd_levels)

    s = sub.add_parser("kernel", help="model spectral projector kernel at one pair")
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--W", type=float, default=1.0)
    s.add_argument("--v", type=float, default=0.0)
    s.add_argument("--x", type=_pair, default=(0.0, 0.0))
    s.add_argument("--y", type=_pair, default=(0.0, 0.0))
    s.set_defaults(fn=cmd_kernel)

    s = sub.add_parser("dirac", help="Dirac energy of the model against the Weyl reference")
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--W", type=float, default=1.0)
    s.add_argument("--kappa", type=float, default=0.5)
    s.add_argument("--sigma", type=float, default=0.25)
    s.add_argument("--outer-order", type=int, default=48)
    s.add_argument("--kernel", choices=("laguerre", "hermite"), default="laguerre")
    s.add_argument("--no-check", action="store_true")
    s.set_defaults(fn=cmd_dirac)

    s = sub.add_parser("flow", help="integrate the classical flow for a linear potential")
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--V0", type=float, default=1.0)
    s.add_argument("--grad", type=_pair, default=(0.0, 0.2))
    s.add_argument("--windings", type=float, default=10)
    s.add_argument("--intersections", action="store_true")
    s.add_argument("--events", help="JSON file for intersection events")
    s.add_argument("--out", help="trajectory CSV")
    s.set_defaults(fn=cmd_flow)

    s = sub.add_parser("sweep", help="run a configured parameter sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (default: output_path from the config)")
    s.set_defaults(fn=cmd_sweep)

    s = sub.add_parser("regimes", help="threshold scales, regime and remainder expressions")
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--kappa", type=float, default=1.0)
    s.add_argument("--delta", type=float, default=0.0)
    s.set_defaults(fn=cmd_regimes)

    s = sub.add_parser("selftest", help="fast invariant checks")
    s.add_argument("--seed", type=int, default=20240101)
    s.add_argument("--out", help="directory for selftest.csv and a manifest")
    s.set_defaults(fn=cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        return a.fn(a)
    except (ConfigError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except MagdiracError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


run_cli = main

if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Parameter sweeps, power-law fits and report files.

Sweep cells run in a process pool sized by ``MAGDIRAC_WORKERS`` (default: the
number of available CPUs); rows are sorted by grid index before writing, so
output files do not depend on scheduling.
"""
from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import dirac_energy as de
from . import dynamics as dyn
from . import kernels, landau, perturbation, regimes
from ._accel import backend
from .errors import ConfigError, InvalidInputError, MagdiracError

WORKERS_ENV = "MAGDIRAC_WORKERS"
QUANTITIES = ("dirac_gap", "kernel_trace", "drift_error", "intersection_count", "duhamel_residual")


def fmt(x) -> str:
    """Round-trip decimal text: 17 significant digits for floats."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


# ---------------------------------------------------------------------------
# power laws


@dataclass(frozen=True)
class PowerFit:
    exponent: float
    log_intercept: float
    r_squared: float
    n_points: int

    def predict(self, x):
        return np.exp(self.log_intercept) * np.asarray(x, float) ** self.exponent


def fit_power_law(points) -> PowerFit:
    """Least squares of log y = exponent * log x + intercept."""
    pts = np.asarray(points, float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise InvalidInputError("need at least three (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if not (np.all(np.isfinite(pts)) and np.all(x > 0) and np.all(y > 0)):
        raise InvalidInputError("power-law fit needs finite positive x and y")
    if len(np.unique(x)) != len(x):
        raise InvalidInputError("x values must be distinct")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    (k, b), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ np.array([k, b])
    ss = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss <= 1e-30 * max(1.0, float(np.sum(ly**2))) else 1.0 - float(np.sum(resid**2)) / ss
    return PowerFit(float(k), float(b), float(min(max(r2, 0.0), 1.0)), len(pts))


# ---------------------------------------------------------------------------
# configuration


def locked_ladder(mu: float, levels) -> list:
    """h = 1 / (mu (2N - 1/2)): the threshold sits midway between levels N-1 and N."""
    return [1.0 / (mu * (2 * n - 0.5)) for n in levels]


@dataclass(frozen=True)
class SweepConfig:
    quantity: str
    mus: tuple
    hs: tuple = ()
    ladder: tuple = ()
    kappa: float = 0.5
    W: float = 1.0
    cutoff: str = "gaussian"
    sigma: float = 0.25
    outer_order: int = 48
    angular_order: int = 32
    far_order: int = 96
    check: bool = True
    exact_kernel: str = "model"
    grad: tuple = (0.0, 0.2)
    V0: float = 1.0
    windings: int = 0
    instances: int = 20
    dim: int = 8
    K: int = 3
    seed: int = 20240101
    output_path: str = "sweep_out"

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ConfigError(f"unknown quantity {self.quantity!r}; choose from {QUANTITIES}")
        if not self.mus:
            raise ConfigError("the mu grid is empty")
        if self.quantity in ("dirac_gap", "kernel_trace"):
            if not self.hs and not self.ladder:
                raise ConfigError("give an h list or a mu*h-locked ladder")
            if self.hs and len(set(self.hs)) != len(self.hs):
                raise ConfigError("h values must be distinct")
        if self.exact_kernel not in ("model", "weyl"):
            raise ConfigError("exact_kernel must be 'model' or 'weyl'")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def grid(self):
        """(mu, h) cells in grid order."""
        out = []
        for mu in self.mus:
            hs = locked_ladder(mu, self.ladder) if self.ladder else list(self.hs)
            out.extend((float(mu), float(h)) for h in hs)
        return out

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


def _floats(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(t) for t in text.replace(",", " ").split())


def load_config(path) -> SweepConfig:
    """Read a sectioned key=value file ([sweep], [cutoffs], [quadrature], [flow], [duhamel])."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_parser(cp)


def parse_config(text: str) -> SweepConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return config_from_parser(cp)


_KEYS = {
    "sweep": {"quantity": str, "mu": _floats, "h": _floats, "ladder": _ints, "kappa": float,
              "W": float, "seed": int, "output_path": str, "exact_kernel": str, "check": "bool"},
    "cutoffs": {"kind": str, "sigma": float},
    "quadrature": {"outer_order": int, "angular_order": int, "far_order": int},
    "flow": {"grad": _floats, "V0": float, "windings": int},
    "duhamel": {"instances": int, "dim": int, "K": int},
}
_RENAME = {"mu": "mus", "h": "hs", "kind": "cutoff"}


def config_from_parser(cp: configparser.ConfigParser) -> SweepConfig:
    if "sweep" not in cp:
        raise ConfigError("config needs a [sweep] section")
    kw = {}
    for sec in cp.sections():
        if sec not in _KEYS:
            raise ConfigError(f"unknown section [{sec}]")
        spec = {k.lower(): (k, t) for k, t in _KEYS[sec].items()}
        for key, raw in cp.items(sec):
            if key not in spec:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            name, conv = spec[key]
            try:
                val = cp.getboolean(sec, key) if conv == "bool" else conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key} in [{sec}]: {raw!r}") from exc
            kw[_RENAME.get(name, name)] = val
    if "quantity" not in kw or "mus" not in kw:
        raise ConfigError("[sweep] needs quantity and mu")
    try:
        return SweepConfig(**kw)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc


def workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    if raw.strip():
        try:
            n = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
        if n < 1:
            raise ConfigError(f"{WORKERS_ENV} must be at least 1")
        return n
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


def run_cells(fn, tasks, n_workers: int | None = None) -> list:
    """Evaluate fn(task) for every task; the result list follows task order."""
    n_workers = workers() if n_workers is None else n_workers
    if n_workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(n_workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def _failed(row, exc):
    row["status"] = f"failed:{type(exc).__name__}"
    row["message"] = str(exc).replace("\n", " ")
    return row


# ---------------------------------------------------------------------------
# Dirac-energy gap


def _cutoffs(cfg: SweepConfig):
    if cfg.cutoff == "gaussian":
        return de.gaussian_cutoffs(cfg.sigma)
    if cfg.cutoff == "bump":
        return de.bump_cutoffs(cfg.sigma)
    raise ConfigError(f"unknown cutoff kind {cfg.cutoff!r}")


def _gap_cell(task):
    cfg, idx, mu, h = task
    row = {"index": idx, "mu": mu, "h": h, "kappa": cfg.kappa, "levels": "", "I_exact": math.nan,
           "I_weyl": math.nan, "gap": math.nan, "rel_gap": math.nan, "remainder": math.nan,
           "branch": "", "note": "log-factor" if cfg.kappa == 1.0 else "", "status": "ok",
           "message": ""}
    try:
        c = _cutoffs(cfg)
        w = de.power_weight(cfg.kappa)
        p = kernels.ModelParams(mu, h, cfg.W)
        row["levels"] = p.level_count_at()
        if cfg.exact_kernel == "model":
            q = de.model_spec(p, c, cfg.outer_order, angular_order=cfg.angular_order,
                              far_order=cfg.far_order)
            Ie = de.dirac_energy(kernels.LaguerreKernel(p), w, c, q, check=cfg.check)
        else:
            q = de.weyl_spec(cfg.W, h, c, outer_order=cfg.outer_order,
                             angular_order=cfg.angular_order)
            Ie = de.dirac_energy(kernels.WeylKernel(cfg.W, h), w, c, q, check=cfg.check)
        Iw = de.weyl_reference(cfg.W, h, 0.0, np.eye(2), w, c,
                               de.weyl_spec(cfg.W, h, c, outer_order=cfg.outer_order,
                                            angular_order=cfg.angular_order), check=cfg.check)
        row.update(I_exact=Ie, I_weyl=Iw, gap=abs(Ie - Iw), rel_gap=abs(Ie - Iw) / abs(Iw))
        if 0 < h < 1 and 0 < cfg.kappa < 2:
            est = regimes.remainder_estimate(mu, h, cfg.kappa)
            row.update(remainder=est["value"], branch=est["branch"])
    except MagdiracError as exc:
        return _failed(row, exc)
    return row


def _fits_by_mu(rows, x="h", y="rel_gap"):
    fits = {}
    for mu in sorted({r["mu"] for r in rows}):
        pts = [(r[x], r[y]) for r in rows
               if r["mu"] == mu and r["status"] == "ok" and r[y] > 0 and math.isfinite(r[y])]
        try:
            fits[mu] = fit_power_law(pts)
        except InvalidInputError:
            fits[mu] = None
    return fits


def sweep_dirac_gap(cfg: SweepConfig, n_workers: int | None = None):
    if cfg.quantity != "dirac_gap":
        raise ConfigError("sweep_dirac_gap needs quantity = dirac_gap")
    tasks = [(cfg, i, mu, h) for i, (mu, h) in enumerate(cfg.grid())]
    rows = sorted(run_cells(_gap_cell, tasks, n_workers), key=lambda r: r["index"])
    return rows, _fits_by_mu(rows)


# ---------------------------------------------------------------------------
# kernel trace and Duhamel residual (cheap diagnostics)


def _trace_cell(task):
    cfg, idx, mu, h = task
    row = {"index": idx, "mu": mu, "h": h, "levels": "", "diag": math.nan, "weyl_mw": math.nan,
           "rel_err": math.nan, "status": "ok", "message": ""}
    try:
        p = kernels.ModelParams(mu, h, cfg.W)
        val = kernels.model_kernel(p, (0.0, 0.0), (0.0, 0.0)).real
        ref = landau.magnetic_weyl_density(landau.ModelScalars(mu, h, V=cfg.W))
        row.update(levels=p.level_count_at(), diag=val, weyl_mw=ref,
                   rel_err=abs(val - ref) / ref if ref else abs(val))
    except MagdiracError as exc:
        return _failed(row, exc)
    return row


def _duhamel_cell(task):
    cfg, idx, mu, _ = task
    rng = np.random.default_rng([cfg.seed, idx])
    n = max(2, cfg.dim)
    h = 1.0 / mu
    worst = 0.0
    row = {"index": idx, "mu": mu, "K": cfg.K, "instances": cfg.instances, "max_ratio": math.nan,
           "status": "ok", "message": ""}
    try:
        for _ in range(cfg.instances):
            A0 = perturbation.OperatorMatrix.wrap(perturbation.random_hermitian(n, rng), basis="random")
            B = perturbation.OperatorMatrix.wrap(perturbation.random_hermitian(n, rng, norm=0.5 * h),
                                                 basis="random")
            t = 1.0
            S, _terms = perturbation.duhamel_series(A0, B, t, h, cfg.K)
            U = perturbation.propagator(
                perturbation.OperatorMatrix.wrap(A0.entries + B.entries, basis="random"), t, h)
            err = np.linalg.norm(U.entries - S.entries, 2)
            bound = perturbation.remainder_bound(0.5 * h, t, h, cfg.K)
            worst = max(worst, err / bound)
        row["max_ratio"] = worst
    except MagdiracError as exc:
        return _failed(row, exc)
    return row


# ---------------------------------------------------------------------------
# classical geometry


def _geometry_cell(task):
    cfg, idx, mu = task
    g = np.asarray(cfg.grad, float)
    gnorm = float(np.hypot(*g))
    row = {"index": idx, "mu": mu, "windings": 0, "drift_measured": math.nan,
           "drift_predicted": math.nan, "drift_nominal": math.nan, "drift_error": math.nan,
           "drift_error_nominal": math.nan, "crossings_per_winding": math.nan,
           "energy_drift": math.nan, "status": "ok", "message": ""}
    try:
        f = dyn.linear_field(mu, cfg.V0, tuple(g))
        x0 = (0.0, 0.0)
        xi = dyn.energy_preserving_xi(f, x0)
        period = dyn.cyclotron_period(f, x0)
        if cfg.windings > 0:
            nw = cfg.windings
        elif cfg.quantity == "intersection_count" and gnorm > 0:
            # the reference winding meets neighbours up to ~2 sqrt(V0) mu / (pi |grad V|) away
            nw = 2 * int(math.ceil(2 * math.sqrt(cfg.V0) * mu / (math.pi * gnorm))) + 12
        else:
            nw = 20
        tr = dyn.integrate_flow(f, dyn.FlowState(x0, tuple(xi)), (nw + 0.5) * period)
        row["windings"] = tr.n_windings
        row["energy_drift"] = float(np.abs(tr.H - tr.energy0).max())
        vm = dyn.measured_drift(tr)
        vp = dyn.drift_velocity(f, x0)
        vn = dyn.nominal_drift_speed(f, x0)
        row["drift_measured"] = float(np.hypot(*vm))
        row["drift_predicted"] = float(np.hypot(*vp))
        row["drift_nominal"] = vn
        if row["drift_predicted"] > 0:
            row["drift_error"] = float(np.hypot(*(vm - vp)) / row["drift_predicted"])
            row["drift_error_nominal"] = abs(row["drift_measured"] - vn) / vn
        else:
            row["drift_error"] = row["drift_measured"]
        if cfg.quantity == "intersection_count":
            ref = tr.n_windings // 2
            ev = dyn.self_intersections(tr, involving=[ref])
            row["crossings_per_winding"] = dyn.crossings_per_winding(ev, ref)
    except MagdiracError as exc:
        return _failed(row, exc)
    return row


def sweep_geometry(cfg: SweepConfig, n_workers: int | None = None):
    if cfg.quantity not in ("drift_error", "intersection_count"):
        raise ConfigError("sweep_geometry needs quantity drift_error or intersection_count")
    tasks = [(cfg, i, float(mu)) for i, mu in enumerate(cfg.mus)]
    rows = sorted(run_cells(_geometry_cell, tasks, n_workers), key=lambda r: r["index"])
    fit = None
    if cfg.quantity == "intersection_count":
        pts = [(r["mu"], r["crossings_per_winding"]) for r in rows
               if r["status"] == "ok" and r["crossings_per_winding"] > 0]
        try:
            fit = fit_power_law(pts)
        except InvalidInputError:
            fit = None
    return rows, fit


def run_sweep(cfg: SweepConfig, n_workers: int | None = None):
    """Dispatch on the configured quantity; returns (rows, fits) with fits keyed by mu or None."""
    if cfg.quantity == "dirac_gap":
        return sweep_dirac_gap(cfg, n_workers)
    if cfg.quantity in ("drift_error", "intersection_count"):
        rows, fit = sweep_geometry(cfg, n_workers)
        return rows, {"all": fit}
    if cfg.quantity == "kernel_trace":
        tasks = [(cfg, i, mu, h) for i, (mu, h) in enumerate(cfg.grid())]
        rows = sorted(run_cells(_trace_cell, tasks, n_workers), key=lambda r: r["index"])
        return rows, {}
    tasks = [(cfg, i, float(mu), None) for i, mu in enumerate(cfg.mus)]
    rows = sorted(run_cells(_duhamel_cell, tasks, n_workers), key=lambda r: r["index"])
    return rows, {}


# ---------------------------------------------------------------------------
# output files


def rows_to_csv(rows) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    cols = list(rows[0].keys())
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(cols)
    for r in rows:
        wr.writerow([fmt(r[c]) for c in cols])
    return buf.getvalue()


def rows_to_dat(rows) -> str:
    """Whitespace columns with a '#' header; text fields become quoted tokens."""
    if not rows:
        return ""
    cols = list(rows[0].keys())
    lines = ["# " + " ".join(cols)]
    for r in rows:
        cells = []
        for c in cols:
            v = r[c]
            if isinstance(v, str):
                cells.append('"' + v.replace('"', "'") + '"' if v else '"-"')
            else:
                cells.append(fmt(v))
        lines.append(" ".join(cells))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, PowerFit):
        return _jsonable(asdict(obj))
    if isinstance(obj, (float, np.floating, int, np.integer)) and not isinstance(obj, bool):
        return fmt(obj)
    return obj


def versions() -> dict:
    import numba
    import scipy

    from . import __version__
    return {"magdirac": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "backend": backend()}


def write_outputs(outdir, stem: str, rows, fits, config: dict, seed: int, wall: float) -> dict:
    """CSV, .dat, fits JSON and a manifest; returns the manifest dict."""
    os.makedirs(outdir, exist_ok=True)
    files = {}
    for ext, text in (("csv", rows_to_csv(rows)), ("dat", rows_to_dat(rows))):
        path = os.path.join(outdir, f"{stem}.{ext}")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        files[ext] = os.path.basename(path)
    fit_path = os.path.join(outdir, f"{stem}_fits.json")
    with open(fit_path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable({str(k): v for k, v in (fits or {}).items()}), fh, indent=2, sort_keys=True)
        fh.write("\n")
    files["fits"] = os.path.basename(fit_path)
    manifest = {"config": _jsonable(config), "seed": fmt(seed), "versions": versions(),
                "wall_time_s": f"{wall:.3f}", "outputs": files,
                "workers": fmt(workers())}
    with open(os.path.join(outdir, f"{stem}_manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def run_config(cfg: SweepConfig, outdir: str | None = None, n_workers: int | None = None):
    t0 = time.perf_counter()
    rows, fits = run_sweep(cfg, n_workers)
    wall = time.perf_counter() - t0
    outdir = outdir or cfg.output_path
    manifest = write_outputs(outdir, cfg.quantity, rows, fits, cfg.to_dict(), cfg.seed, wall)
    return rows, fits, manifest


# ---------------------------------------------------------------------------
# self test


def _check(name, value, ok):
    return {"check": name, "value": float(value), "pass": bool(ok)}


def selftest(seed: int = 20240101) -> list:
    """Fast invariant checks across the modules; rows are deterministic for a given seed."""
    from . import specfun

    rng = np.random.default_rng(seed)
    out = []
    # Hermite orthonormality by Gauss-Hermite quadrature
    rule = specfun.make_rule("gauss_hermite", 80)
    x, w = rule.on_line()
    H = specfun.hermite_table(40, x)
    gram = (H * w) @ H.T
    out.append(_check("hermite_orthonormality", np.abs(gram - np.eye(41)).max(),
                      np.abs(gram - np.eye(41)).max() < 1e-12))
    # Bessel J1 against its series at a few points
    z = rng.uniform(0.1, 30.0, 8)
    from scipy.special import j1
    err = np.abs(specfun.bessel_j1_array(z) - j1(z)).max()
    out.append(_check("bessel_j1", err, err < 1e-13))
    # trace identity for the model kernel
    worst = 0.0
    for mu, h in ((1.0, 0.1), (4.0, 0.05), (10.0, 0.02), (2.0, 0.5)):
        p = kernels.ModelParams(mu, h, 1.0)
        val = kernels.model_kernel(p, (0.0, 0.0), (0.0, 0.0)).real
        ref = landau.magnetic_weyl_density(landau.ModelScalars(mu, h))
        worst = max(worst, abs(val - ref) / ref)
    out.append(_check("trace_identity", worst, worst < 1e-8))
    # zeta route against the Laguerre closed form
    p = kernels.ModelParams(4.0, 0.05, 1.0)
    X = rng.uniform(-0.3, 0.3, (6, 2))
    Y = rng.uniform(-0.3, 0.3, (6, 2))
    a = kernels.model_kernel_pairs(p, X, Y)
    b = kernels.LaguerreKernel(p)(X, Y)
    rel = np.abs(a - b).max() / np.abs(b).max()
    out.append(_check("zeta_vs_laguerre", rel, rel < 1e-8))
    # ladder commutator and Heisenberg law
    Z, Zs = perturbation.build_ladder(8, 1, 2.0, 0.1)
    comm = Zs.entries @ Z.entries - Z.entries @ Zs.entries
    m = perturbation.interior_mask(8)
    d = np.abs(np.diag(comm)[m] - 0.4).max()
    out.append(_check("ladder_commutator", d, d < 1e-12))
    # Duhamel bound on a seeded instance
    A0 = perturbation.OperatorMatrix.wrap(perturbation.random_hermitian(6, rng), basis="random")
    B = perturbation.OperatorMatrix.wrap(perturbation.random_hermitian(6, rng, norm=0.05), basis="random")
    S, _ = perturbation.duhamel_series(A0, B, 1.0, 0.1, 2)
    U = perturbation.propagator(perturbation.OperatorMatrix.wrap(A0.entries + B.entries, basis="random"),
                                1.0, 0.1)
    ratio = np.linalg.norm(U.entries - S.entries, 2) / perturbation.remainder_bound(0.05, 1.0, 0.1, 2)
    out.append(_check("duhamel_bound", ratio, ratio <= 1.0))
    # constant-field cyclotron circle
    f = dyn.constant_field(10.0)
    xi = dyn.energy_preserving_xi(f, (0.0, 0.0))
    tr = dyn.integrate_flow(f, dyn.FlowState((0.0, 0.0), tuple(xi)), dyn.cyclotron_period(f, (0, 0)))
    rad = np.abs(np.hypot(*(tr.x - tr.guiding_center[0]).T) - 0.1).max()
    out.append(_check("cyclotron_radius", rad, rad < 1e-8))
    # regime worked example
    T = regimes.thresholds(10.0, 1e-4, 2, 0.0)["T_star"]
    out.append(_check("regime_T_star", T, abs(T - 0.01) < 1e-15))
    fit = fit_power_law([(1, 3), (2, 3 * 2**1.5), (4, 3 * 8.0), (8, 3 * 8**1.5)])
    out.append(_check("power_fit", fit.exponent, abs(fit.exponent - 1.5) < 1e-12))
    return out


__all__ = ["PowerFit", "fit_power_law", "SweepConfig", "locked_ladder", "load_config", "parse_config",
           "sweep_dirac_gap", "sweep_geometry", "run_sweep", "run_config", "rows_to_csv",
           "rows_to_dat", "write_outputs", "selftest", "workers"]

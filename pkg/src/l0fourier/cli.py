"""Command-line front end.

    l0fourier selftest
    l0fourier solve --input r.csv --M 129 --T 2 --method el0m --beta ... --out DIR
    l0fourier score --input u.csv --reference gaussian
    l0fourier experiment table2 --out DIR
    l0fourier helmholtz --frequency 10 --velocity 1500 --out DIR

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .evaluation import (SCENARIOS, GaussianSetup, aligned_snr, run_homogeneous,
                         run_layered, run_table1, run_table2, run_table3, snr)
from .operators import MeasurementOperator
from .regularization import RegParams
from .seismic import (IDFT, L1M, EL0M, HelmholtzProblem, TimeGrid, VelocityModel,
                      greens_2d, helmholtz_solve, interior, reconstruct)
from .solvers import NumericalError, SolverConfig

log = logging.getLogger("l0fourier")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

EXPERIMENTS = ("table1", "table2", "table3", "homogeneous-ricker", "homogeneous-gaussian",
               "layered")

# key -> (type, default); flags are --key, config files use the same keys
KEYS = {
    "beta": (float, None),
    "gamma": (float, None),
    "tol": (float, 1e-6),
    "max_iter": (int, None),
    "levels": (int, None),
    "fmin": (float, None),
    "fmax": (str, None),
    "T": (float, None),
    "M": (int, None),
    "seed": (int, 2024),
    "sigma": (str, None),
    "method": (str, None),
    "mode": (str, "fast"),
    "input": (str, None),
    "reference": (str, None),
    "t0": (float, 1.0),
    "alpha": (float, 200.0),
    "frequency": (float, 10.0),
    "velocity": (float, 1500.0),
    "model": (str, "homogeneous"),
    "nx": (int, 201),
    "nz": (int, 201),
    "h": (float, 10.0),
    "source": (str, "1000,1000"),
    "amplitude": (float, 1.0),
    "pml": (int, 20),
    "scheme": (str, "optimized"),
    "depths": (str, "600,1300"),
    "svg": (str, None),
    "timings": (int, 0),
    "allow_nonconverged": (int, 0),
}


class ValidationError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="l0fourier", description="Sparse inversion of incomplete Fourier data.")
    p.add_argument("command", choices=("selftest", "solve", "score", "experiment", "helmholtz"))
    p.add_argument("name", nargs="?", help="experiment name")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--config", help="JSON file of key/value defaults")
    p.add_argument("-v", "--verbose", action="store_true")
    for key, (typ, _) in KEYS.items():
        p.add_argument(f"--{key}", dest=key, type=typ, default=None)
    return p


def effective_config(args) -> dict:
    """Flags override config-file keys, which override defaults."""
    cfg = {k: d for k, (_, d) in KEYS.items()}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file: {exc}") from None
        if not isinstance(data, dict):
            raise ValidationError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(KEYS))
        if unknown:
            raise ValidationError(f"unknown config key(s): {', '.join(unknown)}")
        for k, v in data.items():
            try:
                cfg[k] = None if v is None else KEYS[k][0](v)
            except (TypeError, ValueError):
                raise ValidationError(f"config key {k!r}: bad value {v!r}") from None
    for k in KEYS:
        v = getattr(args, k)
        if v is not None:
            cfg[k] = v
    return cfg


def _floats(text, name) -> list:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"--{name} expects comma-separated numbers") from None


def _point(text, name) -> tuple:
    vals = _floats(text, name)
    if len(vals) != 2:
        raise ValidationError(f"--{name} expects x,z")
    return tuple(vals)


# --------------------------------------------------------------------------- selftest

def _suite_operators() -> list:
    from .operators import (FrameletSystem, build_band_plan, framelet_analysis,
                            framelet_synthesis, k_adjoint, k_apply, normal_solve)
    rng = np.random.default_rng(7)
    out = []
    for M in (8, 32, 129):
        for levels in (1, 2, 3):
            fw = FrameletSystem(M, levels)
            v = rng.normal(size=M)
            out.append((f"W*W=I M={M} L={levels}",
                        np.allclose(framelet_synthesis(fw, framelet_analysis(fw, v)), v,
                                    rtol=0, atol=1e-12)))
        plan = build_band_plan(M, 1.0, 1.0, float((M - 1) // 4))
        op = MeasurementOperator.build(plan, 2)
        y = rng.normal(size=op.N)
        w = k_apply(op, rng.normal(size=op.N))
        out.append((f"KK*=I M={M}", np.allclose(k_apply(op, k_adjoint(op, w)), w, atol=1e-10)))
        g = op.gram(y)
        out.append((f"K*K idempotent M={M}", np.allclose(op.gram(g), g, atol=1e-10)))
        z = rng.normal(size=op.d) + 1j * rng.normal(size=op.d)
        lhs = np.vdot(z, k_apply(op, y))
        rhs = np.vdot(k_adjoint(op, z) + 1j * _imag_adjoint(op, z), y)
        out.append((f"adjoint pairing M={M}", abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))))
        x = normal_solve(op, 0.7, y)
        out.append((f"normal solve M={M}", np.allclose(x + 0.7 * op.gram(x), y, atol=1e-10)))
    return out


def _imag_adjoint(op, z):
    from .operators import dft_adjoint, framelet_analysis, select_adjoint
    v = dft_adjoint(op.spec, select_adjoint(op.plan, z)).imag
    return framelet_analysis(op.framelet, np.ascontiguousarray(v))


def _suite_prox() -> list:
    from .regularization import env_l0, prox_l0, soft_threshold
    rng = np.random.default_rng(11)
    out = []
    grid = np.linspace(-6, 6, 24001)
    for i in range(200):
        z = rng.normal(scale=2.0)
        beta = rng.uniform(0.05, 3.0)
        gam = rng.uniform(0.05, 2.0)
        obj0 = (grid - z) ** 2 / (2 * beta) + (grid != 0)
        x0 = float(prox_l0(np.array([z]), beta)[0])
        v0 = (x0 - z) ** 2 / (2 * beta) + (x0 != 0)
        ok0 = v0 <= obj0.min() + 1e-9 and v0 <= z * z / (2 * beta) + 1e-12
        obj1 = (grid - z) ** 2 / 2 + gam * np.abs(grid)
        x1 = float(soft_threshold(np.array([z]), gam)[0])
        ok1 = (x1 - z) ** 2 / 2 + gam * abs(x1) <= obj1.min() + 1e-9
        env = env_l0(np.array([z]), beta)
        ok2 = abs(env - min(obj0.min(), z * z / (2 * beta))) <= 1e-6
        out.append((f"prox case {i}", bool(ok0 and ok1 and ok2)))
    return out


def cmd_selftest(cfg, out: Path) -> int:
    failed = 0
    for name, suite in (("operators", _suite_operators), ("prox", _suite_prox)):
        results = suite()
        bad = [n for n, ok in results if not ok]
        print(f"{name}: {len(results) - len(bad)}/{len(results)} passed")
        for n in bad:
            print(f"  FAIL {n}")
        failed += len(bad)
    return EXIT_OK if failed == 0 else EXIT_INVALID


# --------------------------------------------------------------------------- solve / score

def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ValidationError("missing " + ", ".join(f"--{k}" for k in missing))


def cmd_solve(cfg, out: Path) -> int:
    _require(cfg, "input", "M", "T")
    M, T = cfg["M"], cfg["T"]
    grid = TimeGrid(T, M)
    plan, r = io.read_measurements(cfg["input"], M, T)
    method = (cfg["method"] or "el0m").lower()
    levels = cfg["levels"] or 3
    max_iter = cfg["max_iter"] or 5000
    op = MeasurementOperator.build(plan, levels)
    if method == "idft":
        m = IDFT()
    elif method == "l1m":
        _require(cfg, "gamma")
        m = L1M(cfg["gamma"], cfg["tol"], max_iter)
    elif method == "el0m":
        _require(cfg, "beta", "gamma")
        m = EL0M(SolverConfig(RegParams(cfg["beta"], cfg["gamma"]), tol=cfg["tol"],
                              max_iter=max_iter))
    else:
        raise ValidationError(f"unknown method {method!r}")
    rec = reconstruct(r, plan, grid, op.framelet, m)
    u = rec.seismogram.samples
    out.mkdir(parents=True, exist_ok=True)
    io.write_signal(out / "reconstruction.csv", grid.times(), u)
    trace = rec.trace
    if method == "el0m":
        trace.to_csv(out / "trace.csv")
    elif method == "l1m":
        io.write_csv(out / "trace.csv", ("iter", "objective", "rel_change", "support_size"),
                     ((k + 1, float(o), float(c), int(s)) for k, (o, c, s) in
                      enumerate(zip(trace.objective, trace.rel_change, trace.support_sizes))))
    if cfg["svg"]:
        io.write_svg(out / cfg["svg"], grid.times(), {method.upper(): u}, title="reconstruction")
    if trace is not None and not trace.converged:
        msg = f"{method} did not converge within {max_iter} iterations"
        if not cfg["allow_nonconverged"]:
            print(msg, file=sys.stderr)
            return EXIT_NUMERIC
        log.warning(msg)
    print(f"wrote {out / 'reconstruction.csv'} ({rec.iterations} iterations)")
    return EXIT_OK


def _reference(cfg, t):
    ref = cfg["reference"]
    if ref == "gaussian":
        from .seismic import gaussian_deriv
        return gaussian_deriv(t, cfg["t0"], cfg["alpha"])
    t_ref, u_ref = io.read_signal(ref)
    if t_ref.shape != t.shape or not np.allclose(t_ref, t, rtol=0, atol=1e-9):
        raise ValidationError("reference and reconstruction sample different times")
    return u_ref


def cmd_score(cfg, out: Path) -> int:
    _require(cfg, "input", "reference")
    t, u = io.read_signal(cfg["input"])
    ref = _reference(cfg, t)
    raw = float(snr(ref, u))
    al, lag, gain = aligned_snr(ref, u, 5, fit_gain=True)
    al, gain = float(al), float(gain)
    print(f"snr_db {raw!r}")
    print(f"aligned_snr_db {al!r} lag {lag} gain {gain!r}")
    return EXIT_OK


# --------------------------------------------------------------------------- experiments

def _emit_report(rep, out: Path, cfg):
    out.mkdir(parents=True, exist_ok=True)
    rep.to_csv(out / f"{rep.experiment}_report.csv", timings=bool(cfg["timings"]))
    io.write_csv(out / f"{rep.experiment}_signals.csv",
                 ("case", "trial", "method", "n", "orig", "reco"), rep.signal_rows())
    print(rep.summary())


def _overlays(rep, out: Path, grid: TimeGrid, cases):
    """One SVG per case: reference against each method (trial 0)."""
    for case in cases:
        series = {}
        for (c, trial, method), (orig, reco) in rep.signals.items():
            if c == case and trial == 0:
                series.setdefault("original", orig)
                series[method] = reco
        if series:
            name = "".join(ch if ch.isalnum() or ch in ".-" else "_" for ch in case)
            io.write_svg(out / f"{rep.experiment}_{name}.svg", grid.times(), series, title=case)


def cmd_experiment(cfg, name, out: Path) -> int:
    if name not in EXPERIMENTS:
        raise ValidationError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    seed = cfg["seed"]
    fmax = _floats(cfg["fmax"], "fmax") if cfg["fmax"] else None
    if name == "table2":
        rep = run_table2(**({"fmax_values": tuple(fmax)} if fmax else {}))
        _emit_report(rep, out, cfg)
        _overlays(rep, out, GaussianSetup().grid, rep.cases())
        _dump_table2_inputs(out, fmax)
    elif name == "table1":
        _emit_report(run_table1(seed), out, cfg)
    elif name == "table3":
        sig = tuple(_floats(cfg["sigma"], "sigma")) if cfg["sigma"] else (0.1, 0.3, 0.5)
        if any(s < 0 for s in sig):
            raise ValidationError("sigma must be nonnegative")
        kw = {"fmax_values": tuple(fmax)} if fmax else {}
        _emit_report(run_table3(seed, sig, **kw), out, cfg)
    elif name.startswith("homogeneous-"):
        scen = name.split("-", 1)[1]
        if cfg["mode"] not in ("fast", "fd"):
            raise ValidationError("--mode must be fast or fd")
        rep = run_homogeneous(scen, fmax, mode=cfg["mode"])
        _emit_report(rep, out, cfg)
        _overlays(rep, out, SCENARIOS[scen].grid,
                  [c for c in rep.cases() if "metric=aligned" in c])
    else:
        methods = ("IDFT", "L1M", "EL0M")
        if cfg["method"]:
            methods = tuple(m.strip().upper() for m in cfg["method"].split(","))
            bad = [m for m in methods if m not in ("IDFT", "L1M", "EL0M")]
            if bad:
                raise ValidationError(f"unknown method(s) {', '.join(bad)}")
        f = fmax[0] if fmax else 30.0
        if f not in (60.0, 42.0, 36.0, 30.0):
            log.warning("f_max %g is outside the documented set {60, 42, 36, 30}", f)
        res = run_layered(f, methods=methods)
        out.mkdir(parents=True, exist_ok=True)
        for method, rec in res.records.items():
            stem = out / f"layered_f{f:g}_{method.lower()}"
            io.write_pgm(stem.with_suffix(".pgm"), rec.data)
            io.write_grid(stem.with_suffix(".csv"), rec.data, [p[0] for p in rec.receivers],
                          rec.grid.times())
        res.report.to_csv(out / "layered_report.csv", timings=bool(cfg["timings"]))
        print(res.report.summary())
        print(f"degenerate model matches homogeneous pipeline: {res.degenerate_match}")
    io.write_config(out / f"{name}_config.json", dict(cfg, command="experiment", name=name))
    return EXIT_OK


def _dump_table2_inputs(out: Path, fmax):
    from .evaluation import TABLE2_FMAX
    from .operators import build_band_plan
    setup = GaussianSetup()
    for f in fmax or TABLE2_FMAX:
        plan = build_band_plan(setup.M, setup.T, setup.f_min, f)
        io.write_measurements(out / f"table2_fmax{f:g}_measurements.csv", plan,
                              setup.data(plan))


# --------------------------------------------------------------------------- helmholtz

def cmd_helmholtz(cfg, out: Path) -> int:
    nx, nz, h = cfg["nx"], cfg["nz"], cfg["h"]
    if cfg["model"] == "homogeneous":
        model = VelocityModel.homogeneous(cfg["velocity"], nx, nz, h)
    elif cfg["model"] == "layered":
        model = VelocityModel.three_layer(nx, nz, h, tuple(_floats(cfg["depths"], "depths")))
    else:
        raise ValidationError("--model must be homogeneous or layered")
    src = _point(cfg["source"], "source")
    prob = HelmholtzProblem(model, cfg["frequency"], src, cfg["amplitude"],
                            pml_width=cfg["pml"], scheme=cfg["scheme"])
    field = interior(prob, helmholtz_solve(prob))
    out.mkdir(parents=True, exist_ok=True)
    x = model.x0 + h * np.arange(nx)
    z = model.z0 + h * np.arange(nz)
    io.write_grid(out / "field_real.csv", field.real, x, z)
    io.write_grid(out / "field_imag.csv", field.imag, x, z)
    io.write_pgm(out / "field_magnitude.pgm", np.abs(field), symmetric=False)
    if cfg["model"] == "homogeneous" and cfg["amplitude"] != 0:
        rel, ph = greens_check(prob, field)
        print(f"Green's function check ({rel.size} receivers): "
              f"max relative magnitude error {rel.max():.4g}, max phase error {ph.max():.4g} rad")
    io.write_config(out / "helmholtz_config.json", dict(cfg, command="helmholtz"))
    return EXIT_OK


def greens_check(prob: HelmholtzProblem, field, min_src: float = 300.0,
                 min_edge: float = 200.0):
    """Relative magnitude and phase errors against the free-space Green's function,
    at nodes at least ``min_src`` from the source and ``min_edge`` from the PML."""
    m = prob.model
    xs = m.x0 + m.h * np.arange(m.nx)
    zs = m.z0 + m.h * np.arange(m.nz)
    X, Z = np.meshgrid(xs, zs)
    r = np.hypot(X - prob.source[0], Z - prob.source[1])
    edge = np.minimum.reduce([X - xs[0], xs[-1] - X, Z - zs[0], zs[-1] - Z])
    sel = (r >= min_src) & (edge >= min_edge)
    kappa = 2 * np.pi * prob.frequency / float(m.velocity.min())
    ref = prob.amplitude * greens_2d(kappa, r[sel], prob.convention)
    got = field[sel]
    rel = np.abs(np.abs(got) - np.abs(ref)) / np.abs(ref)
    ph = np.abs(np.angle(got / ref))
    return rel, ph


# --------------------------------------------------------------------------- entry point

def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = effective_config(args)
        out = Path(args.out)
        if args.command != "experiment" and args.name:
            raise ValidationError(f"unexpected argument {args.name!r}")
        if args.command == "selftest":
            return cmd_selftest(cfg, out)
        if args.command == "solve":
            return cmd_solve(cfg, out)
        if args.command == "score":
            return cmd_score(cfg, out)
        if args.command == "experiment":
            if not args.name:
                raise ValidationError("experiment needs a name")
            return cmd_experiment(cfg, args.name, out)
        return cmd_helmholtz(cfg, out)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

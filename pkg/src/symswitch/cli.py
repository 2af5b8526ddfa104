"""Command-line driver.

Exit codes
----------
0  every requested point succeeded
1  partial failure: some grid or sweep points failed, the rest were written
2  configuration or usage error
3  numerical failure (eigensolver, consistency or symmetry refusal)
4  I/O error
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, fcs, symmetry, trajectory
from .config import RunConfig, content_hash, example_config, grid_values, load_config
from .errors import (
    ConfigurationError,
    ConsistencyError,
    DenseLimitError,
    EigensolverError,
    SymmetryError,
)
from .model import build_model, model_summary
from .output import envelope, plot_svg, read_csv, write_csv, write_json
from .presets import PRESETS

log = logging.getLogger("symswitch")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4


def _model(cfg: RunConfig, params=None):
    return build_model(params or cfg.params, cfg.mode_spec)


def _curves(cfg: RunConfig):
    out = [("primary", cfg.params)]
    if cfg.compare is not None:
        out.append(("compare", cfg.compare))
    return out


def _theta_rows(m, grid, cfg: RunConfig):
    rows, failed = [], 0
    for s in grid:
        try:
            v = fcs.theta(m, s, **cfg.solver_kw())
            rows.append((s, v.theta, v.residual, "ok"))
        except (fcs.EigensolverError, DenseLimitError) as exc:
            failed += 1
            rows.append((s, None, getattr(exc, "residual", None), f"failed: {exc}"))
    return rows, failed


def _curve_from_rows(rows, params) -> fcs.LdfCurve:
    ok = [r for r in rows if r[3] == "ok"]
    return fcs.LdfCurve(
        tuple(r[0] for r in ok), tuple(r[1] for r in ok), tuple(r[2] for r in ok), params
    )


def cmd_theta(cfg: RunConfig, args) -> int:
    started = time.time()
    grid = cfg.s_grid
    csv_rows, summary, series, failed = [], {}, [], 0
    for name, params in _curves(cfg):
        m = _model(cfg, params)
        rows, nfail = _theta_rows(m, grid, cfg)
        failed += nfail
        csv_rows += [(name, *r) for r in rows]
        curve = _curve_from_rows(rows, params.to_dict())
        kink = fcs.detect_kink(curve, cfg.numerics["kink_rtol"]) if len(curve) > 1 and curve.s[0] < 0 < curve.s[-1] else None
        summary[name] = {
            "params": params.to_dict(),
            "n_points": len(rows),
            "n_failed": nfail,
            "kink": None if kink is None else {"slope_left": kink[0], "slope_right": kink[1], "detected": kink[2]},
        }
        series.append((name, list(curve.s), list(curve.theta)))
    out = cfg.output_dir
    write_csv(out / "theta.csv", "theta", ("curve", "s", "theta", "residual", "status"), csv_rows)
    write_json(out / "theta.envelope.json", envelope("theta", summary, cfg.snapshot(), cfg.content_hash(), started))
    if cfg.output.get("svg"):
        plot_svg(out / "theta.svg", series, xlabel="s", ylabel="theta(s) [g]")
    for name, info in summary.items():
        k = info["kink"]
        print(f"{name}: {info['n_points']} points, kink={'n/a' if k is None else k['detected']}")
    return EXIT_PARTIAL if failed else EXIT_OK


def _read_theta_csv(path) -> dict[str, fcs.LdfCurve]:
    schema, rows = read_csv(path)
    if schema is None or not schema.startswith("symswitch/theta/"):
        raise ConfigurationError(f"{path} is not a theta CSV (schema {schema!r})")
    by_curve: dict[str, list] = {}
    for r in rows:
        if r["status"] != "ok":
            continue
        by_curve.setdefault(r["curve"], []).append((float(r["s"]), float(r["theta"]), float(r["residual"] or 0), "ok"))
    return {k: _curve_from_rows(sorted(v), {"source": str(path)}) for k, v in by_curve.items()}


def _default_q_grid(curve: fcs.LdfCurve, n: int = 201):
    s, t = np.asarray(curve.s), np.asarray(curve.theta)
    q_lo = -(t[-1] - t[-2]) / (s[-1] - s[-2])
    q_hi = -(t[1] - t[0]) / (s[1] - s[0])
    return list(np.linspace(q_lo, q_hi, n))


def cmd_gq(cfg: RunConfig, args) -> int:
    started = time.time()
    if args.source:
        curves = _read_theta_csv(args.source)
    else:
        curves = {}
        for name, params in _curves(cfg):
            rows, failed = _theta_rows(_model(cfg, params), cfg.s_grid, cfg)
            if failed:
                raise EigensolverError(f"{failed} theta point(s) failed for curve {name}")
            curves[name] = _curve_from_rows(rows, params.to_dict())
    rows, summary, series = [], {}, []
    for name, curve in curves.items():
        q_grid = grid_values(cfg.numerics["q_grid"]) if cfg.numerics.get("q_grid") else _default_q_grid(curve)
        gq = fcs.legendre(curve, q_grid, kink_rtol=cfg.numerics["kink_rtol"])
        gap = gq.nonrecoverable
        for q, G in gq.rows():
            flag = gap is not None and gap[0] < q < gap[1]
            rows.append((name, q, G, flag))
        k = int(np.argmax(gq.G))
        summary[name] = {"max_G": gq.G[k], "q_at_max": gq.q[k], "nonrecoverable": gap, "clipped": gq.clipped, "provenance": gq.provenance}
        series.append((name, list(gq.q), list(gq.G)))
        print(f"{name}: max G = {gq.G[k]:.3e} at q = {gq.q[k]:.6g}" + (f", non-recoverable q in {gap}" if gap else ""))
    out = cfg.output_dir
    write_csv(out / "gq.csv", "gq", ("curve", "q", "G", "nonrecoverable"), rows)
    write_json(out / "gq.envelope.json", envelope("gq", summary, cfg.snapshot(), cfg.content_hash(), started))
    if cfg.output.get("svg"):
        plot_svg(out / "gq.svg", series, xlabel="q [g]", ylabel="G(q) [g]")
    return EXIT_OK


def _stats_dict(cs: fcs.CurrentStats, method: str) -> dict:
    return {
        "q_mean": cs.q_mean,
        "q_max": cs.q_max,
        "q_min": cs.q_min,
        "alpha": cs.alpha,
        "alpha_infinite": cs.alpha_infinite,
        "variance": cs.variance,
        "kink": cs.kink,
        "ds": cs.ds,
        "step_ratio": cs.step_ratio,
        "method": method,
    }


def _current(cfg: RunConfig, params) -> fcs.CurrentStats:
    n = cfg.numerics
    return fcs.current_stats(
        _model(cfg, params), n["ds"], slope_method=n["current_method"], ratio=n["step_ratio"],
        kink_rtol=n["kink_rtol"], zero_threshold=n.get("zero_threshold"), **cfg.solver_kw()
    )


def cmd_current(cfg: RunConfig, args) -> int:
    started = time.time()
    payload = {name: _stats_dict(_current(cfg, p), cfg.numerics["current_method"]) for name, p in _curves(cfg)}
    write_json(cfg.output_dir / "current.json", envelope("current", payload, cfg.snapshot(), cfg.content_hash(), started))
    for name, d in payload.items():
        print(f"{name}: q_mean={d['q_mean']:.6e} q_max={d['q_max']:.6e} q_min={d['q_min']:.6e} alpha={d['alpha']:.4g} kink={d['kink']}")
    return EXIT_OK


def cmd_steady(cfg: RunConfig, args) -> int:
    started = time.time()
    m = _model(cfg)
    ss = fcs.steady_states(m, cfg.numerics.get("zero_threshold"))
    sym = symmetry.build_swap(m.space).U.elements
    states = []
    for rho in ss.states:
        pops = {}
        for k, lab in enumerate(m.space.spec.atomic_levels):
            idx = [i for i, b in enumerate(m.space.basis) if b[0] == k]
            pops[lab] = float(np.real(np.trace(rho[np.ix_(idx, idx)])))
        states.append({
            "trace": float(np.trace(rho).real),
            "swap_expectation": float(np.real(np.trace(sym @ rho))),
            "atomic_populations": pops,
            "rho": {"re": rho.real, "im": rho.imag},
        })
    payload = {"null_dim": ss.null_dim, "zero_threshold": ss.zero_threshold, "eigenvalues": list(ss.eigenvalues), "states": states}
    write_json(cfg.output_dir / "steady.json", envelope("steady", payload, cfg.snapshot(), cfg.content_hash(), started))
    print(f"null_dim = {ss.null_dim} (threshold {ss.zero_threshold:.3e}), {len(ss.states)} physical basis states")
    return EXIT_OK


def cmd_symmetry(cfg: RunConfig, args) -> int:
    started = time.time()
    m = _model(cfg)
    sym = symmetry.build_swap(m.space)
    report = symmetry.check_strong_symmetry(m, sym, cfg.numerics["symmetry_tol"])
    payload = {**report.as_dict(), "eigenvalues": [list(e) for e in sym.eigenvalues]}
    if report.verdict:
        payload["sectors"] = [
            {"label": list(b.label), "dim": b.dim, "abscissa": b.abscissa}
            for b in symmetry.sector_decompose(m, sym, cfg.numerics["symmetry_tol"])
        ]
    write_json(cfg.output_dir / "symmetry.json", envelope("symmetry", payload, cfg.snapshot(), cfg.content_hash(), started))
    width = max(len(k) for k, _ in report.norms)
    print(f"{'object':<{width}}  ||[U, .]||_F")
    for k, v in report.norms:
        print(f"{k:<{width}}  {v:.3e}")
    print(f"strong symmetry: {'yes' if report.verdict else 'no'} (tol {report.tol:.1e})")
    return EXIT_OK


def _sweep_point(args):
    cfg, variable, value = args
    params = cfg.params.replace(**{variable: value})
    try:
        cs = _current(cfg, params)
    except (EigensolverError, ConsistencyError, DenseLimitError) as exc:
        return {"status": f"failed: {exc}"}
    T_D = trajectory.dark_period_formula(params)
    T_C = math.inf if cs.q_mean == 0 else 1.0 / cs.q_mean
    return {
        "status": "ok",
        "q_max": cs.q_max,
        "q_min": cs.q_min,
        "q_mean": cs.q_mean,
        "alpha": cs.alpha,
        "T_C": T_C,
        "T_D": T_D,
        "T_C_over_T_D": T_C / T_D if math.isfinite(T_D) else 0.0,
    }


_SPECIAL = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def _json_float(x):
    return _SPECIAL.get(x, x) if isinstance(x, str) else x


def cmd_sweep(cfg: RunConfig, args) -> int:
    started = time.time()
    variable = cfg.sweep.get("variable", "J")
    values = grid_values(cfg.sweep["values"])
    cache_dir = cfg.output_dir / ".cache" / "sweep"
    point_snapshot = {k: v for k, v in cfg.snapshot().items() if k in ("params", "numerics")}
    results, todo, hits = {}, [], 0
    for v in values:
        key = content_hash({**point_snapshot, "sweep_point": {variable: v}})
        path = cache_dir / f"{key}.json"
        if path.exists():
            try:
                results[v] = {k: _json_float(x) for k, x in json.loads(path.read_text()).items()}
                hits += 1
                continue
            except (OSError, json.JSONDecodeError, KeyError):
                log.warning("ignoring unreadable cache entry %s", path)
        todo.append((v, path))
    jobs = [(cfg, variable, v) for v, _ in todo]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            computed = list(pool.map(_sweep_point, jobs))
    else:
        computed = [_sweep_point(j) for j in jobs]
    for (v, path), res in zip(todo, computed):
        results[v] = res
        if res["status"] == "ok":
            write_json(path, res)
    cols = ("q_max", "q_min", "alpha", "T_C", "T_D", "T_C_over_T_D")
    rows = [(v, *(results[v].get(c) for c in cols), results[v]["status"]) for v in values]
    failed = sum(1 for v in values if results[v]["status"] != "ok")
    out = cfg.output_dir
    write_csv(out / "sweep.csv", "sweep", (variable, *cols, "status"), rows)
    payload = {"variable": variable, "n_points": len(values), "n_failed": failed, "cache_hits": hits}
    write_json(out / "sweep.envelope.json", envelope("sweep", payload, cfg.snapshot(), cfg.content_hash(), started))
    if cfg.output.get("svg"):
        ok = [v for v in values if results[v]["status"] == "ok"]
        plot_svg(out / "sweep_alpha.svg", [("alpha", ok, [results[v]["alpha"] for v in ok])], xlabel=variable, ylabel="q_max / q_min", logx=True, logy=True)
        plot_svg(out / "sweep_flux.svg", [("q_max", ok, [results[v]["q_max"] for v in ok])], xlabel=variable, ylabel="q_max [g]", logx=True, logy=True)
    print(f"sweep over {variable}: {len(values)} points, {hits} cached, {failed} failed")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_traj(cfg: RunConfig, args) -> int:
    started = time.time()
    m = _model(cfg)
    tr = cfg.trajectory
    tcfg = trajectory.TrajectoryConfig(
        t_max=float(tr["t_max"]), initial=tr.get("initial", "steady"), seed=int(tr["seed"]),
        n_traj=int(tr["n_traj"]), counted=tuple(tr["counted"]),
    )
    swap = symmetry.build_swap(m.space).U
    records = trajectory.run_ensemble(m, tcfg, symmetry=swap, workers=cfg.workers)
    rate = trajectory.counted_rate(records, m, tcfg.counted)
    q_mean = _current(cfg, cfg.params).q_mean
    T_D = trajectory.dark_period_formula(cfg.params)
    T_C = 1.0 / q_mean if q_mean > 0 else math.inf
    threshold = tr.get("threshold")
    if threshold is None:
        threshold = trajectory.default_threshold(T_C, T_D) if math.isfinite(T_D) and math.isfinite(T_C) else 10 * T_C
    gap = trajectory.pool_stats(trajectory.segment_periods(r, threshold, tcfg.counted) for r in records)
    par = trajectory.pool_stats(trajectory.parity_periods(r, tcfg.counted) for r in records)
    rows = [
        (r.index, t, lab, p)
        for r in records
        for t, lab, p in zip(r.times, r.labels, r.parities or [None] * len(r.times))
    ]
    out = cfg.output_dir
    write_csv(out / "traj_events.csv", "traj_events", ("trajectory", "time", "channel", "swap_expectation"), rows)
    payload = {
        "n_traj": len(records),
        "t_max": tcfg.t_max,
        "counted": list(tcfg.counted),
        "counted_rate": rate.rate,
        "counted_rate_stderr": rate.stderr,
        "n_counted_events": rate.n_events,
        "spectral_q_mean": q_mean,
        "T_D_formula": T_D,
        "gap_segmentation": gap.summary(),
        "parity_segmentation": par.summary(),
    }
    write_json(out / "traj.json", envelope("traj", payload, cfg.snapshot(), cfg.content_hash(), started))
    print(f"rate = {rate.rate:.4e} +- {rate.stderr:.2e} (spectral {q_mean:.4e}); "
          f"parity T_D = {par.T_D[0]:.4g} +- {par.T_D[1]:.2g} over {par.n_dark} periods (formula {T_D:.6g})")
    return EXIT_OK


def cmd_model_dump(cfg: RunConfig, args) -> int:
    started = time.time()
    m = _model(cfg)
    write_json(cfg.output_dir / "model.json", envelope("model", model_summary(m), cfg.snapshot(), cfg.content_hash(), started))
    print(f"dim = {m.space.dim}, channels = {', '.join(m.labels)}")
    return EXIT_OK


def cmd_init_config(cfg, args) -> int:
    sys.stdout.write(example_config())
    return EXIT_OK


COMMANDS = {
    "theta": (cmd_theta, "sample theta(s) on the configured s grid"),
    "gq": (cmd_gq, "Legendre-transform theta(s) into G(q)"),
    "current": (cmd_current, "mean and one-sided currents, switch ratio alpha"),
    "steady": (cmd_steady, "steady states and null-space dimension of W_0"),
    "symmetry": (cmd_symmetry, "atom-exchange symmetry check and sector blocks"),
    "sweep": (cmd_sweep, "sweep a parameter (default J) with cached points"),
    "traj": (cmd_traj, "quantum-jump trajectories and dark/bright statistics"),
    "model-dump": (cmd_model_dump, "write the Hamiltonian and jump operators as JSON"),
    "init-config": (cmd_init_config, "print a config template"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="YAML config file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field, e.g. --set params.J=0.01 (repeatable)")
    common.add_argument("--preset", choices=sorted(PRESETS), help="base parameter set")
    common.add_argument("-o", "--out", help="output directory (overrides $SYMSWITCH_OUTPUT_DIR)")
    common.add_argument("--svg", action="store_true", help="also write SVG plots")
    common.add_argument("--workers", type=int, help="worker processes for sweeps and ensembles")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="symswitch", description=__doc__.split("\n")[0],
                                     epilog="exit codes: 0 ok, 1 partial failure, 2 config error, 3 numerical failure, 4 I/O error")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "gq":
            p.add_argument("--from", dest="source", help="theta CSV written by the theta command")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        overrides = list(args.overrides)
        if args.preset:
            overrides.insert(0, ("params", {"preset": args.preset}))
        if args.svg:
            overrides.append(("output.svg", True))
        if args.workers is not None:
            overrides.append(("workers", args.workers))
        cfg = None if args.command == "init-config" else load_config(args.config, overrides, args.out)
        return func(cfg, args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EigensolverError, ConsistencyError, SymmetryError, DenseLimitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())

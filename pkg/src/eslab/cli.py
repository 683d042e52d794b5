"""Command-line entry point.

    eslab simulate --scenario ou-relaxation --out runs/ou
    eslab verify   --scenario suite --out reports
    eslab transport a.json b.json --backend gaussian
    eslab sweep    --scenario geodesic-gaussian --horizons 1,2,4 --out sweep
    eslab presets

Exit status: 0 when every enabled check passes, 1 when a check fails,
2 on invalid input or a compute error.  All inputs are validated before any
file is written, and outputs are only written once the computation is done.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from . import io as eio
from .errors import EslabError
from .presets import PRESETS, SUITE, preset, resolve

log = logging.getLogger("eslab")

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class CliError(Exception):
    """Invalid command-line usage; reported with exit status 2."""


# ---------------------------------------------------------------------------
# configuration


def _load_config(args) -> dict:
    if args.config:
        path = Path(args.config)
        try:
            cfg = json.loads(path.read_text())
        except FileNotFoundError:
            raise CliError(f"--config: no such file {path}") from None
        except json.JSONDecodeError as exc:
            raise CliError(f"--config: {path} is not valid JSON ({exc})") from None
        if isinstance(cfg, dict) and "config" in cfg and "eslab_version" in cfg:
            cfg = cfg["config"]  # a run manifest
        return cfg
    return preset(args.scenario or "ou-relaxation")


def _apply_overrides(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.horizon is not None:
        cfg["horizon"] = args.horizon
        if args.steps is None and cfg.get("representation", "grid") == "grid":
            cfg["steps"] = None
            cfg["record_every"] = None
    if args.steps is not None:
        cfg["steps"] = args.steps
        cfg["record_every"] = None
        cfg["dt"] = None
    if args.cells is not None:
        dim = int(cfg.get("potential", {}).get("dim", 1))
        cfg["cells"] = [args.cells] * dim
        if args.steps is None:
            cfg["steps"] = None
            cfg["record_every"] = None
    if args.particles is not None:
        cfg["particles"] = args.particles
    if args.temperature is not None:
        cfg["T"] = args.temperature
    if args.backend is not None:
        cfg["backend"] = args.backend
    tol = dict(cfg.get("tolerances") or {})
    if args.tol_esl is not None:
        tol["esl"] = args.tol_esl
    if args.tol_diss is not None:
        tol["dissipation"] = args.tol_diss
    if tol:
        cfg["tolerances"] = tol
    return cfg


def _resolved(cfg: dict, args) -> dict:
    from .transport import BACKENDS
    from .verify import base_tolerances

    out = resolve(_apply_overrides(cfg, args))
    if out.get("backend") is not None and out["backend"] not in BACKENDS:
        raise CliError(f"--backend: unknown backend {out['backend']!r}; choose from {', '.join(BACKENDS)}")
    base_tolerances("grid" if out["representation"] == "grid" else "closed", out.get("tolerances"))
    return out


def _workers(args) -> int:
    if args.workers < 1:
        raise CliError(f"--workers: must be >= 1, got {args.workers}")
    return args.workers


def _outdir(args) -> Path:
    return Path(args.out or ".")


def manifest(cfg: dict) -> dict:
    return {"eslab_version": __version__, "config": cfg}


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    from .thermo import accumulate_sigma
    from .verify import simulate

    cfg = _resolved(_load_config(args), args)
    workers = _workers(args)
    if cfg["representation"] == "geodesic":
        raise CliError("simulate: geodesic scenarios have no dynamics; use 'verify' or 'sweep'")
    traj = simulate(cfg, workers=workers, thermo=True)
    ledger = accumulate_sigma(traj, "exact" if traj.sigma_fn is not None else "trapezoid") if traj.sigma_series is not None else None

    out = _outdir(args)
    out.mkdir(parents=True, exist_ok=True)
    eio.write_json(out / "manifest.json", manifest(cfg))
    eio.write_trajectory(out / "trajectory.csv", traj)
    if ledger is not None:
        eio.write_json(out / "dissipation.json", ledger.to_json())
    else:
        eio.write_json(out / "dissipation.json", {"Sigma": None, "reason": "entropy production is not estimated for particles"})
    eio.write_snapshots(out / "density_header.json", out / "densities.csv", traj)
    if args.figures:
        from .plotting import render_trajectory

        render_trajectory(eio.trajectory_rows(traj), out / "trajectory.png", cfg["scenario"])
    if ledger is not None:
        print(f"{cfg['scenario']}: Sigma={ledger.Sigma:.6g} F_drop={ledger.F_drop:.6g} residual={ledger.residual:.3g}")
    else:
        print(f"{cfg['scenario']}: {len(traj.snapshots)} snapshots of {cfg['particles']} particles")
    return EXIT_OK


def _scenario_list(args) -> list[dict]:
    if args.config:
        return [_load_config(args)]
    names = []
    for item in (args.scenario or "suite").split(","):
        item = item.strip()
        names.extend(SUITE if item == "suite" else [item])
    return [preset(n) for n in names]


def cmd_verify(args) -> int:
    from .verify import run_scenario, simulate

    configs = [_resolved(c, args) for c in _scenario_list(args)]
    workers = _workers(args)
    results = []
    for cfg in configs:
        traj = None if cfg["representation"] in ("geodesic", "particles") else simulate(cfg, workers=workers)
        results.append((cfg, traj, run_scenario(cfg, workers=workers, traj=traj)))

    out = _outdir(args)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    for cfg, traj, report in results:
        name = cfg["scenario"]
        eio.write_json(out / f"{name}.report.json", report.to_json())
        if not args.no_figures:
            from .plotting import render_report

            render_report(report, eio.trajectory_rows(traj) if traj is not None else None, out / f"{name}.report.png")
        flags = " ".join(f"{k}={'pass' if v else 'FAIL'}" for k, v in report.passes.items() if v is not None)
        res = report.resolution or {}
        note = "" if res.get("ok", True) else "  [under-resolved sigma: add snapshots]"
        print(f"{name}: slack={report.slack:.6g} {flags}{note}")
        if not report.passed:
            status = EXIT_FAIL
    return status


def cmd_transport(args) -> int:
    from .transport import sinkhorn, w2_discrete_exact, w2_squared, _discretize

    a, b = eio.read_density(args.source), eio.read_density(args.target)
    backend = args.backend
    plan = None
    if backend in ("exact", "entropic"):
        da, db = _discretize(a), _discretize(b)
        if backend == "exact":
            value, plan = w2_discrete_exact(da, db)
        else:
            value, plan = sinkhorn(da, db, args.eps)
    else:
        value, backend = w2_squared(a, b, backend)
    dist = max(value, 0.0) ** 0.5
    if args.out and plan is not None:
        out = _outdir(args)
        out.mkdir(parents=True, exist_ok=True)
        eio.write_plan(out / "plan.csv", plan)
    print(f"W2={dist!r} W2_squared={value!r} backend={backend}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .verify import check_time_scaling

    try:
        horizons = [float(h) for h in args.horizons.split(",") if h.strip()]
    except ValueError:
        raise CliError(f"--horizons: expected comma-separated reals, got {args.horizons!r}") from None
    cfg = _resolved(_load_config(args), args)
    table = check_time_scaling(cfg, horizons, args.mode)
    out = _outdir(args)
    out.mkdir(parents=True, exist_ok=True)
    eio.write_scaling(out / "scaling.csv", table)
    if not args.no_figures:
        from .plotting import render_scaling

        render_scaling(table, out / "scaling.png", cfg["scenario"])
    for r in table.rows:
        print(f"horizon={r[0]:g} Sigma_physical={r[1]:.8g} x_horizon={r[2]:.10g} W2^2/horizon={r[3]:.8g}")
    return EXIT_OK if table.passed else EXIT_FAIL


def cmd_presets(args) -> int:
    for name in PRESETS:
        tag = " (suite)" if name in SUITE else ""
        print(f"{name:18s} {PRESETS[name]['description']}{tag}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="preset name (comma-separated list or 'suite' for verify)")
    common.add_argument("--config", help="JSON scenario file or a run manifest")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--seed", type=int)
    common.add_argument("--horizon", type=float, help="physical horizon")
    common.add_argument("--steps", type=int)
    common.add_argument("--cells", type=int, help="grid cells per axis")
    common.add_argument("--particles", type=int)
    common.add_argument("--temperature", type=float)
    common.add_argument("--backend", help="W2 backend: gaussian, quantile-1d, exact, entropic")
    common.add_argument("--tol-esl", type=float, dest="tol_esl")
    common.add_argument("--tol-diss", type=float, dest="tol_diss")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="eslab", description="Entropy-production speed limits for ensemble dynamics.")
    parser.add_argument("--version", action="version", version=f"eslab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run dynamics and write trajectory files")
    p.add_argument("--figures", action="store_true", help="also render trajectory.png")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", parents=[common], help="run checks and write reports")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("transport", parents=[common], help="W2 distance between two density files")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--eps", type=float, default=1e-3, help="entropic regularization")
    p.set_defaults(func=cmd_transport)

    p = sub.add_parser("sweep", parents=[common], help="horizon scaling table")
    p.add_argument("--horizons", default="1,2,4")
    p.add_argument("--mode", choices=("rescaled", "fixed"), default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("presets", help="list built-in scenarios")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, EslabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

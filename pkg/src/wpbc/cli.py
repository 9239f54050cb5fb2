"""Command-line entry point: ``wpbc {solve,sweep,trace,oracle-check}``.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import experiments as ex
from .oracle import grid_search, verify

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wpbc", description="PB energy minimisation for backscatter IoT networks")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML scenario file")
        p.add_argument("--seed", type=int, help="base RNG seed")
        p.add_argument("--trials", type=int, help="Monte-Carlo trials per sweep point")
        p.add_argument("--sweep", help="axis:start:stop:step (axis in r_min, pb_if_distance, p_max) or none")
        p.add_argument("--out", help="write CSV (or the main output) here instead of stdout")
        p.add_argument("--json", dest="json_out", help="also write a JSON report here")
        p.add_argument("--schemes", help="comma-separated scheme names")
        p.add_argument("--workers", type=int, help="worker processes for trials")

    p = sub.add_parser("solve", help="solve one instance and print its report as JSON")
    common(p)
    p.add_argument("--trial", type=int, default=0, help="trial index (seed XOR trial)")
    common(sub.add_parser("sweep", help="Monte-Carlo sweep, CSV output"))
    common(sub.add_parser("trace", help="per-iteration PB energy of both proposed schemes"))
    p = sub.add_parser("oracle-check", help="compare the schemes with the grid-search oracle (K <= 2)")
    common(p)
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--rel-tol", type=float, default=0.02)
    return ap


def _config(args) -> ex.ScenarioConfig:
    cfg = ex.load_config(args.config) if args.config else ex.ScenarioConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.schemes:
        changes["schemes"] = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    if args.sweep:
        changes.update(ex.parse_sweep(args.sweep))
    try:
        return replace(cfg, **changes)
    except ex.ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ex.ConfigError(str(exc)) from None


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _solve(cfg, args):
    inst = ex.build_instance(cfg, args.trial)
    reports = {name: ex.SCHEMES[name](inst).to_dict() for name in cfg.schemes}
    text = ex.to_json({"config": ex.config_dict(cfg), "trial": args.trial, "reports": reports}) + "\n"
    _emit(text, args.out)
    if args.json_out:
        _emit(text, args.json_out)


def _sweep(cfg, args):
    rows = list(ex.run_sweep(cfg))
    _emit(ex.rows_to_csv(rows), args.out)
    if args.json_out:
        payload = {"config": ex.config_dict(cfg),
                   "rows": [{**{c: getattr(r, c) for c in ex.CSV_COLUMNS}, "energies": r.energies} for r in rows]}
        _emit(ex.to_json(payload) + "\n", args.json_out)


def _trace(cfg, args):
    rows = ex.run_convergence_trace(cfg)
    lines = ["scheme,iteration,energy_j"] + [f"{r['scheme']},{r['iteration']},{r['energy_j']!r}" for r in rows]
    _emit("\n".join(lines) + "\n", args.out)
    if args.json_out:
        _emit(ex.to_json({"config": ex.config_dict(cfg), "trace": rows}) + "\n", args.json_out)


def _oracle_check(cfg, args):
    if cfg.K > 2:
        raise ex.ConfigError("network.K: oracle-check needs K <= 2")
    from .dynamic import run_dynamic
    from .static import run_static

    lines = ["trial,mode,scheme_energy_j,oracle_energy_j,rel_diff,ok"]
    records = []
    all_ok = True
    for t in range(cfg.trials):
        inst = ex.build_instance(cfg, t)
        for mode, solve in (("dynamic", run_dynamic), ("static", run_static)):
            rep = solve(inst)
            orc = grid_search(inst, args.resolution, mode)
            if orc.feasible and not verify(orc, inst).feasible:
                raise RuntimeError("oracle returned a point that fails its own feasibility check")
            if rep.feasible != orc.feasible:
                rel, ok = float("nan"), False
            elif not rep.feasible:
                rel, ok = 0.0, True
            else:
                rel = abs(rep.energy - orc.energy) / max(orc.energy, 1e-300)
                ok = rel <= args.rel_tol
            all_ok &= ok
            lines.append(f"{t},{mode},{rep.energy!r},{orc.energy!r},{rel!r},{int(ok)}")
            records.append({"trial": t, "mode": mode, "scheme_energy_j": rep.energy,
                            "oracle_energy_j": orc.energy, "rel_diff": rel, "ok": ok})
    _emit("\n".join(lines) + "\n", args.out)
    if args.json_out:
        _emit(ex.to_json({"config": ex.config_dict(cfg), "checks": records}) + "\n", args.json_out)
    return EXIT_OK if all_ok else EXIT_SOLVER


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    handlers = {"solve": _solve, "sweep": _sweep, "trace": _trace, "oracle-check": _oracle_check}
    try:
        code = handlers[args.command](cfg, args)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK if code is None else code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

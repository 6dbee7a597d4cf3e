"""Command-line entry point: ``cma solve|sweep|check-inequalities|moser|sobolev``."""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import torus
from .config import COMMANDS, RunConfig, load_config
from .errors import CMAError, NotPositive, ParseError, SolverError, ValidationError
from .harness import pointwise, sweep
from .harness.barriers import integration_by_parts_gap
from .harness.sobolev import sobolev_probe
from .operator import KahlerBackground, flat_background, perturbed_background
from .report import ArtifactWriter
from .rhs import make_F
from .solver import solve

log = logging.getLogger("cma")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def build_background(cfg: RunConfig) -> KahlerBackground:
    grid = cfg.grid()
    if cfg.background.mode == "flat":
        return flat_background(grid)
    vals = np.zeros(grid.shape)
    for a in cfg.background.axes:
        vals = vals + np.cos(2 * np.pi * grid.coords[a])
    return perturbed_background(grid.field(cfg.background.amplitude * vals, "phi0"))


def _config_echo(cfg: RunConfig) -> dict:
    out = {"command": cfg.command, "seed": cfg.seed, "p0": cfg.p0, "lambda": cfg.lam}
    if cfg.n is not None:
        out.update(n=cfg.n, m=cfg.m, background=vars(cfg.background).copy())
    return out


def _spec_dict(spec) -> dict:
    d = dict(vars(spec))
    d["center"] = list(d["center"])
    d["axes"] = list(d["axes"])
    return d


def _ladder_dict(lad) -> dict:
    return {"mode": lad.mode, "q0": lad.q0, "b": lad.b, "K": lad.K, "C": lad.C, "sup": lad.sup,
            "limit_ratio": lad.limit_ratio, "monotone": lad.monotone()}


def _convergence_rows(report):
    rows = []
    for stage, (hist, damp) in enumerate(zip(report.residual_history, report.damping_history), 1):
        for step, r in enumerate(hist):
            rows.append((stage, step, float(r), float(damp[step - 1]) if step else None))
    return rows


def _solve_common(cfg: RunConfig, out: ArtifactWriter, threads: int):
    torus.set_fft_workers(threads)
    bg = build_background(cfg)
    F = make_F(cfg.rhs, bg.grid, bg, min_eig=cfg.min_eig)
    state, report = solve(F, bg, cfg.lam, cfg.solve, cfg.p0)
    out.write_field("phi.cmafield", state.phi.with_values(state.phi.values, "phi"))
    out.write_field("F.cmafield", F.with_values(F.values, "F"))
    out.write_csv("convergence.csv", ("stage", "step", "residual", "damping"),
                  _convergence_rows(report))
    return bg, F, state, report


def cmd_solve(cfg: RunConfig, out: ArtifactWriter, threads: int) -> int:
    bg, F, state, report = _solve_common(cfg, out, threads)
    ibp = integration_by_parts_gap(state)
    out.write_json("report.json", {"config": _config_echo(cfg), "rhs": _spec_dict(cfg.rhs),
                                   "solve": report.to_dict(),
                                   "integration_by_parts": list(ibp)})
    return EXIT_OK


def cmd_moser(cfg: RunConfig, out: ArtifactWriter, threads: int) -> int:
    bg, F, state, report = _solve_common(cfg, out, threads)
    ladders = sweep.barrier_ladders(state, cfg.p0)
    summary = {}
    for mode in cfg.moser_modes:
        lad = ladders[mode]
        out.write_csv(f"ladder_{mode}.csv", ("k", "p_k", "norm"), lad.rows())
        summary[mode] = _ladder_dict(lad)
    out.write_json("report.json", {"config": _config_echo(cfg), "rhs": _spec_dict(cfg.rhs),
                                   "solve": report.to_dict(), "ladders": summary})
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: ArtifactWriter, threads: int) -> int:
    bg = build_background(cfg)
    rows = sweep.sweep_estimates(cfg.family, bg, cfg.solve, cfg.p0, cfg.lam, threads,
                                 min_eig=cfg.min_eig)
    table = []
    for r in rows:
        if r.status == "ok":
            table.append(tuple(float(v) for v in r.values()) + (r.status,))
        else:
            table.append((None,) * len(sweep.COLUMNS) + (r.status,))
    out.write_csv("sweep.csv", sweep.HEADER, table)
    out.write_json("report.json", {
        "config": _config_echo(cfg),
        "rows": [{"rhs": _spec_dict(r.spec), "status": r.status, "message": r.message,
                  "ladder_C": sweep.ladder_constants(r),
                  "newton_steps": r.report.newton_steps if r.report else None}
                 for r in rows],
    })
    return EXIT_OK if all(r.status == "ok" for r in rows) else EXIT_FAILURE


def cmd_check_inequalities(cfg: RunConfig, out: ArtifactWriter, threads: int) -> int:
    seeds = np.random.SeedSequence(cfg.seed).generate_state(3 * len(cfg.dims))
    suites = {"sos": [], "amgm": [], "elementary": []}
    for i, n in enumerate(cfg.dims):
        s = [int(x) for x in seeds[3 * i:3 * i + 3]]
        suites["sos"].append(pointwise.sos_suite(n, cfg.samples, s[0], threads))
        suites["amgm"].append(pointwise.amgm_suite(n, cfg.samples, s[1], threads))
        suites["elementary"].append(pointwise.elementary_suite(n, cfg.samples, s[2], threads))
    young = []
    for n in cfg.dims:
        for eps in cfg.young_eps:
            young.append({"n": n, "eps": eps, "value": pointwise.young_constant(eps, n),
                          "closed_form": pointwise.young_closed_form(eps, n)})
    passed = all(r["passed"] for rs in suites.values() for r in rs)
    out.write_json("report.json", {"config": _config_echo(cfg), "samples": cfg.samples,
                                   "suites": suites, "young": young, "passed": passed})
    return EXIT_OK if passed else EXIT_FAILURE


def cmd_sobolev(cfg: RunConfig, out: ArtifactWriter, threads: int) -> int:
    grid = cfg.grid()
    res = sobolev_probe(grid, cfg.sobolev_variant, cfg.sobolev_trials, cfg.seed,
                        cfg.sobolev_bandwidth)
    out.write_csv("sobolev.csv", ("trial", "running_max"),
                  [(i, float(v)) for i, v in enumerate(res.history)])
    out.write_json("report.json", {"config": _config_echo(cfg), "sobolev": res.to_dict()})
    return EXIT_OK


HANDLERS = {"solve": cmd_solve, "sweep": cmd_sweep, "check-inequalities": cmd_check_inequalities,
            "moser": cmd_moser, "sobolev": cmd_sobolev}


def run(cfg: RunConfig, out_dir, threads: int = 1) -> int:
    """Run one configured command, write artifacts plus manifest; return the exit status.

    Any exception removes the artifacts written so far.
    """
    writer = ArtifactWriter(out_dir)
    try:
        status = HANDLERS[cfg.command](cfg, writer, threads)
        writer.write_manifest()
    except (SolverError, NotPositive) as exc:
        writer.discard()
        log.error("solver failure: %s", exc)
        return EXIT_FAILURE
    except (ParseError, ValidationError) as exc:
        writer.discard()
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except CMAError as exc:
        writer.discard()
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FAILURE
    except BaseException:
        writer.discard()
        raise
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cma", description="Complex Monge-Ampere solver and estimate harness")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="run configuration file")
        s.add_argument("--out", help="output directory (overrides [run] out)")
        s.add_argument("--threads", type=int, default=1, help="worker threads")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except (ParseError, ValidationError) as exc:
        print(f"cma: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cma: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.command != args.command:
        print(f"cma: config is for '{cfg.command}', not '{args.command}'", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("cma: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.out
    if not out:
        print("cma: no output directory (--out or [run] out)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg, out, args.threads)
    except CMAError as exc:
        print(f"cma: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

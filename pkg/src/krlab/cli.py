"""
Command-line front end.

    krlab <command> [--config PATH] [--out DIR] [--seed-cloud N] [--seed-noise N]
                    [--grid D] [--record-every N]

Commands: poincare, evolve, ensemble, sweep-m, calibrate-bessel,
figure {1..5}, replay SIDECAR.  Every run writes CSV files plus a JSON
sidecar holding the resolved config, seeds and version; `krlab replay`
reruns a sidecar and reproduces its files byte for byte.

Exit codes: 0 ok, 2 config error, 3 numeric error.  Errors are reported
as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .calibration import calibrate_bessel
from .classical import poincare_section
from .config import config_from_dict, parse_config
from .ensemble import run_ensemble, sweep_M
from .errors import ConfigError, KrlabError, NumericError
from .model import Mode, build_schedule
from .presets import (
    DIST_HEADER, ENERGY_HEADER, FIGURES, POINCARE_HEADER,
    distribution_rows, energy_rows, poincare_rows,
)
from .quantum import evolve, make_initial
from .observables import MomentumDistribution

log = logging.getLogger("krlab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

DEFAULT_CONFIG = """
[params]
K = 5.0
hbar_eff = 1.0
n_kicks = 60
"""


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_poincare(cfg):
    p = cfg.params
    M = 0 if p.mode is Mode.KR else p.M
    sec = poincare_section(p.K, M, cfg.run["n_orbits"], cfg.run["n_steps"], seed=cfg.cloud.seed)
    return {"poincare": (POINCARE_HEADER, poincare_rows(sec))}


def cmd_evolve(cfg):
    p = cfg.params
    init = cfg.initial
    psi0 = make_initial(init["kind"], m0=init["m0"], sigma_p=init.get("sigma_p"),
                        beta=init["beta"], grid_size=p.grid_size, hbar_eff=p.hbar_eff)
    psi, series = evolve(psi0, build_schedule(p), p, cfg.record_every)
    dist = MomentumDistribution.from_state(psi)
    return {
        "energy": (ENERGY_HEADER, energy_rows(series)),
        "distribution": (DIST_HEADER, distribution_rows(dist)),
    }


def cmd_ensemble(cfg):
    res = run_ensemble(cfg.params, cfg.cloud, cfg.noise, cfg.record_every)
    return {
        "energy": (ENERGY_HEADER, energy_rows(res.series)),
        "distribution": (DIST_HEADER, distribution_rows(res.final_distribution)),
    }


def cmd_sweep_m(cfg):
    for M in cfg.run["M_list"]:
        if cfg.params.n_kicks % M:
            raise ConfigError(f"run.M_list entry {M} does not divide params.n_kicks={cfg.params.n_kicks}")
    sweep = sweep_M(cfg.params, cfg.run["M_list"], cfg.cloud, cfg.noise, cfg.record_every)
    rows = []
    for M in sweep.M_values:
        s = sweep.results[M].series
        rows += [(M, int(n), float(e), float(i)) for n, e, i in zip(s.kick_index, s.energy, s.ipr)]
    return {"sweep": (("M",) + ENERGY_HEADER, rows)}


def cmd_calibrate(cfg):
    cal = calibrate_bessel(cfg.params.k, cfg.run["n_max"], cfg.params.grid_size)
    rows = [(int(n), float(a), float(b), float(d))
            for n, a, b, d in zip(cal.n, cal.populations, cal.bessel, cal.abs_diff)]
    log.info("max |P_n - J_n(k)^2| = %.3g", cal.max_diff)
    return {"bessel": (("n", "P_n", "J_n_sq", "abs_diff"), rows)}


COMMANDS = {
    "poincare": cmd_poincare,
    "evolve": cmd_evolve,
    "ensemble": cmd_ensemble,
    "sweep-m": cmd_sweep_m,
    "calibrate-bessel": cmd_calibrate,
}


def execute(command, cfg, out_dir, figure=None):
    """Run one command and write its CSV files and sidecar; returns written paths."""
    if command == "figure":
        tables = FIGURES[figure](cfg)
        stem = f"figure{figure}"
    else:
        tables = COMMANDS[command](cfg)
        stem = command
    os.makedirs(out_dir, exist_ok=True)
    files = []
    for name, (header, rows) in tables.items():
        path = os.path.join(out_dir, f"{name}.csv")
        write_csv(path, header, rows)
        files.append(os.path.basename(path))
    sidecar = {
        "command": command,
        "figure": figure,
        "config": cfg.to_dict(),
        "seeds": {"cloud": cfg.cloud.seed, "noise": cfg.noise.seed},
        "version": __version__,
        "numpy": np.__version__,
        "files": files,
    }
    side_path = os.path.join(out_dir, f"{stem}.json")
    with open(side_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [os.path.join(out_dir, f) for f in files] + [side_path]


def build_parser():
    ap = argparse.ArgumentParser(prog="krlab", description="Kicked rotor simulations.")
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--out", metavar="DIR", default=".")
        p.add_argument("--seed-cloud", type=int)
        p.add_argument("--seed-noise", type=int)
        p.add_argument("--grid", type=int)
        p.add_argument("--record-every", type=int)

    for name in COMMANDS:
        common(sub.add_parser(name))
    fig = sub.add_parser("figure")
    fig.add_argument("number", type=int, choices=sorted(FIGURES))
    common(fig)
    rep = sub.add_parser("replay")
    rep.add_argument("sidecar")
    rep.add_argument("--out", metavar="DIR", default=".")
    return ap


def _load(args):
    overrides = {}
    if args.seed_cloud is not None:
        overrides["cloud", "seed"] = args.seed_cloud
    if args.seed_noise is not None:
        overrides["noise", "seed"] = args.seed_noise
    if args.grid is not None:
        overrides["params", "grid_size"] = args.grid
    if args.record_every is not None:
        overrides["run", "record_every"] = args.record_every
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    else:
        text = DEFAULT_CONFIG
    cfg = parse_config(text)
    if overrides:
        cfg = config_from_dict(cfg.source, text, overrides)
    return cfg


def _fail(kind, exc, code):
    err = {"error": kind, "type": type(exc).__name__, "message": getattr(exc, "message", str(exc))}
    if getattr(exc, "line", None) is not None:
        err["line"] = exc.line
    if getattr(exc, "member", None) is not None:
        err["member"] = exc.member
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            with open(args.sidecar, encoding="utf-8") as fh:
                side = json.load(fh)
            cfg = config_from_dict(side["config"])
            written = execute(side["command"], cfg, args.out, side.get("figure"))
        else:
            cfg = _load(args)
            written = execute(args.command, cfg, args.out, getattr(args, "number", None))
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except NumericError as exc:
        return _fail("numeric", exc, EXIT_NUMERIC)
    except (KrlabError, OSError, ValueError, KeyError) as exc:
        return _fail("config", exc, EXIT_CONFIG)
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

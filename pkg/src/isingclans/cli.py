"""Command-line front end.

Every report embeds the resolved configuration and seed, is a pure
function of them, and is never silently overwritten.  Progress goes to
standard error; exit codes are 0 success, 1 verdict FAIL, 2 parameter
error, 3 budget error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional

from . import __version__
from .bounds import BoundDomainError, tv_bound
from .contours import (
    InvalidParameterError,
    Window,
    alpha0_interval,
    beta_star_bracket,
    enumerate_anchored,
    enumerate_shapes,
)
from .estimators import (
    ExperimentSpec,
    ModelParams,
    estimate_lambda,
    size_window_for_lambda,
    tv_experiment,
    validate_lemmas,
)
from .families import FiniteFamily, LatticeFamily, WindowRegion
from .process import ClanBudgetError, ProcessParams
from .contours import unit_square

log = logging.getLogger("isingclans")

EXIT_OK, EXIT_FAIL, EXIT_PARAM, EXIT_BUDGET = 0, 1, 2, 3

COMMANDS = ("enumerate", "alpha0", "beta-star", "bounds", "sample", "estimate", "tv-check", "validate", "sweep")

# config key -> default; flags mirror these keys one to one
DEFAULTS = {
    "seed": 0,
    "beta": 2.0,
    "beta_prime": 1.8,
    "N": 8,
    "D": None,
    "lambda": 1.0,
    "L_max": 16,
    "box": None,
    "window": None,
    "replicas": 10_000,
    "out": "reports",
    "format": "json",
    "force": False,
    "tolerance": 1e-3,
    "beta_star_L_max": 12,
    "reference": "empirical",
    "grid": None,
    "simulate": False,
    "max_clan_size": 10**6,
    "log_level": "INFO",
}
# keys that only steer where output goes; left out of the echoed config
IO_KEYS = ("out", "force", "log_level")


class ParameterError(ValueError):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isingclans", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="flat JSON file; flags override its keys")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--beta", type=float)
    ap.add_argument("--beta-prime", dest="beta_prime", type=float)
    ap.add_argument("--N", dest="N", type=int)
    ap.add_argument("--D", dest="D", type=float)
    ap.add_argument("--lambda", dest="lambda", type=float)
    ap.add_argument("--L-max", dest="L_max", type=int)
    ap.add_argument("--box", type=int, help="simulation box side (default: unbounded lattice)")
    ap.add_argument("--window", type=int, help="square window side (default: sized for lambda)")
    ap.add_argument("--replicas", type=int)
    ap.add_argument("--out", type=str)
    ap.add_argument("--format", choices=("json", "csv"))
    ap.add_argument("--force", action="store_true", default=None)
    ap.add_argument("--tolerance", type=float, help="beta* bracket width")
    ap.add_argument("--beta-star-L-max", dest="beta_star_L_max", type=int)
    ap.add_argument("--reference", choices=("empirical", "analytic"))
    ap.add_argument("--grid", action="append", metavar="KEY=V1,V2,...", help="sweep axis; repeatable")
    ap.add_argument("--simulate", action="store_true", default=None, help="sweep: also run the TV experiment")
    ap.add_argument("--max-clan-size", dest="max_clan_size", type=int)
    ap.add_argument("--log-level", dest="log_level")
    return ap


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config is not None:
        try:
            loaded = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ParameterError(f"cannot read config {args.config}: {e}")
        unknown = set(loaded) - set(DEFAULTS) - {"command"}
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if isinstance(cfg["grid"], list):
        cfg["grid"] = _parse_grid(cfg["grid"])
    cfg["command"] = args.command
    _validate(cfg)
    return cfg


def _parse_grid(items: list) -> dict:
    grid = {}
    for item in items:
        key, _, vals = item.partition("=")
        key = key.strip().replace("-", "_")
        if key not in DEFAULTS or not vals:
            raise ParameterError(f"bad grid axis {item!r}")
        grid[key] = [json.loads(v) for v in vals.split(",")]
    return grid


def _validate(cfg: dict) -> None:
    c = cfg["command"]
    if cfg["L_max"] < 4 or cfg["L_max"] % 2:
        raise ParameterError(f"L_max must be even and >= 4, got {cfg['L_max']}")
    if cfg["replicas"] < 1:
        raise ParameterError("replicas must be >= 1")
    if not cfg["beta"] > 0:
        raise ParameterError("beta must be positive")
    if cfg["max_clan_size"] < 1:
        raise ParameterError("max_clan_size must be >= 1")
    if cfg["window"] is not None and cfg["window"] < 1:
        raise ParameterError("window side must be >= 1")
    if c in ("bounds", "estimate", "tv-check", "validate", "sweep"):
        if cfg["N"] < 4:
            raise ParameterError(f"N must be >= 4, got {cfg['N']}")
        if not cfg["lambda"] > 0:
            raise ParameterError("lambda must be positive")
    if c in ("estimate", "tv-check") and cfg["N"] > cfg["L_max"]:
        raise ParameterError(
            f"precondition N <= L_max violated (N={cfg['N']}, L_max={cfg['L_max']}): "
            "no contour of length >= N is simulated"
        )
    if c == "sweep" and not cfg["grid"]:
        raise ParameterError("sweep needs a nonempty grid")


def config_echo(cfg: dict) -> dict:
    out = {k: v for k, v in sorted(cfg.items()) if k not in IO_KEYS}
    out["version"] = __version__
    return out


def model_params(cfg: dict) -> ModelParams:
    return ModelParams(
        beta=cfg["beta"],
        beta_prime=cfg["beta_prime"],
        N=cfg["N"],
        lam=cfg["lambda"],
        L_max=cfg["L_max"],
        window=cfg["window"],
        box=cfg["box"],
        D=cfg["D"],
        beta_star_L_max=cfg["beta_star_L_max"],
        max_clan_size=cfg["max_clan_size"],
    )


def process_params(fam, cfg: dict) -> ProcessParams:
    return ProcessParams(fam, max_clan_size=cfg["max_clan_size"], seed=cfg["seed"],
                         beta_star_L_max=cfg["beta_star_L_max"])


# --- output -------------------------------------------------------------------------


def _target(out_dir: Path, name: str, force: bool) -> Path:
    path = out_dir / name
    if force or not path.exists():
        return path
    stem, suffix = path.stem, path.suffix
    i = 1
    while (out_dir / f"{stem}-{i}{suffix}").exists():
        i += 1
    return out_dir / f"{stem}-{i}{suffix}"


class Writer:
    def __init__(self, cfg: dict):
        self.dir = Path(cfg["out"])
        self.force = bool(cfg["force"])
        self.echo = config_echo(cfg)
        self.written: list[Path] = []

    def json(self, name: str, body: dict) -> Path:
        payload = {"config": self.echo, **body}
        return self._write(name + ".json", json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")

    def csv(self, name: str, header: list, rows: list) -> Path:
        buf = io.StringIO()
        buf.write("# config " + json.dumps(self.echo, sort_keys=True, default=_jsonable) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return self._write(name + ".csv", buf.getvalue())

    def _write(self, name: str, text: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        path = _target(self.dir, name, self.force)
        path.write_text(text)
        self.written.append(path)
        log.info("wrote %s", path)
        return path


def _jsonable(x):
    if hasattr(x, "as_list"):
        return x.as_list()
    if hasattr(x, "item"):
        return x.item()
    if isinstance(x, (set, frozenset, tuple)):
        return list(x)
    raise TypeError(f"not serialisable: {type(x).__name__}")


# --- commands -------------------------------------------------------------------------


def cmd_enumerate(cfg: dict, w: Writer) -> int:
    L = cfg["L_max"]
    anchored = enumerate_anchored(L_max=L)
    shapes = enumerate_shapes(L)
    body = {
        "anchored_counts": {str(k): v for k, v in sorted(anchored.length_counts().items())},
        "shape_counts": {str(k): v for k, v in sorted(shapes_counts(shapes).items())},
    }
    if cfg["format"] == "csv":
        rows = [[c.length, c.encode()] for c in anchored.members]
        w.csv("enumerate", ["length", "links"], rows)
    else:
        body["anchored"] = [c.encode() for c in anchored.members]
        w.json("enumerate", body)
    return EXIT_OK


def shapes_counts(shapes) -> dict:
    counts: dict = {}
    for s in shapes:
        counts[s.length] = counts.get(s.length, 0) + 1
    return counts


def cmd_alpha0(cfg: dict, w: Writer) -> int:
    iv = alpha0_interval(cfg["beta"], cfg["L_max"])
    w.json("alpha0", {"alpha0": iv.as_list(), "L_max": cfg["L_max"], "beta": cfg["beta"]})
    return EXIT_OK


def cmd_beta_star(cfg: dict, w: Writer) -> int:
    br = beta_star_bracket(cfg["tolerance"], cfg["L_max"])
    w.json("beta-star", {"beta_star": br.as_dict()})
    return EXIT_OK


def cmd_bounds(cfg: dict, w: Writer) -> int:
    rep = tv_bound(model_params(cfg).bound_params())
    if cfg["format"] == "csv":
        row = rep.csv_row()
        w.csv("bounds", list(rep.CSV_FIELDS), [[row[k] for k in rep.CSV_FIELDS]])
    else:
        w.json("bounds", {"bounds": rep.to_dict()})
    return EXIT_OK


def cmd_sample(cfg: dict, w: Writer) -> int:
    side = cfg["window"] or 8
    fam = LatticeFamily(cfg["L_max"], cfg["beta"])
    pp = process_params(fam, cfg)
    win = Window.centered(side)
    from .estimators import perfect_samples

    samples = perfect_samples(WindowRegion(win, 0), pp, cfg["replicas"], cfg["seed"], stream=4)
    rows = [[i, len(s), ";".join(fam.contour(k).encode() for k in s)] for i, s in enumerate(samples)]
    if cfg["format"] == "csv":
        w.csv("sample", ["replica", "count", "contours"], rows)
    else:
        w.json("sample", {"window": [win.x0, win.y0, win.x1, win.y1], "samples": [r[2].split(";") if r[2] else [] for r in rows]})
    return EXIT_OK


def cmd_estimate(cfg: dict, w: Writer) -> int:
    mp = model_params(cfg)
    fam = LatticeFamily(mp.L_max, mp.beta)
    pp = process_params(fam, cfg)
    body = {}
    if mp.window is None:
        choice = size_window_for_lambda(mp.N, mp.lam, pp, replicas=cfg["replicas"], seed=cfg["seed"])
        win = choice.window
        body["size_window"] = {"side": choice.side, "ratio": choice.ratio, "bracket": list(choice.bracket),
                               "lower_bracket": choice.lower_bracket}
    else:
        win = Window.centered(mp.window)
    from .estimators import _D_hi, check_margin

    check_margin(win, mp.box, _D_hi(mp.bound_params()), mp.L_max)
    est = estimate_lambda(mp.N, win, pp, cfg["replicas"], cfg["seed"])
    body.update({
        "window": [win.x0, win.y0, win.x1, win.y1],
        "lambda_hat": est.value,
        "lambda_ci": list(est.ci),
        "distinct_contours": len(est.per_contour),
        "bookkeeping_gap": est.bookkeeping_gap,
    })
    w.json("estimate", body)
    w.csv("estimate-totals", ["replica", "total"], [[i, int(t)] for i, t in enumerate(est.totals)])
    return EXIT_OK


def cmd_tv_check(cfg: dict, w: Writer) -> int:
    spec = ExperimentSpec(model_params(cfg), cfg["replicas"], cfg["seed"], "tv-experiment")
    res = tv_experiment(spec, reference=cfg["reference"])
    body = res.to_dict()
    if res.vacuous:
        body["note"] = "analytic bound >= 1: PASS by vacuity"
    w.json("tv-check", body)
    w.csv("tv-histogram", ["count", "empirical_mass", "poisson_mass"], [list(r) for r in res.histogram])
    label = res.verdict + (" (vacuous bound)" if res.vacuous else "")
    log.info("tv=%.4g bound<=%.4g verdict %s", res.tv, res.bound.tv_bound.hi, label)
    return EXIT_OK if res.verdict == "PASS" else EXIT_FAIL


def default_small_families(beta: float) -> list:
    """Hand-built families used for exact checks."""
    return [
        FiniteFamily([unit_square(0, 0), unit_square(1, 0), unit_square(3, 0)], beta),
        FiniteFamily([unit_square(x, y) for x in range(3) for y in range(2)], beta),
    ]


def cmd_validate(cfg: dict, w: Writer) -> int:
    spec = ExperimentSpec(model_params(cfg), cfg["replicas"], cfg["seed"], "validate-lemmas")
    checks = validate_lemmas(spec, default_small_families(cfg["beta"]))
    for c in checks:
        log.info(c.line())
    w.json("validate", {"checks": [{"name": c.name, "passed": c.passed, "margin": c.margin, "detail": c.detail}
                                   for c in checks]})
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def cmd_sweep(cfg: dict, w: Writer) -> int:
    grid = cfg["grid"]
    keys = sorted(grid)
    fields = ["status", "error"] + list(tv_bound_fields())
    if cfg["simulate"]:
        fields += ["tv_empirical", "lambda_hat"]
    rows = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        point = dict(cfg, **dict(zip(keys, combo)))
        row = {k: "" for k in fields}
        try:
            _validate(dict(point, command="bounds"))
            mp = model_params(point)
            rep = tv_bound(mp.bound_params())
            row.update(rep.csv_row())
            if cfg["simulate"]:
                res = tv_experiment(ExperimentSpec(mp, point["replicas"], point["seed"]))
                row.update(tv_empirical=repr(res.tv), lambda_hat=repr(res.lambda_hat))
            row["status"] = EXIT_OK
        except ClanBudgetError as e:
            row.update(status=EXIT_BUDGET, error=str(e), **dict(zip(keys, combo)))
        except ValueError as e:
            row.update(status=EXIT_PARAM, error=str(e), **dict(zip(keys, combo)))
        rows.append([row[k] for k in fields])
    w.csv("sweep", fields, rows)
    return EXIT_OK


def tv_bound_fields():
    from .bounds import BoundReport

    return BoundReport.CSV_FIELDS


DISPATCH = {
    "enumerate": cmd_enumerate,
    "alpha0": cmd_alpha0,
    "beta-star": cmd_beta_star,
    "bounds": cmd_bounds,
    "sample": cmd_sample,
    "estimate": cmd_estimate,
    "tv-check": cmd_tv_check,
    "validate": cmd_validate,
    "sweep": cmd_sweep,
}


def run(cfg: dict) -> int:
    w = Writer(cfg)
    t0 = time.perf_counter()
    code = DISPATCH[cfg["command"]](cfg, w)
    log.info("%s finished in %.1f s", cfg["command"], time.perf_counter() - t0)
    return code


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, (args.log_level or "INFO").upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = resolve_config(args)
        return run(cfg)
    except ClanBudgetError as e:
        log.error("budget exceeded: %s", e)
        return EXIT_BUDGET
    except (ParameterError, BoundDomainError, InvalidParameterError, ValueError) as e:
        log.error("parameter error: %s", e)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())

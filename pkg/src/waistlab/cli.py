"""Batch front end: ``waistlab <command> [options]``.

Commands
--------
volumes    tabulate ball, sphere and tube volumes and the Fubini identity
transport  build a radial transport and run its certificates
content    Minkowski / Gaussian content estimates of the built-in sets
kp         union-of-balls volume along a contraction homotopy
waist      fiber sweeps and the convex-body and comparison checks

Exit codes: 0 when every verdict passes, 1 when a verdict fails, 2 on usage
or validation errors. The default seed is 20170601; the environment variable
``WAISTLAB_SEED`` replaces it and ``--seed`` overrides both.
"""

import argparse
import configparser
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import WaistlabError
from .report import dumps, svg_plot, write_csv
from .rng import DEFAULT_SEED

__all__ = ["main", "build_parser", "run", "parse_samples", "load_config"]

COMMON_DEFAULTS = {"samples": 1_000_000, "workers": 1, "out": "waistlab-out", "json": False, "csv": False,
                   "svg": False}

COMMAND_DEFAULTS = {
    "volumes": {"unit_ball": None, "sphere": None, "ball": None, "tube": None, "fubini": None},
    "transport": {"rho": "sphere", "sigma": "cap", "k": 2, "R": None, "size": 1000},
    "content": {"set": "circle", "t_levels": 5, "kind": "minkowski", "t_max": 0.04, "u_min": 25.0},
    "kp": {"scenario": "two-balls-merge", "t": None, "alpha_levels": 9},
    "waist": {"scenario": "cube-max", "n": None, "t": None, "R": None, "k": None, "pairs": None},
}


class UsageError(Exception):
    pass


def parse_samples(text):
    """Parse a sample count such as ``1e7`` or ``250000``."""
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not math.isfinite(v) or v < 1 or v != int(v):
        raise argparse.ArgumentTypeError(f"sample count must be a positive integer, got {text!r}")
    return int(v)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=None, help="RNG seed (unsigned 64-bit)")
    common.add_argument("--samples", type=parse_samples, default=None, help="Monte Carlo budget, e.g. 1e7")
    common.add_argument("--workers", type=_positive_int, default=None, help="worker threads")
    common.add_argument("--out", default=None, help="output directory for artifacts")
    common.add_argument("--json", action="store_const", const=True, default=None, help="write the JSON report")
    common.add_argument("--csv", action="store_const", const=True, default=None, help="write a CSV table")
    common.add_argument("--svg", action="store_const", const=True, default=None, help="write an SVG plot")
    common.add_argument("--config", default=None, help="key=value (INI sections) or JSON config file")

    p = argparse.ArgumentParser(prog="waistlab", description="Waist inequality laboratory")
    p.add_argument("--version", action="version", version=f"waistlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("volumes", parents=[common], help="ball, sphere and tube volumes")
    v.add_argument("--unit-ball", type=int, action="append", help="v_m for this m (repeatable)")
    v.add_argument("--sphere", type=int, action="append", help="area of the unit k-sphere")
    v.add_argument("--ball", nargs="+", action="append", metavar="KEY=VALUE",
                   help="geodesic ball: k=.. kappa=.. R=.. [n=..]")
    v.add_argument("--tube", nargs="+", action="append", metavar="KEY=VALUE",
                   help="tube about a great k-sphere in S^n: n=.. k=.. t=..")
    v.add_argument("--fubini", nargs="+", action="append", metavar="KEY=VALUE", help="Fubini identity: m=.. l=..")

    t = sub.add_parser("transport", parents=[common], help="radial transport and certificates")
    t.add_argument("--rho", choices=["sphere", "cap", "hyperbolic-ball"], default=None)
    t.add_argument("--sigma", choices=["sphere", "cap", "hyperbolic-ball"], default=None)
    t.add_argument("--k", type=int, default=None)
    t.add_argument("--R", type=float, default=None)
    t.add_argument("--size", type=_positive_int, default=None, help="grid and table size")

    c = sub.add_parser("content", parents=[common], help="Minkowski and Gaussian content")
    c.add_argument("--set", choices=sorted(CONTENT_SETS), default=None)
    c.add_argument("--t-levels", type=int, default=None)
    c.add_argument("--kind", choices=["minkowski", "gaussian", "sandwich", "product"], default=None)
    c.add_argument("--t-max", type=float, default=None)
    c.add_argument("--u-min", type=float, default=None)

    k = sub.add_parser("kp", parents=[common], help="union of balls along a homotopy")
    k.add_argument("--scenario", default=None)
    k.add_argument("--t", type=float, default=None)
    k.add_argument("--alpha-levels", type=int, default=None)

    w = sub.add_parser("waist", parents=[common], help="waist scenarios")
    w.add_argument("--scenario", default=None)
    w.add_argument("--n", type=int, default=None)
    w.add_argument("--t", type=float, default=None)
    w.add_argument("--R", type=float, default=None)
    w.add_argument("--k", type=int, default=None)
    w.add_argument("--pairs", type=int, default=None)
    return p


def load_config(path, command):
    """Read ``[run]`` and ``[<command>]`` sections (or the same keys from JSON)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    out = {}
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        flat = {k: v for k, v in data.items() if not isinstance(v, dict)}
        out.update(flat)
        out.update(data.get("run", {}))
        out.update(data.get(command, {}))
    else:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp.read_string(text if text.lstrip().startswith("[") else "[run]\n" + text)
        for section in ("run", command):
            if cp.has_section(section):
                out.update(dict(cp.items(section)))
    return {k.replace("-", "_"): v for k, v in out.items()}


def _coerce(key, value, ref):
    if isinstance(value, str):
        if key == "samples":
            return parse_samples(value)
        if isinstance(ref, bool) or key in ("json", "csv", "svg"):
            return value.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(ref, int) or key in ("seed", "workers", "k", "n", "pairs", "size", "t_levels", "alpha_levels"):
            return int(float(value))
        if isinstance(ref, float) or key in ("R", "t", "t_max", "u_min"):
            return float(value)
    return value


def resolve_config(args):
    """Merge built-in defaults, the environment seed, a config file and explicit flags."""
    cmd = args.command
    cfg = dict(COMMON_DEFAULTS)
    cfg.update(COMMAND_DEFAULTS[cmd])
    env = os.environ.get("WAISTLAB_SEED")
    cfg["seed"] = int(env) if env not in (None, "") else DEFAULT_SEED
    if args.config:
        for key, value in load_config(args.config, cmd).items():
            if key not in cfg:
                raise UsageError(f"unknown config key {key!r} for {cmd}")
            cfg[key] = _coerce(key, value, cfg[key])
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        cfg[key] = value
    if cfg["workers"] < 1:
        raise UsageError("workers must be at least 1")
    return cfg


def _kv(tokens, required, ints=()):
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise UsageError(f"expected KEY=VALUE, got {tok!r}")
        key, val = tok.split("=", 1)
        out[key] = int(val) if key in ints else float(val)
    missing = [r for r in required if r not in out]
    if missing:
        raise UsageError(f"missing {', '.join(missing)} in {' '.join(tokens)}")
    return out


# -- commands -----------------------------------------------------------------


def cmd_volumes(cfg):
    from .geometry import BallSpec, ModelSpace, geodesic_ball_volume, sphere_volume, tube_volume_subsphere, unit_ball_volume
    from .minkowski import fubini_tube_identity

    rows, verdicts = [], {}
    unit = cfg["unit_ball"]
    if not any(cfg[k] for k in ("unit_ball", "sphere", "ball", "tube", "fubini")):
        unit = list(range(11))
    for m in unit or []:
        rows.append({"quantity": "unit_ball", "params": {"m": m}, "value": unit_ball_volume(m)})
    for k in cfg["sphere"] or []:
        rows.append({"quantity": "sphere", "params": {"k": k}, "value": sphere_volume(k)})
    for toks in cfg["ball"] or []:
        p = _kv(toks, ("k", "kappa", "R"), ints=("k", "n"))
        n = p.get("n", p["k"])
        spec = BallSpec(ModelSpace(p["kappa"], n), p["R"], subdim=p["k"])
        rows.append({"quantity": "ball", "params": p, "value": geodesic_ball_volume(spec)})
    for toks in cfg["tube"] or []:
        p = _kv(toks, ("n", "k", "t"), ints=("n", "k"))
        rows.append({"quantity": "tube", "params": p, "value": tube_volume_subsphere(p["n"], p["k"], p["t"])})
    for toks in cfg["fubini"] or []:
        p = _kv(toks, ("m", "l"), ints=("m", "l"))
        lhs, rhs = fubini_tube_identity(p["m"], p["l"])
        ok = abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))
        rows.append({"quantity": "fubini", "params": p, "value": lhs, "rhs": rhs, "passed": ok})
        verdicts[f"fubini(m={p['m']},l={p['l']})"] = "pass" if ok else "fail"

    def table():
        buf = io.StringIO()
        write_csv(buf, ["quantity", "params", "value"],
                  [[r["quantity"], " ".join(f"{k}={v}" for k, v in r["params"].items()), r["value"]] for r in rows])
        return buf.getvalue()

    return rows, verdicts, table, None


def _density(name, k, R):
    from .transport import cap_density, hyperbolic_ball_density, sphere_density

    if name == "sphere":
        return sphere_density(k)
    if R is None:
        raise UsageError(f"--R is required for the {name} density")
    return cap_density(k, R) if name == "cap" else hyperbolic_ball_density(k, R)


def cmd_transport(cfg):
    from .transport import transport_certificates

    rho = _density(cfg["rho"], cfg["k"], cfg["R"])
    sigma = _density(cfg["sigma"], cfg["k"], cfg["R"])
    tm, rep = transport_certificates(sigma, rho, size=cfg["size"])
    verdicts = {"transport-certificates": "pass" if rep["passed"] else "fail"}

    def table():
        return tm.to_csv(size=cfg["size"])

    def plot():
        x, psi, _, ratio = tm.table(min(cfg["size"], 400))
        return svg_plot(np.log10(x), ratio, title=f"psi(x)/x for {tm.name}", xlabel="log10 x", ylabel="psi(x)/x")

    return rep, verdicts, table, plot


def _content_sets():
    from . import minkowski as mk

    return {
        "circle": (mk.circle_set, 1, 2 * math.pi),
        "segment": (mk.segment_set, 1, 1.0),
        "point": (lambda: mk.point_set(2), 0, 1.0),
        "equator": (mk.equator_set, 1, 2 * math.pi),
    }


CONTENT_SETS = ("circle", "segment", "point", "equator")


def cmd_content(cfg):
    from . import minkowski as mk

    make, k, expected = _content_sets()[cfg["set"]]
    X = make()
    levels = cfg["t_levels"]
    ts = cfg["t_max"] * 0.5 ** np.arange(levels)
    us = cfg["u_min"] * 2.0 ** np.arange(levels)
    seed, budget, workers = cfg["seed"], cfg["samples"], cfg["workers"]
    kind = cfg["kind"]
    res = {"set": cfg["set"], "k": k, "expected": expected, "kind": kind}
    verdicts = {}
    curve = None

    def within(lo, hi):
        return bool(lo >= 0.98 * expected and hi <= 1.02 * expected)

    if kind in ("minkowski", "sandwich"):
        m = mk.content_estimate(X, k, ts, budget, seed, workers)
        res["minkowski"] = m.as_dict()
        verdicts["minkowski-content"] = "pass" if within(m.lower, m.upper) else "fail"
        curve = m.curve
    if kind in ("gaussian", "sandwich"):
        g = mk.gaussian_content(X, k, us, budget, seed, workers)
        res["gaussian"] = g.as_dict()
        verdicts["gaussian-content"] = "pass" if within(g.lower, g.upper) else "fail"
        curve = curve or g.curve
    if kind == "sandwich":
        s = mk.verify_sandwich(m, g, X.n - k)
        res["sandwich"] = s.as_dict()
        verdicts["sandwich"] = "pass" if s.passed else "fail"
    if kind == "product":
        if X.ambient != "euclidean":
            raise UsageError("the product check needs a Euclidean set")
        rep = mk.gaussian_product_check(X, X, k, k, us, budget, seed, workers)
        res["product"] = rep.as_dict()
        ok = rep.passed and abs(rep.limit - expected**2) <= 0.03 * expected**2
        verdicts["product"] = "pass" if ok else "fail"

    def table():
        if curve is None:
            buf = io.StringIO()
            p = res["product"]
            write_csv(buf, ["u", "product", "factor_product"], zip(p["u"], p["product"], p["factor_product"]))
            return buf.getvalue()
        return curve.to_csv()

    def plot():
        if curve is None:
            p = res["product"]
            return svg_plot(p["u"], p["product"], title="Gaussian value of the product", xlabel="u", ylabel="value")
        rows = curve.as_list()
        return svg_plot([r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows],
                        title=f"{kind} curve of {X.name}", xlabel="t or u", ylabel="value")

    return res, verdicts, table, plot


def cmd_kp(cfg):
    from .balls import kp_experiment, kp_scenarios, lens_area

    scen = kp_scenarios(0)
    if cfg["scenario"] not in scen:
        raise UsageError(f"unknown kp scenario {cfg['scenario']!r}; choose from {sorted(scen)}")
    path, t = scen[cfg["scenario"]]
    t = cfg["t"] if cfg["t"] is not None else t
    alpha = np.linspace(0.0, math.pi / 2, cfg["alpha_levels"])
    rep = kp_experiment(path, t, cfg["samples"], cfg["seed"], alpha_grid=alpha, workers=cfg["workers"])
    res = rep.as_dict()
    res["t"] = t
    verdicts = {f"kp:{rep.name}": "pass" if rep.passed else "fail"}
    if rep.exact:
        res["endpoints"] = [float(rep.volumes[0]), float(rep.volumes[-1])]
        if cfg["scenario"] == "two-balls-merge":
            d0 = float(np.abs(np.diff(path.source[:, 0]))[0])
            res["lens_endpoints"] = [lens_area(t, d0), lens_area(t, 0.0)]

    def table():
        return rep.to_csv()

    def plot():
        return svg_plot(rep.alpha, rep.volumes, rep.stderr, title=f"union volume along {rep.name}",
                        xlabel="alpha", ylabel="volume")

    return res, verdicts, table, plot


def cmd_waist(cfg):
    from .waist import SCENARIOS, run_scenario

    name = cfg["scenario"]
    if name not in SCENARIOS:
        raise UsageError(f"unknown waist scenario {name!r}; choose from {sorted(SCENARIOS)}")
    params = {k: cfg[k] for k in ("n", "t", "R", "k", "pairs") if cfg[k] is not None}
    res = run_scenario(name, budget=cfg["samples"], seed=cfg["seed"], workers=cfg["workers"], **params)
    verdicts = {name: res["verdict"]}
    levels = res.get("levels")

    def table():
        buf = io.StringIO()
        if levels is not None:
            write_csv(buf, ["level", "value"], zip(levels, res["values"]))
        elif "rows" in res:
            keys = [k for k in res["rows"][0] if not isinstance(res["rows"][0][k], (dict, list))]
            write_csv(buf, keys, ([r[k] for k in keys] for r in res["rows"]))
        else:
            write_csv(buf, ["key", "value"], ([k, v] for k, v in sorted(res.items())
                                              if isinstance(v, (int, float, str, bool))))
        return buf.getvalue()

    def plot():
        if levels is not None:
            return svg_plot(levels, res["values"], res.get("errors"), title=f"fiber size for {name}",
                            xlabel="level", ylabel="fiber size", hline=res["bound"])
        if "rows" in res:
            xs = [r["t"] for r in res["rows"]]
            ys = [r.get("exact", r.get("mu_t", 0.0)) for r in res["rows"]]
            return svg_plot(xs, ys, title=name, xlabel="t", ylabel="measure")
        return None

    return res, verdicts, table, plot


COMMANDS = {"volumes": cmd_volumes, "transport": cmd_transport, "content": cmd_content, "kp": cmd_kp,
            "waist": cmd_waist}


def run(argv=None, stdout=None):
    """Parse ``argv``, run the command and return ``(exit_code, report_dict_or_None)``."""
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), None
    start = time.perf_counter()
    try:
        cfg = resolve_config(args)
        results, verdicts, table, plot = COMMANDS[args.command](cfg)
    except (UsageError, WaistlabError, argparse.ArgumentTypeError, OSError, ValueError) as exc:
        print(f"waistlab {args.command}: error: {exc}", file=sys.stderr)
        return 2, None
    report = {
        "command": args.command,
        "config": cfg,
        "results": results,
        "verdicts": verdicts,
        "wall_clock": time.perf_counter() - start,
        "version": __version__,
    }
    ok = all(v in ("pass", "expected-violation") for v in verdicts.values())
    if cfg["csv"] or cfg["svg"] or (cfg["json"] and args.out is not None):
        os.makedirs(cfg["out"], exist_ok=True)
    if cfg["json"]:
        text = dumps(report)
        if args.out is not None or cfg["csv"] or cfg["svg"]:
            with open(os.path.join(cfg["out"], f"{args.command}.json"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text + "\n")
        else:
            stdout.write(text + "\n")
    if cfg["csv"]:
        with open(os.path.join(cfg["out"], f"{args.command}.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table())
    if cfg["svg"] and plot is not None:
        svg = plot()
        if svg is not None:
            with open(os.path.join(cfg["out"], f"{args.command}.svg"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(svg)
    if not (cfg["json"] and args.out is None and not (cfg["csv"] or cfg["svg"])):
        for name, verdict in verdicts.items():
            stdout.write(f"{name}: {verdict}\n")
        if not verdicts:
            stdout.write(f"{args.command}: {len(results)} rows\n" if isinstance(results, list) else "")
    return (0 if ok else 1), report


def main(argv=None):
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())

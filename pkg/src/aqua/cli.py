"""Command line runner: ``aqua {simulate,kappa,mc-cdf,pump} --config FILE``.

Exit codes: 0 success, 2 configuration error, 3 numeric contract violation,
4 resource budget exceeded.  Every file is rendered in memory first and only
written once the whole run succeeded, so failures leave no partial output.
Timestamps go to ``run_info.json``; all other files are byte-stable for a
fixed config and seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .distribution import (
    EmpiricalCdf,
    ProfileLaw,
    ks_distance,
    mc_kappa_samples,
    reference_cdf_for,
    sample_profile,
    search_evaluator,
)
from .dynamics import Move, apply_sequence, check_move, fmt, trace_rows, TRACE_HEADER
from .errors import AquaError, BudgetExceededError, ContractViolation, InvalidMoveError, NonConvergenceError
from .graph import Graph, HalfLineSpec, make_comb, make_custom, make_halfline, make_path
from .optimizer import KappaEstimate, closed_form_for, closed_form_vec_for, kappa_search
from .pump import run_pump, linear_f
from .sad import verify_duality

log = logging.getLogger("aqua")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT, EXIT_BUDGET = 0, 2, 3, 4


class ConfigError(AquaError):
    pass


_num = {"type": "number"}
_int = {"type": "integer"}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "graph": {
            "oneOf": [
                {"type": "string"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["family"],
                    "properties": {
                        "family": {"enum": ["path", "comb", "halfline", "custom"]},
                        "n": {**_int, "minimum": 1},
                        "M": {**_int, "minimum": 1},
                        "spine": {**_int, "minimum": 1},
                        "f": {"type": "array", "items": {**_int, "minimum": 1}},
                        "mult": {**_int, "minimum": 1},
                        "edges": {"type": "array", "items": {"type": "array", "items": _int, "minItems": 2, "maxItems": 2}},
                    },
                },
            ]
        },
        "target": {**_int, "minimum": 0},
        "seed": _int,
        "trials": _int,
        "profile": {"type": "array", "items": {**_num, "minimum": 0, "maximum": 1}},
        "moves": {"type": "array", "items": {"type": "array", "prefixItems": [_int, _int, _num], "minItems": 3, "maxItems": 3}},
        "law": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["uniform01", "bounded", "point", "custom"]},
                "C": _num,
                "value": _num,
                "intervals": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
            },
        },
        "optimizer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "depth": {**_int, "minimum": 0},
                "mu_grid": {"type": "array", "items": {**_num, "exclusiveMinimum": 0, "maximum": 0.5}, "minItems": 1},
                "beam": {**_int, "minimum": 1},
                "closed_form": {"type": "boolean"},
                "cap_bound": {"type": "boolean"},
                "max_states": {**_int, "minimum": 1},
            },
        },
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"grid": {**_int, "minimum": 2}},
        },
        "pump": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eps": {**_num, "exclusiveMinimum": 0, "maximum": 1},
                "truncation": {**_int, "minimum": 1},
                "f": {
                    "oneOf": [
                        {"type": "array", "items": {**_int, "minimum": 1}},
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["kind", "mult"],
                            "properties": {"kind": {"const": "linear"}, "mult": {**_int, "minimum": 1}},
                        },
                    ]
                },
                "seeds": {"type": "array", "items": _int, "minItems": 1},
                "stage_budget": {**_int, "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "format": {"enum": ["csv", "json"]}},
        },
    },
}


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    validate_config(cfg, path)
    return cfg


def validate_config(cfg: dict, source: str = "<config>") -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            key = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{source}: key '{key}': {e.message}")
        raise ConfigError("\n".join(lines))


def build_graph(spec) -> Graph:
    if spec is None:
        raise ConfigError("config key 'graph' is required for this command")
    try:
        if isinstance(spec, str):
            name, *args = spec.split(":")
            args = [int(a) for a in args]
            if name == "edge" and not args:
                return make_path(2)
            if name == "path" and len(args) == 1:
                return make_path(args[0])
            if name == "comb" and len(args) == 2:
                return make_comb(args[0], args[1])
            if name == "halfline" and len(args) == 2:
                return make_halfline(HalfLineSpec.from_function(linear_f(args[1]), args[0]))
            raise ConfigError(f"key 'graph': cannot parse shorthand {spec!r}")
        fam = spec["family"]
        if fam == "path":
            return make_path(spec["n"])
        if fam == "comb":
            return make_comb(spec["M"], spec["spine"])
        if fam == "halfline":
            if "f" in spec:
                return make_halfline(HalfLineSpec(spec["spine"], tuple(spec["f"])))
            return make_halfline(HalfLineSpec.from_function(linear_f(spec.get("mult", 1)), spec["spine"]))
        return make_custom(spec["n"], spec["edges"])
    except KeyError as exc:
        raise ConfigError(f"key 'graph': missing field {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"key 'graph': {exc}") from exc


def _target(cfg: dict, g: Graph) -> int:
    v = cfg.get("target", 0)
    if v >= g.n:
        raise ConfigError(f"key 'target': vertex {v} not in graph with {g.n} vertices")
    return v


def _profile(cfg: dict, g: Graph, seed: int) -> np.ndarray:
    if "profile" in cfg:
        p = np.array(cfg["profile"], dtype=float)
        if p.shape[0] != g.n:
            raise ConfigError(f"key 'profile': {p.shape[0]} levels for {g.n} vertices")
        return p
    return sample_profile(g, _law(cfg), seed)


def _law(cfg: dict) -> ProfileLaw:
    spec = dict(cfg.get("law", {}))
    if "intervals" in spec:
        spec["intervals"] = tuple(tuple(x) for x in spec["intervals"])
    try:
        return ProfileLaw(**spec)
    except ValueError as exc:
        raise ConfigError(f"key 'law': {exc}") from exc


def _rows_out(header, rows, fmt_name: str) -> str:
    if fmt_name == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _run_info(args, cfg) -> str:
    return _dump({"timestamp": datetime.now(timezone.utc).isoformat(), "version": __version__,
                  "command": args.command})


# -- subcommands -------------------------------------------------------------


def cmd_simulate(cfg: dict, args) -> dict[str, str]:
    g = build_graph(cfg.get("graph"))
    seed = cfg.get("seed", 0)
    p0 = _profile(cfg, g, seed)
    moves = [Move(int(u), int(v), float(mu)) for u, v, mu in cfg.get("moves", [])]
    for k, m in enumerate(moves):
        try:
            check_move(g, m)
        except InvalidMoveError as exc:
            raise ConfigError(f"key 'moves/{k}': {exc}") from exc
    final = apply_sequence(g, p0, moves)
    v = _target(cfg, g)
    lhs, rhs = verify_duality(g, p0, v, moves)
    if abs(lhs - rhs) > 1e-10:
        raise ContractViolation(f"duality check failed at vertex {v}: {lhs} vs {rhs}")
    ext = "json" if args.format == "json" else "csv"
    rows = list(trace_rows(g, p0, moves))
    return {
        f"trace.{ext}": _rows_out(TRACE_HEADER, rows, args.format),
        "final.json": _dump({"initial": p0.tolist(), "final": final.tolist(), "target": v,
                             "target_level": float(final[v]), "sad_weighted": rhs}),
    }


def cmd_kappa(cfg: dict, args) -> dict[str, str]:
    g = build_graph(cfg.get("graph"))
    v = _target(cfg, g)
    p0 = _profile(cfg, g, cfg.get("seed", 0))
    opt = cfg.get("optimizer", {})
    want_cap = opt.get("cap_bound", True)
    if want_cap and not g.is_tree():
        log.warning("cap bound needs a tree; falling back to the trivial maximum")
    est: KappaEstimate = kappa_search(
        g, p0, v, depth=opt.get("depth", 4), mu_grid=opt.get("mu_grid", [0.5]),
        beam=opt.get("beam", 64), max_states=opt.get("max_states", 5_000_000), use_cap=want_cap,
    )
    if opt.get("closed_form", False):
        cf = closed_form_for(g, v)
        if cf is None:
            log.warning("no closed form known for this graph/target; reporting search bounds")
        else:
            est.exact = float(cf(p0))
            est.upper = est.exact
            est.upper_method = "exact"
    out = {"kappa.json": _dump({**est.to_dict(), "target": v, "initial": p0.tolist()})}
    if est.partial:
        raise BudgetExceededError("search state budget exhausted", out)
    return out


def cmd_mc_cdf(cfg: dict, args) -> dict[str, str]:
    g = build_graph(cfg.get("graph"))
    v = _target(cfg, g)
    trials = cfg.get("trials", 0)
    if trials < 1:
        raise ConfigError("key 'trials': must be >= 1")
    seed = cfg.get("seed", 0)
    law = _law(cfg)
    opt = cfg.get("optimizer", {})
    kw = {}
    if closed_form_vec_for(g, v) is None:
        kw["evaluator"] = search_evaluator(g, v, depth=opt.get("depth", 4), mu_grid=opt.get("mu_grid", [0.5]),
                                           beam=opt.get("beam", 64))
    samples, label = mc_kappa_samples(g, v, trials, seed, law=law, threads=args.threads, **kw)
    if "evaluator" in kw:
        label = "lower-bound"
    emp = EmpiricalCdf(samples, label)
    ref = reference_cdf_for(g, v) if law.kind == "uniform01" and label == "exact" else None
    grid = np.linspace(0.0, 1.0, cfg.get("mc", {}).get("grid", 1001))
    F = emp(grid)
    R = ref(grid) if ref else [""] * len(grid)
    rows = [(float(x), float(f), (float(r) if ref else "")) for x, f, r in zip(grid, F, R)]
    ext = "json" if args.format == "json" else "csv"
    meta = {
        "seed": seed, "trials": trials, "graph": g.to_dict(), "target": v,
        "evaluator": label, "law": cfg.get("law", {"kind": "uniform01"}),
        "ks": ks_distance(emp, ref) if ref else None,
        "cdf_label": "lower-bound CDF" if label == "lower-bound" else "CDF",
    }
    return {f"cdf.{ext}": _rows_out(("x", "F_emp", "F_ref"), rows, args.format), "metadata.json": _dump(meta)}


def cmd_pump(cfg: dict, args) -> dict[str, str]:
    pc = cfg.get("pump", {})
    eps = pc.get("eps", 0.2)
    trunc = pc.get("truncation", 60)
    fspec = pc.get("f", {"kind": "linear", "mult": 3})
    try:
        if isinstance(fspec, list):
            spec = HalfLineSpec(trunc, tuple(fspec))
        else:
            spec = HalfLineSpec.from_function(linear_f(fspec["mult"]), trunc)
    except ValueError as exc:
        raise ConfigError(f"key 'pump/f': {exc}") from exc
    g = make_halfline(spec)
    seeds = pc.get("seeds", [cfg.get("seed", 0)])
    budget = pc.get("stage_budget", 1_000_000)
    law = _law(cfg)

    def one(seed):
        p0 = sample_profile(g, law, seed)
        return seed, run_pump(g, p0, eps, stage_budget=budget)

    if args.threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(args.threads) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    files = {}
    ext = "json" if args.format == "json" else "csv"
    header = ("seed", "selected", "captured", "product_bound", "final_level")
    summary = []
    for seed, rep in results:
        files[f"pump_seed{seed}.json"] = _dump({"seed": seed, "eps": eps, "truncation": trunc, **rep.to_dict()})
        files[f"stages_seed{seed}.{ext}"] = _rows_out(
            ("k", "N_k", "f_N_k", "stage_mass", "cumulative_mass", "product_bound_so_far"),
            list(rep.stage_rows()), args.format)
        summary.append((seed, len(rep.selected_indices), rep.total_mass_captured, rep.product_bound, rep.final_level))
    if summary:
        arr = np.array([s[1:] for s in summary], dtype=float)
        summary.append(("mean", *[float(x) for x in arr.mean(axis=0)]))
    files[f"summary.{ext}"] = _rows_out(header, summary, args.format)
    return files


COMMANDS = {"simulate": cmd_simulate, "kappa": cmd_kappa, "mc-cdf": cmd_mc_cdf, "pump": cmd_pump}


def _write(out: Path, files: dict[str, str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        tmp = out / (name + ".tmp")
        tmp.write_text(text)
        tmp.replace(out / name)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aqua", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON experiment config")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--out", help="output directory (overrides output.dir)")
        s.add_argument("--format", choices=["csv", "json"], help="tabular output format")
        s.add_argument("--threads", type=int, help="worker threads (default: $AQUA_THREADS or 1)")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
            if "pump" in cfg and "seeds" in cfg["pump"]:
                cfg["pump"]["seeds"] = [args.seed]
        outcfg = cfg.get("output", {})
        args.format = args.format or outcfg.get("format", "csv")
        if args.threads is None:
            env = os.environ.get("AQUA_THREADS")
            try:
                args.threads = int(env) if env else 1
            except ValueError:
                raise ConfigError(f"AQUA_THREADS={env!r} is not an integer")
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = Path(args.out or outcfg.get("dir", "out"))
        files = COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc.args[0]}", file=sys.stderr)
        if len(exc.args) > 1:
            _write(out, {**exc.args[1], "run_info.json": _run_info(args, cfg)})
        return EXIT_BUDGET
    except NonConvergenceError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except AquaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    files["run_info.json"] = _run_info(args, cfg)
    _write(out, files)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

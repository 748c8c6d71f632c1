"""Command-line experiment runner.

Each subcommand sweeps a noise grid, evaluates oracles and/or trains
protocols, and writes one long-format CSV (columns experiment, method,
param_name, param_value, n_copies, value) plus a JSON manifest. Output is
byte-identical for a fixed (config, seed); sweep points may be evaluated
in a worker pool but rows are always emitted in sweep order.

Exit codes: 0 success, 2 config parse error, 3 capacity (window dimension)
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .channels import NoisyStateSpec, make_state
from .dlocc import execute
from .experiments import (
    helstrom_bound,
    noisy_bell_pair,
    train_discrimination_chain,
    train_iso_dynamic_staged,
    train_qutrit_chain,
    train_two_pair_chain,
)
from .protocols import (
    build_dejmps_protocol,
    build_s_learned_protocol,
    copies_consumed,
    iso_input_fidelity,
    oracle_dynamic_dejmps,
    oracle_iso_dynamic,
    oracle_iso_iterative,
    oracle_learned_s,
)
from .qmath import CapacityError, fidelity_pure, max_entangled
from .train import OptimizerConfig

COLUMNS = ("experiment", "method", "param_name", "param_value", "n_copies", "value")

DISTILL_S = "distill-s"
DISTILL_ISO = "distill-iso"
DISTILL_GAD = "distill-gad"
DISTILL_AD = "distill-ad"
DISTILL_QUTRIT = "distill-qutrit"
DISCRIMINATE = "discriminate"
ORACLE = "oracle"
VERIFY = "verify"

SUBCOMMANDS = (
    DISTILL_S,
    DISTILL_ISO,
    DISTILL_GAD,
    DISTILL_AD,
    DISTILL_QUTRIT,
    DISCRIMINATE,
    ORACLE,
    VERIFY,
)


class ConfigError(Exception):
    """Raised for any config-file problem; maps to exit code 2."""


# ---------------------------------------------------------------------------
# config parsing


def _parse_float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"key '{key}': expected a number, got {text!r}") from exc


def parse_grid(text: str, key: str = "grid") -> tuple[float, ...]:
    """A sweep grid: 'a:b:step' (inclusive), a comma list, or one number."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"key '{key}': grid must be start:stop:step, got {text!r}")
        a, b, step = (_parse_float(t, key) for t in parts)
        if step <= 0 or b < a:
            raise ConfigError(f"key '{key}': grid needs step > 0 and stop >= start")
        count = int(np.floor((b - a) / step + 0.5)) + 1
        # snap accumulated float error so grid labels stay clean decimals
        return tuple(round(a + i * step, 12) for i in range(count))
    if "," in text:
        return tuple(_parse_float(t, key) for t in text.split(","))
    return (_parse_float(text, key),)


def parse_int_list(text: str, key: str = "list") -> tuple[int, ...]:
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"key '{key}': range must be start:stop:step, got {text!r}")
        try:
            a, b, step = (int(t) for t in parts)
        except ValueError as exc:
            raise ConfigError(f"key '{key}': expected integers, got {text!r}") from exc
        if step <= 0 or b < a:
            raise ConfigError(f"key '{key}': range needs step > 0 and stop >= start")
        return tuple(range(a, b + 1, step))
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"key '{key}': expected integers, got {text!r}") from exc


def _parse_methods(text: str, key: str, allowed: tuple[str, ...]) -> tuple[str, ...]:
    methods = tuple(t.strip() for t in text.split(",") if t.strip())
    for m in methods:
        if m not in allowed:
            raise ConfigError(f"key '{key}': unknown method {m!r}; allowed: {', '.join(allowed)}")
    if not methods:
        raise ConfigError(f"key '{key}': at least one method required")
    return methods


# key -> (parser, default) per experiment section; parsers close over the key
def _schema(subcommand: str) -> dict[str, tuple]:
    def grid(key):
        return lambda t: parse_grid(t, key)

    def ints(key):
        return lambda t: parse_int_list(t, key)

    def flt(key):
        return lambda t: _parse_float(t, key)

    def choice(key, *opts):
        def parse(t):
            if t not in opts:
                raise ConfigError(f"key '{key}': expected one of {opts}, got {t!r}")
            return t

        return parse

    def methods(key, *opts):
        return lambda t: _parse_methods(t, key, opts)

    def pair(key):
        def parse(t):
            vals = parse_grid(t, key)
            if len(vals) != 2:
                raise ConfigError(f"key '{key}': expected two comma-separated numbers")
            return vals

        return parse

    if subcommand == DISTILL_S:
        return {
            "gamma": (grid("gamma"), parse_grid("0.1:0.9:0.1")),
            "copies": (ints("copies"), (2, 3, 4, 5, 6)),
            "methods": (
                methods("methods", "oracle_learned", "oracle_ddejmps", "sim", "dejmps", "trained"),
                ("oracle_learned", "oracle_ddejmps", "sim"),
            ),
        }
    if subcommand == DISTILL_ISO:
        return {
            "mode": (choice("mode", "dynamic", "iterative"), "dynamic"),
            "p": (grid("p"), (0.7,)),
            "iterations": (ints("iterations"), (1, 2, 3)),
            "copies": (ints("copies"), ()),
            "methods": (methods("methods", "oracle", "input", "trained"), ("oracle", "input")),
        }
    if subcommand in (DISTILL_GAD, DISTILL_AD):
        return {
            "gamma": (grid("gamma"), (0.1, 0.3, 0.5)),
            "q": (flt("q"), 1.0),
            "copies": (ints("copies"), (2, 3)),
            "methods": (methods("methods", "input", "trained"), ("input", "trained")),
        }
    if subcommand == DISTILL_QUTRIT:
        return {
            "p": (grid("p"), (0.5, 0.7, 0.9)),
            "copies": (ints("copies"), (3,)),
            "methods": (methods("methods", "input", "trained"), ("input", "trained")),
        }
    if subcommand == DISCRIMINATE:
        return {
            "channel": (
                choice("channel", "dephasing", "amplitude_damping", "depolarizing"),
                "dephasing",
            ),
            "p": (grid("p"), (0.2,)),
            "copies": (ints("copies"), (1, 2, 3)),
            "priors": (pair("priors"), (0.5, 0.5)),
            "methods": (methods("methods", "trained", "helstrom"), ("trained", "helstrom")),
        }
    if subcommand == ORACLE:
        return {
            "gamma": (grid("gamma"), parse_grid("0.1:0.9:0.1")),
            "copies": (ints("copies"), (2, 3, 4, 5, 6, 7)),
        }
    if subcommand == VERIFY:
        return {
            "gamma": (grid("gamma"), (0.1, 0.3, 0.5, 0.7, 0.9)),
            "copies": (ints("copies"), (2, 3, 4, 5, 6)),
        }
    raise ValueError(f"unknown subcommand {subcommand!r}")


_TRAIN_SCHEMA = {
    "method": ("str", "adam"),
    "step_size": ("float", 0.05),
    "max_iters": ("int", 200),
    "restarts": ("int", 2),
    "patience": ("int", 40),
    "stage_iters": ("int", 120),
    "first_restarts": ("int", 2),
    "seed": ("int", 0),
}

_OUTPUT_SCHEMA = {"csv": ("str", None)}


def _parse_train_value(key: str, kind: str, text: str):
    if kind == "int":
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"key '{key}': expected an integer, got {text!r}") from exc
    if kind == "float":
        return _parse_float(text, key)
    return text


def parse_config(path: str | None, subcommand: str) -> dict:
    """Strict sectioned key=value config; unknown sections/keys are errors.

    Returns {'experiment': {...}, 'train': {...}, 'output': {...}} with every
    key present (defaults filled in). ``path`` None means all defaults.
    """
    raw: dict[str, dict[str, str]] = {"experiment": {}, "train": {}, "output": {}}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        section = None
        for ln, line in enumerate(lines, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if text.startswith("[") and text.endswith("]"):
                section = text[1:-1].strip()
                if section not in raw:
                    raise ConfigError(f"line {ln}: unknown section [{section}]")
                continue
            if "=" not in text:
                raise ConfigError(f"line {ln}: expected key = value, got {text!r}")
            if section is None:
                raise ConfigError(f"line {ln}: key outside any [section]")
            key, value = (t.strip() for t in text.split("=", 1))
            if key in raw[section]:
                raise ConfigError(f"line {ln}: duplicate key '{key}' in [{section}]")
            raw[section][key] = value

    exp_schema = _schema(subcommand)
    for key in raw["experiment"]:
        if key not in exp_schema:
            raise ConfigError(f"unknown key '{key}' in section [experiment]")
    for key in raw["train"]:
        if key not in _TRAIN_SCHEMA:
            raise ConfigError(f"unknown key '{key}' in section [train]")
    for key in raw["output"]:
        if key not in _OUTPUT_SCHEMA:
            raise ConfigError(f"unknown key '{key}' in section [output]")

    experiment = {
        key: parser(raw["experiment"][key]) if key in raw["experiment"] else default
        for key, (parser, default) in exp_schema.items()
    }
    train = {
        key: _parse_train_value(key, kind, raw["train"][key]) if key in raw["train"] else default
        for key, (kind, default) in _TRAIN_SCHEMA.items()
    }
    if train["method"] not in ("adam", "fd_descent"):
        raise ConfigError(f"key 'method': expected adam or fd_descent, got {train['method']!r}")
    output = {
        key: raw["output"].get(key, default) for key, (_, default) in _OUTPUT_SCHEMA.items()
    }
    return {"experiment": experiment, "train": train, "output": output}


# ---------------------------------------------------------------------------
# sweep-point evaluation (top level so tasks can cross process boundaries)

PHI2 = max_entangled(2)
PHI3 = max_entangled(3)


def _sim_fidelity(protocol) -> float:
    out = execute(protocol)
    d = protocol.alice_dims[0]
    return fidelity_pure(out.conditional_state, max_entangled(d))


def _train_cfg(train: dict, seed: int) -> OptimizerConfig:
    return OptimizerConfig(
        method=train["method"],
        step_size=train["step_size"],
        max_iters=train["max_iters"],
        restarts=train["restarts"],
        patience=train["patience"],
        rng_seed=seed,
    )


def _point_rows(task: dict) -> list[tuple]:
    """Rows for one sweep point; must stay deterministic in the task alone."""
    kind = task["kind"]
    exp = task["experiment"]
    train = task["train"]
    seed = task["seed"]
    rows: list[tuple] = []

    if kind == DISTILL_S:
        g = task["gamma"]
        for method in exp["methods"]:
            if method == "dejmps":
                proto = build_dejmps_protocol(NoisyStateSpec("sstate", gamma=g))
                rows.append((kind, method, "gamma", g, 2, _sim_fidelity(proto)))
                continue
            for n in exp["copies"]:
                if method == "oracle_learned":
                    value = oracle_learned_s(n, g)
                elif method == "oracle_ddejmps":
                    value = oracle_dynamic_dejmps(n, g)
                elif method == "sim":
                    value = _sim_fidelity(build_s_learned_protocol(n, g))
                else:  # trained
                    source = NoisyStateSpec("sstate", gamma=g)
                    value, _ = train_two_pair_chain(source, n, _train_cfg(train, seed + n))
                rows.append((kind, method, "gamma", g, n, value))

    elif kind == DISTILL_ISO:
        p = task["p"]
        mode = exp["mode"]
        for method in exp["methods"]:
            if method == "input":
                rows.append((kind, method, "p", p, 1, iso_input_fidelity(p)))
            elif method == "oracle":
                oracle = oracle_iso_dynamic if mode == "dynamic" else oracle_iso_iterative
                for i in exp["iterations"]:
                    rows.append((kind, f"oracle_{mode}", "p", p, copies_consumed(mode, i), oracle(i, p)))
            else:  # trained
                if mode != "dynamic":
                    raise ConfigError("method 'trained' requires mode = dynamic")
                if not exp["copies"]:
                    raise ConfigError("method 'trained' needs a non-empty 'copies' list")
                for n in exp["copies"]:
                    res = train_iso_dynamic_staged(
                        n,
                        p,
                        seed=seed + n,
                        stage_iters=train["stage_iters"],
                        first_restarts=train["first_restarts"],
                        patience=train["patience"],
                    )
                    rows.append((kind, "trained", "p", p, n, res.fidelity))

    elif kind in (DISTILL_GAD, DISTILL_AD):
        g = task["gamma"]
        family = "unilocal_gad_bell" if kind == DISTILL_GAD else "bilocal_ad_bell"
        source = (
            NoisyStateSpec(family, gamma=g, q=exp["q"])
            if kind == DISTILL_GAD
            else NoisyStateSpec(family, gamma=g)
        )
        for method in exp["methods"]:
            if method == "input":
                rows.append((kind, method, "gamma", g, 1, fidelity_pure(make_state(source), PHI2)))
            else:
                for n in exp["copies"]:
                    value, _ = train_two_pair_chain(source, n, _train_cfg(train, seed + n))
                    rows.append((kind, method, "gamma", g, n, value))

    elif kind == DISTILL_QUTRIT:
        p = task["p"]
        source = NoisyStateSpec("qutrit_isotropic", p=p)
        for method in exp["methods"]:
            if method == "input":
                rows.append((kind, method, "p", p, 1, fidelity_pure(make_state(source), PHI3)))
            else:
                for n in exp["copies"]:
                    value, _ = train_qutrit_chain(n, p, _train_cfg(train, seed + n))
                    rows.append((kind, method, "p", p, n, value))

    elif kind == DISCRIMINATE:
        p = task["p"]
        state0 = noisy_bell_pair(exp["channel"], p)
        state1 = noisy_bell_pair(exp["channel"], p, minus=True)
        priors = tuple(exp["priors"])
        if "trained" in exp["methods"]:
            points = train_discrimination_chain(
                state0,
                state1,
                copies=tuple(exp["copies"]),
                seed=seed,
                max_iters=train["max_iters"],
                restarts=train["restarts"],
                priors=priors,
            )
            rows.extend((kind, "trained", "p", p, pt.n_copies, pt.success) for pt in points)
        if "helstrom" in exp["methods"]:
            rows.extend(
                (kind, "helstrom", "p", p, n, helstrom_bound(state0, state1, n, priors))
                for n in exp["copies"]
            )

    elif kind == ORACLE:
        g = task["gamma"]
        for n in exp["copies"]:
            rows.append((kind, "oracle_ddejmps", "gamma", g, n, oracle_dynamic_dejmps(n, g)))
        for n in exp["copies"]:
            rows.append((kind, "oracle_learned", "gamma", g, n, oracle_learned_s(n, g)))

    elif kind == VERIFY:
        g = task["gamma"]
        dejmps = _sim_fidelity(build_dejmps_protocol(NoisyStateSpec("sstate", gamma=g)))
        closed = (1 + g) ** 2 / (2 * (1 + g * g))
        rows.append((kind, "dejmps_abs_error", "gamma", g, 2, abs(dejmps - closed)))
        for n in exp["copies"]:
            sim = _sim_fidelity(build_s_learned_protocol(n, g))
            rows.append((kind, "learned_s_abs_error", "gamma", g, n, abs(sim - oracle_learned_s(n, g))))

    else:
        raise ValueError(f"unknown experiment kind {kind!r}")
    return rows


def _make_tasks(subcommand: str, cfg: dict, seed: int) -> list[dict]:
    exp = cfg["experiment"]
    axis = "gamma" if "gamma" in exp else "p"
    tasks = []
    for idx, value in enumerate(exp[axis]):
        tasks.append(
            {
                "kind": subcommand,
                axis: value,
                "experiment": exp,
                "train": cfg["train"],
                "seed": seed * 100003 + idx,
            }
        )
    return tasks


# ---------------------------------------------------------------------------
# output files


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str, rows: list[tuple]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow([_format_cell(cell) for cell in row])


def run_experiment(subcommand: str, cfg: dict, seed: int, out_dir: str, jobs: int) -> int:
    """Run one experiment end to end; the manifest is written even on failure."""
    os.makedirs(out_dir, exist_ok=True)
    csv_name = cfg["output"]["csv"] or f"{subcommand}.csv"
    csv_path = os.path.join(out_dir, csv_name)
    manifest_path = os.path.join(out_dir, f"{subcommand}_manifest.json")
    manifest = {
        "experiment": subcommand,
        "config": {
            section: {k: list(v) if isinstance(v, tuple) else v for k, v in body.items()}
            for section, body in cfg.items()
        },
        "seed": seed,
        "jobs": jobs,
        "versions": {
            "dloccsim": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "csv": csv_path,
        "status": "running",
        "rows": 0,
        "wall_time_s": 0.0,
    }
    t0 = time.perf_counter()
    status = 0
    try:
        tasks = _make_tasks(subcommand, cfg, seed)
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                per_task = list(pool.map(_point_rows, tasks))
        else:
            per_task = [_point_rows(t) for t in tasks]
        rows = [row for chunk in per_task for row in chunk]
        write_csv(csv_path, rows)
        manifest["status"] = "ok"
        manifest["rows"] = len(rows)
        if subcommand == VERIFY:
            worst = max(row[5] for row in rows)
            print(f"max |oracle - simulation| = {worst:.3e}")
        else:
            print(f"wrote {len(rows)} rows to {csv_path}")
    except CapacityError as exc:
        manifest["status"] = "error"
        manifest["error"] = str(exc)
        print(f"capacity error: {exc}", file=sys.stderr)
        status = 3
    finally:
        manifest["wall_time_s"] = round(time.perf_counter() - t0, 3)
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dloccsim",
        description="Simulate, train, and cross-check dynamic LOCC protocols.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    descriptions = {
        DISTILL_S: "erasure-noise (S state) distillation: oracles and engine simulation",
        DISTILL_ISO: "isotropic-state distillation ladders and staged window training",
        DISTILL_GAD: "train the two-pair chain on one-sided GAD Bell pairs",
        DISTILL_AD: "train the two-pair chain on two-sided amplitude-damped Bell pairs",
        DISTILL_QUTRIT: "train the two-qutrit-pair chain on depolarized qutrit pairs",
        DISCRIMINATE: "train LOCC discrimination of two noisy Bell hypotheses",
        ORACLE: "tabulate the closed-form distillation fidelities",
        VERIFY: "check engine simulation against the closed forms",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=descriptions[name])
        p.add_argument("--config", default=None, help="path to a key=value config file")
        p.add_argument("--seed", type=int, default=None, help="base RNG seed (default: [train] seed)")
        p.add_argument("--out", default=".", help="output directory (default .)")
        p.add_argument(
            "--jobs",
            type=int,
            default=os.cpu_count() or 1,
            help="worker processes for sweep points (default: logical cores)",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, args.subcommand)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else cfg["train"]["seed"]
    return run_experiment(args.subcommand, cfg, seed, args.out, args.jobs)


if __name__ == "__main__":
    sys.exit(main())

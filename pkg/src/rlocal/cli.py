"""``rlocal`` command-line interface.

Commands: ``solve``, ``score``, ``bench``, ``udgp``, ``bound``, ``unscramble``.
Experiment parameters come from a JSON config file (``--config``), with
``--seed/--trials/--out/--threads`` and ``--set key=value`` overrides applied
on top. Exit codes: 0 ok, 2 config error, 3 data error, 4 solver abort.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from . import __version__
from .analysis import PermutationPrior, hamming_distortion, relative_error
from .core import BlockPartition, DimensionError, SenseInstance
from .experiments import (
    BENCH_COLUMNS,
    BOUND_COLUMNS,
    UDGP_COLUMNS,
    run_bench,
    run_bounds,
    run_udgp,
    summarize,
    unscramble,
)
from .io import (
    DataError,
    config_header,
    read_image,
    read_matrix_csv,
    read_permutation_csv,
    write_matrix_csv,
    write_permutation_csv,
    write_pgm,
    write_table,
)
from .linalg import RankError
from .pam import PamConfig, SolverError, run_pam

log = logging.getLogger("rlocal")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4
SCHEMA_VERSION = 1
TOOL = f"rlocal {__version__}"


class ConfigError(ValueError):
    pass


_number_or_inf = {"anyOf": [{"type": "number", "exclusiveMinimum": 0}, {"enum": ["inf"]}]}
_pos_int = {"type": "integer", "minimum": 1}
_pam_schema = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "lambda_init": {"type": "number", "exclusiveMinimum": 0},
        "lambda_decay": {"type": "number", "exclusiveMinimum": 1},
        "lambda_floor": {"type": "number", "minimum": 0},
        "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "max_iters": _pos_int,
        "objective_floor": {"type": "number", "minimum": 0},
    },
}
_common = {
    "schema_version": {"const": SCHEMA_VERSION},
    "command": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0},
    "trials": _pos_int,
    "threads": _pos_int,
    "out": {"type": "string"},
    "pam": _pam_schema,
}


def _schema(required: list[str], **props) -> dict:
    return {
        "type": "object",
        "additionalProperties": False,
        "required": required,
        "properties": {**_common, **props},
    }


SCHEMAS = {
    "bench": _schema(
        ["grid"],
        grid={
            "type": "object",
            "additionalProperties": False,
            "required": ["n", "d", "m", "r", "snr"],
            "properties": {
                "n": {"type": "array", "items": _pos_int, "minItems": 1},
                "d": {"type": "array", "items": _pos_int, "minItems": 1},
                "m": {"type": "array", "items": _pos_int, "minItems": 1},
                "r": {"type": "array", "items": _pos_int, "minItems": 1},
                "snr": {"type": "array", "items": _number_or_inf, "minItems": 1},
            },
        },
    ),
    "udgp": _schema(
        ["d"],
        d={"type": "integer", "minimum": 3},
        variances={"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        sigma2={"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
    ),
    "bound": _schema(
        ["n", "m", "snr", "priors"],
        n=_pos_int,
        m=_pos_int,
        snr={"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        priors={
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["model"],
                "properties": {
                    "model": {"enum": ["unrestricted", "r_local", "k_sparse"]},
                    "r": _pos_int,
                    "k": {"type": "integer", "minimum": 0},
                },
            },
        },
    ),
    "solve": _schema(["B", "Y", "partition"], B={"type": "string"}, Y={"type": "string"}, partition={"type": "string"}),
    "score": _schema(
        ["P_hat", "P_star"],
        P_hat={"type": "string"},
        P_star={"type": "string"},
        X_hat={"type": "string"},
        X_star={"type": "string"},
    ),
    "unscramble": _schema(
        ["train_dir", "target", "d", "partition"],
        train_dir={"type": "string"},
        target={"type": "string"},
        d=_pos_int,
        partition={"type": "string"},
    ),
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "bench": {"trials": 75},
    "udgp": {"trials": 75, "variances": [1, 5, 10], "sigma2": [0, 0.01, 0.1, 0.5, 1.0]},
    "bound": {},
    "solve": {},
    "score": {},
    "unscramble": {"d": 5},
}
# input file fields, resolved relative to the config file's directory
PATH_FIELDS = {"B", "Y", "P_hat", "P_star", "X_hat", "X_star", "train_dir", "target"}
# fields that do not change results and are left out of the config echo
NON_RESULT_FIELDS = {"out", "threads"}


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(cfg: dict, key: str, value) -> None:
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{key}: {part} is not a section")
    node[parts[-1]] = value


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "command": command, "seed": 0, "threads": 1, "out": "."}
    cfg.update(copy.deepcopy(DEFAULTS[command]))
    base = Path.cwd()
    if args.config:
        path = Path(args.config)
        try:
            loaded = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: {path} is not valid JSON ({exc})") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config: top level must be an object")
        if loaded.get("command", command) != command:
            raise ConfigError(f"command: config is for {loaded['command']!r}, not {command!r}")
        cfg.update(loaded)
        base = path.resolve().parent
        for key in PATH_FIELDS & loaded.keys():
            cfg[key] = str((base / loaded[key]).resolve()) if isinstance(loaded[key], str) else loaded[key]
    for key in ("seed", "trials", "threads", "out"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for key, attr in getattr(args, "field_flags", {}).items():
        val = getattr(args, attr, None)
        if val is not None:
            cfg[key] = str(Path(val).resolve()) if key in PATH_FIELDS else val
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        key, val = item.split("=", 1)
        _set_dotted(cfg, key.strip(), _parse_value(val))
    validate_config(command, cfg)
    return cfg


def validate_config(command: str, cfg: dict) -> None:
    validator = jsonschema.Draft7Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = ".".join(str(p) for p in err.absolute_path) or "config"
        raise ConfigError(f"{where}: {err.message}")
    if command == "bound":
        for i, prior in enumerate(cfg["priors"]):
            try:
                _prior(prior, cfg["n"])
            except ValueError as exc:
                raise ConfigError(f"priors.{i}: {exc}") from None
    if command == "bench":
        for n in cfg["grid"]["n"]:
            for r in cfg["grid"]["r"]:
                if n % r:
                    raise ConfigError(f"grid.r: block size {r} does not divide n={n}")
    for key in PATH_FIELDS & cfg.keys():
        p = Path(cfg[key])
        if not p.exists():
            raise ConfigError(f"{key}: {p} does not exist")
    try:
        PamConfig(**cfg.get("pam", {}))
    except ValueError as exc:
        raise ConfigError(f"pam: {exc}") from None


def _prior(spec: dict, n: int) -> PermutationPrior:
    return PermutationPrior(spec["model"], n, r=spec.get("r", 0), k=spec.get("k", 0))


def _snr(v) -> float:
    return math.inf if v == "inf" else float(v)


def _echo(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k not in NON_RESULT_FIELDS}


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _header(cfg: dict) -> list[str]:
    return config_header(TOOL, cfg["command"], _echo(cfg))


def cmd_solve(cfg: dict) -> int:
    B = read_matrix_csv(cfg["B"], "B")
    Y = read_matrix_csv(cfg["Y"], "Y")
    try:
        part = BlockPartition.parse(cfg["partition"], n=B.shape[0])
    except ValueError as exc:
        raise ConfigError(f"partition: {exc}") from None
    if B.shape[0] != Y.shape[0]:
        raise DataError(f"Y: has {Y.shape[0]} rows but B has {B.shape[0]}")
    if part.n != B.shape[0]:
        raise DataError(f"partition: covers {part.n} rows but B has {B.shape[0]}")
    res = run_pam(SenseInstance(B, Y, part), PamConfig(**cfg.get("pam", {})))
    out = _out_dir(cfg)
    header = _header(cfg)
    write_permutation_csv(out / "P_hat.csv", res.P_hat, header)
    write_matrix_csv(out / "X_hat.csv", res.X_hat, header)
    write_table(
        out / "solve_report.csv",
        ["iterations", "converged", "stop_reason", "F_final", "stabilization"],
        [
            {
                "iterations": res.iterations,
                "converged": res.converged,
                "stop_reason": res.stop_reason,
                "F_final": res.final_objective,
                "stabilization": res.stabilization(),
            }
        ],
        header,
    )
    print(f"solved: {res.iterations} iterations, F={res.final_objective:.6g}, stop={res.stop_reason}")
    return EXIT_OK


def score_files(cfg: dict) -> dict:
    P_hat = read_permutation_csv(cfg["P_hat"])
    P_star = read_permutation_csv(cfg["P_star"])
    if P_hat.n != P_star.n:
        raise DataError(f"P_hat: has {P_hat.n} rows but P_star has {P_star.n}")
    dh = hamming_distortion(P_hat, P_star)
    row = {"n": P_hat.n, "d_H": dh, "d_H_over_n": dh / P_hat.n, "relative_error": None}
    if cfg.get("X_hat") and cfg.get("X_star"):
        X_hat = read_matrix_csv(cfg["X_hat"], "X_hat")
        X_star = read_matrix_csv(cfg["X_star"], "X_star")
        if X_hat.shape != X_star.shape:
            raise DataError(f"X_hat: shape {X_hat.shape} differs from X_star {X_star.shape}")
        row["relative_error"] = relative_error(X_hat, X_star)
    return row


def cmd_score(cfg: dict) -> int:
    row = score_files(cfg)
    write_table(_out_dir(cfg) / "score.csv", ["n", "d_H", "d_H_over_n", "relative_error"], [row], _header(cfg))
    print(", ".join(f"{k}={v}" for k, v in row.items()))
    return EXIT_OK


def _write_timings(path: Path, rows: list[dict], times: list[float], keys: list[str]) -> None:
    write_table(path, keys + ["wall_time_s"], [dict(r, wall_time_s=t) for r, t in zip(rows, times)])


def cmd_bench(cfg: dict) -> int:
    grid = dict(cfg["grid"])
    grid["snr"] = [_snr(s) for s in grid["snr"]]
    rows, times = run_bench(grid, cfg["trials"], cfg["seed"], cfg.get("pam"), cfg["threads"])
    out = _out_dir(cfg)
    header = _header(cfg)
    write_table(out / "bench.csv", BENCH_COLUMNS, rows, header)
    keys = ["n", "d", "m", "r", "snr"]
    summary = []
    for metric in ("d_H_over_n", "relative_error"):
        summary += [dict(s, metric=metric) for s in summarize(rows, keys, metric)]
    write_table(out / "bench_summary.csv", keys + ["metric", "mean", "std", "count"], summary, header)
    _write_timings(out / "bench_timings.csv", rows, times, keys + ["trial"])
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"bench: {len(rows)} trials ({failed} failed) -> {out / 'bench.csv'}")
    return EXIT_OK


def cmd_udgp(cfg: dict) -> int:
    rows, times = run_udgp(cfg["d"], cfg["variances"], cfg["sigma2"], cfg["trials"], cfg["seed"], cfg.get("pam"), cfg["threads"])
    out = _out_dir(cfg)
    header = _header(cfg)
    write_table(out / "udgp.csv", UDGP_COLUMNS, rows, header)
    keys = ["d", "variance", "sigma2"]
    write_table(out / "udgp_summary.csv", keys + ["mean", "std", "count"], summarize(rows, keys, "relative_error"), header)
    _write_timings(out / "udgp_timings.csv", rows, times, keys + ["trial"])
    print(f"udgp: {len(rows)} trials -> {out / 'udgp.csv'}")
    return EXIT_OK


def cmd_bound(cfg: dict) -> int:
    priors = [_prior(p, cfg["n"]) for p in cfg["priors"]]
    rows = run_bounds(cfg["n"], cfg["m"], cfg["snr"], priors)
    out = _out_dir(cfg)
    write_table(out / "bound.csv", BOUND_COLUMNS, rows, _header(cfg))
    print(f"bound: {len(priors)} curves -> {out / 'bound.csv'}")
    return EXIT_OK


def _load_corpus(train_dir: Path, shape: tuple[int, int]) -> np.ndarray:
    files = sorted(p for p in train_dir.iterdir() if p.suffix.lower() in (".pgm", ".csv"))
    if not files:
        raise DataError(f"train_dir: no .pgm or .csv images in {train_dir}")
    imgs = []
    for f in files:
        img = read_image(f)
        if img.shape != shape:
            raise DataError(f"train_dir: {f.name} is {img.shape[0]}x{img.shape[1]}, target is {shape[0]}x{shape[1]}")
        imgs.append(img.reshape(-1))
    return np.vstack(imgs)


def cmd_unscramble(cfg: dict) -> int:
    target_path = Path(cfg["target"])
    target = read_image(target_path)
    train = _load_corpus(Path(cfg["train_dir"]), target.shape)
    try:
        part = BlockPartition.parse(cfg["partition"], n=target.size)
    except ValueError as exc:
        raise ConfigError(f"partition: {exc}") from None
    try:
        res = unscramble(train, target, cfg["d"], part, PamConfig(**cfg.get("pam", {})), seed=cfg["seed"])
    except RankError as exc:
        raise DataError(f"d: {exc}") from None
    out = _out_dir(cfg)
    header = _header(cfg)
    shape = target.shape
    if target_path.suffix.lower() == ".pgm":
        write_pgm(out / "scrambled.pgm", res.scrambled.reshape(shape))
        write_pgm(out / "reconstructed.pgm", res.reconstructed.reshape(shape))
    else:
        write_matrix_csv(out / "scrambled.csv", res.scrambled.reshape(shape), header)
        write_matrix_csv(out / "reconstructed.csv", res.reconstructed.reshape(shape), header)
    write_permutation_csv(out / "P_star.csv", res.P_star, header)
    write_permutation_csv(out / "P_hat.csv", res.P_hat, header)
    row = {"n": target.size, "d": cfg["d"], "psnr_db": res.psnr, "d_H": res.d_H, "iterations": res.iterations}
    write_table(out / "unscramble.csv", list(row), [row], header)
    print(f"unscramble: PSNR={res.psnr:.2f} dB, d_H={res.d_H}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "score": cmd_score,
    "bench": cmd_bench,
    "udgp": cmd_udgp,
    "bound": cmd_bound,
    "unscramble": cmd_unscramble,
}

# per-command flags mapped onto config fields
FIELD_FLAGS = {
    "solve": {"B": "B", "Y": "Y", "partition": "partition"},
    "score": {"P_hat": "P_hat", "P_star": "P_star", "X_hat": "X_hat", "X_star": "X_star"},
    "unscramble": {"train_dir": "train_dir", "target": "target", "d": "d", "partition": "partition"},
    "udgp": {"d": "d"},
    "bound": {"n": "n", "m": "m"},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rlocal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=TOOL)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int)
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field (dotted keys, JSON values)")
        for key in FIELD_FLAGS.get(name, {}):
            kind = int if key in ("d", "n", "m") else str
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=kind)
        p.set_defaults(field_flags=FIELD_FLAGS.get(name, {}))
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DimensionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

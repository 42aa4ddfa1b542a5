"""Batch runner: JSON config in, JSON envelope out.

Exit codes: 0 success, 1 fatal invariant violation, 2 inconclusive
(sampling budget exhausted), 64 usage or validation error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .curves import dualizing_bundle, h0_basis, model_from_json, model_hash, model_to_json
from .errors import FatalInvariantError, InconclusiveError, ModelError, PreconditionError
from .koszul import betti_table
from .models import builtin_model, model_for_cell
from .verifiers import (
    SecantStatus,
    eqnrr_sides,
    general_pair,
    gv_status,
    induction_driver,
    mrc_status,
    twisted_quotient_check,
    prop_kp1_check,
    quadric_secant_witness,
    secant_noncontainment_check,
)

log = logging.getLogger("koszulcert")

COMMANDS = ("betti", "mrc", "gv", "verify-lemma21", "verify-lemma22", "verify-prop11", "verify-prop14", "induct")
EXIT_OK, EXIT_FATAL, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 64


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    cells: list  # list of (g, r, d, p); entries may be None when a model is given
    steps: int = 0
    seed: int = 0
    model: object = None  # builtin name or explicit model JSON
    output: str | None = None
    cache_dir: str | None = None
    samples: int = 10
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - {"command", "cell", "cells", "steps", "seed", "model", "output", "cache_dir", "samples"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cmd = data.get("command")
        if cmd not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {cmd!r}")
        if "cell" in data and "cells" in data:
            raise ConfigError("give either 'cell' or 'cells'")
        raw_cells = data.get("cells", [data["cell"]] if "cell" in data else [None])
        cells = [_parse_cell(c) for c in raw_cells]
        if data.get("model") is None and any(c is None for c in cells):
            raise ConfigError("need a cell or a model")
        steps = data.get("steps", 0)
        if not isinstance(steps, int) or steps < 0:
            raise ConfigError("steps must be a nonnegative integer")
        seed = data.get("seed", 0)
        if not isinstance(seed, int):
            raise ConfigError("seed must be an integer")
        samples = data.get("samples", 10)
        if not isinstance(samples, int) or samples < 1:
            raise ConfigError("samples must be a positive integer")
        return cls(cmd, cells, steps, seed, data.get("model"), data.get("output"), data.get("cache_dir"),
                   samples, dict(data))


def _parse_cell(c):
    if c is None:
        return None
    if isinstance(c, dict):
        try:
            vals = (c["g"], c["r"], c["d"], c.get("p", 1))
        except KeyError as exc:
            raise ConfigError(f"cell is missing {exc}") from None
    elif isinstance(c, (list, tuple)) and len(c) in (3, 4):
        vals = tuple(c) + ((1,) if len(c) == 3 else ())
    else:
        raise ConfigError(f"bad cell {c!r}")
    if not all(isinstance(x, int) for x in vals):
        raise ConfigError(f"cell entries must be integers: {c!r}")
    return tuple(vals)


def rho(g: int, r: int, d: int) -> int:
    return g - (r + 1) * (g - d + r)


# --- model resolution -----------------------------------------------------------------


def resolve_model(cfg: RunConfig, cell, seed: int):
    if cfg.model is None:
        g, r, d, _ = cell
        try:
            name, L = model_for_cell(g, r, d, seed)
        except ModelError as exc:
            raise ConfigError(str(exc)) from None
        return name, L
    if isinstance(cfg.model, str):
        try:
            L = builtin_model(cfg.model, seed)
        except ModelError as exc:
            raise ConfigError(str(exc)) from None
        name = cfg.model
    elif isinstance(cfg.model, dict):
        try:
            L = model_from_json(cfg.model)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad explicit model: {exc}") from None
        name = "explicit"
    else:
        raise ConfigError("model must be a built-in name or a model JSON object")
    if cell is not None:
        have = (L.curve.genus, h0_basis(L).dim - 1, L.degree)
        if have != tuple(cell[:3]):
            raise ConfigError(f"model/cell mismatch: cell (g, r, d) = {tuple(cell[:3])}, model has {have}")
    return name, L


def bookkeeping(L) -> dict:
    g, d = L.curve.genus, L.degree
    n = h0_basis(L).dim
    h1 = h0_basis(dualizing_bundle(L.curve).tensor(L.inverse())).dim
    if n - h1 != d - g + 1:
        raise FatalInvariantError("Riemann-Roch fails on the model")
    r = n - 1
    return {"g": g, "r": r, "d": d, "h0": n, "h1": h1, "rho": rho(g, r, d)}


# --- commands ---------------------------------------------------------------------------


def _pairs(L, seed: int, count: int):
    return [general_pair(L, seed * 1000 + k) for k in range(count)]


def execute(cfg: RunConfig, cell, seed: int) -> tuple[dict, int, list]:
    """Run one cell; returns (result JSON, exit status, certificate lines)."""
    name, L = resolve_model(cfg, cell, seed)
    p = cell[3] if cell is not None else 1
    out = {"cell": list(cell) if cell else None, "model_name": name, "model": model_to_json(L),
           "model_hash": model_hash(L), "bookkeeping": bookkeeping(L)}
    status, certs = EXIT_OK, []
    cmd = cfg.command
    if cmd == "betti":
        out["result"] = betti_table(L).to_json()
    elif cmd == "mrc":
        out["result"] = mrc_status(L).to_json()
    elif cmd == "gv":
        cert = gv_status(L, p)
        out["result"] = cert.to_json()
        certs.append(cert.to_json(timing=True))
    elif cmd == "verify-lemma21":
        rows = []
        for u, v in _pairs(L, seed, cfg.samples):
            lhs, rhs = eqnrr_sides(L, 1, u, v)
            w = quadric_secant_witness(L, u, v)
            rows.append({"u": u.to_json(), "v": v.to_json(), "eqnrr": lhs == rhs, "lhs": lhs, "rhs": rhs,
                         "witness": w.to_json() if w else None})
        out["result"] = {"instances": rows, "agree": True}
    elif cmd == "verify-lemma22":
        rep = secant_noncontainment_check(L, seed)
        out["result"] = rep.to_json()
        if rep.status == SecantStatus.INCONCLUSIVE:
            status = EXIT_INCONCLUSIVE
        elif rep.status == SecantStatus.FAILS:
            status = EXIT_FATAL
    elif cmd == "verify-prop11":
        rows = []
        for u, v in _pairs(L, seed, cfg.samples):
            ok = prop_kp1_check(L, u, v, p)
            rows.append({"u": u.to_json(), "v": v.to_json(), "k_p1_X_zero": ok})
            if not ok:
                status = EXIT_FATAL
        out["result"] = {"p": p, "instances": rows}
    elif cmd == "verify-prop14":
        rows = []
        for u, v in _pairs(L, seed, cfg.samples):
            res = twisted_quotient_check(L, u, v, p)
            rows.append({"u": u.to_json(), "v": v.to_json(), "twisted_x": res.twisted_x,
                         "numerator": res.numerator, "denominator": res.denominator, "holds": res.holds})
            if not res.holds:
                status = EXIT_FATAL
        out["result"] = {"p": p, "instances": rows}
    elif cmd == "induct":
        res = induction_driver(L, cfg.steps, p, seed)
        certs = [c.to_json(timing=True) for c in res.certificates]
        out["result"] = {"base": res.base.to_json(), "certificates": [c.to_json() for c in res.certificates],
                         "diagnostic": res.diagnostic}
        if res.fatal:
            status = EXIT_FATAL
        elif res.diagnostic:
            status = EXIT_INCONCLUSIVE
    return out, status, certs


# --- cache ------------------------------------------------------------------------------


def cache_key(cfg: RunConfig, cell, seed: int) -> str:
    payload = {"command": cfg.command, "cell": cell, "seed": seed, "steps": cfg.steps,
               "samples": cfg.samples, "model": cfg.model, "engine_version": __version__}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def strip_timing(certs: list) -> list:
    out = []
    for c in certs:
        c = dict(c)
        c["telemetry"] = {k: v for k, v in c.get("telemetry", {}).items() if k != "elapsed_s"}
        out.append(c)
    return out


def cached_execute(cfg: RunConfig, cell, seed: int, cache_dir: str | None):
    if not cache_dir:
        return execute(cfg, cell, seed)
    key = cache_key(cfg, cell, seed)
    path = Path(cache_dir) / f"{key}.json"
    if path.exists():
        entry = json.loads(path.read_text())
        if entry.get("engine_version") == __version__:
            value = (entry["value"]["result"], entry["value"]["status"], entry["value"]["certs"])
            # audit roughly one hit in ten against a fresh computation
            if int(key, 16) % 10 == 0:
                fresh = execute(cfg, cell, seed)
                fresh = (fresh[0], fresh[1], strip_timing(fresh[2]))
                if _dumps(list(fresh)) != _dumps(list(value)):
                    raise FatalInvariantError(f"cache entry {key} differs from recomputation")
            return value
    value = execute(cfg, cell, seed)
    atomic_write(path, _dumps({"key": key, "engine_version": __version__,
                               "value": {"result": value[0], "status": value[1],
                                         "certs": strip_timing(value[2])}}))
    return value


def _worker(args):
    cfg, cell, seed, cache_dir = args
    try:
        return cached_execute(cfg, cell, seed, cache_dir)
    except FatalInvariantError as exc:
        return {"cell": list(cell) if cell else None, "fatal": str(exc)}, EXIT_FATAL, []
    except InconclusiveError as exc:
        return {"cell": list(cell) if cell else None, "inconclusive": str(exc)}, EXIT_INCONCLUSIVE, []
    except PreconditionError as exc:
        return {"cell": list(cell) if cell else None, "precondition_failed": str(exc)}, EXIT_INCONCLUSIVE, []


def run(cfg: RunConfig, jobs: int = 1, cache_dir: str | None = None) -> tuple[dict, int, list]:
    """Run every cell of the config; returns the envelope, exit code and certificate lines."""
    cache_dir = cache_dir or os.environ.get("CACHE_DIR") or cfg.cache_dir
    for cell in cfg.cells:
        resolve_model(cfg, cell, cfg.seed)  # validate before doing any work
    tasks = [(cfg, cell, cfg.seed, cache_dir) for cell in cfg.cells]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_worker, tasks))
    else:
        outcomes = [_worker(t) for t in tasks]
    results, certs, code = [], [], EXIT_OK
    for res, status, cert_lines in outcomes:
        results.append(res)
        certs.extend(cert_lines)
        if status == EXIT_FATAL or code == EXIT_FATAL:
            code = EXIT_FATAL
        elif status == EXIT_INCONCLUSIVE:
            code = EXIT_INCONCLUSIVE
    config_echo = dict(cfg.raw)
    config_echo["seed"] = cfg.seed
    envelope = {"engine_version": __version__, "config_echo": config_echo, "results": results}
    return envelope, code, certs


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="koszulcert", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--output", help="result JSON path (overrides config)")
    ap.add_argument("--cache", help="cache directory (overrides CACHE_DIR and config)")
    ap.add_argument("--jobs", type=int, default=1, help="parallel workers for independent cells")
    ap.add_argument("--timing", action="store_true", help="include wall-clock times in certificate lines (breaks byte-determinism)")
    ap.add_argument("-v", "--verbose", action="store_true")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        data = json.loads(Path(args.config).read_text())
        if args.seed is not None:
            data["seed"] = args.seed
        if args.output:
            data["output"] = args.output
        cfg = RunConfig.from_dict(data)
        envelope, code, certs = run(cfg, args.jobs, args.cache)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"koszulcert: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FatalInvariantError as exc:
        print(f"koszulcert: fatal: {exc}", file=sys.stderr)
        return EXIT_FATAL
    text = _dumps(envelope)
    if cfg.output:
        out = Path(cfg.output)
        atomic_write(out, text)
        if certs:
            if not args.timing:
                certs = strip_timing(certs)
            lines = "".join(json.dumps(c, sort_keys=True) + "\n" for c in certs)
            atomic_write(out.with_suffix(".certs.jsonl"), lines)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())

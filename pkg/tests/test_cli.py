import json
import subprocess
import sys

import pytest

from koszulcert import cli
from koszulcert.cli import EXIT_FATAL, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_USAGE, ConfigError, RunConfig, main
from koszulcert.curves import model_to_json
from koszulcert.models import builtin_model


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run_cli(tmp_path, cfg, *extra, out="out.json"):
    out_path = tmp_path / out
    code = main(["--config", write(tmp_path, cfg), "--output", str(out_path), *extra])
    return code, out_path


def test_betti_builtin(tmp_path):
    code, out = run_cli(tmp_path, {"command": "betti", "cell": [0, 4, 4]})
    assert code == EXIT_OK
    doc = json.loads(out.read_text())
    assert set(doc) == {"engine_version", "config_echo", "results"}
    cells = {(c["p"], c["q"]): c["k"] for c in doc["results"][0]["result"]["cells"]}
    assert cells[(1, 1)] == 6
    book = doc["results"][0]["bookkeeping"]
    assert (book["h0"], book["h1"], book["rho"]) == (5, 0, 0)


def test_induct_writes_certificate_lines(tmp_path):
    code, out = run_cli(tmp_path, {"command": "induct", "cell": [0, 4, 4, 1], "steps": 5})
    assert code == EXIT_OK
    lines = (tmp_path / "out.certs.jsonl").read_text().splitlines()
    assert len(lines) == 5
    certs = [json.loads(x) for x in lines]
    assert all(c["holds"] for c in certs)
    assert [(c["g"], c["d"]) for c in certs] == [(g, g + 4) for g in range(1, 6)]
    assert all("elapsed_s" not in c["telemetry"] for c in certs)


def test_timing_flag_adds_elapsed(tmp_path):
    code, _ = run_cli(tmp_path, {"command": "gv", "cell": [0, 3, 3, 1]}, "--timing")
    assert code == EXIT_OK
    (line,) = (tmp_path / "out.certs.jsonl").read_text().splitlines()
    assert "elapsed_s" in json.loads(line)["telemetry"]
    doc = json.loads((tmp_path / "out.json").read_text())
    assert "elapsed_s" not in json.dumps(doc)


def test_same_config_twice_is_byte_identical(tmp_path):
    cfg = {"command": "induct", "cell": [0, 2, 2, 1], "steps": 2, "seed": 3}
    run_cli(tmp_path, cfg, out="a.json")
    run_cli(tmp_path, cfg, out="b.json")
    a = (tmp_path / "a.json").read_bytes().replace(b"a.json", b"X")
    assert a == (tmp_path / "b.json").read_bytes().replace(b"b.json", b"X")
    assert (tmp_path / "a.certs.jsonl").read_bytes() == (tmp_path / "b.certs.jsonl").read_bytes()


def test_seed_override_is_echoed(tmp_path):
    code, out = run_cli(tmp_path, {"command": "mrc", "model": "conic", "seed": 1}, "--seed", "9")
    assert code == EXIT_OK
    assert json.loads(out.read_text())["config_echo"]["seed"] == 9


def test_explicit_model(tmp_path):
    model = model_to_json(builtin_model("cycle-genus-1(4)"))
    code, out = run_cli(tmp_path, {"command": "mrc", "model": model, "cell": [1, 3, 4]})
    assert code == EXIT_OK
    res = json.loads(out.read_text())["results"][0]
    assert res["model_name"] == "explicit"
    assert res["result"]["k11"] == 2


def test_model_cell_mismatch_lists_both(tmp_path, capsys):
    code, _ = run_cli(tmp_path, {"command": "mrc", "model": "conic", "cell": [0, 3, 3]})
    assert code == EXIT_USAGE
    err = capsys.readouterr().err
    assert "(0, 3, 3)" in err and "(0, 2, 2)" in err


@pytest.mark.parametrize("cfg", [
    {"command": "nope", "cell": [0, 2, 2]},
    {"command": "betti"},
    {"command": "betti", "cell": [0, 2]},
    {"command": "betti", "cell": [0, 2, 2], "steps": -1},
    {"command": "betti", "cell": [0, 2, 2], "extra": 1},
    {"command": "betti", "cell": [0, 2, "x"]},
    {"command": "betti", "cell": [3, 1, 9]},
    {"command": "betti", "model": "no-such-model"},
])
def test_usage_errors(tmp_path, cfg):
    code, _ = run_cli(tmp_path, cfg)
    assert code == EXIT_USAGE


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["--config", str(p)]) == EXIT_USAGE


def test_bad_flags():
    assert main(["--bogus"]) == EXIT_USAGE


def test_config_validation_direct():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"command": "betti", "cell": [0, 2, 2], "cells": [[0, 2, 2]]})
    cfg = RunConfig.from_dict({"command": "gv", "cell": {"g": 0, "r": 4, "d": 4, "p": 2}})
    assert cfg.cells == [(0, 4, 4, 2)]


def test_verify_commands(tmp_path):
    for command, cell in [("verify-lemma21", [0, 4, 4, 1]), ("verify-prop11", [0, 4, 4, 4]),
                          ("verify-prop14", [0, 3, 3, 1]), ("verify-lemma22", [0, 4, 4, 1])]:
        code, out = run_cli(tmp_path, {"command": command, "cell": cell, "samples": 2}, out=f"{command}.json")
        assert code == EXIT_OK, command
        assert json.loads(out.read_text())["results"][0]["result"]


def test_precondition_failure_is_inconclusive(tmp_path):
    code, out = run_cli(tmp_path, {"command": "verify-prop11", "cell": [0, 4, 4, 3], "samples": 1})
    assert code == EXIT_INCONCLUSIVE
    assert "precondition_failed" in json.loads(out.read_text())["results"][0]


def test_fatal_exit(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "prop_kp1_check", lambda *a: False)
    code, _ = run_cli(tmp_path, {"command": "verify-prop11", "cell": [0, 4, 4, 4], "samples": 1})
    assert code == EXIT_FATAL


def test_cache_hits_are_identical(tmp_path, monkeypatch):
    monkeypatch.delenv("CACHE_DIR", raising=False)
    cache = tmp_path / "cache"
    cfg = {"command": "betti", "cells": [[0, 2, 2], [0, 3, 3], [1, 3, 4]]}
    run_cli(tmp_path, cfg, "--cache", str(cache), out="a.json")
    assert len(list(cache.glob("*.json"))) == 3
    calls = []
    real = cli.execute
    monkeypatch.setattr(cli, "execute", lambda *a: calls.append(a) or real(*a))
    run_cli(tmp_path, cfg, "--cache", str(cache), out="b.json")
    parsed = RunConfig.from_dict(cfg)
    audited = [c for c in parsed.cells if int(cli.cache_key(parsed, c, 0), 16) % 10 == 0]
    assert len(calls) == len(audited)  # only audited hits recompute
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    assert json.dumps(a["results"]) == json.dumps(b["results"])


def test_cache_audit_catches_tampering(tmp_path, monkeypatch):
    cfg = RunConfig.from_dict({"command": "mrc", "model": "conic"})
    seed = next(s for s in range(200) if int(cli.cache_key(cfg, None, s), 16) % 10 == 0)
    cli.cached_execute(cfg, None, seed, str(tmp_path))
    path = tmp_path / f"{cli.cache_key(cfg, None, seed)}.json"
    entry = json.loads(path.read_text())
    entry["value"]["result"]["result"]["k11"] = 99
    path.write_text(json.dumps(entry))
    with pytest.raises(cli.FatalInvariantError):
        cli.cached_execute(cfg, None, seed, str(tmp_path))


def test_cache_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CACHE_DIR", str(tmp_path / "envcache"))
    code, _ = run_cli(tmp_path, {"command": "mrc", "model": "conic"})
    assert code == EXIT_OK
    assert list((tmp_path / "envcache").glob("*.json"))


def test_jobs_match_serial(tmp_path):
    cfg = {"command": "mrc", "cells": [[0, 2, 2], [0, 3, 3], [0, 4, 4], [1, 3, 4]]}
    run_cli(tmp_path, cfg, out="serial.json")
    run_cli(tmp_path, cfg, "--jobs", "3", out="parallel.json")
    a = json.loads((tmp_path / "serial.json").read_text())
    b = json.loads((tmp_path / "parallel.json").read_text())
    assert a["results"] == b["results"]


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, {"command": "mrc", "model": "conic"})
    proc = subprocess.run([sys.executable, "-m", "koszulcert", "--config", cfg], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"][0]["result"]["verdict"] == "Surjective"

import json

import numba
import pytest

from rbekit.cli import EXIT_CONFIG, EXIT_OK, EXIT_PROPERTY, EXIT_RUNTIME, main, set_threads
from rbekit.config import ConfigError, RunConfig
from rbekit.diagnostics import CSV_COLUMNS, read_csv

SMALL = {"geometry": "slab", "L": 2.0, "cells": 32, "P": 3.0, "N": 6, "partners": 6, "T": 1.0,
         "dt": 0.25, "seed": 5,
         "initial": {"preset": "juettner", "c": 2.0, "amplitude": 0.2, "profile": "bump", "radius": 0.5,
                     "drifts": [[1.0, 0.0, 0.0], [-1.0, 0.3, 0.0]]}}


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(path)


def test_kinematics_check(capsys):
    assert main(["kinematics-check", "--pairs", "2000"]) == EXIT_OK
    assert "momentum" in capsys.readouterr().out
    assert main(["kinematics-check", "--pairs", "200", "--corrupt-energy"]) == EXIT_PROPERTY
    assert "first failing check" in capsys.readouterr().out


def test_kernel_check(capsys):
    assert main(["kernel-check", "--points", "8"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "closed form (C=1, R=1, p0=2): 2.514824" in out
    assert main(["kernel-check", "--family", "zero", "--points", "4"]) == EXIT_OK
    assert main(["kernel-check", "--beta", "5"]) == EXIT_CONFIG
    assert main(["kernel-check", "--family", "tabulated"]) == EXIT_CONFIG


def test_usage_errors():
    assert main([]) == EXIT_CONFIG
    assert main(["no-such-command"]) == EXIT_CONFIG


def test_config_errors(tmp_path, capsys):
    assert main(["simulate", "--config", write(tmp_path, "bad.json", "{not json")]) == EXIT_CONFIG
    assert main(["simulate", "--config", write(tmp_path, "typo.json", {"cels": 4})]) == EXIT_CONFIG
    assert main(["simulate", "--config", write(tmp_path, "dt.json", {"dt": 0.0})]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"kernel": {"family": "hard-power", "gamma": -3.0}})


def test_thread_precedence(monkeypatch):
    monkeypatch.setenv("RBE_THREADS", "1")
    assert set_threads(None, 4) == 1
    assert set_threads(2, 4) == 2
    monkeypatch.delenv("RBE_THREADS")
    assert set_threads(None, 1) == 1
    monkeypatch.setenv("RBE_THREADS", "many")
    with pytest.raises(ConfigError):
        set_threads(None, 1)
    numba.set_num_threads(1)


def test_collide_zero_kernel(tmp_path, capsys):
    cfg = write(tmp_path, "zero.json", {"geometry": "homogeneous", "N": 6, "P": 3.0, "kernel": {"family": "zero"}})
    assert main(["collide", "--config", cfg, "--states", "3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "events 0" in out and "FAIL" not in out


def test_collide_small_grid(tmp_path, capsys):
    cfg = write(tmp_path, "hom.json", {"geometry": "homogeneous", "N": 6, "P": 3.0, "partners": 20, "seed": 2})
    assert main(["collide", "--config", cfg, "--states", "4", "--samples", "20"]) == EXIT_OK
    assert "FAIL" not in capsys.readouterr().out


def test_simulate_T0_single_row(tmp_path):
    out = tmp_path / "t0.csv"
    cfg = write(tmp_path, "t0.json", dict(SMALL, T=0.0, kernel={"family": "zero"}))
    assert main(["simulate", "--config", cfg, "--output", str(out)]) == EXIT_OK
    text = out.read_text()
    assert len(read_csv(text)) == 1
    header = [ln for ln in text.splitlines() if not ln.startswith("#")][0]
    assert header.split(",") == list(CSV_COLUMNS)
    assert "seed=5" in text


def test_simulate_pulse_causality(tmp_path):
    out = tmp_path / "pulse.csv"
    cfg = write(tmp_path, "pulse.json", dict(SMALL, T=1.0, kernel={"family": "zero"}))
    assert main(["simulate", "--config", cfg, "--output", str(out)]) == EXIT_OK
    assert "# PASS causality" in out.read_text()


def test_simulate_collisional_is_reproducible(tmp_path):
    cfg = write(tmp_path, "col.json", SMALL)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", cfg, "--output", str(a), "--threads", "1"]) == EXIT_OK
    assert main(["simulate", "--config", cfg, "--output", str(b), "--threads", "1"]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert "# PASS H_monotone" in text and "# FAIL" not in text


def test_simulate_runtime_failure(tmp_path, capsys):
    data = dict(SMALL, geometry="homogeneous", dt=100.0, T=100.0, n=1e9,
                initial={"preset": "juettner", "c": 1.0, "amplitude": 200.0,
                         "drifts": [[2.0, 0.0, 0.0], [-2.0, 0.0, 0.0]]},
                snapshot=str(tmp_path / "last.snap"))
    cfg = write(tmp_path, "boom.json", data)
    from rbekit import transport

    real = transport.collide
    transport.collide = lambda *a, **k: real(*a, **dict(k, max_halvings=0))
    try:
        code = main(["simulate", "--config", cfg])
    finally:
        transport.collide = real
    assert code == EXIT_RUNTIME
    assert (tmp_path / "last.snap").exists()
    assert "last good state" in capsys.readouterr().err

"""Deterministic serialization, config handling, grid blobs."""

import json
import os

import numpy as np
import pytest

from magflows import io


def test_float_formatting_round_trips_doubles():
    rng = np.random.default_rng(90)
    xs = np.concatenate([
        rng.uniform(-1e6, 1e6, 200),
        10.0 ** rng.uniform(-300, 300, 200) * rng.choice([-1, 1], 200),
        np.array([0.0, -0.0, 1.0 / 3.0, np.pi]),
    ])
    for x in xs:
        assert float(io.format_float(float(x))) == float(x)
    assert io.format_float(float("nan")) == "nan"
    assert io.format_float(float("inf")) == "inf"
    assert io.format_float(float("-inf")) == "-inf"


def test_csv_bytes_are_deterministic(tmp_path):
    rows = [(1.0 / 3.0, 2.0), (np.float64(0.1), -5.5)]
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    io.write_csv(p1, ["u", "v"], rows)
    io.write_csv(p2, ["u", "v"], rows)
    b1 = p1.read_bytes()
    assert b1 == p2.read_bytes()
    assert b1.startswith(b"u,v\n")
    assert b"\r" not in b1


def test_json_output_is_sorted_and_stable(tmp_path):
    obj = {"zeta": 1, "alpha": {"b": [1.5, 2], "a": "x"}}
    s1 = io.json_dumps(obj)
    s2 = io.json_dumps({"alpha": {"a": "x", "b": [1.5, 2]}, "zeta": 1})
    assert s1 == s2
    assert json.loads(s1) == obj
    path = tmp_path / "o.json"
    io.write_json(path, obj)
    assert json.loads(path.read_text()) == obj


def test_config_hash_ignores_key_order_but_not_values():
    c1 = {"scenario": "simulate", "T": 5.0, "seed": 3}
    c2 = {"seed": 3, "T": 5.0, "scenario": "simulate"}
    assert io.config_hash(c1) == io.config_hash(c2)
    assert io.config_hash({**c1, "seed": 4}) != io.config_hash(c1)


def test_load_config_errors(tmp_path):
    good = tmp_path / "good.json"
    good.write_text('{"scenario": "simulate"}')
    assert io.load_config(good) == {"scenario": "simulate"}
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(io.ConfigError):
        io.load_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(io.ConfigError):
        io.load_config(arr)
    with pytest.raises(io.ConfigError):
        io.load_config(tmp_path / "missing.json")


def test_validate_keys_rejects_unknown_and_missing():
    io.validate_keys({"a": 1, "b": 2}, allowed=("a", "b", "c"), required=("a",))
    with pytest.raises(io.ConfigError):
        io.validate_keys({"a": 1, "zz": 2}, allowed=("a",))
    with pytest.raises(io.ConfigError):
        io.validate_keys({"b": 2}, allowed=("a", "b"), required=("a",))


def test_worker_count_precedence(monkeypatch):
    monkeypatch.delenv("MAGFLOWS_WORKERS", raising=False)
    assert io.worker_count({}) == 1
    assert io.worker_count({"workers": 3}) == 3
    monkeypatch.setenv("MAGFLOWS_WORKERS", "5")
    assert io.worker_count({}) == 5
    assert io.worker_count({"workers": 2}) == 2
    with pytest.raises(io.ConfigError):
        io.worker_count({"workers": 0})
    with pytest.raises(io.ConfigError):
        io.worker_count({"workers": "many"})


def test_grid_blob_round_trip(tmp_path):
    rng = np.random.default_rng(91)
    values = rng.normal(size=(17, 23))
    path = tmp_path / "g.bin"
    io.write_grid(path, values, bbox=(-1.0, 1.0, 0.25, 0.75))
    back, bbox = io.read_grid(path)
    assert np.array_equal(back, values)
    assert bbox == (-1.0, 1.0, 0.25, 0.75)
    with open(path, "r+b") as fh:
        fh.write(b"XXXXXXXX")
    with pytest.raises(io.ConfigError):
        io.read_grid(path)


def test_manifest_contents(tmp_path):
    config = {"scenario": "simulate", "T": 2.0, "seed": 1}
    path = tmp_path / "manifest.json"
    io.write_manifest(path, config, started_at=0.0, extra={"note": "x"})
    m = json.loads(path.read_text())
    assert m["scenario"] == "simulate"
    assert m["config_sha256"] == io.config_hash(config)
    assert m["note"] == "x"
    assert "magflows" in m["versions"] and "numpy" in m["versions"]
    assert m["wall_time_s"] > 0.0

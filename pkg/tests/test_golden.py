"""
Committed reference datasets for the figure configurations

Each case reruns the committed config on a coarse grid and compares every
table and sidecar against tests/golden/<name>/. Regenerate after an
intended change with `pytest tests/test_golden.py --update-golden`.
"""

import json
import shutil
from pathlib import Path

import flatdict
import numpy as np
import pytest

from core.datasets import read_csv
from hscaler.cli import main

from .conftest import CONFIG_DIR

GOLDEN_DIR = Path(__file__).resolve().parent / "golden"
COMMANDS = ("design", "moments", "qsim", "wigner", "csim")

GOLDEN_GRID = {"n_points": 256, "q_min": -32.0, "q_max": 32.0, "dt": 1e-3}
GOLDEN_OUTPUTS = {"snapshots": 2, "samples": 101, "write_ensembles": False}
GOLDEN_ENSEMBLE = {"n": 4000, "seed": 0}

# Fields that change with the release rather than with the numbers
VOLATILE_KEYS = {"hscaler_version"}
RTOL, ATOL = 1e-9, 1e-12


def golden_run(name: str) -> dict:
    document = json.loads((CONFIG_DIR / f"{name}.json").read_text(encoding="utf-8"))
    document["grid"] = GOLDEN_GRID
    document["outputs"] = GOLDEN_OUTPUTS
    document["ensemble"] = GOLDEN_ENSEMBLE
    return document


def dataset_files(root: Path) -> list:
    return sorted(p.relative_to(root).as_posix() for p in root.rglob("*") if p.is_file())


def as_number(cell: str):
    try:
        return float(cell)
    except ValueError:
        return cell


def assert_tables_match(actual: Path, expected: Path):
    got, want = read_csv(actual), read_csv(expected)
    assert list(got) == list(want), actual.name
    for column in want:
        a = [as_number(c) for c in got[column]]
        b = [as_number(c) for c in want[column]]
        if all(isinstance(v, float) for v in a + b):
            np.testing.assert_allclose(a, b, rtol=RTOL, atol=ATOL, err_msg=f"{actual.name}:{column}")
        else:
            assert a == b, f"{actual.name}:{column}"


def flat_sidecar(path: Path) -> dict:
    payload = json.loads(path.read_text(encoding="utf-8"))
    flat = flatdict.FlatterDict(payload, delimiter="/")
    return {key: flat[key] for key in flat.keys() if key.split("/")[0] not in VOLATILE_KEYS}


def assert_sidecars_match(actual: Path, expected: Path):
    got, want = flat_sidecar(actual), flat_sidecar(expected)
    assert sorted(got) == sorted(want), actual.name
    for key, value in want.items():
        if isinstance(value, float):
            assert got[key] == pytest.approx(value, rel=RTOL, abs=ATOL), f"{actual.name}:{key}"
        else:
            assert got[key] == value, f"{actual.name}:{key}"


@pytest.mark.parametrize("name", ["momentum_fifth", "momentum_mirror", "position_minus_half"])
def test_datasets_match_golden(name, tmp_path, write_run, update_golden):
    config = write_run(golden_run(name))
    out = tmp_path / "out"
    for command in COMMANDS:
        assert main([command, "--config", str(config), "--out", str(out), "--quiet"]) == 0

    golden = GOLDEN_DIR / name
    if update_golden or not golden.exists():
        if golden.exists():
            shutil.rmtree(golden)
        shutil.copytree(out, golden)
        pytest.skip(f"Wrote golden datasets to {golden}")

    files = dataset_files(out)
    assert files == dataset_files(golden)
    for relative in files:
        if relative.endswith(".csv"):
            assert_tables_match(out / relative, golden / relative)
        else:
            assert_sidecars_match(out / relative, golden / relative)

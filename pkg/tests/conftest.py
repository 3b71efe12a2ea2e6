"""Shared fixtures for the hscaler test suite"""

import json
from pathlib import Path

import pytest

from hscaler.moments import MomentState
from hscaler.protocol import ScalingMode, ScalingSpec, build_protocol

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

MOMENTUM_FACTORS = [5.0, 2.0, 0.5, 0.2, -1.0]
POSITION_FACTORS = [-0.5, -2.0]
SIGMA = 2 ** -0.5


def momentum_spec(scale_factor: float, t_f: float = 1.0, **kwargs) -> ScalingSpec:
    return ScalingSpec(mode=ScalingMode.MOMENTUM, scale_factor=scale_factor, t_f=t_f, **kwargs)


def position_spec(scale_factor: float, t_f: float = 1.0, **kwargs) -> ScalingSpec:
    return ScalingSpec(mode=ScalingMode.POSITION, scale_factor=scale_factor, t_f=t_f, **kwargs)


def all_specs():
    return [momentum_spec(f) for f in MOMENTUM_FACTORS] + [position_spec(f) for f in POSITION_FACTORS]


def spec_id(spec: ScalingSpec) -> str:
    return f"{spec.mode.value}-{spec.scale_factor:g}"


@pytest.fixture
def reference_state() -> MomentState:
    """<q> = <p> = 1, Δq = Δp = 2^{-1/2}"""
    return MomentState.gaussian(1.0, 1.0, SIGMA)


@pytest.fixture
def fifth_protocol():
    return build_protocol(momentum_spec(0.2))


@pytest.fixture
def mirror_protocol():
    return build_protocol(momentum_spec(-1.0))


@pytest.fixture
def write_run(tmp_path):
    """Write a run document to tmp_path and return its path"""
    def _write(document: dict, name: str = "run.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path
    return _write


@pytest.fixture(autouse=True)
def isolated_environment(monkeypatch, tmp_path):
    """Keep HSCALER_* settings of the developer shell out of the tests"""
    for key in ("HSCALER_THREADS", "HSCALER_OUTPUT_DIR", "HSCALER_TRANSPORT", "HSCALER_MCP_ONLY",
                "HSCALER_HOST", "HSCALER_PORT", "HSCALER_CORS_ORIGINS"):
        # setenv first so direct os.environ writes are undone at teardown
        monkeypatch.setenv(key, "")
        monkeypatch.delenv(key)
    monkeypatch.setenv("HSCALER_OUTPUT_DIR", str(tmp_path / "default-out"))


def pytest_addoption(parser):
    parser.addoption(
        "--update-golden",
        action="store_true",
        default=False,
        help="Rewrite the datasets under tests/golden instead of comparing against them",
    )


@pytest.fixture
def update_golden(request) -> bool:
    return request.config.getoption("--update-golden")

import importlib.util
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]


def _load_script(name):
    spec = importlib.util.spec_from_file_location(name, ROOT / "scripts" / f"{name}.py")
    module = importlib.util.module_from_spec(spec)
    sys.modules[name] = module
    spec.loader.exec_module(module)
    return module


synthetic = _load_script("make_synthetic_data")
sine_experiment = _load_script("noisy_sine_experiment")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fixture_run(tmp_path):
    """Four small synthetic tickers plus a fast run config; returns the config path."""
    return synthetic.write_fixture(tmp_path / "run", bars=200, epochs=2, hidden=6, window=16)


@pytest.fixture
def sine():
    return sine_experiment


@pytest.fixture
def make_fixture():
    return synthetic.write_fixture


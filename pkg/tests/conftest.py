import functools
import logging

import numpy as np
import pytest

from shockaxis import growth, synth
from shockaxis.cost import CostConfig

logging.getLogger("shockaxis").setLevel(logging.ERROR)

KINDS = ("color", "hist")
SHAPES = ("rectangle", "disk", "plus", "dumbbell")


@functools.lru_cache(maxsize=None)
def rendered(name: str):
    return synth.render(synth.FIXTURES[name]())


@functools.lru_cache(maxsize=None)
def extracted(name: str, kind: str):
    img = rendered(name)[0]
    return growth.extract(img, CostConfig(kind=kind))


def noise_image(seed: int, size: int = 48) -> np.ndarray:
    return np.random.default_rng(seed).random((size, size, 3))


@functools.lru_cache(maxsize=None)
def extracted_noise(seed: int, kind: str):
    return growth.extract(noise_image(seed), CostConfig(kind=kind, r_max=12))


@pytest.fixture(params=KINDS)
def kind(request):
    return request.param


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])

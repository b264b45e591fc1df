import math
import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def rel_err(a, f, floor=1e-6):
    """Elementwise |a - f| / max(|a|, |f|, floor), reduced by max."""
    a = np.asarray(a, dtype=float)
    f = np.asarray(f, dtype=float)
    return float(np.max(np.abs(a - f) / np.maximum(np.maximum(np.abs(a), np.abs(f)), floor)))


def random_bearings(rng, n):
    ang = rng.uniform(-math.pi, math.pi, n)
    return np.c_[np.cos(ang), np.sin(ang)]


def nondegenerate_bearings(rng, n):
    while True:
        B = random_bearings(rng, n)
        if np.hypot(*B.sum(axis=0)) > 1e-3:
            return B


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def slow_enabled():
    return os.environ.get("ANTSWARM_SLOW", "0") == "1"


ACCEPTANCE_LINES: list = []


def record_criterion(label: str, ok, detail: str) -> None:
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
    ACCEPTANCE_LINES.append(f"[{status}] {label}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

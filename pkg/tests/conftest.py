from pathlib import Path
import sys

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data" / "mnist_subset.npz"


@pytest.fixture(scope="session")
def mnist():
    with np.load(DATA) as z:
        return z["images"], z["labels"]


@pytest.fixture(scope="session")
def digit8(mnist):
    images, labels = mnist
    return np.moveaxis(images[labels == 8][:100], 0, -1).astype(np.float64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")

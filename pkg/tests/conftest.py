import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from laminascope import phantom  # noqa: E402
from laminascope.despeckle import cwd_denoise  # noqa: E402


@pytest.fixture(scope="session")
def canonical():
    """Default phantom (seed 0) and its ground truth."""
    return phantom.canonical(seed=0)


@pytest.fixture(scope="session")
def canonical_denoised(canonical):
    img, _ = canonical
    return cwd_denoise(img)


@pytest.fixture(scope="session")
def clean_phantom():
    return phantom.canonical(seed=0, speckle_sigma=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, from tests named test_criterion_NN_*."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = rep.nodeid.rsplit("::", 1)[-1]
            if not name.startswith("test_criterion_") or rep.when not in ("call", "setup"):
                continue
            if rep.when == "setup" and outcome == "passed":
                continue
            detail = dict(rep.user_properties).get("detail", "")
            lines.append((int(name.split("_")[2]), "PASS" if outcome == "passed" else "FAIL",
                          detail))
    if lines:
        terminalreporter.section("acceptance criteria")
        for n, verdict, detail in sorted(lines):
            terminalreporter.write_line(f"criterion {n:2d}: {verdict}  {detail}")

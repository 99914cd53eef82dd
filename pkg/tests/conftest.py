import sys

import numpy as np
import pytest
from hypothesis import settings

from discrimdes import BasisSet, DesignSpace, FixedMean

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def space():
    return DesignSpace()


@pytest.fixture
def linear():
    return BasisSet.monomials(2)


@pytest.fixture
def cubic_eta():
    # 1 + x + x^3, the running linear-vs-cubic example
    return FixedMean.polynomial([1, 1, 0, 1])



def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(results, key=lambda s: int(s[1:])):
        terminalreporter.write_line(results[name])

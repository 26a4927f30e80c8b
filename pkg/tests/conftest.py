import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from skelot.cost import Anchor, closed_form_field  # noqa: E402
from skelot.models import instantiate  # noqa: E402
from skelot.skeleton import lebesgue_measure  # noqa: E402

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail})")


@pytest.fixture(scope="session")
def mono1():
    return instantiate("monomial:n=1", l_max=32)


@pytest.fixture(scope="session")
def mono2():
    return instantiate("monomial:n=2", l_max=16)


@pytest.fixture(scope="session")
def tate():
    return instantiate("tate_circle", l_max=32)


def closed_field(model):
    return closed_form_field(model.closed_form, Anchor(model.default_anchor))


def uniform(model):
    return lebesgue_measure(model.skeleton)

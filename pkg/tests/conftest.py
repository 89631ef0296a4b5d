import warnings

import pytest

from ebcred.sequence_model import KappaSpec, ModelConfig, TruncationWarning

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def model(n, kappa=None, trunc=0, **kw):
    """ModelConfig with the truncation warning silenced (tests pick small truncations on purpose)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return ModelConfig(n=n, kappa=kappa or KappaSpec.volterra(), trunc=trunc, **kw)


@pytest.fixture
def volterra():
    return KappaSpec.volterra()

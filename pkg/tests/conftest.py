import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key:<4} {'PASS' if ok else 'FAIL'}  {detail}")


TINY_OVERRIDES = [
    "grids.high_n=17", "grids.low_n=9", "grids.high_dt=8640", "grids.low_dt=8640",
    "protocol.spinup_years=0.1", "protocol.train_years=0.2", "protocol.run_years=0.4",
    "features.harmonics=5",
]


def tiny_config(workdir, *extra):
    """A 17/9 grid, few-month experiment that runs the whole pipeline in seconds."""
    from qgrom.config import PipelineConfig

    return PipelineConfig.load(overrides=[*TINY_OVERRIDES, f"paths.workdir={workdir}", *extra], env={})

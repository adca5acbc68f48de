import numpy as np
import pytest

from vrfbml.datasets import Mode, ScenarioMeta, Source, TimeSeriesDataset

FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"


def make_meta(current=45.0, mode=Mode.CHARGING, source=Source.EXPERIMENTAL, seed=None):
    return ScenarioMeta(current_a=current, mode=mode, flow_l_min=10.0, ambient_c=30.0,
                        source=source, seed=seed)


def make_dataset(time, temperature, **meta_kw):
    return TimeSeriesDataset.from_arrays(time, temperature, make_meta(**meta_kw))


@pytest.fixture
def meta():
    return make_meta()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].lstrip("C"))):
            terminalreporter.write_line(line)

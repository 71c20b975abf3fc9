import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def make_sample(box, lam=None, scores=(1.0, 0.0)):
    from chance_rrt.uncertainty import BoxParams, DetectionSample

    if not isinstance(box, BoxParams):
        box = BoxParams.from_array(box)
    lam = np.zeros(7) if lam is None else np.broadcast_to(np.asarray(lam, dtype=float), (7,)).copy()
    return DetectionSample(box, lam, np.asarray(scores, dtype=float))


@pytest.fixture
def base_box():
    return np.array([10.0, 2.0, 0.75, 1.5, 1.8, 4.5, 0.3])


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)

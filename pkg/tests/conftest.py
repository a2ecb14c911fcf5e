import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fado.dataset import Dataset

settings.register_profile("fado", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("fado")

ACCEPTANCE_LINES: list[str] = []


def toy_dataset(group_counts, seed=0, d=2, include_protected=False):
    """Dataset from ``{label: (n_pos, n_neg)}`` with random features.

    Rows are laid out group by group, positives first, with ids 0..n-1.
    """
    rng = np.random.default_rng(seed)
    z, y = [], []
    for label, (pos, neg) in group_counts.items():
        z += [label] * (pos + neg)
        y += [1] * pos + [0] * neg
    X = rng.normal(size=(len(y), d))
    return Dataset.from_arrays(X, y, {"z": z}, include_protected=include_protected)


@pytest.fixture
def record_acceptance():
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

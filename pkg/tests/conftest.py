import numpy as np
import pytest
import torch

from subjtransfer.dataio import CLASS_NAMES, SubjectDataset, TrialTensor

torch.set_num_threads(1)


def make_dataset(data, labels=None, subject_id="s", fs=250.0, names=None):
    data = np.asarray(data, dtype=np.float64)
    t, c, _ = data.shape
    if labels is None:
        labels = np.arange(t) % len(CLASS_NAMES)
    names = names or tuple(f"ch{i}" for i in range(c))
    return SubjectDataset(TrialTensor(data, fs, names), np.asarray(labels), subject_id)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from __future__ import annotations

import numpy as np
import pytest

from tshaystack.ingest import Recording, SynthSpec, split_participants, synth_corpus
from tshaystack.taskgen.context import GenContext
from tshaystack.taskgen.dataset import Generation


@pytest.fixture(scope="session")
def corpus() -> list[Recording]:
    return synth_corpus(SynthSpec(participants=6, duration_s=3 * 3600, rate=50, seed=0))


@pytest.fixture(scope="session")
def splits(corpus):
    return split_participants([r.participant_id for r in corpus], (4, 1, 1), seed=0)


@pytest.fixture(scope="session")
def generation(corpus, splits) -> Generation:
    return Generation(corpus, splits, master_seed=11, counts={"train": 1000, "val": 150, "test": 150})


@pytest.fixture(scope="session")
def ctx10(corpus) -> GenContext:
    return GenContext.from_recordings(corpus, 10.0)


def make_recording(labels: list[str], rate: float = 10.0, pid: str = "P", channels: np.ndarray | None = None) -> Recording:
    """Recording whose per-sample labels are given directly ("" = unannotated)."""
    n = len(labels)
    anns = []
    s = 0
    for i in range(1, n + 1):
        if i == n or labels[i] != labels[s]:
            if labels[s]:
                anns.append((s, i, labels[s]))
            s = i
    if channels is None:
        channels = np.zeros((3, n))
    return Recording(pid, channels, rate, 0, tuple(anns))


# acceptance criterion number -> (passed, one-line summary)
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}")

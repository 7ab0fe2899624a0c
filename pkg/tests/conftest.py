import time

import pytest

from latentwalk.gan import TrainConfig, default_critic_spec, default_generator_spec, sample_dataset, train_wgan

TRAIN_SEED = 0
DATA_SEED = 0
REAL_SEED = 12345


@pytest.fixture(scope="session")
def toy_gan():
    """Generator, critic, history and wall time of one default training run."""
    data, _ = sample_dataset("gaussian-ring", 50000, DATA_SEED)
    start = time.perf_counter()
    gen, critic, history = train_wgan(default_generator_spec(), default_critic_spec(), data,
                                      TrainConfig(seed=TRAIN_SEED))
    return gen, critic, history, time.perf_counter() - start


@pytest.fixture(scope="session")
def ring_real():
    real, _ = sample_dataset("gaussian-ring", 2048, REAL_SEED)
    return real


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one summary line per acceptance criterion; printed at session end."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        lines.append((number, f"criterion {number} {'PASS' if ok else 'FAIL'}: {detail}"))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)

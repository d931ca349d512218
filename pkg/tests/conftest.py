import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mlcomp.costmodel import bundled_platform  # noqa: E402
from mlcomp.dataset import bundled_corpus  # noqa: E402


@pytest.fixture(scope="session")
def corpus():
    return bundled_corpus()


@pytest.fixture(scope="session")
def programs(corpus):
    return dict(corpus)


@pytest.fixture(scope="session")
def ember():
    return bundled_platform("ember")


@pytest.fixture(scope="session")
def vulcan():
    return bundled_platform("vulcan")


@pytest.fixture(scope="session")
def small_pe(corpus, ember):
    from mlcomp.dataset import extract_dataset
    from mlcomp.pe import PeSearchConfig, model_search

    d = extract_dataset(corpus, ember, 12, seed=0)
    cfg = PeSearchConfig(models=(("mean-std", "knn"), ("mean-std", "ridge")), trials_per_pair=2)
    return model_search(d, cfg, ember)


@pytest.fixture(scope="session")
def trained_policy(corpus, small_pe):
    from mlcomp.pss import PssTrainConfig, train_policy

    return train_policy(corpus, small_pe, PssTrainConfig(seed=0))


@pytest.fixture(scope="session")
def corpus_dataset(corpus, ember):
    """40 random sequences per bundled program, profiled on ember."""
    from mlcomp.dataset import extract_dataset

    return extract_dataset(corpus, ember, 40, seed=0, workers=4)


ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(line)

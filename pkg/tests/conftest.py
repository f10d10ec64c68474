from collections.abc import Callable, Sequence

import numpy as np
import pytest

from pyalmostuniversal.exceptions import InvalidFormError
from pyalmostuniversal.forms import QuadraticForm
from pyalmostuniversal.settings import Settings


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run slow tests"
    )


def pytest_collection_modifyitems(
    config: pytest.Config, items: list[pytest.Item]
) -> None:
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs the --runslow option")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True, scope="function")
def reset_settings():
    Settings._settings = None


@pytest.fixture()
def halmos() -> QuadraticForm:
    return QuadraticForm.diagonal(1, 2, 7, 13)


@pytest.fixture()
def random_forms() -> Callable[..., list[QuadraticForm]]:
    # Positive definite forms with diagonal entries in [1, 4] and off-diagonal
    # entries in [-2, 2].
    def generate(
        count: int, dims: Sequence[int] = (4,), seed: int = 0
    ) -> list[QuadraticForm]:
        rng = np.random.default_rng(seed)
        forms: list[QuadraticForm] = []
        while len(forms) < count:
            n = int(rng.choice(dims))
            gram = [[0] * n for _ in range(n)]
            for i in range(n):
                gram[i][i] = int(rng.integers(1, 5))
                for j in range(i):
                    gram[i][j] = gram[j][i] = int(rng.integers(-2, 3))
            try:
                forms.append(QuadraticForm.from_rows(gram))
            except InvalidFormError:
                continue
        return forms

    return generate


@pytest.fixture()
def random_unimodular() -> Callable[[np.random.Generator, int], list[list[int]]]:
    # Products of elementary row operations, a sign change and a permutation.
    def generate(rng: np.random.Generator, n: int) -> list[list[int]]:
        m = np.eye(n, dtype=np.int64)
        if n > 1:
            for _ in range(3 * n):
                i, j = rng.choice(n, size=2, replace=False).tolist()
                m[i] += int(rng.choice([-1, 1])) * m[j]
        m[int(rng.integers(n))] *= -1
        return m[rng.permutation(n)].tolist()

    return generate

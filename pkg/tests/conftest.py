import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from models import EvaluationSet  # noqa: E402

FIXTURES = os.path.join(ROOT, "fixtures")


@pytest.fixture
def fixture_path():
    def resolve(name: str) -> str:
        return os.path.join(FIXTURES, name)
    return resolve


@pytest.fixture
def two_pair_set():
    """(delta=1, sigma^2=1) and (delta=0, sigma^2=0.25): MSE mean 1.125, variance 1.53125."""
    return EvaluationSet.from_arrays([1.0, 0.0], [1.0, 0.5], [0.0, 0.0])


@pytest.fixture
def uncertain_set():
    """Twelve pairs with mixed deviations and uncertainty, including one point mass."""
    mus = [3.0, 4.5, 2.0, 1.0, 5.0, 3.5, 2.5, 4.0, 3.0, 1.5, 4.5, 2.0]
    sigmas = [0.8, 1.2, 0.0, 0.5, 1.9, 0.4, 1.0, 0.7, 1.5, 0.6, 0.9, 1.1]
    predictions = [3.5, 4.0, 3.0, 2.0, 3.5, 3.5, 2.0, 3.0, 3.0, 2.5, 4.0, 3.0]
    return EvaluationSet.from_arrays(mus, sigmas, predictions)

import numpy as np
import pytest

from nmcbounds.chain import Distribution, PolynomialKernel, StochasticMatrix
from nmcbounds.experiments import EXAMPLE1_P, EXAMPLE2_P, builtin_example


@pytest.fixture
def p1_matrix() -> StochasticMatrix:
    return StochasticMatrix(EXAMPLE1_P)


@pytest.fixture
def p2_matrix() -> StochasticMatrix:
    return StochasticMatrix(EXAMPLE2_P)


@pytest.fixture
def ex1_k01() -> PolynomialKernel:
    return builtin_example(1, 0.1)


@pytest.fixture
def ex1_k02() -> PolynomialKernel:
    return builtin_example(1, 0.2)


def random_distributions(p, count, seed):
    gen = np.random.default_rng(seed)
    draws = gen.standard_exponential((count, p))
    draws /= draws.sum(axis=1, keepdims=True)
    return [Distribution(row) for row in draws]

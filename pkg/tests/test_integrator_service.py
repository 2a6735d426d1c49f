import math

import numpy as np
import pytest

from models.train_config import Rk45Config
from services.integrator_service import IntegratorService
from utils.errors import IntegrationError, ValidationError


def test_exponential_decay():
    cfg = Rk45Config(rtol=1e-10, atol=1e-10)
    x, nfe, diag = IntegratorService.rk45(lambda s, x: -x, np.array([1.0]), (0.0, 1.0), cfg)
    assert x[0] == pytest.approx(math.exp(-1.0), abs=1e-8)
    assert nfe == 6 * (diag['accepted'] + diag['rejected']) + 1


def test_zero_field_single_step():
    x0 = np.array([1.0, -2.0, 3.0])
    x, nfe, diag = IntegratorService.rk45(lambda s, x: np.zeros_like(x), x0, (0.0, 1.0))
    np.testing.assert_array_equal(x, x0)
    assert nfe == 7
    assert diag == {'accepted': 1, 'rejected': 0, 'nfe': 7}


def test_reverse_span():
    cfg = Rk45Config(rtol=1e-10, atol=1e-10)
    x, _, _ = IntegratorService.rk45(lambda s, x: x, np.array([math.e]), (1.0, 0.0), cfg)
    assert x[0] == pytest.approx(1.0, abs=1e-8)


def test_time_dependent_field():
    cfg = Rk45Config(rtol=1e-10, atol=1e-12)
    x, _, _ = IntegratorService.rk45(lambda s, x: np.array([math.cos(s)]), np.zeros(1), (0.0, 2.0), cfg)
    assert x[0] == pytest.approx(math.sin(2.0), abs=1e-9)


def test_fixed_initial_step_counts_rejections():
    cfg = Rk45Config(rtol=1e-8, atol=1e-8, initial_step=1.0)
    _, nfe, diag = IntegratorService.rk45(lambda s, x: -20.0 * x, np.array([1.0]), (0.0, 1.0), cfg)
    assert diag['rejected'] > 0
    assert nfe == 6 * (diag['accepted'] + diag['rejected']) + 1


def test_equal_endpoints_rejected():
    with pytest.raises(ValidationError):
        IntegratorService.rk45(lambda s, x: x, np.ones(1), (0.5, 0.5))


def test_step_budget_exhausted():
    cfg = Rk45Config(rtol=1e-12, atol=1e-12, max_steps=3)
    with pytest.raises(IntegrationError) as info:
        IntegratorService.rk45(lambda s, x: -x, np.ones(1), (0.0, 10.0), cfg)
    assert info.value.nfe > 0
    assert info.value.state is not None


def test_non_finite_field_raises():
    with pytest.raises(IntegrationError):
        IntegratorService.rk45(lambda s, x: np.full_like(x, np.nan), np.ones(2), (0.0, 1.0))
    with pytest.raises(IntegrationError):
        IntegratorService.rk45(lambda s, x: x / (0.5 - s) if s < 0.5 else np.full_like(x, np.inf),
                               np.ones(1), (0.0, 1.0), Rk45Config(initial_step=0.75))

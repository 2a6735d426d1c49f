import numpy as np
import pytest

from models.flow_spec import FlowFlags
from services.mlp_service import MlpService
from services.spectrum_service import SpectrumService


def _random_spd(rng, n, low=0.5, high=5.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q @ np.diag(rng.uniform(low, high, n)) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_spd():
    return _random_spd


@pytest.fixture
def make_spec():
    """随机对称正定 Hessian 构造的路径"""

    def make(rng, dim, gamma=0.05, c=2.0, kappa=1.0, **flags):
        y1 = rng.standard_normal(dim)
        return SpectrumService.build_flow_spec(y1, _random_spd(rng, dim), c=c, gamma=gamma, kappa=kappa,
                                               flags=FlowFlags(**flags))

    return make


@pytest.fixture
def small_params():
    return MlpService.init([3, 8, 8, 3], seed=7)

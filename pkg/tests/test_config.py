import pytest

from repositories.report_repository import ReportRepository
from utils.config import RunConfig, load_run_config
from utils.errors import FormatError, ValidationError


def test_defaults_build_sections():
    cfg = load_run_config()
    assert cfg.train_config().method == 'hessian_quadratic'
    assert cfg.rk45_config().rtol == 1e-2
    assert cfg.langevin_config().seed == cfg.seed


def test_file_values_and_overrides(tmp_path):
    path = tmp_path / 'run.env'
    path.write_text('method=isotropic_data\nhidden=32,16\nsteps=50\nproject=true\neval_data=\n')
    cfg = load_run_config(str(path), overrides={'steps': 7, 'kappa': None})
    assert cfg.method == 'isotropic_data'
    assert cfg.hidden == (32, 16)
    assert cfg.steps == 7
    assert cfg.project is True
    assert cfg.kappa == 1.0
    assert cfg.eval_data is None


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / 'run.env'
    path.write_text('learning_rate=0.1\n')
    with pytest.raises(FormatError, match='learning_rate'):
        load_run_config(str(path))
    with pytest.raises(ValidationError):
        load_run_config(overrides={'learning_rate': 0.1})


def test_missing_file_rejected(tmp_path):
    with pytest.raises(FormatError):
        load_run_config(str(tmp_path / 'missing.env'))


def test_section_constraints_enforced():
    with pytest.raises(ValidationError):
        load_run_config(overrides={'c': 0.5})
    with pytest.raises(ValidationError):
        load_run_config(overrides={'rtol': 0.0})
    with pytest.raises(ValidationError):
        load_run_config(overrides={'method': 'diffusion'})


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv('HIFM_THREADS', '4')
    assert RunConfig().threads == 4


def test_echo_round_trip(tmp_path):
    cfg = load_run_config(overrides={'method': 'optimal_transport', 'hidden': '8,8', 'lr': 0.1 + 0.2,
                                     'quad_eigvals': '1,4,9', 'sample_y0': True, 'data': 'train.csv'})
    path = str(tmp_path / 'config.env')
    ReportRepository.write_config(cfg.echo_values(), path)
    assert load_run_config(path) == cfg

# api/common.py
import os

from repositories.dataset_repository import DatasetRepository
from repositories.report_repository import ReportRepository
from services.data_service import DataService
from utils.config import RunConfig, default_output_dir, load_run_config
from utils.errors import ValidationError
from utils.logger import get_logger

logger = get_logger('api_common')

PARTICLE_ENERGIES = ('lj', 'formation')


def add_config_flag(parser):
    parser.add_argument('--config', default=None, help='key=value 配置文件')
    parser.add_argument('--threads', type=int, default=None, help='工作线程上限')


def resolve_config(args):
    """配置文件 + 命令行覆盖；argparse 的 dest 与 RunConfig 字段同名"""
    overrides = {name: getattr(args, name) for name in RunConfig.model_fields if hasattr(args, name)}
    return load_run_config(getattr(args, 'config', None), overrides)


def output_dir(cfg):
    path = cfg.out_dir or default_output_dir()
    os.makedirs(path, exist_ok=True)
    return path


def echo_config(cfg, path):
    ReportRepository.write_config(cfg.echo_values(), path)


def build_energy(cfg):
    return DataService.build_energy(cfg.energy, m=cfg.m, spatial_dim=cfg.spatial_dim, quad_eigvals=cfg.quad_eigvals,
                                    lj_epsilon=cfg.lj_epsilon, lj_sigma=cfg.lj_sigma, seed=cfg.seed)


def load_dataset(cfg, path):
    """二进制文件自带元信息；CSV 的粒子元信息取自配置"""
    if not path:
        raise ValidationError("缺少数据文件路径（--data）")
    if cfg.energy in PARTICLE_ENERGIES and cfg.m:
        ds = DatasetRepository.load(path, kind='particles', m=cfg.m, spatial_dim=cfg.spatial_dim)
    else:
        ds = DatasetRepository.load(path)
    if ds.is_particles:
        ds = DataService.preprocess_particles(ds)
    return ds


def add_train_flags(parser):
    parser.add_argument('--data', default=None)
    parser.add_argument('--eval-data', dest='eval_data', default=None)
    parser.add_argument('--eval-frac', dest='eval_frac', type=float, default=None)
    parser.add_argument('--out-dir', dest='out_dir', default=None)
    parser.add_argument('--method', default=None)
    parser.add_argument('--steps', type=int, default=None)
    parser.add_argument('--batch-size', dest='batch_size', type=int, default=None)
    parser.add_argument('--seed', type=int, default=None)
    parser.add_argument('--eval-every', dest='eval_every', type=int, default=None)
    parser.add_argument('--kappa', type=float, default=None)
    parser.add_argument('--c', type=float, default=None)
    parser.add_argument('--lr', type=float, default=None)
    parser.add_argument('--hidden', default=None, help='隐藏层宽度，如 64,64')


def prepare_training(cfg):
    """训练集、评估集与（hessian_quadratic 需要的）能量

    未给 eval_data 且 eval_frac > 0 时按种子从训练数据切出评估集。
    """
    train_ds = load_dataset(cfg, cfg.data)
    eval_ds = None
    if cfg.eval_data:
        eval_ds = load_dataset(cfg, cfg.eval_data)
    elif cfg.eval_frac > 0:
        train_ds, eval_ds = DataService.split(train_ds, 1.0 - cfg.eval_frac, cfg.seed)
    energy = build_energy(cfg) if cfg.method == 'hessian_quadratic' else None
    return train_ds, eval_ds, energy

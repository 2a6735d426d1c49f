# api/likelihood_commands.py
import os

import numpy as np

from api.common import PARTICLE_ENERGIES, add_config_flag, echo_config, load_dataset, output_dir, resolve_config
from models.dataset import Dataset
from repositories.dataset_repository import DatasetRepository
from repositories.model_repository import ModelRepository
from repositories.report_repository import ReportRepository
from services.likelihood_service import LikelihoodService
from services.mlp_service import MlpField
from utils.errors import ValidationError
from utils.logger import get_logger

logger = get_logger('likelihood_commands')


def _load_model(cfg):
    if not cfg.model:
        raise ValidationError("缺少模型文件路径（--model）")
    return ModelRepository.load(cfg.model)


def nll(args):
    """在数据集上计算逐样本负对数似然"""
    logger.info("命令 nll - 开始")
    cfg = resolve_config(args)
    params = _load_model(cfg)
    ds = load_dataset(cfg, cfg.data)
    if ds.dim != params.dim:
        raise ValidationError(f"数据维度 {ds.dim} 与模型维度 {params.dim} 不一致")

    prior = 'zero_com' if ds.is_particles else 'isotropic'
    report = LikelihoodService.nll(MlpField(params), ds.samples, cfg.rk45_config(), prior, ds.com_dim,
                                   v_z_floor=cfg.v_z_floor, threads=cfg.threads)
    out = args.out or os.path.join(output_dir(cfg), 'nll.csv')
    ReportRepository.write_nll(report, out)
    echo_config(cfg, os.path.splitext(out)[0] + '.config.env')

    summary = report.to_dict()
    print(f"mean_nll={summary['mean_nll']:.6g}, mean_nfe={summary['mean_nfe']:.6g}, failed={summary['failed']}")
    logger.info(f"命令 nll - 完成，写入 {out}")
    return 0


def sample(args):
    """从先验出发沿学习到的场推送得到样本"""
    logger.info("命令 sample - 开始")
    cfg = resolve_config(args)
    params = _load_model(cfg)
    particles = cfg.energy in PARTICLE_ENERGIES and cfg.m > 0
    if particles and cfg.m * cfg.spatial_dim != params.dim:
        raise ValidationError(f"m·spatial_dim = {cfg.m * cfg.spatial_dim} 与模型维度 {params.dim} 不一致")
    prior, spatial_dim = ('zero_com', cfg.spatial_dim) if particles else ('isotropic', None)

    rng = np.random.default_rng(cfg.seed)
    samples, mean_nfe = LikelihoodService.sample(MlpField(params), prior, cfg.rk45_config(), rng, cfg.n,
                                                 spatial_dim=spatial_dim, v_z_floor=cfg.v_z_floor,
                                                 threads=cfg.threads)
    if particles:
        ds = Dataset(samples=samples, kind='particles', m=cfg.m, spatial_dim=cfg.spatial_dim, name='samples')
    else:
        ds = Dataset(samples=samples, name='samples')
    DatasetRepository.store(ds, args.out)
    echo_config(cfg, os.path.splitext(args.out)[0] + '.config.env')
    print(f"n={ds.n}, dim={ds.dim}, mean_nfe={mean_nfe:.6g}")
    logger.info(f"命令 sample - 完成，写入 {args.out}")
    return 0


def _add_model_flags(parser):
    add_config_flag(parser)
    parser.add_argument('--model', default=None)
    parser.add_argument('--rtol', type=float, default=None)
    parser.add_argument('--atol', type=float, default=None)
    parser.add_argument('--energy', choices=['quadratic', 'lj', 'formation'], default=None)
    parser.add_argument('--m', type=int, default=None)
    parser.add_argument('--spatial-dim', dest='spatial_dim', type=int, default=None)


def register(subparsers):
    parser = subparsers.add_parser('nll', help='精确散度负对数似然')
    _add_model_flags(parser)
    parser.add_argument('--data', default=None)
    parser.add_argument('--out-dir', dest='out_dir', default=None)
    parser.add_argument('--out', default=None, help='NLL CSV 路径，默认 <out-dir>/nll.csv')
    parser.set_defaults(handler=nll)

    parser = subparsers.add_parser('sample', help='从学习到的流采样')
    _add_model_flags(parser)
    parser.add_argument('--n', type=int, default=None)
    parser.add_argument('--seed', type=int, default=None)
    parser.add_argument('--out', required=True)
    parser.set_defaults(handler=sample)

# api/spectrum_commands.py
import os

import numpy as np

from api.common import add_config_flag, build_energy, echo_config, load_dataset, resolve_config
from models.energy_model import EnergyModel
from repositories.report_repository import ReportRepository
from services.energy_service import EnergyService
from services.spectrum_service import SpectrumService
from utils.errors import ValidationError
from utils.logger import get_logger

logger = get_logger('spectrum_commands')


def hessian(args):
    """单个样本的 Hessian 谱诊断"""
    logger.info("命令 hessian - 开始")
    cfg = resolve_config(args)
    ds = load_dataset(cfg, cfg.data)
    if not 0 <= args.index < ds.n:
        raise ValidationError(f"样本下标 {args.index} 越界（n={ds.n}）")
    y1 = ds.samples[args.index]

    if cfg.energy == 'formation':
        if not ds.is_particles:
            raise ValidationError("编队能量需要粒子数据（m 与 spatial_dim）")
        energy = EnergyModel.formation_from_sample(y1, ds.m, ds.spatial_dim)
    else:
        energy = build_energy(cfg)
    a = EnergyService.hessian(energy, y1)
    raw = SpectrumService.analyze(a)
    fs = SpectrumService.build_flow_spec(y1, a, c=cfg.c, gamma=cfg.gamma, kappa=cfg.kappa, flags=cfg.train_config().flags)

    out = args.out or os.path.join(cfg.out_dir or '.', 'spectrum.csv')
    ReportRepository.write_spectrum(raw, fs.spectrum, out)
    echo_config(cfg, os.path.splitext(out)[0] + '.config.env')
    condition = fs.spectrum.condition_number
    print(f"null_count={raw.null_count}, condition_number={condition:.6g}, "
          f"alpha_min={fs.alpha_min:.6g}, alpha_max={float(np.max(fs.alphas)):.6g}")
    logger.info(f"命令 hessian - 完成，写入 {out}")
    return 0


def register(subparsers):
    parser = subparsers.add_parser('hessian', help='输出数据点处 Hessian 的谱')
    add_config_flag(parser)
    parser.add_argument('--data', default=None)
    parser.add_argument('--energy', choices=['quadratic', 'lj', 'formation'], default=None)
    parser.add_argument('--m', type=int, default=None)
    parser.add_argument('--spatial-dim', dest='spatial_dim', type=int, default=None)
    parser.add_argument('--quad-eigvals', dest='quad_eigvals', default=None)
    parser.add_argument('--index', type=int, default=0)
    parser.add_argument('--c', type=float, default=None, help='条件数')
    parser.add_argument('--hyperbolize', action='store_const', const=True, default=None)
    parser.add_argument('--isotropize', action='store_const', const=True, default=None)
    parser.add_argument('--out', default=None)
    parser.set_defaults(handler=hessian)

# api/data_commands.py
import os

from api.common import add_config_flag, build_energy, echo_config, resolve_config
from repositories.dataset_repository import DatasetRepository
from services.data_service import DataService
from utils.logger import get_logger

logger = get_logger('data_commands')


def gen_data(args):
    """Langevin 生成数据集"""
    logger.info("命令 gen-data - 开始")
    cfg = resolve_config(args)
    energy = build_energy(cfg)
    ds = DataService.langevin_generate(energy, cfg.langevin_config(), threads=cfg.threads)
    DatasetRepository.store(ds, args.out, args.format)
    echo_config(cfg, os.path.splitext(args.out)[0] + '.config.env')
    print(f"n={ds.n}, dim={ds.dim}, mean_grad_norm={DataService.mean_grad_norm(energy, ds):.6g}")
    logger.info(f"命令 gen-data - 完成，写入 {args.out}")
    return 0


def register(subparsers):
    parser = subparsers.add_parser('gen-data', help='Langevin 动力学生成 Boltzmann 样本')
    add_config_flag(parser)
    parser.add_argument('--energy', choices=['quadratic', 'lj', 'formation'], default=None)
    parser.add_argument('--m', type=int, default=None, help='粒子数')
    parser.add_argument('--spatial-dim', dest='spatial_dim', type=int, default=None)
    parser.add_argument('--quad-eigvals', dest='quad_eigvals', default=None, help='二次能量特征值，如 1,25')
    parser.add_argument('--n', type=int, default=None)
    parser.add_argument('--eta', type=float, default=None)
    parser.add_argument('--tau', type=float, default=None)
    parser.add_argument('--burn-in', dest='burn_in', type=int, default=None)
    parser.add_argument('--thin', type=int, default=None)
    parser.add_argument('--refine-steps', dest='refine_steps', type=int, default=None)
    parser.add_argument('--n-chains', dest='n_chains', type=int, default=None)
    parser.add_argument('--seed', type=int, default=None)
    parser.add_argument('--format', choices=['csv', 'binary'], default=None, help='默认按扩展名判断')
    parser.add_argument('--out', required=True)
    parser.set_defaults(handler=gen_data)

# api/train_commands.py
import math
import os

from api.common import (add_config_flag, add_train_flags, build_energy, echo_config, output_dir, prepare_training,
                        resolve_config)
from repositories.model_repository import ModelRepository
from repositories.report_repository import ReportRepository
from services.train_service import TrainService
from utils.config import load_run_config
from utils.errors import ValidationError
from utils.logger import get_logger

logger = get_logger('train_commands')

KAPPA_METHODS = ('hessian_formation', 'hessian_quadratic', 'isotropic_data', 'isotropic_interpolant')


def train(args):
    """训练并写出模型、训练日志与配置回显"""
    logger.info("命令 train - 开始")
    cfg = resolve_config(args)
    train_ds, eval_ds, energy = prepare_training(cfg)
    out = output_dir(cfg)

    params, log = TrainService.train_loop(cfg.train_config(), train_ds, eval_ds, energy=energy,
                                          rk45_cfg=cfg.rk45_config(), threads=cfg.threads)

    model_path = cfg.model or os.path.join(out, 'model.bin')
    ModelRepository.save(params, model_path)
    ReportRepository.write_train_log(log, os.path.join(out, 'train_log.csv'))
    echo_config(cfg, os.path.join(out, 'config.env'))

    summary = log.to_dict()
    final_loss = summary['final_loss'] if summary['final_loss'] is not None else math.nan
    min_nll = summary['min_eval_nll'] if summary['min_eval_nll'] is not None else math.nan
    print(f"steps={summary['steps']}, final_loss={final_loss:.6g}, min_eval_nll={min_nll:.6g}")
    logger.info(f"命令 train - 完成，输出目录 {out}")
    return 0


def _parse_list(text, cast):
    return [cast(p.strip()) for p in text.split(',') if p.strip()]


def compare(args):
    """同预算、同种子下逐方法训练并比较评估 NLL / NFE"""
    logger.info("命令 compare - 开始")
    base = resolve_config(args)
    methods = _parse_list(args.methods, str)
    kappas = _parse_list(args.kappas, float) if args.kappas else [base.kappa]
    if not methods:
        raise ValidationError("--methods 不能为空")
    train_ds, eval_ds, _ = prepare_training(base)
    if eval_ds is None or eval_ds.n == 0:
        raise ValidationError("compare 需要评估集（eval_data 或 eval_frac）")
    out = output_dir(base)

    rows = []
    for method in methods:
        for kappa in (kappas if method in KAPPA_METHODS else [base.kappa]):
            values = dict(base.model_dump(), method=method, kappa=kappa)
            cfg = load_run_config(overrides=values)
            energy = build_energy(cfg) if method == 'hessian_quadratic' else None
            params, log = TrainService.train_loop(cfg.train_config(), train_ds, eval_ds, energy=energy,
                                                  rk45_cfg=cfg.rk45_config(), threads=cfg.threads)
            report = TrainService.evaluate(params, eval_ds, cfg.rk45_config(), cfg.threads, cfg.v_z_floor)
            tag = f"{method}_k{kappa:g}"
            ReportRepository.write_train_log(log, os.path.join(out, f"{tag}_train_log.csv"))
            summary = log.to_dict()
            row = {
                'method': method,
                'kappa': kappa,
                'hyperbolize': cfg.hyperbolize,
                'project': cfg.project,
                'mean_nll': report.mean_nll,
                'min_eval_nll': min(report.mean_nll, log.min_eval_nll),
                'mean_nfe': report.mean_nfe,
                'final_loss': summary['final_loss'] if summary['final_loss'] is not None else math.nan,
            }
            rows.append(row)
            print(f"method={method}, kappa={kappa:g}, mean_nll={row['mean_nll']:.6g}, "
                  f"mean_nfe={row['mean_nfe']:.1f}, final_loss={row['final_loss']:.6g}")

    ReportRepository.write_compare(rows, os.path.join(out, 'compare.csv'))
    echo_config(base, os.path.join(out, 'config.env'))
    logger.info(f"命令 compare - 完成，{len(rows)} 组结果")
    return 0


def register(subparsers):
    parser = subparsers.add_parser('train', help='流匹配训练')
    add_config_flag(parser)
    add_train_flags(parser)
    parser.add_argument('--model', default=None, help='模型输出路径，默认 <out-dir>/model.bin')
    parser.set_defaults(handler=train)

    parser = subparsers.add_parser('compare', help='同预算比较多种训练方法')
    add_config_flag(parser)
    add_train_flags(parser)
    parser.add_argument('--methods', required=True, help='逗号分隔的方法名')
    parser.add_argument('--kappas', default=None, help='逗号分隔的 κ 取值')
    parser.set_defaults(handler=compare)

# api/check_commands.py
from repositories.report_repository import ReportRepository
from services.check_service import CheckService
from utils.logger import get_logger

logger = get_logger('check_commands')

PERTURBATION = 1e-3


def check(args):
    """运行内置验证，任一项失败时退出码为 1"""
    logger.info("命令 check - 开始")
    results = CheckService.run(seed=args.seed, perturb=PERTURBATION if args.perturb else 0.0)
    for r in results:
        print(f"{r['name']}: {r['status']} (value={r['value']:.3e}, tolerance={r['tolerance']:.3e})")
    if args.out:
        ReportRepository.write_check(results, args.out)
    failed = [r['name'] for r in results if r['status'] != 'PASS']
    if failed:
        logger.warning(f"命令 check - {len(failed)} 项失败: {', '.join(failed)}")
        return 1
    logger.info("命令 check - 全部通过")
    return 0


def register(subparsers):
    parser = subparsers.add_parser('check', help='内置验证套件')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--perturb', action='store_true', help='向计算结果注入超出容差的扰动')
    parser.add_argument('--out', default=None, help='检查结果 CSV')
    parser.set_defaults(handler=check)

import sys
import argparse
from dotenv import load_dotenv
from utils.logger import get_logger, setup_logger
from utils.errors import HifmError

load_dotenv()

# 获取日志实例
logger = get_logger('app')


def build_parser():
    parser = argparse.ArgumentParser(prog='hifm', description='Hessian 信息流匹配：数据生成、训练、似然与采样')
    subparsers = parser.add_subparsers(dest='command', required=True)

    # 注册命令
    from api import COMMAND_MODULES
    for module in COMMAND_MODULES:
        module.register(subparsers)
    return parser


def main(argv=None):
    setup_logger()
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except HifmError as e:
        logger.error(f"命令 {args.command} 失败: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())

# services/train_service.py
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from models.energy_model import EnergyModel
from models.flow_spec import OtSpec
from models.train_config import Rk45Config
from models.train_log import TrainLog
from services.energy_service import EnergyService
from services.flow_service import FlowService
from services.likelihood_service import LikelihoodService
from services.mlp_service import MlpField, MlpService
from services.optimizer_service import OptimizerService
from services.spectrum_service import SpectrumService
from utils.errors import TrainingAbort, ValidationError
from utils.logger import get_logger

logger = get_logger('train_service')


class TrainService:
    """流匹配训练：逐样本路径构造、路径点采样、目标场、模式变换与 AdamW 更新"""

    @staticmethod
    def make_flow_spec_for_sample(cfg, y1, energy=None, m=None, spatial_dim=None):
        """按训练方法为单个数据点 y1 构造条件路径

        Args:
            cfg: TrainConfig
            y1: 数据点
            energy: hessian_quadratic 使用的能量；hessian_formation 只从中读取 m / spatial_dim
            m, spatial_dim: 编队能量的粒子数与空间维度（未给 energy 时必填）

        Returns:
            FlowSpec 或 OtSpec
        """
        y1 = np.asarray(y1, dtype=np.float64)
        method = cfg.method
        if method == 'optimal_transport':
            return OtSpec(y1=y1, sigma_min=cfg.sigma_min)

        if method == 'isotropic_data':
            alpha = FlowService.isotropic_alpha_data(y1, cfg.eps)
            return SpectrumService.isotropic_flow_spec(y1, alpha, cfg.gamma, cfg.kappa, flags=cfg.flags)
        if method == 'isotropic_interpolant':
            alpha = FlowService.isotropic_alpha_interp(cfg.eps, cfg.kappa)
            return SpectrumService.isotropic_flow_spec(y1, alpha, cfg.gamma, cfg.kappa, flags=cfg.flags)

        if method == 'hessian_formation':
            if energy is not None and energy.is_particle:
                m, spatial_dim = energy.params.m, energy.spatial_dim
            if not m or not spatial_dim:
                raise ValidationError("编队能量需要粒子数 m 与 spatial_dim")
            energy = EnergyModel.formation_from_sample(y1, m, spatial_dim)
        elif energy is None:
            raise ValidationError(f"方法 {method} 需要能量函数")

        hessian = EnergyService.hessian(energy, y1)
        return SpectrumService.build_flow_spec(y1, hessian, c=cfg.c, gamma=cfg.gamma, kappa=cfg.kappa,
                                               flags=cfg.flags)

    @staticmethod
    def usable_samples(cfg, dataset):
        """isotropic_data 要求 ‖y1‖ > eps，不满足的样本从训练集剔除并告警"""
        if cfg.method != 'isotropic_data':
            return dataset
        keep = np.flatnonzero(np.linalg.norm(dataset.samples, axis=1) > cfg.eps)
        if keep.size == 0:
            raise ValidationError(f"isotropic_data 要求 ‖y1‖ > eps={cfg.eps}，{dataset.n} 个样本全部不满足，请减小 eps")
        dropped = dataset.n - keep.size
        if dropped:
            logger.warning(f"isotropic_data: {dropped}/{dataset.n} 个样本 ‖y1‖ ≤ eps={cfg.eps}，已从训练集剔除")
            return dataset.subset(keep)
        return dataset

    @staticmethod
    def build_spec_cache(cfg, dataset, energy=None, threads=1):
        """每个数据点的路径只构造一次（Hessian 特征分解），训练中反复复用"""
        start = time.time()

        def build(i):
            return TrainService.make_flow_spec_for_sample(cfg, dataset.samples[i], energy, dataset.m,
                                                          dataset.spatial_dim)

        if threads and threads > 1 and dataset.n > 1:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                specs = list(executor.map(build, range(dataset.n)))
        else:
            specs = [build(i) for i in range(dataset.n)]
        logger.info(f"路径缓存构造完成: {len(specs)} 个样本, 方法 {cfg.method}, 耗时: {time.time() - start:.2f}秒")
        return specs

    @staticmethod
    def sample_target(cfg, spec, rng, spatial_dim=None):
        """对单个路径采样 (y, z) 并给出未变换的目标场

        Returns:
            tuple: (y, z, v_y, v_z)
        """
        z = float(rng.uniform(0.0, cfg.z_max))
        if isinstance(spec, OtSpec):
            point = FlowService.sample_ot_point(spec.y1, z, spec.sigma_min, rng, spatial_dim)
            v_y, v_z = FlowService.ot_field(point.y, z, spec.y1, spec.sigma_min)
            return point.y, z, v_y, v_z

        y0 = None
        if cfg.sample_y0:
            y0 = LikelihoodService.sample_prior(rng, 1, spec.dim, 'zero_com' if spatial_dim else 'isotropic',
                                                spatial_dim)[0]
            spec = replace(spec, sigma0=np.full(spec.dim, cfg.sigma_min))
        point = FlowService.sample_path_point(spec, z, rng, spatial_dim, y0)
        v_y, v_z = FlowService.cond_field_z(spec, point.y, z, y0, cfg.z_max)
        return point.y, z, v_y, v_z

    @staticmethod
    def targets(cfg, specs, rng, spatial_dim=None):
        """批量采样，按批内顺序依次消耗随机数"""
        rows = [TrainService.sample_target(cfg, spec, rng, spatial_dim) for spec in specs]
        y = np.stack([r[0] for r in rows])
        z = np.array([r[1] for r in rows])
        v_y = np.stack([r[2] for r in rows])
        v_z = np.array([r[3] for r in rows], dtype=np.float64)
        return y, z, v_y, v_z

    @staticmethod
    def projectors(cfg, specs):
        """project 开启时每个样本的 Π_hyp；最优传输路径没有谱，不投影"""
        if not cfg.project or any(isinstance(s, OtSpec) for s in specs):
            return None
        return np.stack([s.hyperbolic_projector for s in specs])

    @staticmethod
    def training_step(params, opt, cfg, batch_y1, rng, energy=None, spatial_dim=None, specs=None, m=None):
        """一步训练

        Returns:
            tuple: (params', opt', loss, clamp_count)
        """
        batch_y1 = np.atleast_2d(np.asarray(batch_y1, dtype=np.float64))
        if batch_y1.shape[0] == 0:
            raise ValidationError("训练批次为空")
        if specs is None:
            specs = [TrainService.make_flow_spec_for_sample(cfg, y1, energy, m, spatial_dim) for y1 in batch_y1]

        y, z, v_y, v_z = TrainService.targets(cfg, specs, rng, spatial_dim)
        loss, grads, clamp_count, per_sample = MlpService.loss_and_grad(
            params, y, z, v_y, v_z, finite=cfg.finite, projectors=TrainService.projectors(cfg, specs),
            v_z_floor=cfg.v_z_floor)

        if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
            bad = np.flatnonzero(~np.isfinite(per_sample))
            k = int(bad[0]) if bad.size else 0
            diagnostics = {'sample_index': k, 'z': float(z[k]), 'spec': specs[k].to_dict()}
            logger.error(f"损失非有限，终止训练: {diagnostics}")
            raise TrainingAbort(f"损失非有限（批内样本 {k}, z={z[k]:.6g}）", diagnostics)

        opt, params = OptimizerService.adamw_step(opt, params, grads)
        return params, opt, loss, clamp_count

    @staticmethod
    def init_model(cfg, dim):
        params = MlpService.init([dim + 1, *cfg.hidden, dim + 1], cfg.seed)
        opt = OptimizerService.init(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
        return params, opt

    @staticmethod
    def evaluate(params, eval_set, rk45_cfg, threads=1, v_z_floor=None):
        prior = 'zero_com' if eval_set.is_particles else 'isotropic'
        kwargs = {} if v_z_floor is None else {'v_z_floor': v_z_floor}
        return LikelihoodService.nll(MlpField(params), eval_set.samples, rk45_cfg, prior, eval_set.com_dim,
                                     threads=threads, **kwargs)

    @staticmethod
    def train_loop(cfg, dataset, eval_set=None, energy=None, rk45_cfg=None, threads=1):
        """运行 cfg.steps 步训练，每 eval_every 步在 eval_set 上评估 NLL

        Returns:
            tuple: (MlpParams, TrainLog)
        """
        if dataset.n == 0:
            raise ValidationError("训练数据集为空")
        rk45_cfg = rk45_cfg or Rk45Config()
        rng = np.random.default_rng(cfg.seed)
        params, opt = TrainService.init_model(cfg, dataset.dim)
        log = TrainLog()
        if cfg.steps == 0:
            logger.info("steps=0，返回初始模型")
            return params, log

        dataset = TrainService.usable_samples(cfg, dataset)
        specs = TrainService.build_spec_cache(cfg, dataset, energy, threads)
        spatial_dim = dataset.com_dim
        evaluate = cfg.eval_every > 0 and eval_set is not None and eval_set.n > 0
        start = time.time()

        for step in range(1, cfg.steps + 1):
            idx = rng.integers(0, dataset.n, size=cfg.batch_size)
            batch_specs = [specs[i] for i in idx]
            params, opt, loss, clamp_count = TrainService.training_step(
                params, opt, cfg, dataset.samples[idx], rng, spatial_dim=spatial_dim, specs=batch_specs)
            if clamp_count:
                logger.warning(f"step {step}: {clamp_count} 个样本的 v_z 被截断")

            eval_nll = eval_nfe = math.nan
            if evaluate and step % cfg.eval_every == 0:
                report = TrainService.evaluate(params, eval_set, rk45_cfg, threads, cfg.v_z_floor)
                eval_nll, eval_nfe = report.mean_nll, report.mean_nfe

            wall_ms = (time.time() - start) * 1000.0 if cfg.record_wall_time else 0.0
            log.append(step, loss, clamp_count, wall_ms=wall_ms, eval_nll=eval_nll, eval_nfe=eval_nfe)

            if step % cfg.log_every == 0 or step == cfg.steps:
                message = f"step {step}/{cfg.steps}: loss={loss:.6g}"
                if not math.isnan(eval_nll):
                    message += f", eval_nll={eval_nll:.4f}, eval_nfe={eval_nfe:.1f}"
                logger.info(message)

        logger.info(f"训练完成: {cfg.steps} 步, 耗时: {time.time() - start:.2f}秒")
        return params, log

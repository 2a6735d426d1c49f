# services/data_service.py
import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from models.dataset import Dataset
from models.energy_model import EnergyModel
from services.energy_service import EnergyService
from utils.errors import NumericalError, ValidationError
from utils.logger import get_logger

logger = get_logger('data_service')

DIVERGENCE_NORM = 1e6
LJ_SPACING = 2.0 ** (1.0 / 6.0)


class DataService:
    """数据生成与预处理服务"""

    @staticmethod
    def _initial_state(energy, rng):
        """二次能量从中心加标准正态扰动出发；粒子体系从略加扰动的格点出发"""
        if not energy.is_particle:
            return energy.params.center + rng.standard_normal(energy.dim)
        m, d = energy.params.m, energy.spatial_dim
        spacing = LJ_SPACING * energy.params.sigma if energy.kind == 'lennard_jones' else 1.0
        side = int(math.ceil(m ** (1.0 / d)))
        grid = np.stack(np.meshgrid(*[np.arange(side)] * d, indexing='ij'), axis=-1).reshape(-1, d)[:m]
        pos = spacing * grid + 0.01 * spacing * rng.standard_normal((m, d))
        return EnergyService.zero_com_project(pos.reshape(-1), d)

    @staticmethod
    def _step(energy, y, eta, noise_scale, rng):
        y = y - eta * EnergyService.gradient(energy, y)
        if noise_scale > 0:
            y = y + noise_scale * rng.standard_normal(y.size)
        if energy.is_particle:
            y = EnergyService.zero_com_project(y, energy.spatial_dim)
        norm = float(np.linalg.norm(y))
        if not math.isfinite(norm) or norm > DIVERGENCE_NORM:
            raise NumericalError(f"Langevin 链发散（‖y‖={norm:.3e}），请减小步长 eta={eta}")
        return y

    @staticmethod
    def _run_chain(energy, cfg, n_samples, seed_seq):
        rng = np.random.default_rng(seed_seq)
        y = DataService._initial_state(energy, rng)
        noise_scale = math.sqrt(2.0 * cfg.eta * cfg.tau)
        for _ in range(cfg.burn_in):
            y = DataService._step(energy, y, cfg.eta, noise_scale, rng)
        samples = np.empty((n_samples, energy.dim))
        for k in range(n_samples):
            for _ in range(cfg.thin):
                y = DataService._step(energy, y, cfg.eta, noise_scale, rng)
            samples[k] = y
        for k in range(n_samples):
            for _ in range(cfg.refine_steps):
                samples[k] = DataService._step(energy, samples[k], cfg.eta, 0.0, rng)
        return samples

    @staticmethod
    def langevin_generate(energy, cfg, threads=1):
        """过阻尼 Langevin y ← y − η∇V + √(2ητ)ε，burn-in 后每 thin 步取一个样本

        多条链各用 SeedSequence 派生的独立种子，按链序拼接。

        Returns:
            Dataset
        """
        start = time.time()
        counts = [cfg.n // cfg.n_chains + (1 if c < cfg.n % cfg.n_chains else 0) for c in range(cfg.n_chains)]
        seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)

        def run(c):
            return DataService._run_chain(energy, cfg, counts[c], seeds[c])

        if threads and threads > 1 and cfg.n_chains > 1:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                chains = list(executor.map(run, range(cfg.n_chains)))
        else:
            chains = [run(c) for c in range(cfg.n_chains)]

        samples = np.concatenate(chains, axis=0) if chains else np.zeros((0, energy.dim))
        if energy.is_particle:
            ds = Dataset(samples=samples, kind='particles', m=energy.params.m, spatial_dim=energy.spatial_dim,
                         name=f"langevin-{energy.kind}")
        else:
            ds = Dataset(samples=samples, name=f"langevin-{energy.kind}")
        logger.info(f"Langevin 生成完成: n={ds.n}, dim={ds.dim}, 链数 {cfg.n_chains}, "
                    f"耗时: {time.time() - start:.2f}秒")
        return ds

    @staticmethod
    def mean_grad_norm(energy, ds):
        if ds.n == 0:
            return float('nan')
        return float(np.mean([np.linalg.norm(EnergyService.gradient(energy, y)) for y in ds.samples]))

    @staticmethod
    def split(ds, train_frac, seed):
        """按种子置换切分为 (train, test)，互不相交且覆盖全部样本"""
        if not 0.0 < train_frac < 1.0:
            raise ValidationError(f"train_frac 必须在 (0, 1) 内，实际 {train_frac}")
        perm = np.random.default_rng(seed).permutation(ds.n)
        k = int(round(train_frac * ds.n))
        return ds.subset(np.sort(perm[:k]), f"{ds.name}-train"), ds.subset(np.sort(perm[k:]), f"{ds.name}-test")

    @staticmethod
    def preprocess_particles(ds):
        """每个样本投影到零质心子空间（幂等）"""
        if not ds.is_particles:
            raise ValidationError(f"数据集类型为 {ds.kind}，只有粒子数据需要零质心预处理")
        samples = EnergyService.zero_com_project(ds.samples, ds.spatial_dim)
        return Dataset(samples=samples, kind=ds.kind, m=ds.m, spatial_dim=ds.spatial_dim, name=ds.name)

    @staticmethod
    def build_energy(kind, m=0, spatial_dim=3, quad_eigvals=(1.0, 25.0), lj_epsilon=1.0, lj_sigma=1.0, seed=0):
        """按命令行参数构造能量

        formation 使用完全图，期望距离取一个由 seed 决定的随机参考构型的成对距离。
        """
        if kind == 'quadratic':
            return EnergyModel.quadratic(np.diag(np.asarray(quad_eigvals, dtype=np.float64)))
        if kind in ('lj', 'lennard_jones'):
            return EnergyModel.lennard_jones(m, spatial_dim, epsilon=lj_epsilon, sigma=lj_sigma)
        if kind == 'formation':
            if m < 2:
                raise ValidationError(f"编队至少需要 2 个粒子，实际 m={m}")
            reference = np.random.default_rng(seed).standard_normal(m * spatial_dim)
            return EnergyModel.formation_from_sample(reference, m, spatial_dim)
        raise ValidationError(f"未知能量类型: {kind}")

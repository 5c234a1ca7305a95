"""
Experiment runner: expands a config into (method, eta, m, seed) cells, runs
them on a thread pool and selects step sizes by area under the J curve.
"""
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError
from scipy.integrate import trapezoid

from spmalab.errors import ConfigError, LabError
from spmalab.models.config import DEFAULT_MAX_STEP_FRACTION, FaRunConfig, Method, TabularRunConfig
from spmalab.models.experiment import ExperimentConfig, effective_eta
from spmalab.models.features import FeatureMap
from spmalab.models.mdp import OptimalSolution, TabularMdp
from spmalab.models.record import IterationRecord
from spmalab.services.environment_service import (
    bandit_as_mdp,
    cliff_world,
    cliff_world_grid,
    frozen_lake,
    frozen_lake_grid,
    one_hot_features,
    random_bandit,
    tile_coding,
)
from spmalab.services.fa_service import FA_RUNNERS
from spmalab.services.mdp_service import solve_optimal, validate_mdp
from spmalab.services.tabular_service import run_tabular

logger = logging.getLogger(__name__)


@dataclass
class CellKey:
    method: str
    eta: float
    m: Optional[int]
    seed: int

    def sort_key(self) -> Tuple[str, float, int, int]:
        return (self.method, self.eta, -1 if self.m is None else self.m, self.seed)


@dataclass
class CellResult:
    key: CellKey
    records: List[IterationRecord] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ResultSet:
    config: Optional[ExperimentConfig]
    cells: List[CellResult] = field(default_factory=list)

    @property
    def failed(self) -> List[CellResult]:
        return [c for c in self.cells if not c.ok]


def _location(loc: Sequence) -> str:
    return ".".join(str(part) for part in loc if part != "__root__") or "config"


def parse_config(data: dict) -> ExperimentConfig:
    """
    Raises:
        ConfigError: with the dotted path of the first offending field
    """
    try:
        return ExperimentConfig.parse_obj(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(_location(first["loc"]), first["msg"])


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as e:
        raise ConfigError("", f"cannot read {path}: {e.strerror}")
    except json.JSONDecodeError as e:
        raise ConfigError("", f"{path} is not valid JSON: {e.msg} at line {e.lineno}")
    if not isinstance(data, dict):
        raise ConfigError("", "config must be a JSON object")
    return parse_config(data)


def build_environment(cfg: ExperimentConfig, seed: int = 0) -> TabularMdp:
    env = cfg.environment
    if env.kind == "cliff_world":
        return cliff_world(env.gamma)
    if env.kind == "frozen_lake":
        return frozen_lake(env.gamma, env.slippery)
    return bandit_as_mdp(random_bandit(env.num_arms, env.min_gap, env.seed + seed))


def build_features(cfg: ExperimentConfig, mdp: TabularMdp) -> FeatureMap:
    param = cfg.parameterization
    if param.features == "one_hot":
        return one_hot_features(mdp.num_states, mdp.num_actions)
    grid = cliff_world_grid() if cfg.environment.kind == "cliff_world" else frozen_lake_grid(cfg.environment.slippery)
    tiles = param.tile_coding
    return tile_coding(grid, mdp.num_actions, tiles.num_tilings, tiles.tile_size)


def expand_cells(cfg: ExperimentConfig, seed_offset: int = 0) -> List[CellKey]:
    """Tabular methods ignore m and the seed only matters for stochastic modes."""
    linear = cfg.parameterization.kind == "linear"
    cells = []
    for method in cfg.methods:
        etas = [None] if method == Method.SPMA_BANDIT_GAP else cfg.eta_grid
        if linear and method == Method.SPG:
            etas = [None]
        for eta in etas:
            for m in (cfg.inner_m if linear and method != Method.SPG else [None]):
                for seed in cfg.seeds:
                    cells.append(CellKey(method.value, 0.0 if eta is None else eta, m, seed + seed_offset))
    return cells


def _run_cell(
    cfg: ExperimentConfig,
    key: CellKey,
    mdp: TabularMdp,
    features: Optional[FeatureMap],
    optimal: OptimalSolution,
) -> CellResult:
    method = Method(key.method)
    step = effective_eta(method, key.eta, mdp.discount, cfg.scale_eta)
    try:
        if features is None:
            if method == Method.SPMA and mdp.discount > 0:
                step = min(step, DEFAULT_MAX_STEP_FRACTION * (1.0 - mdp.discount))
            run_cfg = TabularRunConfig(method=method, step_size=step, iterations=cfg.outer_T)
            records = run_tabular(mdp, run_cfg, optimal)
        else:
            run_cfg = FaRunConfig(
                outer_step_size=step,
                inner_iters=key.m or 1,
                outer_iters=cfg.outer_T,
                advantage_mode=cfg.advantage_mode.copy(update={"seed": cfg.advantage_mode.seed + key.seed}),
                state_mode=cfg.state_mode.copy(update={"seed": cfg.state_mode.seed + key.seed}),
                armijo=cfg.armijo,
                estimate_surrogate_gap=cfg.estimate_surrogate_gap,
                precondition=cfg.precondition,
                seed=key.seed,
            )
            records = FA_RUNNERS[method](mdp, features, run_cfg, optimal)
    except LabError as e:
        logger.warning("⚠️ cell %s failed: %s", key, e)
        return CellResult(key=key, error=f"{type(e).__name__}: {e}")
    except Exception as e:
        logger.error("❌ cell %s crashed: %s", key, e)
        return CellResult(key=key, error=f"Internal error: {e}")
    return CellResult(key=key, records=records)


def _resolve_threads(threads: int) -> int:
    return threads if threads > 0 else min(32, (os.cpu_count() or 1))


def run_experiment(cfg: ExperimentConfig, threads: int = 0, seed_offset: int = 0) -> ResultSet:
    """
    Run every cell; a failing cell is recorded and the rest continue.
    Results come back sorted by (method, eta, m, seed).
    """
    env = cfg.environment
    linear = cfg.parameterization.kind == "linear"
    shared_mdp = None if env.kind == "bandit" else build_environment(cfg)
    if shared_mdp is not None:
        validate_mdp(shared_mdp)
    shared_optimal = solve_optimal(shared_mdp) if shared_mdp is not None else None
    shared_features = build_features(cfg, shared_mdp) if linear else None
    cells = expand_cells(cfg, seed_offset)
    logger.info("🚀 running %d cells on %d threads", len(cells), _resolve_threads(threads))

    def work(key: CellKey) -> CellResult:
        if shared_mdp is not None:
            return _run_cell(cfg, key, shared_mdp, shared_features, shared_optimal)
        # bandit instances are drawn per seed
        try:
            mdp = build_environment(cfg, key.seed)
            validate_mdp(mdp)
        except LabError as e:
            return CellResult(key=key, error=f"{type(e).__name__}: {e}")
        return _run_cell(cfg, key, mdp, None, solve_optimal(mdp))

    with ThreadPoolExecutor(max_workers=_resolve_threads(threads)) as pool:
        results = list(pool.map(work, cells))
    results.sort(key=lambda c: c.key.sort_key())
    failed = sum(not c.ok for c in results)
    if failed:
        logger.warning("⚠️ %d of %d cells failed", failed, len(results))
    else:
        logger.info("✅ %d cells finished", len(results))
    return ResultSet(config=cfg, cells=results)


def auc(records: Sequence[IterationRecord]) -> float:
    """Trapezoidal area under J(pi_t) over t."""
    values = np.array([r.j_value for r in records], dtype=float)
    if values.size < 2:
        return float(values.sum())
    return float(trapezoid(values, dx=1.0))


def group_by_setting(results: ResultSet) -> Dict[Tuple[str, Optional[int], float], List[CellResult]]:
    """(method, m, eta) -> successful cells across seeds."""
    groups: Dict[Tuple[str, Optional[int], float], List[CellResult]] = {}
    for cell in results.cells:
        if cell.ok:
            groups.setdefault((cell.key.method, cell.key.m, cell.key.eta), []).append(cell)
    return groups


def mean_auc(cells: Sequence[CellResult]) -> float:
    return float(np.mean([auc(c.records) for c in cells]))


def best_eta(results: ResultSet) -> Dict[Tuple[str, Optional[int]], Tuple[float, float]]:
    """(method, m) -> (eta with the largest mean AUC over seeds, that AUC); ties go to the smaller eta."""
    best: Dict[Tuple[str, Optional[int]], Tuple[float, float]] = {}
    for (method, m, eta), cells in sorted(group_by_setting(results).items(), key=lambda kv: (kv[0][0], kv[0][1] or -1, kv[0][2])):
        score = mean_auc(cells)
        current = best.get((method, m))
        if current is None or score > current[1]:
            best[(method, m)] = (eta, score)
    return best

"""Simulation studies: estimator bias/RMSE across sample sizes and AIC-based kernel selection.

Every random draw derives from ``numpy.random.SeedSequence(seed, spawn_key=...)``
with a key naming the study cell and replicate, so results do not depend on
execution order or on how replicates are spread over workers.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Optional

import numpy as np

from .distribution import IronParams, alpha_tau, iron_sample
from .errors import StructuralError
from .kernels import parse_kernel
from .links import parse_link
from .parallel import pmap
from .regression import FitOptions, RegressionSpec, fit

__all__ = [
    "ScenarioConfig",
    "StudyResult",
    "run_bias_rmse",
    "run_model_selection",
    "run_study",
    "rb_rmse",
    "table4_config",
]

BIAS_RMSE = "bias_rmse"
MODEL_SELECTION = "model_selection"
SHARED = "shared"  # Case I: one sample per replicate, fitted at every tau
INDEPENDENT = "independent"  # Case II: a fresh sample for every tau

_KEY_COVARIATES = 0
_KEY_BIAS = 1
_KEY_SELECTION = 2


@dataclass
class ScenarioConfig:
    """Configuration of one simulation study (JSON-serializable).

    For ``bias_rmse`` each entry of ``kernels`` is both the generating and the
    fitted kernel, with true shape taken from the kernel string (``"ep:4"``).
    For ``model_selection`` data come from ``generator`` (or are resampled from
    ``covariate_source``) and every kernel in ``kernels`` is fitted at each
    ``tau`` in ``tau_grid``; the minimum-AIC kernel wins, ties going to the
    first declared.
    """

    mode: str = BIAS_RMSE
    gamma: list = field(default_factory=lambda: [0.5, 1.5, -0.5])
    lam: float = 2.0
    tau: float = 0.5
    link: str = "identity"
    kernels: list = field(default_factory=lambda: ["normal"])
    generator: Optional[str] = None
    sample_sizes: list = field(default_factory=lambda: [30, 100, 600])
    replicates: int = 200
    tau_grid: list = field(default_factory=lambda: [0.5])
    case: str = SHARED
    seed: int = 0
    covariate_source: dict = field(default_factory=lambda: {"kind": "uniform"})
    estimate_shape: bool = True
    max_iter: int = 500

    def __post_init__(self):
        if self.mode not in (BIAS_RMSE, MODEL_SELECTION):
            raise StructuralError(f"unknown mode {self.mode!r}")
        if self.case not in (SHARED, INDEPENDENT):
            raise StructuralError(f"unknown case {self.case!r}")
        if int(self.replicates) < 1:
            raise StructuralError("replicates must be >= 1")
        self.replicates = int(self.replicates)
        self.kernels = [parse_kernel(k).name for k in self.kernels]
        if not self.kernels:
            raise StructuralError("at least one kernel is required")
        if self.generator is not None:
            self.generator = parse_kernel(self.generator).name
        parse_link(self.link)
        alpha_tau(self.tau)
        for t in self.tau_grid:
            alpha_tau(t)
        p = len(self.gamma)
        if self.covariate_source.get("kind", "uniform") == "uniform":
            p = len(self.gamma)
        elif self.covariate_source.get("kind") == "resample":
            p = 1 + len(self.covariate_source.get("covariates", []))
        else:
            raise StructuralError(f"unknown covariate source {self.covariate_source!r}")
        self.sample_sizes = [int(n) for n in self.sample_sizes]
        if any(n <= p + 2 for n in self.sample_sizes):
            raise StructuralError("every sample size must exceed p + 2")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        return cls(**d)


def table4_config(kernels=("normal",), replicates=200, seed=0) -> ScenarioConfig:
    """Scenario-2 design: beta_i = 0.5 + 1.5 x1 - 0.5 x2, lam = 2, tau = 0.5."""
    return ScenarioConfig(mode=BIAS_RMSE, kernels=list(kernels), replicates=replicates, seed=seed)


@dataclass
class StudyResult:
    mode: str
    rows: list
    config: dict
    dropped: int = 0

    def to_dict(self) -> dict:
        return {"schema_version": 1, "mode": self.mode, "config": self.config,
                "dropped": self.dropped, "rows": self.rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.mode == BIAS_RMSE:
            cols = ["scenario", "n", "tau", "kernel", "parameter", "truth", "rb", "rmse",
                    "rb_is_absolute", "n_converged"]
        else:
            cols = ["scenario", "n", "tau", "kernel", "selection_percent", "n_selected", "n_valid"]
        w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})
        return buf.getvalue()

    def cell(self, **match) -> list:
        return [r for r in self.rows if all(r.get(k) == v for k, v in match.items())]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def rb_rmse(estimates, truth: float):
    """Signed relative bias and RMSE of a vector of estimates.

    A zero truth makes the relative bias undefined; the absolute bias is
    returned instead with the flag set.
    """
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        return math.nan, math.nan, False
    bias = float(np.mean(est) - truth)
    rmse = float(np.sqrt(np.mean((est - truth) ** 2)))
    if truth == 0:
        return bias, rmse, True
    return bias / truth, rmse, False


def _seq(seed, *key):
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))


def _uniform_design(cfg: ScenarioConfig, n: int):
    rng = np.random.default_rng(_seq(cfg.seed, _KEY_COVARIATES, n))
    p = len(cfg.gamma)
    return np.column_stack([np.ones(n), rng.random((n, p - 1))])


def _truth(kernel_name: str, cfg: ScenarioConfig):
    k = parse_kernel(kernel_name)
    theta = list(cfg.gamma) + [cfg.lam]
    names = [f"gamma{j + 1}" for j in range(len(cfg.gamma))] + ["lambda"]
    if k.has_shape and cfg.estimate_shape:
        theta.append(k.shape)
        names.append("shape")
    return np.array(theta), names


def _bias_task(rep, cfg_dict, kernel_index, n, X):
    cfg = ScenarioConfig.from_dict(cfg_dict)
    kname = cfg.kernels[kernel_index]
    kernel = parse_kernel(kname)
    link = parse_link(cfg.link)
    beta = link.inverse(X @ np.asarray(cfg.gamma, dtype=float))
    rng = np.random.default_rng(_seq(cfg.seed, _KEY_BIAS, kernel_index, n, rep))
    y = iron_sample(n, IronParams.at_quantile(beta, cfg.lam, cfg.tau, kernel), rng)
    spec = RegressionSpec(X, cfg.tau, link, kernel, estimate_shape=cfg.estimate_shape)
    try:
        res = fit(y, spec, FitOptions(max_iter=cfg.max_iter))
    except Exception:
        return None
    return res.theta if res.converged else None


def run_bias_rmse(cfg: ScenarioConfig, n_jobs=None) -> StudyResult:
    """Relative bias and RMSE of the MLEs for each (n, kernel).

    Covariates are drawn once per sample size and kept fixed over replicates;
    non-converged replicates are dropped and counted.
    """
    if cfg.mode != BIAS_RMSE:
        raise StructuralError("config mode must be bias_rmse")
    if cfg.covariate_source.get("kind", "uniform") != "uniform":
        raise StructuralError("bias_rmse uses uniform covariates")
    link = parse_link(cfg.link)
    rows = []
    dropped = 0
    cfg_dict = cfg.to_dict()
    for n in cfg.sample_sizes:
        X = _uniform_design(cfg, n)
        if not link.feasible(X @ np.asarray(cfg.gamma, dtype=float)):
            raise StructuralError("true coefficients give non-positive quantiles")
        for ki, kname in enumerate(cfg.kernels):
            task = partial(_bias_task, cfg_dict=cfg_dict, kernel_index=ki, n=n, X=X)
            thetas = [t for t in pmap(task, range(cfg.replicates), n_jobs) if t is not None]
            dropped += cfg.replicates - len(thetas)
            truth, names = _truth(kname, cfg)
            est = np.array(thetas).reshape(len(thetas), truth.size)
            for j, name in enumerate(names):
                rb, rmse, absolute = rb_rmse(est[:, j], float(truth[j]))
                rows.append({
                    "scenario": BIAS_RMSE, "n": n, "tau": cfg.tau, "kernel": kname,
                    "parameter": name, "truth": float(truth[j]), "rb": rb, "rmse": rmse,
                    "rb_is_absolute": absolute, "n_converged": len(thetas),
                })
    return StudyResult(BIAS_RMSE, rows, cfg_dict, dropped)


def _resample_pool(cfg: ScenarioConfig):
    from .io import read_dataset  # local import: io depends on this module's results

    src = cfg.covariate_source
    ds = read_dataset(src["path"], src["response"], src.get("covariates", []))
    return ds.y, ds.X


def _selection_data(cfg, n, rep, tau_index, pool):
    """Response and design for one replicate (and one tau when samples are independent)."""
    key = (_KEY_SELECTION, n, rep, tau_index)
    rng = np.random.default_rng(_seq(cfg.seed, *key))
    if pool is not None:
        y_all, X_all = pool
        if n > y_all.size:
            raise StructuralError("sample size exceeds the resampling pool")
        idx = rng.choice(y_all.size, size=n, replace=False)
        return y_all[idx], X_all[idx]
    X = np.column_stack([np.ones(n), rng.random((n, len(cfg.gamma) - 1))])
    gen = parse_kernel(cfg.generator or cfg.kernels[0])
    beta = parse_link(cfg.link).inverse(X @ np.asarray(cfg.gamma, dtype=float))
    y = iron_sample(n, IronParams.at_quantile(beta, cfg.lam, cfg.tau, gen), rng)
    return y, X


def _select(y, X, tau, cfg):
    """Index of the minimum-AIC kernel (first declared on ties), or None if all fail."""
    best, best_aic = None, math.inf
    for ki, kname in enumerate(cfg.kernels):
        spec = RegressionSpec(X, tau, cfg.link, kname, estimate_shape=cfg.estimate_shape)
        try:
            res = fit(y, spec, FitOptions(max_iter=cfg.max_iter))
        except Exception:
            continue
        if res.converged and res.aic < best_aic:
            best, best_aic = ki, res.aic
    return best


def _selection_task(rep, cfg_dict, n, pool):
    cfg = ScenarioConfig.from_dict(cfg_dict)
    out = []
    shared = _selection_data(cfg, n, rep, 0, pool) if cfg.case == SHARED else None
    for ti, tau in enumerate(cfg.tau_grid):
        y, X = shared if shared is not None else _selection_data(cfg, n, rep, ti, pool)
        out.append(_select(y, X, tau, cfg))
    return out


def run_model_selection(cfg: ScenarioConfig, n_jobs=None) -> StudyResult:
    """Percentage of replicates in which each kernel attains the minimum AIC, per tau."""
    if cfg.mode != MODEL_SELECTION:
        raise StructuralError("config mode must be model_selection")
    pool = _resample_pool(cfg) if cfg.covariate_source.get("kind") == "resample" else None
    cfg_dict = cfg.to_dict()
    rows = []
    dropped = 0
    for n in cfg.sample_sizes:
        task = partial(_selection_task, cfg_dict=cfg_dict, n=n, pool=pool)
        picks = np.array(pmap(task, range(cfg.replicates), n_jobs), dtype=object)
        for ti, tau in enumerate(cfg.tau_grid):
            col = [c for c in picks[:, ti] if c is not None]
            dropped += cfg.replicates - len(col)
            counts = np.bincount(np.asarray(col, dtype=int), minlength=len(cfg.kernels))
            for ki, kname in enumerate(cfg.kernels):
                pct = 100.0 * counts[ki] / len(col) if col else math.nan
                rows.append({
                    "scenario": MODEL_SELECTION, "n": n, "tau": float(tau), "kernel": kname,
                    "selection_percent": float(pct), "n_selected": int(counts[ki]),
                    "n_valid": len(col), "case": cfg.case,
                })
    return StudyResult(MODEL_SELECTION, rows, cfg_dict, dropped)


def run_study(cfg: ScenarioConfig, n_jobs=None) -> StudyResult:
    if cfg.mode == BIAS_RMSE:
        return run_bias_rmse(cfg, n_jobs)
    return run_model_selection(cfg, n_jobs)

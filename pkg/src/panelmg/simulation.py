"""Monte Carlo harness with six built-in data generating processes.

All processes share one template: outcomes carry unit and period effects, the
regressors carry matching effects, and unit slopes are either common or
randomly varying around 1. The primitive draws are iid standard normal; the
effect components (lam, f, gam) are drawn with mean 1, the shocks with mean 0.

dgp 1  one regressor, common slope, interactive effect lam_i * f_t in y and
       gam_i * f_t in x on top of the additive two-way effects.
dgp 2  as 1 but slopes vary: beta_i = 1 + eta_i, eta_i independent of x.
dgp 3  as 2 but the regressor shock is v_it = beta_i xi_it + v*_it, so slopes
       correlate with regressor volatility (pooling is inconsistent).
dgp 4  two regressors, one interactive factor; beta_2i loads on the factor
       loading of x2, v_1it = beta_1i xi_it + v*_1it, and the outcome shock
       is AR(1) scaled by sqrt(1 + 0.25 x1^2) (heteroskedastic, dependent).
dgp 5  as 3 with the interactive term removed from the outcome equation
       (regressors unchanged), leaving additive two-way effects in y.
dgp 6  as 4 with the interactive terms removed from both equations.

Per-replication seeds are derived with numpy's SeedSequence spawn keys, so a
report depends only on (base_seed, cells, replications) and never on the
worker count.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import OutOfRange, PanelMgError, SingularOmegaDelta
from .estimators import Method, compute_ridge_kappa, estimate
from .inference import (
    _joint_statistic,
    _loo_estimates,
    _omega_from_loo,
    chi_square_upper_tail,
    normal_quantile_upper,
)
from .panel import PanelData

__all__ = [
    "DgpSpec",
    "SimTruth",
    "SimCell",
    "SimReport",
    "simulate_dgp",
    "run_monte_carlo",
    "DGP_N_REGRESSORS",
]

DGP_N_REGRESSORS = {1: 1, 2: 1, 3: 1, 4: 2, 5: 1, 6: 2}
AR_BURN_IN = 50
_INFERENCE_METHODS = (Method.TW_MG, Method.TW_MG_RIDGE)


@dataclass(frozen=True)
class DgpSpec:
    """One simulated panel: which process, its dimensions, and the seed."""

    dgp_id: int
    n_units: int
    n_periods: int
    seed: int

    def __post_init__(self) -> None:
        if self.dgp_id not in DGP_N_REGRESSORS:
            raise OutOfRange(f"dgp_id must be in 1..6, got {self.dgp_id}")
        if self.n_units < 2:
            raise OutOfRange(f"need n_units >= 2, got {self.n_units}")
        if self.n_periods < 2:
            raise OutOfRange(f"need n_periods >= 2, got {self.n_periods}")
        if self.seed < 0:
            raise OutOfRange(f"seed must be nonnegative, got {self.seed}")

    @property
    def n_regressors(self) -> int:
        return DGP_N_REGRESSORS[self.dgp_id]


@dataclass(frozen=True)
class SimTruth:
    """True parameters behind one simulated panel."""

    beta0: np.ndarray
    unit_betas: np.ndarray


def _simulate_one_regressor(spec: DgpSpec, rng: np.random.Generator):
    n, t = spec.n_units, spec.n_periods
    lam = 1.0 + rng.standard_normal(n)
    f = 1.0 + rng.standard_normal(t)
    gam = 1.0 + rng.standard_normal(n)
    u = rng.standard_normal((n, t))
    xi = rng.standard_normal((n, t))
    eta_star = rng.standard_normal(n)
    v_star = rng.standard_normal((n, t))

    beta = np.ones(n) if spec.dgp_id == 1 else 1.0 + eta_star
    if spec.dgp_id in (3, 5):
        v = beta[:, None] * xi + v_star
    else:
        v = v_star
    x = lam[:, None] + f[None, :] + gam[:, None] * f[None, :] + v
    y = beta[:, None] * x + lam[:, None] + f[None, :] + u
    if spec.dgp_id != 5:
        y = y + lam[:, None] * f[None, :]
    return y, x[:, :, None], beta[:, None]


def _simulate_two_regressor(spec: DgpSpec, rng: np.random.Generator):
    n, t = spec.n_units, spec.n_periods
    lam = 1.0 + rng.standard_normal(n)
    f = 1.0 + rng.standard_normal(t)
    gam1 = 1.0 + rng.standard_normal(n)
    gam2 = 1.0 + rng.standard_normal(n)
    u_shocks = rng.standard_normal((n, AR_BURN_IN + t))
    xi = rng.standard_normal((n, t))
    eta1_star = rng.standard_normal(n)
    eta2_star = rng.standard_normal(n)
    v1_star = rng.standard_normal((n, t))
    v2_star = rng.standard_normal((n, t))

    beta1 = 1.0 + eta1_star
    beta2 = gam2 + eta2_star  # 1 + (gam2 - 1) + eta2*
    v1 = beta1[:, None] * xi + v1_star
    v2 = v2_star
    interactive = spec.dgp_id == 4
    x1 = lam[:, None] + f[None, :] + v1
    x2 = lam[:, None] + f[None, :] + v2
    if interactive:
        x1 = x1 + gam1[:, None] * f[None, :]
        x2 = x2 + gam2[:, None] * f[None, :]
    # AR(1) with coefficient 0.25 from a zero start, burn-in discarded.
    u_ar = lfilter([1.0], [1.0, -0.25], u_shocks, axis=1)[:, AR_BURN_IN:]
    u = np.sqrt(1.0 + 0.25 * x1**2) * u_ar
    y = beta1[:, None] * x1 + beta2[:, None] * x2 + lam[:, None] + f[None, :] + u
    if interactive:
        y = y + lam[:, None] * f[None, :]
    x = np.stack([x1, x2], axis=2)
    return y, x, np.column_stack([beta1, beta2])


def simulate_dgp(spec: DgpSpec) -> tuple[PanelData, SimTruth]:
    """Draw one panel from the process described by ``spec``.

    Deterministic given ``spec.seed``; the same spec always yields the same
    arrays bit for bit.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.n_regressors == 1:
        y, x, unit_betas = _simulate_one_regressor(spec, rng)
    else:
        y, x, unit_betas = _simulate_two_regressor(spec, rng)
    panel = PanelData.from_arrays(y, x)
    truth = SimTruth(beta0=np.ones(spec.n_regressors), unit_betas=unit_betas)
    return panel, truth


@dataclass(frozen=True)
class SimCell:
    """Aggregated metrics for one (dgp, N, T) cell and one estimator."""

    dgp_id: int
    n_units: int
    n_periods: int
    estimator: str
    replications: int
    failures: int
    bias_x10: tuple[float, ...]
    mse_x100: tuple[float, ...]
    coverage_95: tuple[float, ...] | None
    rejection_rate_5pct: float | None
    wall_time_s: float = 0.0


@dataclass(frozen=True)
class SimReport:
    """Full Monte Carlo report; wall time never enters the serialized forms."""

    cells: tuple[SimCell, ...]
    base_seed: int | None = None
    replications: int | None = None
    level: float = 0.95
    test_level: float = 0.05

    def to_json_dict(self) -> dict:
        return {
            "schema": "panelmg/1",
            "kind": "simulation-report",
            "base_seed": self.base_seed,
            "replications": self.replications,
            "level": self.level,
            "test_level": self.test_level,
            "cells": [
                {
                    "dgp": c.dgp_id,
                    "n_units": c.n_units,
                    "n_periods": c.n_periods,
                    "estimator": c.estimator,
                    "replications": c.replications,
                    "failures": c.failures,
                    "bias_x10": list(c.bias_x10),
                    "mse_x100": list(c.mse_x100),
                    "coverage_95": None if c.coverage_95 is None else list(c.coverage_95),
                    "rejection_rate_5pct": c.rejection_rate_5pct,
                }
                for c in self.cells
            ],
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def from_json_dict(cls, data: dict) -> "SimReport":
        if data.get("schema") != "panelmg/1":
            raise OutOfRange(f"unknown report schema {data.get('schema')!r}")
        cells = tuple(
            SimCell(
                dgp_id=int(c["dgp"]),
                n_units=int(c["n_units"]),
                n_periods=int(c["n_periods"]),
                estimator=str(c["estimator"]),
                replications=int(c["replications"]),
                failures=int(c["failures"]),
                bias_x10=tuple(float(v) for v in c["bias_x10"]),
                mse_x100=tuple(float(v) for v in c["mse_x100"]),
                coverage_95=(
                    None
                    if c["coverage_95"] is None
                    else tuple(float(v) for v in c["coverage_95"])
                ),
                rejection_rate_5pct=(
                    None
                    if c["rejection_rate_5pct"] is None
                    else float(c["rejection_rate_5pct"])
                ),
            )
            for c in data["cells"]
        )
        return cls(
            cells=cells,
            base_seed=data.get("base_seed"),
            replications=data.get("replications"),
            level=float(data.get("level", 0.95)),
            test_level=float(data.get("test_level", 0.05)),
        )

    @classmethod
    def read_json(cls, path: str | Path) -> "SimReport":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    _CSV_HEADER = (
        "dgp,n_units,n_periods,estimator,coefficient,replications,failures,"
        "bias_x10,mse_x100,coverage_95,rejection_rate_5pct"
    ).split(",")

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self._CSV_HEADER)
            for c in self.cells:
                for j in range(len(c.bias_x10)):
                    writer.writerow(
                        [
                            c.dgp_id,
                            c.n_units,
                            c.n_periods,
                            c.estimator,
                            j + 1,
                            c.replications,
                            c.failures,
                            repr(c.bias_x10[j]),
                            repr(c.mse_x100[j]),
                            "" if c.coverage_95 is None else repr(c.coverage_95[j]),
                            (
                                ""
                                if c.rejection_rate_5pct is None
                                else repr(c.rejection_rate_5pct)
                            ),
                        ]
                    )

    @classmethod
    def read_csv(cls, path: str | Path) -> "SimReport":
        """Rebuild the cells from a CSV report (metadata lives in the JSON)."""
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != cls._CSV_HEADER:
                raise OutOfRange(f"unexpected CSV report header: {header!r}")
            grouped: dict[tuple, list[list[str]]] = {}
            order: list[tuple] = []
            for row in reader:
                key = (row[0], row[1], row[2], row[3])
                if key not in grouped:
                    grouped[key] = []
                    order.append(key)
                grouped[key].append(row)
        cells = []
        for key in order:
            rows = sorted(grouped[key], key=lambda r: int(r[4]))
            first = rows[0]
            cells.append(
                SimCell(
                    dgp_id=int(first[0]),
                    n_units=int(first[1]),
                    n_periods=int(first[2]),
                    estimator=first[3],
                    replications=int(first[5]),
                    failures=int(first[6]),
                    bias_x10=tuple(float(r[7]) for r in rows),
                    mse_x100=tuple(float(r[8]) for r in rows),
                    coverage_95=(
                        None if first[9] == "" else tuple(float(r[9]) for r in rows)
                    ),
                    rejection_rate_5pct=None if first[10] == "" else float(first[10]),
                )
            )
        return cls(cells=tuple(cells))


def _derive_seed(base_seed: int, cell_index: int, replication: int) -> int:
    ss = np.random.SeedSequence(base_seed, spawn_key=(cell_index, replication))
    return int(ss.generate_state(1, np.uint64)[0])


def _replication(task: tuple) -> dict:
    """Run one replication: simulate, estimate, and do jackknife inference.

    Module-level and tuple-driven so it pickles cleanly into worker processes.
    """
    dgp_id, n_units, n_periods, method_values, seed, level, test_level = task
    methods = [Method(v) for v in method_values]
    panel, truth = simulate_dgp(DgpSpec(dgp_id, n_units, n_periods, seed))
    kappa = (
        compute_ridge_kappa(panel) if Method.TW_MG_RIDGE in methods else None
    )
    errors: dict[str, np.ndarray | None] = {}
    estimates = {}
    for m in methods:
        try:
            est = estimate(
                panel, m, kappa=kappa if m is Method.TW_MG_RIDGE else None
            )
            estimates[m] = est
            errors[m.value] = est.beta_hat - truth.beta0
        except PanelMgError:
            errors[m.value] = None

    covered: dict[str, np.ndarray | None] = {}
    rejected: dict[str, bool | None] = {}
    inf_methods = [
        m for m in methods if m in _INFERENCE_METHODS and errors[m.value] is not None
    ]
    loo = None
    pooled_full = None
    if inf_methods:
        try:
            pooled_full = estimates.get(Method.TW_POOLED) or estimate(
                panel, Method.TW_POOLED
            )
            loo = _loo_estimates(
                panel, list(inf_methods) + [Method.TW_POOLED], kappa
            )
        except PanelMgError:
            loo = None
    z = normal_quantile_upper((1.0 - level) / 2.0)
    for m in inf_methods:
        if loo is None:
            covered[m.value] = None
            rejected[m.value] = None
            continue
        omega = _omega_from_loo(loo[m])
        se = np.sqrt(np.diag(omega) / n_units)
        covered[m.value] = np.abs(errors[m.value]) <= z * se
        delta = estimates[m].beta_hat - pooled_full.beta_hat
        omega_delta = _omega_from_loo(loo[m] - loo[Method.TW_POOLED])
        try:
            joint = _joint_statistic(delta, omega_delta, n_units)
            pvalue = chi_square_upper_tail(joint, len(delta))
            rejected[m.value] = bool(pvalue < test_level)
        except SingularOmegaDelta:
            rejected[m.value] = None
    return {"errors": errors, "covered": covered, "rejected": rejected}


def _aggregate_cell(
    cell: tuple[int, int, int],
    methods: Sequence[Method],
    results: list[dict],
    replications: int,
    wall_time: float,
) -> list[SimCell]:
    dgp_id, n_units, n_periods = cell
    k = DGP_N_REGRESSORS[dgp_id]
    out = []
    for m in methods:
        errs = [r["errors"][m.value] for r in results]
        ok = np.array([e for e in errs if e is not None])
        failures = replications - len(ok)
        if len(ok):
            bias = tuple(float(v) for v in 10.0 * ok.mean(axis=0))
            mse = tuple(float(v) for v in 100.0 * np.square(ok).mean(axis=0))
        else:
            bias = tuple([float("nan")] * k)
            mse = tuple([float("nan")] * k)
        coverage = None
        rejection = None
        if m in _INFERENCE_METHODS:
            cov_rows = [
                r["covered"].get(m.value)
                for r in results
                if r["covered"].get(m.value) is not None
            ]
            if cov_rows:
                coverage = tuple(
                    float(v) for v in np.array(cov_rows, dtype=float).mean(axis=0)
                )
            rej_rows = [
                r["rejected"].get(m.value)
                for r in results
                if r["rejected"].get(m.value) is not None
            ]
            if rej_rows:
                rejection = float(np.mean(rej_rows))
        out.append(
            SimCell(
                dgp_id=dgp_id,
                n_units=n_units,
                n_periods=n_periods,
                estimator=m.value,
                replications=replications,
                failures=failures,
                bias_x10=bias,
                mse_x100=mse,
                coverage_95=coverage,
                rejection_rate_5pct=rejection,
                wall_time_s=wall_time,
            )
        )
    return out


def run_monte_carlo(
    cells: Sequence[tuple[int, int, int]],
    estimators: Sequence[Method | str],
    replications: int,
    base_seed: int,
    level: float = 0.95,
    test_level: float = 0.05,
    workers: int = 1,
) -> SimReport:
    """Run the Monte Carlo over a grid of (dgp_id, n_units, n_periods) cells.

    Replications are embarrassingly parallel: each derives its own seed from
    (base_seed, cell index, replication index), and results are aggregated in
    replication order, so the report is identical for any ``workers`` >= 1.
    Estimator failures inside a replication are tallied per cell and excluded
    from that cell's averages rather than aborting the run.
    """
    if replications < 1:
        raise OutOfRange(f"need at least 1 replication, got {replications}")
    if not 0.0 < level < 1.0:
        raise OutOfRange(f"confidence level must be in (0, 1), got {level}")
    if not 0.0 < test_level < 1.0:
        raise OutOfRange(f"test level must be in (0, 1), got {test_level}")
    if workers < 1:
        raise OutOfRange(f"workers must be >= 1, got {workers}")
    if not cells:
        raise OutOfRange("need at least one simulation cell")
    methods = []
    for e in estimators:
        m = Method(e)
        if m not in methods:
            methods.append(m)
    if not methods:
        raise OutOfRange("need at least one estimator")
    for dgp_id, n_units, n_periods in cells:
        DgpSpec(dgp_id, n_units, n_periods, 0)  # validates the cell
        k = DGP_N_REGRESSORS[dgp_id]
        needs_periods = set(methods) & {Method.TW_MG, Method.STANDARD_MG}
        if needs_periods and n_periods <= k + 1:
            raise OutOfRange(
                f"cell (dgp={dgp_id}, N={n_units}, T={n_periods}) needs "
                f"T > {k + 1} for the requested estimators"
            )

    method_values = tuple(m.value for m in methods)
    all_cells: list[SimCell] = []
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for ci, cell in enumerate(cells):
            dgp_id, n_units, n_periods = cell
            tasks = [
                (
                    dgp_id,
                    n_units,
                    n_periods,
                    method_values,
                    _derive_seed(base_seed, ci, r),
                    level,
                    test_level,
                )
                for r in range(replications)
            ]
            start = time.perf_counter()
            if executor is not None:
                chunk = max(1, replications // (workers * 4))
                results = list(executor.map(_replication, tasks, chunksize=chunk))
            else:
                results = [_replication(t) for t in tasks]
            wall = time.perf_counter() - start
            all_cells.extend(
                _aggregate_cell(cell, methods, results, replications, wall)
            )
    finally:
        if executor is not None:
            executor.shutdown()
    return SimReport(
        cells=tuple(all_cells),
        base_seed=base_seed,
        replications=replications,
        level=level,
        test_level=test_level,
    )

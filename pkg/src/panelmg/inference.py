"""Leave-one-out jackknife inference and the slope-homogeneity test.

The covariance estimator re-runs the chosen estimator on every (N-1)-unit
subsample, literally rebuilding each subpanel and calling the public
estimator, so the jackknife is exact by construction rather than an
approximation of it. For an estimate b with leave-one-out values b_(-i),

    Omega = (N - 1) * sum_i (b_(-i) - mean) (b_(-i) - mean)'

estimates the covariance of sqrt(N) (b - beta), and the two-sided confidence
interval at level 1 - tau is b_k +/- z_{tau/2} sqrt(Omega_kk / N).

The poolability test contrasts the mean-group and pooled estimates with the
jackknife covariance of that contrast, both leave-one-out values taken from
the same subsample:

    J = N * delta' OmegaDelta^{-1} delta,   delta = b_mg - b_pooled,

asymptotically chi-square with K degrees of freedom under slope homogeneity.
Per-coefficient one-degree statistics use the diagonal of OmegaDelta, with a
Holm adjustment across the K raw p-values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaincc, ndtri

from .errors import (
    DegenerateJackknife,
    EstimationError,
    MethodMismatch,
    OutOfRange,
    RankDeficient,
    SingularBlock,
    SingularOmegaDelta,
    TooSmall,
)
from .estimators import Method, SlopeEstimates, compute_ridge_kappa, estimate
from .panel import PanelData

__all__ = [
    "JackknifeCovariance",
    "ConfidenceInterval",
    "PerCoefficientTest",
    "PoolabilityReport",
    "jackknife",
    "confidence_interval",
    "poolability_test",
    "holm_adjust",
    "chi_square_upper_tail",
    "normal_quantile_upper",
]

OMEGA_DELTA_RANK_TOLERANCE = 1e-12


def chi_square_upper_tail(x: float, df: int) -> float:
    """P(chi2_df > x) via the regularized upper incomplete gamma function."""
    if df < 1:
        raise OutOfRange(f"degrees of freedom must be >= 1, got {df}")
    if not np.isfinite(x) or x < 0:
        raise OutOfRange(f"test statistic must be finite and >= 0, got {x}")
    return float(gammaincc(df / 2.0, x / 2.0))


def normal_quantile_upper(tail_probability: float) -> float:
    """z such that P(Z > z) = tail_probability for standard normal Z."""
    if not 0.0 < tail_probability < 1.0:
        raise OutOfRange(
            f"tail probability must be in (0, 1), got {tail_probability}"
        )
    return float(-ndtri(tail_probability))


def holm_adjust(pvalues: Sequence[float]) -> list[float]:
    """Holm step-down adjustment, kept verbatim as adj_(k) = min((K-k+1) p_(k), 1).

    Sorted with a stable order so ties keep input order; the multiplied values
    are mapped back to input positions without enforcing monotonicity across
    the sorted sequence.
    """
    p = np.asarray(list(pvalues), dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise OutOfRange("need a non-empty 1-d collection of p-values")
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise OutOfRange("p-values must lie in [0, 1]")
    k = p.size
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(k)
    for rank, idx in enumerate(order):
        adjusted[idx] = min((k - rank) * p[idx], 1.0)
    return [float(v) for v in adjusted]


@dataclass(frozen=True)
class JackknifeCovariance:
    """Exact leave-one-out covariance estimate for one estimator.

    ``omega_hat`` estimates Var(sqrt(N) (b - beta)); ``loo_estimates`` holds
    the N leave-one-out coefficient vectors in unit order.
    """

    method: Method
    omega_hat: np.ndarray
    loo_estimates: np.ndarray
    kappa_used: float | None = None

    @property
    def n_units(self) -> int:
        return self.loo_estimates.shape[0]

    @property
    def n_regressors(self) -> int:
        return self.loo_estimates.shape[1]


@dataclass(frozen=True)
class ConfidenceInterval:
    coefficient_index: int
    level: float
    point: float
    std_error: float
    lower: float
    upper: float


@dataclass(frozen=True)
class PerCoefficientTest:
    coefficient_index: int
    statistic: float
    p_value: float
    holm_p_value: float


@dataclass(frozen=True)
class PoolabilityReport:
    """Joint and per-coefficient slope-homogeneity test results."""

    joint_stat: float
    joint_df: int
    joint_pvalue: float
    per_coef: tuple[PerCoefficientTest, ...]
    delta: np.ndarray
    omega_delta: np.ndarray
    ridge_based: bool
    kappa_used: float | None


def _annotate(exc: EstimationError, label: str) -> EstimationError:
    msg = f"{exc} [while re-estimating with unit '{label}' removed]"
    if isinstance(exc, (RankDeficient, SingularBlock)):
        return type(exc)(msg, units=exc.units)
    return type(exc)(msg)


def _loo_estimates(
    panel: PanelData,
    methods: Sequence[Method],
    ridge_kappa: float | None,
) -> dict[Method, np.ndarray]:
    """Coefficient estimates on every (N-1)-unit subsample, per method.

    ``ridge_kappa`` is forwarded to the ridge estimator; None means each
    subsample recomputes its own shift.
    """
    n, k = panel.n_units, panel.n_regressors
    out = {m: np.empty((n, k)) for m in methods}
    for i in range(n):
        sub = panel.without_unit(i)
        for m in methods:
            kappa = ridge_kappa if m is Method.TW_MG_RIDGE else None
            try:
                est = estimate(sub, m, kappa=kappa)
            except EstimationError as exc:
                raise _annotate(exc, panel.unit_labels[i]) from exc
            out[m][i] = est.beta_hat
    return out


def _omega_from_loo(loo: np.ndarray) -> np.ndarray:
    n = loo.shape[0]
    centered = loo - loo.mean(axis=0)
    return (n - 1) * (centered.T @ centered)


def _joint_statistic(delta: np.ndarray, omega_delta: np.ndarray, n: int) -> float:
    """J = N delta' OmegaDelta^{-1} delta, gated on OmegaDelta invertibility."""
    if delta.shape[0] == 1:
        lo = hi = float(omega_delta[0, 0])
    else:
        w = np.linalg.eigvalsh(omega_delta)
        lo, hi = float(w[0]), float(w[-1])
    if hi <= 0.0 or lo / hi < OMEGA_DELTA_RANK_TOLERANCE:
        raise SingularOmegaDelta(
            "jackknife covariance of the mean-group/pooled contrast is "
            "numerically singular; the joint statistic is not defined"
        )
    solved = np.linalg.solve(omega_delta, delta)
    return float(n * delta @ solved)


def jackknife(
    panel: PanelData,
    method: Method | str,
    kappa_policy: str = "fixed",
    kappa: float | None = None,
) -> JackknifeCovariance:
    """Exact leave-one-out jackknife covariance for any supported estimator.

    Parameters
    ----------
    panel : PanelData
        Needs N >= 3 so the spread over subsamples is defined.
    method : Method or str
        Which estimator to re-run on each subsample.
    kappa_policy : {"fixed", "recomputed"}
        Ridge only: "fixed" (default) computes the shift once on the full
        sample and reuses it on every subsample, "recomputed" re-derives it
        per subsample.
    kappa : float, optional
        Ridge only: explicit full-sample shift, overriding the computed one
        under the "fixed" policy.
    """
    method = Method(method)
    if panel.n_units < 3:
        raise TooSmall(
            f"jackknife needs N >= 3 units, got N={panel.n_units}"
        )
    if kappa_policy not in ("fixed", "recomputed"):
        raise OutOfRange(f"unknown kappa policy {kappa_policy!r}")
    ridge_kappa = None
    if method is Method.TW_MG_RIDGE and kappa_policy == "fixed":
        ridge_kappa = float(kappa) if kappa is not None else compute_ridge_kappa(panel)
    loo = _loo_estimates(panel, [method], ridge_kappa)[method]
    if np.all(loo == loo[0]):
        raise DegenerateJackknife(
            "all leave-one-out estimates are identical; no spread to estimate"
        )
    return JackknifeCovariance(
        method=method,
        omega_hat=_omega_from_loo(loo),
        loo_estimates=loo,
        kappa_used=ridge_kappa,
    )


def confidence_interval(
    estimates: SlopeEstimates,
    covariance: JackknifeCovariance,
    level: float = 0.95,
    coefficient: int = 0,
) -> ConfidenceInterval:
    """Two-sided confidence interval for one coefficient."""
    if estimates.method is not covariance.method:
        raise MethodMismatch(
            f"estimates come from {estimates.method.value!r} but covariance "
            f"from {covariance.method.value!r}"
        )
    if not 0.0 < level < 1.0:
        raise OutOfRange(f"confidence level must be in (0, 1), got {level}")
    k = estimates.n_regressors
    if not 0 <= coefficient < k:
        raise OutOfRange(f"coefficient index {coefficient} out of range for K={k}")
    n = covariance.n_units
    z = normal_quantile_upper((1.0 - level) / 2.0)
    point = float(estimates.beta_hat[coefficient])
    se = float(np.sqrt(covariance.omega_hat[coefficient, coefficient] / n))
    return ConfidenceInterval(
        coefficient_index=coefficient,
        level=level,
        point=point,
        std_error=se,
        lower=point - z * se,
        upper=point + z * se,
    )


def poolability_test(panel: PanelData, use_ridge: bool = False) -> PoolabilityReport:
    """Test slope homogeneity by contrasting mean-group and pooled estimates.

    Leave-one-out values of both estimators come from the same subsample, so
    the jackknife covariance of the contrast accounts for their dependence.
    ``use_ridge`` swaps the plain mean-group estimator for its ridge variant
    (full-sample shift held fixed across subsamples).
    """
    if panel.n_units < 3:
        raise TooSmall(
            f"poolability test needs N >= 3 units, got N={panel.n_units}"
        )
    base = Method.TW_MG_RIDGE if use_ridge else Method.TW_MG
    ridge_kappa = compute_ridge_kappa(panel) if use_ridge else None
    full_mg = estimate(panel, base, kappa=ridge_kappa)
    full_pooled = estimate(panel, Method.TW_POOLED)
    loo = _loo_estimates(panel, [base, Method.TW_POOLED], ridge_kappa)
    delta = full_mg.beta_hat - full_pooled.beta_hat
    delta_loo = loo[base] - loo[Method.TW_POOLED]
    omega_delta = _omega_from_loo(delta_loo)
    k = panel.n_regressors
    n = panel.n_units
    joint = _joint_statistic(delta, omega_delta, n)
    per = []
    raw = []
    for j in range(k):
        stat = float(n * delta[j] ** 2 / omega_delta[j, j])
        raw.append(chi_square_upper_tail(stat, 1))
        per.append((j, stat))
    holm = holm_adjust(raw)
    per_coef = tuple(
        PerCoefficientTest(
            coefficient_index=j,
            statistic=stat,
            p_value=raw[j],
            holm_p_value=holm[j],
        )
        for j, stat in per
    )
    return PoolabilityReport(
        joint_stat=joint,
        joint_df=k,
        joint_pvalue=chi_square_upper_tail(joint, k),
        per_coef=per_coef,
        delta=delta,
        omega_delta=omega_delta,
        ridge_based=use_ridge,
        kappa_used=ridge_kappa,
    )

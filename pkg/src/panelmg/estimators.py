"""Slope estimators for heterogeneous panels with two-way fixed effects.

Four estimators share the demeaning machinery:

* ``estimate_tw_mg``: per-unit least-squares slopes after the two-way
  projection, averaged across units (the mean-group estimator).
* ``estimate_tw_mg_ridge``: same system with a vanishing ridge shift on every
  per-unit block, for very short panels where some block is near singular.
* ``estimate_tw_pooled``: a single pooled slope vector on the double-demeaned
  data (classic two-way fixed effects).
* ``estimate_standard_mg``: per-unit OLS of y on x and an intercept, no time
  effects, averaged across units. Included as the benchmark the two-way
  variants improve on.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import RankDeficient, SingularBlock, SingularCapacitance, SingularSystem, TooFewPeriods
from .gram import DEFAULT_RANK_TOLERANCE, build_gram, factorize, sym_eig_bounds, sym_inv
from .panel import PanelData, double_demean

__all__ = [
    "Method",
    "SlopeEstimates",
    "estimate",
    "estimate_tw_mg",
    "estimate_tw_mg_ridge",
    "estimate_tw_pooled",
    "estimate_standard_mg",
    "compute_ridge_kappa",
]


class Method(str, Enum):
    """Estimator identifiers; values double as CLI / report names."""

    TW_MG = "tw-mg"
    TW_MG_RIDGE = "tw-mg-ridge"
    TW_POOLED = "tw-pooled"
    STANDARD_MG = "mg"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


@dataclass(frozen=True)
class SlopeEstimates:
    """Result of one estimator run.

    ``beta_hat`` is the K-vector of slope estimates. ``unit_slopes`` holds the
    N x K per-unit slopes for mean-group style estimators and is None for the
    pooled estimator; when present, ``beta_hat`` is its column mean.
    ``kappa_used`` records the ridge shift (None when no ridge is involved).
    """

    method: Method
    beta_hat: np.ndarray
    unit_slopes: np.ndarray | None
    kappa_used: float | None = None

    def __post_init__(self) -> None:
        beta = np.asarray(self.beta_hat, dtype=np.float64)
        beta.flags.writeable = False
        object.__setattr__(self, "beta_hat", beta)
        if self.unit_slopes is not None:
            slopes = np.asarray(self.unit_slopes, dtype=np.float64)
            slopes.flags.writeable = False
            object.__setattr__(self, "unit_slopes", slopes)

    @property
    def n_regressors(self) -> int:
        return self.beta_hat.shape[0]


def _require_enough_periods(panel: PanelData) -> None:
    # T = K + 1 would leave zero residual degrees of freedom per unit after
    # the within-time projection, so it is refused as well.
    if panel.n_periods <= panel.n_regressors + 1:
        raise TooFewPeriods(
            f"need T > K + 1 periods per unit, got T={panel.n_periods} "
            f"with K={panel.n_regressors}"
        )


def _unit_system(dp) -> tuple[np.ndarray, np.ndarray]:
    """Per-unit rhs (N, K) of the two-way slope system, scaled like the Gram."""
    t = dp.n_periods
    rhs = np.einsum("ntk,nt->nk", dp.x_unit_dm, dp.y_dd) / t
    return rhs.reshape(-1), rhs


def estimate_tw_mg(panel: PanelData) -> SlopeEstimates:
    """Two-way mean-group estimator: average of per-unit projected slopes."""
    _require_enough_periods(panel)
    dp = double_demean(panel)
    gram = build_gram(dp, 0.0, panel.unit_labels)
    try:
        fac = factorize(gram)
    except SingularBlock as exc:
        raise RankDeficient(
            f"per-unit design is rank deficient: {exc}", units=exc.units
        ) from exc
    flat_rhs, _ = _unit_system(dp)
    slopes = fac.solve(flat_rhs).reshape(panel.n_units, panel.n_regressors)
    return SlopeEstimates(
        method=Method.TW_MG,
        beta_hat=slopes.mean(axis=0),
        unit_slopes=slopes,
    )


def compute_ridge_kappa(panel: PanelData) -> float:
    """Data-driven ridge shift: median per-unit Gram determinant over N.

    The determinant is taken of (1/T) sum_t xdd_it xdd_it' computed from the
    double-demeaned regressors; the median over units (midpoint average for
    even N) is divided by N so the shift vanishes as the cross-section grows.
    """
    dp = double_demean(panel)
    xdd = dp.x_dd
    t = panel.n_periods
    m = np.einsum("ntk,ntl->nkl", xdd, xdd) / t
    k = m.shape[-1]
    if k == 1:
        dets = m[:, 0, 0]
    elif k == 2:
        dets = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] ** 2
    else:
        dets = np.linalg.det(m)
    c_kappa = float(np.median(dets))
    return max(c_kappa, 0.0) / panel.n_units


def estimate_tw_mg_ridge(panel: PanelData, kappa: float | None = None) -> SlopeEstimates:
    """Ridge-regularised two-way mean-group estimator.

    ``kappa`` defaults to ``compute_ridge_kappa(panel)``. Unlike the plain
    estimator this tolerates T as small as 2 because the shift keeps every
    per-unit block invertible whenever kappa > 0.
    """
    if kappa is None:
        kappa = compute_ridge_kappa(panel)
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    dp = double_demean(panel)
    gram = build_gram(dp, kappa, panel.unit_labels)
    try:
        fac = factorize(gram)
    except (SingularBlock, SingularCapacitance) as exc:
        raise SingularSystem(
            f"system is singular even with ridge shift kappa={kappa:g}: {exc}"
        ) from exc
    flat_rhs, _ = _unit_system(dp)
    slopes = fac.solve(flat_rhs).reshape(panel.n_units, panel.n_regressors)
    return SlopeEstimates(
        method=Method.TW_MG_RIDGE,
        beta_hat=slopes.mean(axis=0),
        unit_slopes=slopes,
        kappa_used=float(kappa),
    )


def estimate_tw_pooled(panel: PanelData) -> SlopeEstimates:
    """Pooled two-way fixed effects slopes on the double-demeaned data."""
    dp = double_demean(panel)
    xdd = dp.x_dd
    a = np.einsum("ntk,ntl->kl", xdd, xdd)
    b = np.einsum("ntk,nt->k", xdd, dp.y_dd)
    lo, hi = sym_eig_bounds(a)
    # Compare against the unit-demeaned scale too, so a regressor absorbed
    # entirely by the two-way effects is flagged instead of solved.
    xu = dp.x_unit_dm
    within_scale = float(np.einsum("ntk,ntk->", xu, xu)) / panel.n_regressors
    scale = max(float(hi), within_scale)
    if scale <= 0.0 or float(lo) / scale < DEFAULT_RANK_TOLERANCE:
        raise RankDeficient(
            "pooled design is rank deficient after double demeaning",
            units=panel.unit_labels,
        )
    beta = cho_solve(cho_factor(a, lower=True), b)
    return SlopeEstimates(method=Method.TW_POOLED, beta_hat=beta, unit_slopes=None)


def estimate_standard_mg(panel: PanelData) -> SlopeEstimates:
    """Mean-group estimator without time effects: per-unit OLS with intercept."""
    _require_enough_periods(panel)
    dp = double_demean(panel)
    xu = dp.x_unit_dm
    blocks = np.einsum("ntk,ntl->nkl", xu, xu)
    rhs = np.einsum("ntk,nt->nk", xu, dp.y_unit_dm)
    lo, hi = sym_eig_bounds(blocks)
    scale = float(np.max(hi, initial=0.0))
    if scale <= 0.0:
        raise RankDeficient(
            "no within-unit regressor variation anywhere in the panel",
            units=panel.unit_labels,
        )
    bad = np.flatnonzero(lo / scale < DEFAULT_RANK_TOLERANCE)
    if bad.size:
        labels = tuple(panel.unit_labels[int(i)] for i in bad)
        raise RankDeficient(
            f"per-unit OLS design is rank deficient for unit(s) "
            f"{', '.join(repr(l) for l in labels)}",
            units=labels,
        )
    slopes = np.einsum("nkl,nl->nk", sym_inv(blocks), rhs)
    return SlopeEstimates(
        method=Method.STANDARD_MG,
        beta_hat=slopes.mean(axis=0),
        unit_slopes=slopes,
    )


def estimate(
    panel: PanelData,
    method: Method | str,
    kappa: float | None = None,
) -> SlopeEstimates:
    """Dispatch to the estimator named by ``method``.

    ``kappa`` is honoured only by the ridge estimator.
    """
    method = Method(method)
    if method is Method.TW_MG:
        return estimate_tw_mg(panel)
    if method is Method.TW_MG_RIDGE:
        return estimate_tw_mg_ridge(panel, kappa=kappa)
    if method is Method.TW_POOLED:
        return estimate_tw_pooled(panel)
    return estimate_standard_mg(panel)

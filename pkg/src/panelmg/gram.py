"""Structured Gram matrix for the per-unit slope system and its solver.

With unit and time means removed, the NK x NK Gram matrix of the stacked
per-unit regressor blocks is

    Q = blockdiag(q_1, ..., q_N) - C C',        q_i = (1/T) xdot_i' xdot_i,

where xdot_i is the T x K unit-demeaned regressor matrix of unit i and row
block i of the NK x T factor C is (N T)^{-1/2} xdot_i'. An optional ridge
shift kappa is added to every diagonal block. Solves use the Woodbury
identity with D = blockdiag(q_i + kappa I):

    (D - C C')^{-1} = D^{-1} + D^{-1} C (I_T - C' D^{-1} C)^{-1} C' D^{-1},

so one solve costs O(N K^3 + N K^2 T + T^3) instead of O((N K)^3). The T x T
capacitance matrix I_T - C' D^{-1} C is symmetric positive definite whenever
D and Q (+ kappa I) are, so both factorization stages can use Cholesky.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import SingularBlock, SingularCapacitance
from .panel import DemeanedPanel

__all__ = [
    "BlockLowRankGram",
    "GramFactorization",
    "build_gram",
    "factorize",
    "solve",
]

DEFAULT_RANK_TOLERANCE = 1e-10


def sym_eig_bounds(blocks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Smallest and largest eigenvalue of each symmetric K x K block.

    Closed forms for K <= 2 keep the hot path free of per-block LAPACK calls.
    """
    k = blocks.shape[-1]
    if k == 1:
        d = blocks[..., 0, 0]
        return d, d
    if k == 2:
        a = blocks[..., 0, 0]
        b = blocks[..., 0, 1]
        c = blocks[..., 1, 1]
        half_tr = 0.5 * (a + c)
        disc = np.sqrt(np.square(0.5 * (a - c)) + np.square(b))
        return half_tr - disc, half_tr + disc
    w = np.linalg.eigvalsh(blocks)
    return w[..., 0], w[..., -1]


def sym_inv(blocks: np.ndarray) -> np.ndarray:
    """Invert a batch of symmetric positive definite K x K blocks."""
    k = blocks.shape[-1]
    if k == 1:
        return 1.0 / blocks
    if k == 2:
        a = blocks[..., 0, 0]
        b = blocks[..., 0, 1]
        c = blocks[..., 1, 1]
        det = a * c - b * b
        out = np.empty_like(blocks)
        out[..., 0, 0] = c / det
        out[..., 0, 1] = -b / det
        out[..., 1, 0] = -b / det
        out[..., 1, 1] = a / det
        return out
    return np.linalg.inv(blocks)


@dataclass(frozen=True)
class BlockLowRankGram:
    """The Gram matrix in structured form: blockdiag(diag_blocks + kappa I) - C C'.

    ``diag_blocks`` has shape (N, K, K) and excludes the ridge shift;
    ``low_rank_factor`` has shape (N, K, T), row block i being the i-th K x T
    slice of the NK x T factor C.
    """

    diag_blocks: np.ndarray
    low_rank_factor: np.ndarray
    ridge_shift: float
    unit_labels: tuple[str, ...] | None = None

    @property
    def n_units(self) -> int:
        return self.diag_blocks.shape[0]

    @property
    def n_regressors(self) -> int:
        return self.diag_blocks.shape[1]

    def dense(self) -> np.ndarray:
        """Assemble the full NK x NK matrix (test and diagnostic use only)."""
        n, k = self.n_units, self.n_regressors
        c = self.low_rank_factor.reshape(n * k, -1)
        out = -(c @ c.T)
        shifted = self.diag_blocks + self.ridge_shift * np.eye(k)
        for i in range(n):
            out[i * k : (i + 1) * k, i * k : (i + 1) * k] += shifted[i]
        return out

    def _label(self, i: int) -> str:
        if self.unit_labels is not None:
            return self.unit_labels[i]
        return str(i)


def build_gram(
    dp: DemeanedPanel,
    kappa: float = 0.0,
    unit_labels: tuple[str, ...] | None = None,
) -> BlockLowRankGram:
    """Build the structured Gram matrix from a demeaned panel.

    Equivalent, up to the ridge shift, to (1/T) Xdd' Xdd where Xdd is the
    NT x NK block-regressor matrix after the two-way projection.
    """
    if kappa < 0:
        raise ValueError(f"ridge shift must be nonnegative, got {kappa}")
    xu = dp.x_unit_dm
    n, t, _ = xu.shape
    blocks = np.einsum("ntk,ntl->nkl", xu, xu) / t
    factor = np.ascontiguousarray(xu.transpose(0, 2, 1)) / np.sqrt(n * t)
    return BlockLowRankGram(
        diag_blocks=blocks,
        low_rank_factor=factor,
        ridge_shift=float(kappa),
        unit_labels=unit_labels,
    )


@dataclass(frozen=True)
class GramFactorization:
    """Factorized form of a BlockLowRankGram ready for repeated solves."""

    block_inv: np.ndarray  # (N, K, K) inverses of diag_blocks + kappa I
    coupling: np.ndarray  # (N, K, T) the factor C
    coupling_solved: np.ndarray  # (N, K, T) D^{-1} C
    capacitance_factor: tuple[np.ndarray, bool]  # Cholesky of I_T - C' D^{-1} C
    condition_report: np.ndarray  # (N,) per-block reciprocal condition numbers

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve Q z = rhs for a flat length-NK right-hand side."""
        n, k, _ = self.coupling.shape
        r = np.asarray(rhs, dtype=np.float64)
        if r.shape != (n * k,):
            raise ValueError(f"rhs must have shape ({n * k},), got {r.shape}")
        r = r.reshape(n, k)
        z0 = np.einsum("nkl,nl->nk", self.block_inv, r)
        t_vec = np.einsum("nkt,nk->t", self.coupling, z0)
        s = cho_solve(self.capacitance_factor, t_vec)
        z = z0 + np.einsum("nkt,t->nk", self.coupling_solved, s)
        return z.reshape(n * k)


def factorize(
    gram: BlockLowRankGram,
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE,
) -> GramFactorization:
    """Factorize the structured Gram matrix.

    Raises
    ------
    SingularBlock
        Some shifted diagonal block has smallest eigenvalue below
        ``rank_tolerance`` times the largest block eigenvalue in the panel.
        The panel-wide reference scale (rather than a per-block one) is what
        lets a block that demeaning annihilated entirely be detected.
    SingularCapacitance
        The T x T capacitance matrix fails the same reciprocal-condition
        threshold, i.e. the coupled system is singular even though every
        block is fine.
    """
    blocks = gram.diag_blocks
    kappa = gram.ridge_shift
    if kappa != 0.0:
        shifted = blocks + kappa * np.eye(gram.n_regressors)
    else:
        shifted = blocks
    lo, hi = sym_eig_bounds(shifted)
    scale = float(np.max(hi, initial=0.0))
    if scale <= 0.0:
        raise SingularBlock(
            "every diagonal block is numerically zero; the regressors carry "
            "no within-unit variation (consider the ridge estimator)",
            units=tuple(gram._label(i) for i in range(gram.n_units)),
        )
    rcond = lo / scale
    bad = np.flatnonzero(rcond < rank_tolerance)
    if bad.size:
        labels = tuple(gram._label(int(i)) for i in bad)
        raise SingularBlock(
            f"diagonal block(s) for unit(s) {', '.join(repr(l) for l in labels)} "
            f"fail the condition threshold {rank_tolerance:g} "
            "(consider the ridge estimator)",
            units=labels,
        )

    block_inv = sym_inv(shifted)
    c = gram.low_rank_factor
    w = block_inv @ c  # (N, K, T): D^{-1} C per block
    t = c.shape[-1]
    cap = np.eye(t) - np.einsum("nkt,nks->ts", c, w)
    cap = 0.5 * (cap + cap.T)
    cap_lo, cap_hi = np.linalg.eigvalsh(cap)[[0, -1]]
    if cap_hi <= 0.0 or cap_lo / cap_hi < rank_tolerance:
        raise SingularCapacitance(
            "the cross-section coupling matrix is numerically singular; the "
            "double-demeaned regressors do not span all slope directions"
        )
    cap_factor = cho_factor(cap, lower=True)
    return GramFactorization(
        block_inv=block_inv,
        coupling=c,
        coupling_solved=w,
        capacitance_factor=cap_factor,
        condition_report=rcond,
    )


def solve(factorization: GramFactorization, rhs: np.ndarray) -> np.ndarray:
    """Module-level alias for ``GramFactorization.solve``."""
    return factorization.solve(rhs)

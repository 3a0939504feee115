"""Covariance-matching activity detection by coordinate descent.

The detector fits ``Sigma(gamma) = A diag(gamma) A^H + N0 I`` to the sample
covariance by minimising ``log|Sigma| + tr(Sigma^{-1} Sigma_hat)`` over
``gamma >= 0``, one coordinate at a time, with the precision matrix kept
current through Sherman-Morrison rank-1 updates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg

from .codebook import Codebook, SupportSet
from .errors import NumericalFailure

# 1 + step * a^H Sigma^{-1} a below this is treated as a singular update
DENOM_FLOOR = 1e-12


@dataclass(frozen=True)
class ADConfig:
    max_passes: int = 10
    rel_tol: float = 1e-6
    delta: int = 5
    order: str = "shuffled"
    refresh_every: int = 5
    block_size: int = 64

    def __post_init__(self):
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.rel_tol < 0:
            raise ValueError("rel_tol must be >= 0")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.order not in ("shuffled", "fixed"):
            raise ValueError("order must be 'shuffled' or 'fixed'")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")


@dataclass
class GammaEstimate:
    gamma: np.ndarray
    precision: np.ndarray
    objective: list = field(default_factory=list)
    passes: int = 0

    @classmethod
    def initial(cls, size: int, n: int, N0: float) -> "GammaEstimate":
        return cls(np.zeros(size), np.eye(n, dtype=complex) / N0)


def _columns(codebook) -> np.ndarray:
    return codebook.columns if isinstance(codebook, Codebook) else np.asarray(codebook)


def model_covariance(gamma, codebook, N0: float) -> np.ndarray:
    A = _columns(codebook)
    nz = np.flatnonzero(gamma)
    As = A[:, nz]
    return (As * gamma[nz]) @ As.conj().T + N0 * np.eye(A.shape[0])


def _cholesky(sigma: np.ndarray):
    try:
        return scipy.linalg.cho_factor(sigma, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("model covariance is not positive definite") from exc


def direct_precision(gamma, codebook, N0: float) -> np.ndarray:
    sigma = model_covariance(gamma, codebook, N0)
    return scipy.linalg.cho_solve(_cholesky(sigma), np.eye(sigma.shape[0]))


def nll_objective(gamma, codebook, cov: np.ndarray, N0: float) -> float:
    """``log|Sigma| + tr(Sigma^{-1} Sigma_hat)`` for ``Sigma = A diag(gamma) A^H + N0 I``."""
    gamma = np.asarray(gamma, dtype=float)
    if (gamma < 0).any():
        raise ValueError("gamma must be non-negative")
    factor = _cholesky(model_covariance(gamma, codebook, N0))
    logdet = 2 * np.sum(np.log(np.abs(np.diag(factor[0]))))
    tr = np.trace(scipy.linalg.cho_solve(factor, cov)).real
    val = float(logdet + tr)
    if not np.isfinite(val):
        raise NumericalFailure("objective is not finite")
    return val


def step_size(a: np.ndarray, precision: np.ndarray, cov: np.ndarray) -> float:
    """Unconstrained coordinate minimiser ``d*`` along column ``a``."""
    u = precision @ a
    s = np.vdot(a, u).real
    t = np.vdot(u, cov @ u).real
    return (t - s) / s**2


def coordinate_step(a: np.ndarray, k: int, state: GammaEstimate, cov: np.ndarray) -> GammaEstimate:
    """One exact coordinate update of ``gamma[k]``, clipped at zero, in place.

    The precision update uses the clipped step so that it always matches
    ``gamma``.
    """
    u = state.precision @ a
    s = np.vdot(a, u).real
    d = (np.vdot(u, cov @ u).real - s) / s**2
    new = max(state.gamma[k] + d, 0.0)
    step = new - state.gamma[k]
    if step == 0.0:
        return state
    denom = 1.0 + step * s
    if denom <= DENOM_FLOOR:
        raise NumericalFailure(f"rank-1 update denominator {denom:.3e} at column {k}")
    state.gamma[k] = new
    state.precision -= (step / denom) * np.outer(u, u.conj())
    return state


@numba.njit(cache=True)
def _block_kernel(At, Ut, Vt, g, us, vs, cs, floor):
    """Sequential coordinate steps over one block of columns.

    Rows of ``Ut``/``Vt`` hold ``Sigma^{-1} a_j`` and ``Sigma_hat Sigma^{-1} a_j``
    for the precision at block start.  Steps accepted earlier in the block
    are applied lazily to each later column through the Sherman-Morrison
    identity ``Sigma_j^{-1} a = Sigma_0^{-1} a - sum_i c_i u_i (u_i^H a)``.
    Accepted vectors are appended to ``us``/``vs``/``cs``.  Returns the
    number of accepted steps, or ``-(j + 1)`` on a singular update at ``j``.
    """
    m, n = At.shape
    k = 0
    for j in range(m):
        for i in range(k):
            coef = 0j
            for r in range(n):
                coef += us[i, r].conjugate() * At[j, r]
            coef *= cs[i]
            for r in range(n):
                Ut[j, r] -= coef * us[i, r]
                Vt[j, r] -= coef * vs[i, r]
        s = 0.0
        t = 0.0
        for r in range(n):
            s += (At[j, r].conjugate() * Ut[j, r]).real
            t += (Ut[j, r].conjugate() * Vt[j, r]).real
        new = max(g[j] + (t - s) / (s * s), 0.0)
        step = new - g[j]
        if step != 0.0:
            denom = 1.0 + step * s
            if denom <= floor:
                return -(j + 1)
            g[j] = new
            cs[k] = step / denom
            us[k, :] = Ut[j, :]
            vs[k, :] = Vt[j, :]
            k += 1
    return k


def _sweep(A: np.ndarray, cov: np.ndarray, state: GammaEstimate, order: np.ndarray, block: int) -> None:
    """One pass of ``coordinate_step`` over ``order``, batched by blocks.

    Equal to the plain sequential sweep up to rounding.  Columns whose
    clipped step is zero cost two length-n dot products.
    """
    n = A.shape[0]
    gamma = state.gamma
    us = np.empty((block, n), complex)
    vs = np.empty((block, n), complex)
    cs = np.empty(block)
    for start in range(0, order.size, block):
        idx = order[start:start + block]
        Ab = A[:, idx]
        U = state.precision @ Ab
        V = cov @ U
        g = gamma[idx]
        k = _block_kernel(
            np.ascontiguousarray(Ab.T), np.ascontiguousarray(U.T), np.ascontiguousarray(V.T),
            g, us, vs, cs, DENOM_FLOOR,
        )
        if k < 0:
            raise NumericalFailure(f"rank-1 update denominator below floor at column {idx[-k - 1]}")
        gamma[idx] = g
        if k:
            uk = us[:k].T
            state.precision -= (uk * cs[:k]) @ uk.conj().T
            state.precision = (state.precision + state.precision.conj().T) / 2


def coordinate_descent(
    cov: np.ndarray,
    codebook,
    support: SupportSet,
    config: ADConfig = ADConfig(),
    N0: float = 1.0,
    rng=None,
) -> GammaEstimate:
    """Run passes of coordinate descent over the columns in ``support``.

    Starts from ``gamma = 0``.  Stops after ``config.max_passes`` passes or
    once a pass lowers the objective by less than ``rel_tol`` (relative).
    ``state.objective`` holds the objective at start and after every pass.
    """
    A = _columns(codebook)
    support_idx = np.asarray(support.indices if isinstance(support, SupportSet) else support, dtype=np.int64)
    if support_idx.size == 0:
        raise ValueError("support must be non-empty")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(0 if rng is None else rng)

    state = GammaEstimate.initial(A.shape[1], A.shape[0], N0)
    prev = nll_objective(state.gamma, A, cov, N0)
    state.objective.append(prev)
    for it in range(1, config.max_passes + 1):
        order = rng.permutation(support_idx) if config.order == "shuffled" else support_idx
        _sweep(A, cov, state, order, config.block_size)
        state.passes = it
        if config.refresh_every and it % config.refresh_every == 0:
            state.precision = direct_precision(state.gamma, A, N0)
        cur = nll_objective(state.gamma, A, cov, N0)
        state.objective.append(cur)
        if prev - cur < config.rel_tol * max(abs(prev), np.finfo(float).tiny):
            break
        prev = cur
    return state


def select_fragments(gamma, ka: int, delta: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices of the ``ka + delta`` largest positive entries, descending.

    Ties go to the lower index; exact zeros are never selected.
    """
    gamma = np.asarray(gamma.gamma if isinstance(gamma, GammaEstimate) else gamma, dtype=float)
    nz = np.flatnonzero(gamma > 0)
    order = nz[np.lexsort((nz, -gamma[nz]))][: ka + delta]
    return order, gamma[order]

"""Decomposition-based baselines: CP-ALS, HOOI (Tucker) and the multiway Wiener filter."""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .outcome import DenoiseOutcome
from .tensor_core import DegenerateInputError, flatten, frobenius_norm, multi_mode_product, svd

__all__ = [
    "CpModel",
    "TuckerModel",
    "WienerState",
    "cp_als",
    "hooi",
    "rank_sweep",
    "aic_subspace_dim",
    "multiway_wiener",
    "wiener_covariances",
]


# -- CP-ALS ------------------------------------------------------------------


@dataclass
class CpModel:
    weights: np.ndarray
    factors: list[np.ndarray]
    fit_history: list[float] = field(default_factory=list)

    @property
    def rank(self) -> int:
        return self.weights.size

    def full(self) -> np.ndarray:
        d = len(self.factors)
        letters = string.ascii_letters[:d]
        spec = ",".join(f"{c}z" for c in letters) + ",z->" + letters
        return np.einsum(spec, *self.factors, self.weights, optimize=True)


def _mttkrp(T: np.ndarray, factors: Sequence[np.ndarray], n: int) -> np.ndarray:
    d = T.ndim
    letters = string.ascii_letters[:d]
    operands = [T]
    terms = [letters]
    for j in range(d):
        if j != n:
            operands.append(factors[j])
            terms.append(letters[j] + "z")
    spec = ",".join(terms) + "->" + letters[n] + "z"
    return np.einsum(spec, *operands, optimize=True)


def _normalize_columns(U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(U, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    U = U / safe
    dead = norms == 0
    if np.any(dead):
        U[:, dead] = 0.0
        U[0, dead] = 1.0
    return U, norms


def cp_als(
    T: np.ndarray,
    r: int,
    tol: float = 1e-4,
    max_iter: int = 50,
    rng_seed: int | None = 0,
) -> CpModel:
    """Rank-``r`` CP decomposition by alternating least squares.

    Factors start from the leading left singular vectors of each flattening;
    when ``r`` exceeds an extent the missing columns are random (seeded).
    Stops when the fit ``1 - |T - X| / |T|`` changes by less than ``tol``.
    """
    if r < 1:
        raise ValueError("rank must be >= 1")
    T = np.asarray(T, dtype=np.float64)
    d = T.ndim
    norm_T = frobenius_norm(T)
    if norm_T == 0.0:
        unit = [np.zeros((p, r)) for p in T.shape]
        for U in unit:
            U[0, :] = 1.0
        return CpModel(np.zeros(r), unit)

    rng = np.random.default_rng(rng_seed)
    factors = []
    for n in range(d):
        U = svd(flatten(T, n)).U
        k = min(r, U.shape[1])
        init = np.empty((T.shape[n], r))
        init[:, :k] = U[:, :k]
        if k < r:
            init[:, k:] = rng.standard_normal((T.shape[n], r - k))
        factors.append(_normalize_columns(init)[0])
    weights = np.ones(r)

    fits = []
    for _ in range(max_iter):
        for n in range(d):
            gram = np.ones((r, r))
            for j in range(d):
                if j != n:
                    gram *= factors[j].T @ factors[j]
            U = _mttkrp(T, factors, n) @ np.linalg.pinv(gram)
            factors[n], weights = _normalize_columns(U)
        model = CpModel(weights, factors)
        fits.append(1.0 - frobenius_norm(T - model.full()) / norm_T)
        if len(fits) > 1 and abs(fits[-1] - fits[-2]) < tol:
            break
    return CpModel(weights, [f.copy() for f in factors], fits)


# -- HOOI ----------------------------------------------------------------------


@dataclass
class TuckerModel:
    core: np.ndarray
    factors: list[np.ndarray]
    error_history: list[float] = field(default_factory=list)

    def full(self) -> np.ndarray:
        return multi_mode_product(self.core, self.factors)


def _leading_left(M: np.ndarray, k: int) -> np.ndarray:
    return svd(M).U[:, :k]


def hooi(T: np.ndarray, ranks: Sequence[int], tol: float = 1e-4, max_iter: int = 50) -> TuckerModel:
    """Rank-``(r_1, ..., r_d)`` Tucker approximation by higher-order orthogonal iteration."""
    T = np.asarray(T, dtype=np.float64)
    ranks = [int(r) for r in ranks]
    if len(ranks) != T.ndim or any(not 1 <= r <= p for r, p in zip(ranks, T.shape)):
        raise ValueError(f"ranks {ranks} invalid for shape {T.shape}")
    d = T.ndim
    norm_T = frobenius_norm(T)
    factors = [_leading_left(flatten(T, n), ranks[n]) for n in range(d)]

    errors = []
    for _ in range(max_iter):
        for n in range(d):
            others = [None if j == n else factors[j] for j in range(d)]
            Y = multi_mode_product(T, others, transpose=True)
            factors[n] = _leading_left(flatten(Y, n), ranks[n])
        core = multi_mode_product(T, factors, transpose=True)
        err = frobenius_norm(T - multi_mode_product(core, factors))
        errors.append(err)
        if norm_T == 0.0 or (len(errors) > 1 and abs(errors[-2] - errors[-1]) < tol * norm_T):
            break
    core = multi_mode_product(T, factors, transpose=True)
    return TuckerModel(core, factors, errors)


# -- rank sweeps ---------------------------------------------------------------


def rank_sweep(
    T: np.ndarray,
    method: str = "hooi",
    clean: np.ndarray | None = None,
    *,
    tol: float = 1e-4,
    max_iter: int = 50,
    rng_seed: int | None = 0,
) -> DenoiseOutcome:
    """Fit ``method`` for every rank ``1..min(p_i)`` and keep the best candidate.

    With ``clean`` given the candidate closest to ``clean`` is kept (oracle
    selection, an evaluation device); otherwise the candidate closest to the
    noisy ``T`` itself (literal selection).  HOOI uses uniform ranks
    ``(r, ..., r)``.
    """
    T = np.asarray(T, dtype=np.float64)
    if method not in ("hooi", "cp"):
        raise ValueError(f"unknown method {method!r}")
    target = T if clean is None else np.asarray(clean, dtype=np.float64)
    if target.shape != T.shape:
        raise ValueError("clean tensor shape differs from the noisy one")
    best = None
    errors = []
    for r in range(1, min(T.shape) + 1):
        if method == "hooi":
            D = hooi(T, [r] * T.ndim, tol=tol, max_iter=max_iter).full()
        else:
            D = cp_als(T, r, tol=tol, max_iter=max_iter, rng_seed=rng_seed).full()
        err = frobenius_norm(target - D)
        errors.append(err)
        if best is None or err < best[1]:
            best = (r, err, D)
    r, _, D = best
    return DenoiseOutcome(
        denoised=D,
        residual=T - D,
        iterations=len(errors),
        info={"rank": r, "selection": "literal" if clean is None else "oracle", "errors": errors},
    )


# -- multiway Wiener filter ----------------------------------------------------


@dataclass
class WienerState:
    filters: list[np.ndarray]
    stage: int = 0
    subspace_dims: list[int] = field(default_factory=list)


def aic_subspace_dim(eigvals: Sequence[float], n_samples: int) -> int:
    """Signal-subspace dimension by the Akaike information criterion.

    ``AIC(k) = -2 n (p - k) log(g_k / a_k) + 2 k (2p - k)`` for
    ``k = 1..p-1``, with ``g_k`` / ``a_k`` the geometric / arithmetic means of
    the ``p - k`` smallest eigenvalues.  Eigenvalues below ``1e-12`` times the
    largest are floored there so exact zeros do not produce ``log(0)``.
    """
    lam = np.asarray(eigvals, dtype=np.float64)
    p = lam.size
    if p < 2:
        raise ValueError("need at least two eigenvalues")
    if np.any(lam < 0):
        raise ValueError("eigenvalues must be non-negative")
    if np.any(np.diff(lam) > 0):
        raise ValueError("eigenvalues must be sorted in non-increasing order")
    if lam[0] == 0.0:
        return 1
    lam = np.maximum(lam, 1e-12 * lam[0])
    best_k, best_aic = 1, np.inf
    for k in range(1, p):
        tail = lam[k:]
        log_ratio = np.mean(np.log(tail)) - np.log(np.mean(tail))
        aic = -2.0 * n_samples * (p - k) * log_ratio + 2.0 * k * (2 * p - k)
        if aic < best_aic:
            best_k, best_aic = k, aic
    return best_k


def wiener_covariances(T: np.ndarray, filters: Sequence[np.ndarray], n: int) -> tuple[np.ndarray, np.ndarray]:
    """``gamma_n = T_(n) q_n T_(n)^T`` and ``Gamma_n = T_(n) Q_n T_(n)^T``.

    ``q_n`` / ``Q_n`` are Kronecker products of ``H_i`` / ``H_i^T H_i`` over the
    other modes; they are applied as mode products instead of being formed.
    """
    others = [None if j == n else filters[j] for j in range(T.ndim)]
    Tn = flatten(T, n)
    Z = flatten(multi_mode_product(T, others), n)
    gamma = flatten(multi_mode_product(T, others, transpose=True), n) @ Tn.T
    Gamma = Z @ Z.T
    return 0.5 * (gamma + gamma.T), Gamma


def _wiener_filter(gamma: np.ndarray, Gamma: np.ndarray, n_samples: int) -> tuple[np.ndarray, int]:
    p = gamma.shape[0]
    ev_g, vec_g = np.linalg.eigh(gamma)
    ev_g, vec_g = np.clip(ev_g[::-1], 0.0, None), vec_g[:, ::-1]
    ev_G = np.clip(np.linalg.eigvalsh(Gamma)[::-1], 0.0, None)
    K = aic_subspace_dim(ev_g, n_samples) if p > 1 else 1
    sigma2 = float(np.mean(ev_g[K:])) if K < p else 0.0
    floor = 1e-12 * max(ev_G[0], 1e-300)
    num = np.maximum(ev_g[:K] - sigma2, 0.0)
    gains = np.where(ev_G[:K] > floor, num / np.maximum(ev_G[:K], floor), 0.0)
    V = vec_g[:, :K]
    return (V * gains) @ V.T, K


def multiway_wiener(T: np.ndarray, max_stages: int = 10, tol: float = 1e-4) -> DenoiseOutcome:
    """Multiway Wiener filtering ``D = T x_1 H_1 ... x_d H_d``.

    Filters start at the identity and are re-estimated mode by mode, always
    using the latest filters of the other modes, until the filtered tensor
    changes by less than ``tol`` (relative) or ``max_stages`` is reached.
    """
    T = np.asarray(T, dtype=np.float64)
    if T.ndim < 2:
        raise ValueError("multiway Wiener filtering needs order >= 2")
    if frobenius_norm(T) == 0.0:
        raise DegenerateInputError("cannot filter the zero tensor")
    d = T.ndim
    N = T.size
    state = WienerState([np.eye(p) for p in T.shape])
    D = T.copy()
    converged = False
    for stage in range(1, max_stages + 1):
        dims = []
        for n in range(d):
            gamma, Gamma = wiener_covariances(T, state.filters, n)
            state.filters[n], K = _wiener_filter(gamma, Gamma, N // T.shape[n])
            dims.append(K)
        state.stage = stage
        state.subspace_dims = dims
        D_new = multi_mode_product(T, state.filters)
        change = frobenius_norm(D_new - D) / max(frobenius_norm(D), 1e-300)
        D = D_new
        if change < tol:
            converged = True
            break
    return DenoiseOutcome(
        denoised=D,
        residual=T - D,
        iterations=state.stage,
        converged=converged,
        info={"state": state, "subspace_dims": state.subspace_dims},
    )

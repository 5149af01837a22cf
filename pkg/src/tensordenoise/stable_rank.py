"""Amplification deflation and the stable slice rank / stable X-rank denoisers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .amplification import PHI_SIGMA4, AmplificationMap, AmplificationOverflow, stable_slice_rank_value
from .outcome import DenoiseOutcome
from .tensor_core import DegenerateInputError, flatten, fold, frobenius_norm, inner_product, svd

__all__ = [
    "StableRankConfig",
    "denoise_amplification",
    "find_cutoff",
    "denoise_slicerank",
    "denoise_xrank",
    "slicerank_grid",
    "xrank_grid",
]


@dataclass(frozen=True)
class StableRankConfig:
    lam: float
    acc: float = 0.9
    max_sweeps: int = 200

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not 0 < self.acc <= 1:
            raise ValueError(f"acc must lie in (0, 1], got {self.acc}")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


def _require_nonzero(T: np.ndarray, min_order: int = 1) -> tuple[np.ndarray, float]:
    T = np.asarray(T, dtype=np.float64)
    if T.ndim < min_order:
        raise ValueError(f"need a tensor of order >= {min_order}, got order {T.ndim}")
    norm = frobenius_norm(T)
    if norm == 0.0:
        raise DegenerateInputError("cannot denoise the zero tensor")
    return T, norm


# -- amplification -----------------------------------------------------------


def _amplified_direction(N: np.ndarray, amp: AmplificationMap, m: int) -> np.ndarray:
    # amp is homogeneous, so renormalizing after every application only rescales
    # the result; it keeps magnitudes near 1 instead of growing like |N|^(3^m).
    A = N / frobenius_norm(N)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(m):
            A = amp(A)
            norm = frobenius_norm(A)
            if not np.isfinite(norm):
                raise AmplificationOverflow(f"{amp.name} produced non-finite values")
            if norm == 0.0:
                raise DegenerateInputError(f"{amp.name} annihilated the residual")
            A = A / norm
    return A


def denoise_amplification(
    T: np.ndarray,
    amp: AmplificationMap = PHI_SIGMA4,
    m: int = 5,
    tau: float = 1.0,
    max_components: int = 50,
) -> DenoiseOutcome:
    """Peel amplified rank-1 directions off ``T`` until the residual is small.

    Each round amplifies the residual ``m`` times, normalizes the result to a
    unit tensor ``A`` and deflates ``N <- N - <A, N> A``.  Rounds stop once
    ``|N| < tau * |T|`` or ``max_components`` pieces have been removed.  With
    the default ``tau=1`` exactly one piece is removed.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    if max_components < 1:
        raise ValueError("max_components must be >= 1")
    T, norm_T = _require_nonzero(T)
    if T.ndim not in amp.supported_orders:
        raise ValueError(f"{amp.name} does not support order-{T.ndim} tensors")

    eps = tau * norm_T
    N = T.copy()
    components = []
    residual_norms = [norm_T]
    while True:
        A = _amplified_direction(N, amp, m)
        coef = inner_product(A, N)
        if coef == 0.0:
            break
        piece = coef * A
        N = N - piece
        components.append(piece)
        residual_norms.append(frobenius_norm(N))
        if residual_norms[-1] < eps or len(components) >= max_components or residual_norms[-1] == 0.0:
            break

    return DenoiseOutcome(
        denoised=T - N,
        residual=N,
        components=components,
        iterations=len(components),
        converged=residual_norms[-1] < eps,
        info={"residual_norms": residual_norms, "m": m, "tau": tau},
    )


# -- cutoff selection --------------------------------------------------------


def find_cutoff(f: Sequence[float], lam: float) -> float:
    """Pick the singular-value cutoff for X-rank denoising.

    Candidates are ``t_i = lam * (f_1 + ... + f_i) / (1 + lam * i)``.  Each is
    scored by ``v_j = sum_i (f_i - s_ij)^2 + lam * sum_i s_ij^2`` with
    ``s_ij = max(f_i - t_j, 0)``; the lowest score wins, ties going to the
    smallest index.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1 or f.size == 0:
        raise ValueError("f must be a non-empty vector")
    if np.any(f < 0):
        raise ValueError("f must be non-negative")
    if np.any(np.diff(f) > 0):
        raise ValueError("f must be sorted in non-increasing order")
    if not lam > 0:
        raise ValueError("lam must be positive")
    i = np.arange(1, f.size + 1)
    t = lam * np.cumsum(f) / (1.0 + lam * i)
    s = np.maximum(f[:, None] - t[None, :], 0.0)
    v = np.sum((f[:, None] - s) ** 2, axis=0) + lam * np.sum(s**2, axis=0)
    return float(t[int(np.argmin(v))])


# -- block-coordinate nuclear-norm sweeps -------------------------------------


@dataclass
class _Sweep:
    index: int
    parts: list[np.ndarray]
    nuclear: np.ndarray  # |(S_j)_(j)|_* for each mode j
    acc: float
    objective: float


def _soft_threshold_mode(A: np.ndarray, n: int, cutoff: Callable[[np.ndarray], float]) -> tuple[np.ndarray, float]:
    U, s, V = svd(flatten(A, n))
    kept = np.maximum(s - cutoff(s), 0.0)
    r = int(np.count_nonzero(kept))
    F = (U[:, :r] * kept[:r]) @ V[:, :r].T
    return fold(F, A.shape, n), float(np.sum(kept))


def _sweep_path(
    T: np.ndarray,
    cutoff: Callable[[np.ndarray], float],
    accuracy: Callable[[np.ndarray, list[np.ndarray], np.ndarray], float],
    lam: float,
    max_sweeps: int,
) -> Iterator[_Sweep]:
    d = T.ndim
    parts = [np.zeros_like(T) for _ in range(d)]
    nuclear = np.zeros(d)
    total = np.zeros_like(T)
    for k in range(1, max_sweeps + 1):
        for i in range(d):
            A = T - (total - parts[i])
            parts[i], nuclear[i] = _soft_threshold_mode(A, i, cutoff)
            total = (T - A) + parts[i]
        total = sum(parts[1:], parts[0].copy())
        resid = T - total
        objective = 0.5 * float(np.sum(resid**2)) + lam * float(np.sum(nuclear))
        yield _Sweep(k, [p.copy() for p in parts], nuclear.copy(), accuracy(T, parts, nuclear), objective)


def _slicerank_accuracy(lam: float):
    def accuracy(T, parts, nuclear):
        total = sum(parts[1:], parts[0])
        denom = lam * float(np.sum(nuclear))
        if denom == 0.0:
            return 0.0
        return inner_product(T - total, total) / denom

    return accuracy


def _xrank_accuracy(T, parts, nuclear):
    total = sum(parts[1:], parts[0])
    resid = T - total
    y = np.sqrt(sum(svd(flatten(resid, i)).s[0] ** 2 for i in range(T.ndim)))
    scale = float(np.sqrt(np.sum(nuclear**2)))
    if scale == 0.0:
        return 0.0
    if y == 0.0:
        return np.inf
    return inner_product(T, total) / (y * scale)


def _outcome(T: np.ndarray, sweep: _Sweep, acc: float, history: list[tuple[float, float]]) -> DenoiseOutcome:
    D = sum(sweep.parts[1:], sweep.parts[0].copy())
    stat = stable_slice_rank_value(D) if frobenius_norm(D) > 0 else None
    return DenoiseOutcome(
        denoised=D,
        residual=T - D,
        components=sweep.parts,
        rank_statistic=stat,
        iterations=sweep.index,
        converged=sweep.acc >= acc,
        info={
            "accuracy": [h[0] for h in history],
            "objective": [h[1] for h in history],
            "mode_nuclear_norms": sweep.nuclear.tolist(),
        },
    )


def _run_to_targets(T: np.ndarray, path: Iterator[_Sweep], accs: Sequence[float]) -> dict[float, DenoiseOutcome]:
    pending = sorted(set(float(a) for a in accs))
    results: dict[float, DenoiseOutcome] = {}
    history: list[tuple[float, float]] = []
    last = None
    for sweep in path:
        last = sweep
        history.append((sweep.acc, sweep.objective))
        while pending and sweep.acc >= pending[0]:
            target = pending.pop(0)
            results[target] = _outcome(T, sweep, target, list(history))
        if not pending:
            break
    for a in pending:
        results[a] = _outcome(T, last, a, list(history))
    return results


def slicerank_grid(T: np.ndarray, lam: float, accs: Sequence[float], max_sweeps: int = 200) -> dict[float, DenoiseOutcome]:
    """Stable SliceRank results for several accuracy targets from one sweep path."""
    StableRankConfig(lam, max(accs), max_sweeps)
    T, _ = _require_nonzero(T, min_order=2)
    path = _sweep_path(T, lambda s: lam, _slicerank_accuracy(lam), lam, max_sweeps)
    return _run_to_targets(T, path, accs)


def xrank_grid(T: np.ndarray, lam: float, accs: Sequence[float], max_sweeps: int = 200) -> dict[float, DenoiseOutcome]:
    """Stable XRank results for several accuracy targets from one sweep path."""
    StableRankConfig(lam, max(accs), max_sweeps)
    T, _ = _require_nonzero(T, min_order=2)
    path = _sweep_path(T, lambda s: find_cutoff(s, lam), _xrank_accuracy, lam, max_sweeps)
    return _run_to_targets(T, path, accs)


def denoise_slicerank(T: np.ndarray, cfg: StableRankConfig) -> DenoiseOutcome:
    """Stable SliceRank denoising.

    Sweeps over the modes; the update for mode ``i`` replaces ``S_i`` by the
    singular-value soft-thresholding (at ``cfg.lam``) of the mode-``i``
    flattening of ``T - sum_{j != i} S_j``.  Stops once the duality ratio
    ``<T - D, D> / (lam * sum_j |(S_j)_(j)|_*)`` reaches ``cfg.acc``.  The
    reported rank statistic is the stable slice rank of ``D``.
    """
    return slicerank_grid(T, cfg.lam, [cfg.acc], cfg.max_sweeps)[cfg.acc]


def denoise_xrank(T: np.ndarray, cfg: StableRankConfig) -> DenoiseOutcome:
    """Stable X-rank denoising.

    Same sweep structure as :func:`denoise_slicerank`, but each mode's cutoff
    comes from :func:`find_cutoff` applied to that flattening's spectrum.
    """
    return xrank_grid(T, cfg.lam, [cfg.acc], cfg.max_sweeps)[cfg.acc]

"""Matrix norms, flattening-based tensor norm surrogates and amplification maps.

An amplification map is a degree-3 polynomial map on tensors that generalizes
``A -> A A^T A``: applied repeatedly it boosts the dominant rank-1 component of
a tensor relative to everything else, much like power iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, FrozenSet

import numpy as np

from .tensor_core import DegenerateInputError, flatten, frobenius_norm, svd

__all__ = [
    "AmplificationMap",
    "AmplificationOverflow",
    "PHI_SIGMA4",
    "matrix_spectral_norm",
    "matrix_nuclear_norm",
    "phi_sigma4",
    "amplify",
    "flattening_nuclear_norms",
    "stable_slice_rank_value",
]


class AmplificationOverflow(ArithmeticError):
    """Repeated amplification produced non-finite values."""


def matrix_spectral_norm(M: np.ndarray) -> float:
    return float(svd(M).s[0])


def matrix_nuclear_norm(M: np.ndarray) -> float:
    return float(np.sum(svd(M).s))


# Contraction patterns.  In every pattern each of the three factors keeps one
# "free" mode in its own slot and shares the remaining modes pairwise with the
# other two factors, so a rank-1 tensor u o v o w maps to
# |u|^2 |v|^2 |w|^2 (u o v o w) and the order-2 analogue is A A^T A.
PHI3_PATTERN = "ajk,ibk,ijc->abc"
PHI4_PATTERN = "ajkl,ibkl,ijcd->abcd"


def _phi_contract(T: np.ndarray) -> np.ndarray:
    # Two matrix products: first contract the trailing "shared" modes of the
    # first two factors, then the leading two modes against the third factor.
    p = T.shape
    lead = p[0] * p[1]
    M = T.reshape(lead, -1)  # rows (a, j), columns = trailing modes
    # P[(a, j), (i, b)] = sum_trailing T[a, j, ...] T[i, b, ...]
    P = M @ M.T
    P = P.reshape(p[0], p[1], p[0], p[1]).transpose(0, 3, 2, 1).reshape(lead, lead)  # rows (a, b), cols (i, j)
    return (P @ M).reshape(p)


def phi_sigma4(T: np.ndarray) -> np.ndarray:
    """Cyclic degree-3 amplification map for order-3 and order-4 tensors.

    Order 3::

        out[a, b, c] = sum_{i,j,k} T[a, j, k] * T[i, b, k] * T[i, j, c]

    Order 4::

        out[a, b, c, d] = sum_{i,j,k,l} T[a, j, k, l] * T[i, b, k, l] * T[i, j, c, d]
    """
    T = np.asarray(T, dtype=np.float64)
    if T.ndim not in (3, 4):
        raise ValueError(f"phi_sigma4 is defined for orders 3 and 4, got order {T.ndim}")
    return _phi_contract(T)


@dataclass(frozen=True)
class AmplificationMap:
    name: str
    supported_orders: FrozenSet[int]
    evaluator: Callable[[np.ndarray], np.ndarray]

    def __call__(self, T: np.ndarray) -> np.ndarray:
        if np.ndim(T) not in self.supported_orders:
            raise ValueError(f"{self.name} does not support order-{np.ndim(T)} tensors")
        return self.evaluator(T)


PHI_SIGMA4 = AmplificationMap("phi_sigma4", frozenset({3, 4}), phi_sigma4)


def amplify(T: np.ndarray, amp: AmplificationMap = PHI_SIGMA4, m: int = 1) -> np.ndarray:
    """Apply ``amp`` ``m`` times without any rescaling in between.

    Magnitudes grow like ``|T|^(3^m)``; if that overflows,
    :class:`AmplificationOverflow` is raised instead of returning inf/nan.
    Callers that only need the direction should renormalize between rounds.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    out = np.asarray(T, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(m):
            out = amp(out)
            if not np.all(np.isfinite(out)):
                raise AmplificationOverflow(
                    f"{amp.name} overflowed after {k + 1} of {m} applications; normalize between rounds"
                )
    return out


def flattening_nuclear_norms(T: np.ndarray) -> np.ndarray:
    T = np.asarray(T, dtype=np.float64)
    return np.array([matrix_nuclear_norm(flatten(T, n)) for n in range(T.ndim)])


def stable_slice_rank_value(T: np.ndarray) -> float:
    """``sum_i |T_(i)|_*^2 / |T|^2``; equals the order for a rank-1 tensor."""
    norm = frobenius_norm(T)
    if norm == 0.0:
        raise DegenerateInputError("stable slice rank is undefined for the zero tensor")
    return float(np.sum(flattening_nuclear_norms(T) ** 2) / norm**2)

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass
class DenoiseOutcome:
    """Result of a denoiser: ``denoised + residual`` reproduces the input.

    ``components`` holds the pieces summing to ``denoised`` when the method
    produces them (the per-mode tensors of the stable-rank methods, or the
    rank-1 pieces peeled by amplification).  ``info`` carries method-specific
    diagnostics such as the chosen rank or per-sweep histories.
    """

    denoised: np.ndarray
    residual: np.ndarray
    components: list[np.ndarray] | None = None
    rank_statistic: float | None = None
    iterations: int = 0
    converged: bool = True
    info: dict[str, Any] = field(default_factory=dict)

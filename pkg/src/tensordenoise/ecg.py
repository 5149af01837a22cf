"""ECG feature tensors built from taut-string approximations.

Each lead is approximated by taut strings at several tube half-widths; six
shape statistics of every approximation fill a ``(epsilon, feature, lead)``
tensor, optionally with a trailing window mode.
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import measure_snr_db
from .tensor_core import DegenerateInputError, frobenius_norm

__all__ = [
    "EPSILONS",
    "FEATURE_NAMES",
    "N_LEADS",
    "EcgRecord",
    "TautStringResult",
    "taut_string",
    "extract_features",
    "lead_features",
    "form_tensor_full",
    "form_tensor_windowed",
    "add_signal_noise",
    "read_ecg",
    "write_ecg",
    "synthetic_ecg",
]

EPSILONS = (0.0100, 0.1575, 0.3050, 0.4525, 0.6000)
N_LEADS = 12
FULL_SECONDS = 90
WINDOW_SECONDS = 30
N_WINDOWS = 3
FEATURE_NAMES = (
    "segment_count",
    "mean_abs_slope",
    "slope_variance",
    "residual_rms",
    "total_variation",
    "max_abs_slope",
)
LABELS = ("healthy", "unhealthy", "unknown")


@dataclass
class EcgRecord:
    sample_rate: float
    leads: np.ndarray  # (12, n)
    id: str = ""
    label: str = "unknown"

    def __post_init__(self):
        self.leads = np.asarray(self.leads, dtype=np.float64)
        if self.leads.ndim != 2 or self.leads.shape[0] != N_LEADS:
            raise ValueError(f"expected {N_LEADS} leads of equal length, got array of shape {self.leads.shape}")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}")
        if not np.all(np.isfinite(self.leads)):
            raise ValueError("lead samples must be finite")

    @property
    def length(self) -> int:
        return self.leads.shape[1]

    def samples(self, seconds: float) -> int:
        return int(round(seconds * self.sample_rate))


@dataclass
class TautStringResult:
    approx: np.ndarray
    epsilon: float
    knots: np.ndarray  # interior indices where the slope changes


# -- taut string ---------------------------------------------------------------


def _flat_anchor(lo: np.ndarray, hi: np.ndarray) -> tuple[int, float] | None:
    """Where the flat leading piece of the string ends.

    Scans while a horizontal line still fits every interval seen so far.  At the
    first interval that no longer fits, the string leaves the flat piece at the
    last point pinning the binding side.  ``None`` if every interval fits.
    """
    high = np.minimum.accumulate(hi)
    low = np.maximum.accumulate(lo)
    up = lo[1:] > high[:-1]
    down = hi[1:] < low[:-1]
    breaks = np.flatnonzero(up | down)
    if breaks.size == 0:
        return None
    j = int(breaks[0]) + 1
    if up[j - 1]:
        k = j - 1 - int(np.argmin(hi[j - 1 :: -1]))
        return k, float(high[j - 1])
    k = j - 1 - int(np.argmax(lo[j - 1 :: -1]))
    return k, float(low[j - 1])


def _funnel(start: tuple[float, float], end: tuple[float, float], lo: np.ndarray, hi: np.ndarray) -> list[tuple[float, float]]:
    """Shortest path from ``start`` to ``end`` through the vertical gates in between.

    ``lo`` / ``hi`` hold the gates at x positions ``start[0]+1 .. end[0]-1``.
    Returns the bend points, endpoints included.
    """
    x0 = int(start[0])
    xs = list(range(x0 + 1, int(end[0]) + 1))
    los = lo.tolist() + [end[1]]
    his = hi.tolist() + [end[1]]
    path = [start]
    ax, ay = start
    upper: deque = deque([start])  # convex chain hugging upper bounds
    lower: deque = deque([start])  # concave chain hugging lower bounds
    for x, l, u in zip(xs, los, his):
        # upper point: collapse onto the lower chain if it dips below it
        if len(lower) > 1:
            su = (u - ay) / (x - ax)
            moved = False
            while len(lower) > 1:
                qx, qy = lower[1]
                if su >= (qy - ay) / (qx - ax):
                    break
                lower.popleft()
                ax, ay = qx, qy
                path.append((ax, ay))
                su = (u - ay) / (x - ax)
                moved = True
            if moved:
                upper = deque([(ax, ay)])
        while len(upper) > 1:
            px, py = upper[-2]
            qx, qy = upper[-1]
            if (u - py) / (x - px) > (qy - py) / (qx - px):
                break
            upper.pop()
        upper.append((x, u))

        # lower point: collapse onto the upper chain if it rises above it
        if len(upper) > 1:
            sl = (l - ay) / (x - ax)
            moved = False
            while len(upper) > 1:
                qx, qy = upper[1]
                if sl <= (qy - ay) / (qx - ax):
                    break
                upper.popleft()
                ax, ay = qx, qy
                path.append((ax, ay))
                sl = (l - ay) / (x - ax)
                moved = True
            if moved:
                lower = deque([(ax, ay)])
        while len(lower) > 1:
            px, py = lower[-2]
            qx, qy = lower[-1]
            if (l - py) / (x - px) < (qy - py) / (qx - px):
                break
            lower.pop()
        lower.append((x, l))
    path.append(end)
    return path


def _knots(y: np.ndarray) -> np.ndarray:
    d = np.diff(y)
    if d.size < 2:
        return np.zeros(0, dtype=int)
    scale = float(np.max(np.abs(d)))
    if scale == 0.0:
        return np.zeros(0, dtype=int)
    change = np.abs(np.diff(d))
    return np.flatnonzero(change > 1e-9 * scale) + 1


def taut_string(x: Sequence[float], epsilon: float) -> TautStringResult:
    """Sequence of least first-difference energy inside the tube ``|y - x| <= epsilon``.

    Both ends are free.  The string is flat until it first has to bend, then
    follows the shortest path through the tube, computed with a funnel sweep in
    linear time.  When a single horizontal line fits the whole tube the optimum
    is not unique and the midpoint of the feasible band is returned.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("x must be a sequence of length >= 2")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    if epsilon < 0 or not math.isfinite(epsilon):
        raise ValueError("epsilon must be a finite non-negative number")
    n = x.size
    if epsilon == 0.0:
        y = x.copy()
        return TautStringResult(y, float(epsilon), _knots(y))
    lo = x - epsilon
    hi = x + epsilon

    head = _flat_anchor(lo, hi)
    if head is None:
        y = np.full(n, 0.5 * (np.max(lo) + np.min(hi)))
        return TautStringResult(y, float(epsilon), np.zeros(0, dtype=int))
    tail_rev = _flat_anchor(lo[::-1], hi[::-1])
    tail = (n - 1 - tail_rev[0], tail_rev[1])

    ks, ke = head[0], tail[0]
    if ke <= ks:
        raise AssertionError(f"flat pieces overlap ({ks}, {ke})")
    pts = _funnel((ks, head[1]), (ke, tail[1]), lo[ks + 1 : ke], hi[ks + 1 : ke])
    px = np.array([p[0] for p in pts], dtype=np.float64)
    py = np.array([p[1] for p in pts], dtype=np.float64)
    y = np.interp(np.arange(n, dtype=np.float64), px, py)
    # clip away rounding drift so the tube constraint holds exactly
    y = np.clip(y, lo, hi)
    return TautStringResult(y, float(epsilon), _knots(y))


# -- features ------------------------------------------------------------------


def extract_features(x: Sequence[float], ts: TautStringResult) -> np.ndarray:
    """Six statistics of a taut-string approximation.

    ``[segment count, mean |segment slope|, population variance of segment
    slopes, RMS of x - y, total variation of y, max |segment slope|]``.  Slopes
    are per sample; a segment is a maximal linear piece between knots.
    """
    x = np.asarray(x, dtype=np.float64)
    y = ts.approx
    if x.shape != y.shape:
        raise ValueError("taut string result does not match the signal length")
    d = np.diff(y)
    bounds = np.concatenate([[0], ts.knots, [y.size - 1]]).astype(int)
    slopes = (y[bounds[1:]] - y[bounds[:-1]]) / np.diff(bounds)
    return np.array(
        [
            float(bounds.size - 1),
            float(np.mean(np.abs(slopes))),
            float(np.var(slopes)),
            float(np.sqrt(np.mean((x - y) ** 2))),
            float(np.sum(np.abs(d))),
            float(np.max(np.abs(slopes))),
        ]
    )


def lead_features(x: Sequence[float], epsilons: Sequence[float] = EPSILONS) -> np.ndarray:
    """``(len(epsilons), 6)`` feature matrix of one lead."""
    return np.stack([extract_features(x, taut_string(x, eps)) for eps in epsilons])


def _segment_tensor(leads: np.ndarray, epsilons: Sequence[float]) -> np.ndarray:
    out = np.empty((len(epsilons), len(FEATURE_NAMES), leads.shape[0]))
    for j, lead in enumerate(leads):
        out[:, :, j] = lead_features(lead, epsilons)
    return out


def _check_epsilons(epsilons: Sequence[float]) -> tuple[float, ...]:
    eps = tuple(float(e) for e in epsilons)
    if not eps or any(e < 0 for e in eps):
        raise ValueError("epsilons must be a non-empty list of non-negative values")
    return eps


def form_tensor_full(rec: EcgRecord, epsilons: Sequence[float] = EPSILONS) -> np.ndarray:
    """``(epsilon, feature, lead)`` tensor from the first 90 s of ``rec``."""
    eps = _check_epsilons(epsilons)
    n = rec.samples(FULL_SECONDS)
    if rec.length < n:
        raise ValueError(f"record {rec.id!r} has {rec.length} samples, needs {n} for {FULL_SECONDS} s")
    return _segment_tensor(rec.leads[:, :n], eps)


def form_tensor_windowed(rec: EcgRecord, epsilons: Sequence[float] = EPSILONS) -> np.ndarray:
    """``(epsilon, feature, lead, window)`` tensor from three consecutive 30 s windows."""
    eps = _check_epsilons(epsilons)
    w = rec.samples(WINDOW_SECONDS)
    if rec.length < N_WINDOWS * w:
        raise ValueError(f"record {rec.id!r} has {rec.length} samples, needs {N_WINDOWS * w}")
    slabs = [_segment_tensor(rec.leads[:, k * w : (k + 1) * w], eps) for k in range(N_WINDOWS)]
    return np.stack(slabs, axis=-1)


def add_signal_noise(rec: EcgRecord, snr_db: float, rng: np.random.Generator) -> EcgRecord:
    """Copy of ``rec`` with Gaussian noise calibrated per lead to ``snr_db``."""
    noisy = np.empty_like(rec.leads)
    for j, lead in enumerate(rec.leads):
        norm = frobenius_norm(lead)
        if norm == 0.0:
            raise DegenerateInputError(f"lead {j} of record {rec.id!r} is silent")
        g = rng.standard_normal(lead.size)
        noisy[j] = lead + g * (norm / (frobenius_norm(g) * 10.0 ** (snr_db / 20.0)))
    return replace(rec, leads=noisy)


def lead_snr_db(clean: EcgRecord, noisy: EcgRecord) -> np.ndarray:
    return np.array([measure_snr_db(c, n) for c, n in zip(clean.leads, noisy.leads)])


# -- file format ---------------------------------------------------------------
#
# First line "sample_rate=<Hz>, leads=12, length=<n>", then n rows of 12
# comma-separated samples (one column per lead).

_HEADER = re.compile(r"^\s*sample_rate\s*=\s*([^,\s]+)\s*,\s*leads\s*=\s*(\d+)\s*,\s*length\s*=\s*(\d+)\s*$")


def write_ecg(path: str | Path, rec: EcgRecord) -> None:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"sample_rate={rec.sample_rate:g}, leads={N_LEADS}, length={rec.length}\n")
        np.savetxt(fh, rec.leads.T, fmt="%.17g", delimiter=",")


def read_ecg(path: str | Path, id: str | None = None, label: str = "unknown") -> EcgRecord:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline()
        m = _HEADER.match(header)
        if m is None:
            raise ValueError(f"{path}: expected header 'sample_rate=<Hz>, leads=12, length=<n>', got {header.strip()!r}")
        rate, leads, length = float(m.group(1)), int(m.group(2)), int(m.group(3))
        if leads != N_LEADS:
            raise ValueError(f"{path}: expected {N_LEADS} leads, header says {leads}")
        data = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
    if data.shape != (length, N_LEADS):
        raise ValueError(f"{path}: expected {length} rows of {N_LEADS} columns, found shape {data.shape}")
    return EcgRecord(rate, data.T, id=path.stem if id is None else id, label=label)


# -- synthetic records -----------------------------------------------------------

# (relative time within the beat, width in s, amplitude in mV) for P, Q, R, S, T
_WAVES = np.array(
    [
        [-0.20, 0.025, 0.15],
        [-0.03, 0.010, -0.10],
        [0.00, 0.012, 1.00],
        [0.03, 0.010, -0.25],
        [0.25, 0.040, 0.30],
    ]
)


def synthetic_ecg(
    seconds: float = 90.0,
    sample_rate: float = 250.0,
    heart_rate: float = 70.0,
    jitter: float = 0.01,
    seed: int = 0,
    id: str | None = None,
) -> EcgRecord:
    """Twelve-lead record of Gaussian P-QRS-T bumps.

    Each lead mixes the waves with its own seeded gains, so leads differ in
    morphology but share the rhythm.  Beat times wobble by ``jitter`` times the
    beat period (standard deviation); ``jitter=0`` gives an exactly periodic
    record.
    """
    rng = np.random.default_rng(seed)
    n = int(round(seconds * sample_rate))
    t = np.arange(n) / sample_rate
    period = 60.0 / heart_rate
    beats = np.arange(period / 2, seconds + period, period)
    beats = beats + rng.normal(0.0, jitter * period, beats.size)
    gains = rng.uniform(0.4, 1.6, (N_LEADS, len(_WAVES))) * rng.choice([-1.0, 1.0], (N_LEADS, 1))
    profile = np.zeros((len(_WAVES), n))
    for b in beats:
        for w, (offset, width, amp) in enumerate(_WAVES):
            centre = b + offset
            lo = np.searchsorted(t, centre - 5 * width)
            hi = np.searchsorted(t, centre + 5 * width)
            profile[w, lo:hi] += amp * np.exp(-0.5 * ((t[lo:hi] - centre) / width) ** 2)
    leads = gains @ profile
    return EcgRecord(float(sample_rate), leads, id=f"synthetic-{seed}" if id is None else id)

"""Synthetic low-rank tensors, SNR-calibrated Gaussian noise and corpus manifests.

SNR is measured in amplitude decibels on Frobenius norms,
``20 log10(|reference| / |estimate - reference|)``, so :func:`add_noise_to_snr`
and :func:`measure_snr_db` are exact inverses.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .tensor_core import DegenerateInputError, frobenius_norm, load_tensor, outer_product, save_tensor

__all__ = [
    "ORDERS",
    "RANKS",
    "SIZES",
    "SNR_LADDER",
    "SyntheticSpec",
    "NoisyPair",
    "gen_uniform",
    "gen_nonuniform",
    "generate",
    "add_noise_to_snr",
    "measure_snr_db",
    "write_manifest",
    "read_manifest",
    "build_corpus",
    "sample_pair",
    "load_pair",
    "trial_seed",
]

ORDERS = (3, 4)
RANKS = (1, 2, 3, 4, 5, 10, 20, 25)
SIZES = (5, 10, 25, 50)
SNR_LADDER = (20.0, 10.0, 5.0, 1.0, -1.0, -5.0, -10.0, -20.0)
VARIANTS = ("uniform", "nonuniform")
MAX_STRETCH = 500


@dataclass(frozen=True)
class SyntheticSpec:
    order: int
    rank: int
    size: int
    snr_db: float
    variant: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("order must be >= 2")
        if self.rank < 1 or self.size < 1:
            raise ValueError("rank and size must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def in_table_grid(self) -> bool:
        """Whether every field lies on the ORDERS, RANKS, SIZES and SNR_LADDER grids."""
        return (
            self.order in ORDERS
            and self.rank in RANKS
            and self.size in SIZES
            and float(self.snr_db) in SNR_LADDER
        )


@dataclass
class NoisyPair:
    clean: np.ndarray
    noisy: np.ndarray
    realized_snr_db: float


def _rank_sum(shape: Sequence[int], rank: int, rng: np.random.Generator) -> np.ndarray:
    weights = rng.standard_normal(rank)
    vectors = [rng.standard_normal((p, rank)) for p in shape]
    out = np.zeros(tuple(shape))
    for i in range(rank):
        term = vectors[0][:, i]
        for V in vectors[1:]:
            term = outer_product(term, V[:, i])
        out += weights[i] * term
    return out


def gen_uniform(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """Sum of ``rank`` weighted outer products of standard-normal vectors, shape ``size^order``."""
    if spec.variant != "uniform":
        raise ValueError("gen_uniform needs a uniform spec")
    return _rank_sum([spec.size] * spec.order, spec.rank, rng)


def gen_nonuniform(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """Like :func:`gen_uniform` but one random mode is stretched.

    The stretched mode is chosen uniformly and its extent drawn uniformly from
    the integers in ``[size, min(500, size^order)]``.
    """
    if spec.variant != "nonuniform":
        raise ValueError("gen_nonuniform needs a nonuniform spec")
    shape = [spec.size] * spec.order
    mode = int(rng.integers(spec.order))
    upper = min(MAX_STRETCH, spec.size**spec.order)
    shape[mode] = int(rng.integers(spec.size, upper + 1))
    return _rank_sum(shape, spec.rank, rng)


def generate(spec: SyntheticSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Dispatch on ``spec.variant``; with no ``rng`` one is seeded from ``spec.seed``."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.variant == "uniform":
        return gen_uniform(spec, rng)
    return gen_nonuniform(spec, rng)


def measure_snr_db(reference: np.ndarray, estimate: np.ndarray) -> float:
    """``20 log10(|reference| / |estimate - reference|)``; ``inf`` for an exact estimate."""
    reference = np.asarray(reference, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if reference.shape != estimate.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {estimate.shape}")
    ref_norm = frobenius_norm(reference)
    if ref_norm == 0.0:
        raise DegenerateInputError("SNR is undefined for a zero reference")
    err = frobenius_norm(estimate - reference)
    if err == 0.0:
        return math.inf
    return 20.0 * math.log10(ref_norm / err)


def add_noise_to_snr(clean: np.ndarray, snr_db: float, rng: np.random.Generator) -> NoisyPair:
    """Add iid Gaussian noise rescaled so this realization hits ``snr_db`` exactly."""
    clean = np.asarray(clean, dtype=np.float64)
    norm = frobenius_norm(clean)
    if norm == 0.0:
        raise DegenerateInputError("cannot calibrate noise against a zero tensor")
    G = rng.standard_normal(clean.shape)
    c = norm / (frobenius_norm(G) * 10.0 ** (snr_db / 20.0))
    noise = c * G
    realized = 20.0 * math.log10(norm / frobenius_norm(noise))
    return NoisyPair(clean=clean, noisy=clean + noise, realized_snr_db=realized)


# -- corpus on disk ------------------------------------------------------------

MANIFEST_FIELDS = [f.name for f in fields(SyntheticSpec)] + ["trial", "shape", "realized_snr_db", "clean_path", "noisy_path"]


def write_manifest(path: str | Path, rows: Iterable[dict]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_manifest(path: str | Path) -> list[dict]:
    """Rows of a corpus manifest with numeric fields converted back."""
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            row["order"] = int(row["order"])
            row["rank"] = int(row["rank"])
            row["size"] = int(row["size"])
            row["snr_db"] = float(row["snr_db"])
            row["seed"] = int(row["seed"])
            row["trial"] = int(row["trial"])
            row["realized_snr_db"] = float(row["realized_snr_db"])
            out.append(row)
    return out


def build_corpus(
    specs: Iterable[SyntheticSpec],
    trials: int,
    out_dir: str | Path,
) -> Path:
    """Write clean/noisy tensors for every spec and trial plus ``manifest.csv``.

    Trial ``t`` of a spec gets the seed :func:`trial_seed` ``(spec.seed, t)``;
    the manifest records that seed so any row can be regenerated on its own.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    out_dir = Path(out_dir)
    tensor_dir = out_dir / "tensors"
    tensor_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for k, spec in enumerate(specs):
        for t in range(trials):
            spec_t = replace(spec, seed=trial_seed(spec.seed, t))
            pair = sample_pair(spec_t)
            stem = f"c{k:04d}_t{t:03d}"
            clean_path = tensor_dir / f"{stem}_clean.txt"
            noisy_path = tensor_dir / f"{stem}_noisy.txt"
            save_tensor(clean_path, pair.clean)
            save_tensor(noisy_path, pair.noisy)
            row = asdict(spec_t)
            row.update(
                trial=t,
                shape="x".join(str(p) for p in pair.clean.shape),
                realized_snr_db=repr(pair.realized_snr_db),
                clean_path=str(clean_path.relative_to(out_dir)),
                noisy_path=str(noisy_path.relative_to(out_dir)),
            )
            rows.append(row)
    manifest = out_dir / "manifest.csv"
    write_manifest(manifest, rows)
    return manifest


def trial_seed(base_seed: int, *key: int) -> int:
    """64-bit seed split off ``base_seed`` along ``key``; independent of call order."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def sample_pair(spec: SyntheticSpec) -> NoisyPair:
    """Clean tensor and its noisy copy, both drawn from ``default_rng(spec.seed)``."""
    rng = np.random.default_rng(int(spec.seed))
    return add_noise_to_snr(generate(spec, rng), spec.snr_db, rng)


def load_pair(manifest_row: dict, root: str | Path) -> NoisyPair:
    root = Path(root)
    clean = load_tensor(root / manifest_row["clean_path"])
    noisy = load_tensor(root / manifest_row["noisy_path"])
    return NoisyPair(clean, noisy, float(manifest_row["realized_snr_db"]))

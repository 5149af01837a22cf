import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import rank_one
from tensordenoise.data import add_noise_to_snr
from tensordenoise.stable_rank import (
    StableRankConfig,
    denoise_amplification,
    denoise_slicerank,
    denoise_xrank,
    find_cutoff,
    slicerank_grid,
)
from tensordenoise.tensor_core import DegenerateInputError, flatten, frobenius_norm


def cutoff_by_enumeration(f, lam):
    """Score every candidate with plain Python arithmetic, keep the first minimum."""
    f = [float(v) for v in f]
    best_t, best_v = None, math.inf
    running = 0.0
    for i in range(1, len(f) + 1):
        running += f[i - 1]
        t = lam * running / (1.0 + lam * i)
        s = [max(fi - t, 0.0) for fi in f]
        v = math.fsum((fi - si) ** 2 for fi, si in zip(f, s)) + lam * math.fsum(si * si for si in s)
        if v < best_v:
            best_t, best_v = t, v
    return best_t


def test_find_cutoff_hand_examples():
    assert find_cutoff([1.0], 1.0) == 0.5
    assert find_cutoff([2.0, 1.0], 1.0) == 1.0


spectra = st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=12).map(lambda v: sorted(v, reverse=True))


@given(spectra, st.sampled_from([0.01, 0.1, 1.0, 10.0]))
def test_find_cutoff_matches_enumeration(f, lam):
    assert find_cutoff(f, lam) == pytest.approx(cutoff_by_enumeration(f, lam), rel=1e-12, abs=1e-300)


@given(spectra, st.floats(0.01, 10))
def test_find_cutoff_is_a_candidate_below_top(f, lam):
    t = find_cutoff(f, lam)
    assert 0.0 <= t <= f[0]


def test_find_cutoff_validation():
    for bad in ([], [1.0, 2.0], [-1.0]):
        with pytest.raises(ValueError):
            find_cutoff(bad, 1.0)
    with pytest.raises(ValueError):
        find_cutoff([1.0], 0.0)


# -- amplification -------------------------------------------------------------


@pytest.mark.parametrize("shape", [(4, 5, 6), (3, 3, 3, 3)])
def test_amplification_recovers_rank_one(shape):
    T, _ = rank_one(np.random.default_rng(0), shape, scale=2.5)
    out = denoise_amplification(T, m=5)
    assert out.iterations == 1
    assert frobenius_norm(out.denoised - T) <= 1e-6 * frobenius_norm(T)
    np.testing.assert_allclose(out.denoised + out.residual, T)


def test_amplification_small_tau_peels_more():
    T = np.random.default_rng(1).standard_normal((4, 4, 4))
    one = denoise_amplification(T, tau=1.0)
    many = denoise_amplification(T, tau=0.5, max_components=30)
    assert one.iterations == 1
    assert many.iterations > 1
    assert frobenius_norm(many.residual) < 0.5 * frobenius_norm(T) or many.iterations == 30
    norms = many.info["residual_norms"]
    assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))


def test_amplification_validation():
    with pytest.raises(DegenerateInputError):
        denoise_amplification(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        denoise_amplification(np.ones((2, 2)))
    with pytest.raises(ValueError):
        denoise_amplification(np.ones((2, 2, 2)), tau=0.0)


def test_amplification_denoises_noisy_rank_one():
    rng = np.random.default_rng(2)
    clean, _ = rank_one(rng, (10, 10, 10))
    noisy = add_noise_to_snr(clean, 0.0, rng).noisy
    out = denoise_amplification(noisy)
    assert frobenius_norm(out.denoised - clean) < 0.5 * frobenius_norm(noisy - clean)


# -- SliceRank / XRank ---------------------------------------------------------


def objective(T, out, lam):
    nuc = sum(np.linalg.norm(flatten(S, j), "nuc") for j, S in enumerate(out.components))
    return 0.5 * frobenius_norm(T - out.denoised) ** 2 + lam * nuc


@given(st.integers(0, 10**6), st.sampled_from([0.1, 1.0, 3.0]))
def test_slicerank_objective_never_increases(seed, lam):
    T = np.random.default_rng(seed).standard_normal((4, 3, 5))
    out = denoise_slicerank(T, StableRankConfig(lam, acc=1.0, max_sweeps=25))
    obj = out.info["objective"]
    assert all(b <= a + 1e-10 * abs(a) for a, b in zip(obj, obj[1:]))
    assert objective(T, out, lam) == pytest.approx(obj[-1], rel=1e-10)


@pytest.mark.parametrize("method", [denoise_slicerank, denoise_xrank])
def test_tiny_lambda_keeps_everything(method):
    T = np.random.default_rng(3).standard_normal((4, 4, 4))
    out = method(T, StableRankConfig(1e-8, acc=0.9))
    assert frobenius_norm(out.denoised - T) <= 1e-4 * frobenius_norm(T)


def test_slicerank_large_lambda_removes_everything():
    T = np.random.default_rng(4).standard_normal((4, 4, 4))
    top = max(np.linalg.norm(flatten(T, j), 2) for j in range(3))
    out = denoise_slicerank(T, StableRankConfig(1.01 * top, acc=0.9, max_sweeps=5))
    assert frobenius_norm(out.denoised) == 0.0
    assert out.rank_statistic is None
    assert not out.converged


def test_xrank_shrinks_like_inverse_lambda():
    # the selected cutoff stays below the top singular value, so the output
    # never vanishes; it decays like 1/lam instead
    T = np.random.default_rng(4).standard_normal((4, 4, 4))
    norms = [frobenius_norm(denoise_xrank(T, StableRankConfig(lam)).denoised) for lam in (10.0, 100.0, 1000.0)]
    assert norms[0] > norms[1] > norms[2] > 0.0
    assert norms[2] < 2e-3 * frobenius_norm(T)


def test_slicerank_scales_with_lambda():
    T = np.random.default_rng(5).standard_normal((3, 4, 5))
    a = denoise_slicerank(T, StableRankConfig(0.5, 0.95))
    b = denoise_slicerank(3.0 * T, StableRankConfig(1.5, 0.95))
    assert a.iterations == b.iterations
    np.testing.assert_allclose(b.denoised, 3.0 * a.denoised, rtol=1e-9, atol=1e-9)


def test_xrank_scales_with_fixed_lambda():
    T = np.random.default_rng(6).standard_normal((3, 4, 5))
    a = denoise_xrank(T, StableRankConfig(1.0, 0.9))
    b = denoise_xrank(3.0 * T, StableRankConfig(1.0, 0.9))
    np.testing.assert_allclose(b.denoised, 3.0 * a.denoised, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("method", [denoise_slicerank, denoise_xrank])
def test_rank_statistic_equals_order_for_rank_one(method):
    rng = np.random.default_rng(7)
    clean, _ = rank_one(rng, (8, 8, 8))
    top = np.linalg.norm(flatten(clean, 0), 2)
    assert method(clean, StableRankConfig(0.1 * top, 0.9)).rank_statistic == pytest.approx(3.0, rel=1e-8)
    noisy = add_noise_to_snr(clean, 20.0, rng).noisy
    assert method(noisy, StableRankConfig(0.2 * top, 0.9)).rank_statistic == pytest.approx(3.0, abs=0.5)


def test_grid_matches_individual_runs():
    T = np.random.default_rng(8).standard_normal((4, 4, 4))
    grid = slicerank_grid(T, 0.5, [0.9, 0.95])
    for acc in (0.9, 0.95):
        single = denoise_slicerank(T, StableRankConfig(0.5, acc))
        np.testing.assert_array_equal(grid[acc].denoised, single.denoised)
    assert grid[0.9].iterations <= grid[0.95].iterations


def test_decomposition_identity():
    T = np.random.default_rng(9).standard_normal((3, 3, 3))
    out = denoise_xrank(T, StableRankConfig(1.0))
    np.testing.assert_allclose(out.denoised + out.residual, T)
    np.testing.assert_allclose(sum(out.components), out.denoised)


def test_config_validation():
    for kw in ({"lam": 0.0}, {"lam": 1.0, "acc": 0.0}, {"lam": 1.0, "acc": 1.5}, {"lam": 1.0, "max_sweeps": 0}):
        with pytest.raises(ValueError):
            StableRankConfig(**kw)
    with pytest.raises(DegenerateInputError):
        denoise_xrank(np.zeros((2, 2, 2)), StableRankConfig(1.0))


# -- further worked examples -----------------------------------------------------


def unit_rank_one(rng, shape, k=1):
    bases = [np.linalg.qr(rng.standard_normal((p, k)))[0] for p in shape]
    comps = []
    for j in range(k):
        C = bases[0][:, j]
        for B in bases[1:]:
            C = np.multiply.outer(C, B[:, j])
        comps.append(C)
    return comps


def test_amplification_weight_five_unit_rank_one():
    (a,) = unit_rank_one(np.random.default_rng(10), (3, 4, 5))
    out = denoise_amplification(5.0 * a, tau=1.0)
    assert frobenius_norm(out.residual) <= 1e-8 * 5.0


def test_amplification_single_component_on_noise():
    T = np.random.default_rng(11).standard_normal((5, 5, 5))
    out = denoise_amplification(T, tau=1.0, max_components=1)
    assert len(out.components) == 1
    assert frobenius_norm(out.denoised) <= frobenius_norm(T)
    # five rounds leave the direction close to, not exactly, rank-1
    assert second_singular_ratio(out.components[0]) < 1e-4


def second_singular_ratio(C):
    ratios = []
    for n in range(C.ndim):
        s = np.linalg.svd(flatten(C, n), compute_uv=False)
        ratios.append(s[1] / s[0])
    return max(ratios)


@given(st.integers(0, 10**6), st.sampled_from([(5, 5, 5), (4, 6, 3), (3, 5, 4)]))
def test_converged_components_are_rank_one(seed, shape):
    # planted well-separated components converge doubly exponentially
    rng = np.random.default_rng(seed)
    T = 3.0 * rank_one(rng, shape, 1.0)[0] + 0.01 * rng.standard_normal(shape)
    out = denoise_amplification(T, m=8, tau=0.6, max_components=2)
    assert second_singular_ratio(out.components[0]) <= 1e-8


@given(st.integers(0, 10**6), st.sampled_from([(5, 5, 5), (4, 6, 3)]))
def test_noise_residuals_shrink(seed, shape):
    # on pure noise near-tied directions can converge slowly, so only the
    # residual sequence is checked
    T = np.random.default_rng(seed).standard_normal(shape)
    out = denoise_amplification(T, m=8, tau=0.6, max_components=4)
    norms = out.info["residual_norms"]
    assert all(y < x for x, y in zip(norms, norms[1:]))


@given(st.integers(0, 10**6))
def test_order_four_components_are_vector_vector_matrix(seed):
    # the order-4 map keeps modes 2 and 3 together in its third factor, so its
    # fixed directions are u o v o M with M an arbitrary matrix
    T = np.random.default_rng(seed).standard_normal((3, 4, 3, 2))
    C = denoise_amplification(T, m=8).components[0]
    for n in (0, 1):
        s = np.linalg.svd(flatten(C, n), compute_uv=False)
        assert s[1] <= 1e-8 * s[0]
    s = np.linalg.svd(C.reshape(12, 6), compute_uv=False)
    assert s[1] <= 1e-8 * s[0]


def test_amplification_peels_orthogonal_pair_in_order():
    a, b = unit_rank_one(np.random.default_rng(12), (4, 5, 6), k=2)
    out = denoise_amplification(3.0 * a + 2.0 * b, tau=0.1)
    assert out.iterations == 2
    assert frobenius_norm(out.components[0] - 3.0 * a) <= 1e-6
    assert frobenius_norm(out.components[1] - 2.0 * b) <= 1e-6
    norms = out.info["residual_norms"]
    assert all(y < x for x, y in zip(norms, norms[1:]))


def test_matrix_input_matches_nuclear_norm_prox():
    # two "modes" of a matrix share one nuclear norm, so the split solves the
    # matrix nuclear-norm proximal problem; checked against a convex solver
    cp = pytest.importorskip("cvxpy")
    T = np.random.default_rng(13).standard_normal((3, 3))
    lam = 0.7
    out = denoise_slicerank(T, StableRankConfig(lam, acc=0.999))
    D = cp.Variable((3, 3))
    cp.Problem(cp.Minimize(0.5 * cp.sum_squares(T - D) + lam * cp.normNuc(D))).solve(solver="SCS", eps=1e-10)
    np.testing.assert_allclose(out.denoised, D.value, atol=1e-5)
    assert out.converged


def test_find_cutoff_small_lambda_is_near_zero():
    assert find_cutoff([3.0, 2.0, 1.0], 1e-12) < 1e-11


@given(spectra.filter(lambda f: f[0] > 0), st.floats(0.01, 10), st.floats(0.1, 100))
def test_find_cutoff_scale_equivariant(f, lam, c):
    assert find_cutoff([c * v for v in f], lam) == pytest.approx(c * find_cutoff(f, lam), rel=1e-9, abs=1e-12)


def test_xrank_unit_rank_one_keeps_direction():
    (a,) = unit_rank_one(np.random.default_rng(14), (3, 4, 5))
    out = denoise_xrank(a, StableRankConfig(10.0, 0.9))
    coef = float(np.vdot(out.denoised, a))
    assert coef > 0
    np.testing.assert_allclose(out.denoised, coef * a, atol=1e-12)
    assert frobenius_norm(out.residual) < 1.0


@given(st.integers(0, 10**6), st.floats(0.2, 5.0), st.sampled_from([0.1, 1.0]))
def test_xrank_statistic_scale_invariant_at_fixed_lambda(seed, c, lam):
    T = np.random.default_rng(seed).standard_normal((3, 4, 3))
    a = denoise_xrank(T, StableRankConfig(lam)).rank_statistic
    b = denoise_xrank(c * T, StableRankConfig(lam)).rank_statistic
    assert a >= 0
    assert b == pytest.approx(a, rel=1e-8)


@given(st.integers(0, 10**6), st.sampled_from([0.1, 1.0, 3.0]))
def test_xrank_objective_never_increases(seed, lam):
    T = np.random.default_rng(seed).standard_normal((4, 3, 5))
    obj = denoise_xrank(T, StableRankConfig(lam, acc=1.0, max_sweeps=25)).info["objective"]
    assert all(b <= a + 1e-10 * abs(a) for a, b in zip(obj, obj[1:]))

import math

import numpy as np
import pytest

from pavl import fitting
from pavl.fitting import (
    REFERENCE_BASE,
    REFERENCE_RESIDUAL,
    REFERENCE_WARP,
    BaseParams,
    FitError,
    ResidualParams,
    WarpParams,
    cosine_similarity,
    crossing_points,
    eval_base,
    eval_rotation_model,
    eval_warp,
    fit_base,
    fit_imbalance_residual,
    fit_interaction,
    fit_k_scaling,
    fit_residual,
    fit_stats,
)


class FakeRecord:
    def __init__(self, n, p, rotations_total, imbalance_events):
        self.n = n
        self.p = p
        self.rotations_total = rotations_total
        self.imbalance_events = imbalance_events


# --- evaluation --------------------------------------------------------------

def test_eval_base_zero():
    assert eval_base(0.0, REFERENCE_BASE) == 0.0


def test_eval_base_at_one():
    # 0.67 * (1 - exp(-5.72)), frozen from direct evaluation
    assert eval_base(1.0, REFERENCE_BASE) == pytest.approx(0.6678025936954298)


def test_eval_base_saturates():
    assert eval_base(40.0, BaseParams(0.67, 5.72)) == pytest.approx(0.67)


def test_eval_warp_zero():
    assert eval_warp(0.0, REFERENCE_WARP) == 0.0


def test_eval_warp_linear_for_small_f():
    for f in (1e-8, 1e-9):
        assert eval_warp(f, REFERENCE_WARP) == pytest.approx(f, rel=1e-6)


def test_eval_warp_at_saturation_value():
    # frozen from direct evaluation of the rational form at f = 0.67
    assert eval_warp(0.67, REFERENCE_WARP) == pytest.approx(0.37539763852092434)


def test_eval_warp_singular_denominator():
    with pytest.raises(ZeroDivisionError):
        eval_warp(1.0, WarpParams(a1=-1.0, a2=0.0, a3=0.0, d1=0.0))


def test_rotation_model_at_p_zero():
    assert eval_rotation_model(0.0, REFERENCE_BASE, REFERENCE_WARP,
                               REFERENCE_RESIDUAL) == 0.0


def test_rotation_model_with_zero_k_equals_base():
    res = ResidualParams(k=0.0, a=0.2, b=0.3)
    for p in (0.01, 0.1, 0.5, 1.0):
        assert eval_rotation_model(p, REFERENCE_BASE, REFERENCE_WARP, res) \
            == pytest.approx(eval_base(p, REFERENCE_BASE))


def test_rotation_model_equals_base_at_crossing():
    cross = crossing_points(REFERENCE_BASE, REFERENCE_WARP, REFERENCE_RESIDUAL)
    for p_star in (cross.p_star_a, cross.p_star_b):
        assert eval_rotation_model(p_star, REFERENCE_BASE, REFERENCE_WARP,
                                   REFERENCE_RESIDUAL) \
            == pytest.approx(eval_base(p_star, REFERENCE_BASE), abs=1e-9)


# --- fit_stats / cosine --------------------------------------------------------

def test_fit_stats_perfect_prediction():
    stats = fit_stats([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert stats.mse == 0.0
    assert stats.pearson == pytest.approx(1.0)


def test_fit_stats_identities():
    rng = np.random.default_rng(0)
    obs = rng.normal(size=50)
    pred = obs + rng.normal(scale=0.1, size=50)
    stats = fit_stats(obs, pred)
    assert stats.rse == pytest.approx(math.sqrt(stats.mse))
    assert stats.residual_std == pytest.approx(math.sqrt(stats.residual_variance))
    assert abs(stats.pearson) <= 1.0


def test_fit_stats_rse_matches_published_pair():
    # sqrt(3.553e-4) = 1.885e-2 to the printed precision
    assert math.sqrt(3.553e-4) == pytest.approx(1.885e-2, rel=1e-3)


def test_fit_stats_constant_observed_is_error():
    with pytest.raises(ValueError):
        fit_stats([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_fit_stats_length_mismatch():
    with pytest.raises(ValueError):
        fit_stats([1.0, 2.0], [1.0])


def test_cosine_similarity_identical():
    assert cosine_similarity([1.0, 2.0], [1.0, 2.0]) == pytest.approx(1.0)


def test_cosine_similarity_orthogonal():
    assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)


def test_cosine_similarity_zero_vector_is_error():
    with pytest.raises(ValueError):
        cosine_similarity([0.0, 0.0], [1.0, 2.0])


# --- fit_base ------------------------------------------------------------------

def noiseless_base_points():
    ps = np.linspace(0, 1, 40)
    return [(p, eval_base(p, REFERENCE_BASE)) for p in ps]


def test_fit_base_noiseless_recovery():
    params, stats = fit_base(noiseless_base_points())
    assert params.A == pytest.approx(0.67, rel=1e-6)
    assert params.b == pytest.approx(5.72, rel=1e-6)
    assert stats.mse < 1e-12


def test_fit_base_all_zero_data():
    params, _ = fit_base([(p, 0.0) for p in (0.0, 0.3, 0.6, 1.0, 0.1)])
    assert params.A == pytest.approx(0.0, abs=1e-8)


def test_fit_base_needs_three_distinct_p():
    with pytest.raises(FitError):
        fit_base([(0.1, 0.2), (0.1, 0.2), (0.1, 0.2)])


# --- fit_residual ----------------------------------------------------------------

def synthetic_residual_points():
    ps = np.concatenate([np.geomspace(1e-4, 1e-1, 20), np.linspace(0.15, 1, 25)])
    return [(p, float(fitting.eval_residual(p, REFERENCE_BASE, REFERENCE_WARP,
                                            REFERENCE_RESIDUAL)))
            for p in ps]


def test_fit_residual_recovers_zeroes():
    warp, res, stats = fit_residual(synthetic_residual_points(), REFERENCE_BASE)
    assert res.a == pytest.approx(REFERENCE_RESIDUAL.a, abs=1e-4)
    assert res.b == pytest.approx(REFERENCE_RESIDUAL.b, abs=1e-4)
    assert warp.d1 == pytest.approx(REFERENCE_WARP.d1, abs=1e-2)


def test_fit_residual_zero_data_gives_zero_k():
    points = [(p, 0.0) for p in np.linspace(0, 1, 30)]
    warp, res, _ = fit_residual(points, REFERENCE_BASE)
    # the amplitude is the only parameter the data constrains
    max_resid = max(abs(fitting.eval_residual(p, REFERENCE_BASE, warp, res))
                    for p, _ in points)
    assert max_resid < 1e-8


def test_fit_residual_needs_span():
    points = [(p, 0.01) for p in np.linspace(0.4, 0.6, 15)]
    with pytest.raises(FitError):
        fit_residual(points, REFERENCE_BASE)


# --- fit_interaction --------------------------------------------------------------

def test_fit_interaction_noiseless_recovery():
    m_true, lam_true = 0.703972, -0.020980
    records = []
    rng = np.random.default_rng(1)
    for n in (8000, 16000, 32000):
        for p in np.geomspace(1e-4, 1.0, 12):
            rot = float(rng.uniform(0, 0.7)) * n
            imb = (m_true * rot + lam_true * n * p) / p
            records.append(FakeRecord(n, p, rot, imb))
    params, stats = fit_interaction(records)
    assert params.m == pytest.approx(m_true, rel=1e-9)
    assert params.lam == pytest.approx(lam_true, rel=1e-9)
    assert stats.pearson > 0.999999


def test_fit_interaction_rank_deficient():
    records = [FakeRecord(1000, 0.0, 0, 500) for _ in range(10)]
    with pytest.raises(FitError):
        fit_interaction(records)


# --- fit_imbalance_residual --------------------------------------------------------

def test_fit_imbalance_residual_recovers_k_of_n():
    k_by_n = {8000: 3.0e5, 16000: 7.0e5}
    points_by_n = {}
    ps = np.concatenate([np.geomspace(1e-3, 0.1, 12), np.linspace(0.15, 1, 15)])
    for n, k in k_by_n.items():
        res = ResidualParams(k=k, a=REFERENCE_RESIDUAL.a, b=REFERENCE_RESIDUAL.b)
        points_by_n[n] = [
            (p, float(fitting.eval_residual(p, REFERENCE_BASE, REFERENCE_WARP,
                                            res)))
            for p in ps]
    fits = fit_imbalance_residual(points_by_n, REFERENCE_BASE)
    for n, (warp, res, stats) in fits.items():
        assert res.k == pytest.approx(k_by_n[n], rel=1e-4)
        assert res.a == pytest.approx(REFERENCE_RESIDUAL.a, abs=1e-4)
        assert res.b == pytest.approx(REFERENCE_RESIDUAL.b, abs=1e-4)


# --- crossing points ----------------------------------------------------------------

def test_crossing_points_reference_parameters():
    # frozen from an independent scan + scipy.brentq root solve of
    # warp(base(p)) = a and = b with the published parameter set
    cross = crossing_points(REFERENCE_BASE, REFERENCE_WARP, REFERENCE_RESIDUAL)
    assert cross.p_star_a == pytest.approx(0.19611845180770865, abs=1e-8)
    assert cross.p_star_b == pytest.approx(0.688663533964051, abs=1e-8)


def test_crossing_points_target_above_range():
    res = ResidualParams(k=1.0, a=0.9, b=0.95)  # warp(base(p)) peaks ~0.375
    cross = crossing_points(REFERENCE_BASE, REFERENCE_WARP, res)
    assert cross.p_star_a is None
    assert cross.p_star_b is None


def test_crossing_points_grid_resolution_invariant():
    coarse = crossing_points(REFERENCE_BASE, REFERENCE_WARP,
                             REFERENCE_RESIDUAL, scan_points=1000)
    fine = crossing_points(REFERENCE_BASE, REFERENCE_WARP,
                           REFERENCE_RESIDUAL, scan_points=100000)
    assert coarse.p_star_a == pytest.approx(fine.p_star_a, abs=1e-9)
    assert coarse.p_star_b == pytest.approx(fine.p_star_b, abs=1e-9)


# --- k scaling -----------------------------------------------------------------------

def test_fit_k_scaling_exact_power_law():
    pairs = [(n, 2.0 * n ** 0.5) for n in (1000, 2000, 4000, 8000)]
    exponent, coefficient, r2 = fit_k_scaling(pairs)
    assert exponent == pytest.approx(0.5, rel=1e-9)
    assert coefficient == pytest.approx(2.0, rel=1e-9)
    assert r2 == pytest.approx(1.0)


def test_fit_k_scaling_constant_k():
    exponent, _, _ = fit_k_scaling([(1000, 5.0), (2000, 5.0), (4000, 5.0)])
    assert exponent == pytest.approx(0.0, abs=1e-12)


def test_fit_k_scaling_too_few_pairs():
    with pytest.raises(ValueError):
        fit_k_scaling([(1000, 1.0), (2000, 2.0)])


def test_fit_k_scaling_excludes_nonpositive_k():
    with pytest.warns(UserWarning):
        exponent, _, _ = fit_k_scaling(
            [(1000, 2.0 * 1000 ** 0.5), (2000, -1.0),
             (4000, 2.0 * 4000 ** 0.5), (8000, 2.0 * 8000 ** 0.5)])
    assert exponent == pytest.approx(0.5, rel=1e-9)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lidarbev.errors import DomainError, ShapeMismatchError
from lidarbev.losses import (
    TASK_ORDER,
    WEIGHT_SET,
    LossWeights,
    focal_loss,
    masked_box_loss,
    rotate_weights,
    smooth_l1,
    total_loss,
)

# (1 - 0.9)^2 * (-ln 0.9) evaluated with a 50-digit reference
FOCAL_09_G2 = 1.053605156578263e-3


def test_focal_perfect_prediction_is_zero():
    assert focal_loss(1.0, gamma=2.0) == 0.0


def test_focal_gamma_zero_is_cross_entropy():
    assert focal_loss(0.5, gamma=0.0) == pytest.approx(math.log(2.0), abs=1e-12)


def test_focal_frozen_reference_value():
    assert focal_loss(0.9, gamma=2.0) == pytest.approx(FOCAL_09_G2, abs=1e-15)


def test_focal_domain_errors():
    with pytest.raises(DomainError):
        focal_loss(0.0, gamma=2.0)
    with pytest.raises(DomainError):
        focal_loss(-0.1, gamma=2.0)
    with pytest.raises(DomainError):
        focal_loss(1.1, gamma=2.0)


def test_focal_mean_reduction_over_maps(rng):
    probs = rng.uniform(0.05, 1.0, (8, 8))
    want = np.mean([focal_loss(p, 2.0) for p in probs.ravel()])
    assert focal_loss(probs, 2.0) == pytest.approx(want, rel=1e-12)


@given(st.floats(min_value=1e-6, max_value=1.0 - 1e-9),
       st.floats(min_value=1e-6, max_value=1.0 - 1e-9),
       st.floats(min_value=0.0, max_value=10.0))
def test_focal_nonnegative_and_decreasing_in_p(p_lo, p_hi, gamma):
    lo, hi = sorted((p_lo, p_hi))
    assert focal_loss(lo, gamma) >= focal_loss(hi, gamma) >= 0.0


@given(st.floats(min_value=1e-3, max_value=1.0 - 1e-6),
       st.floats(min_value=0.0, max_value=5.0), st.floats(min_value=0.0, max_value=5.0))
def test_focal_decreasing_in_gamma(p, g_lo, g_hi):
    a, b = sorted((g_lo, g_hi))
    assert focal_loss(p, b) <= focal_loss(p, a) + 1e-15


def test_smooth_l1_zero_at_equality():
    assert smooth_l1(3.7, 3.7, beta=1.0) == 0.0


def test_smooth_l1_linear_branch():
    assert smooth_l1(2.0, 0.0, beta=1.0) == pytest.approx(1.5, abs=1e-15)


def test_smooth_l1_branches_agree_at_beta():
    # both branch formulas reduce to beta/2 at |d| = beta
    for beta in (0.25, 1.0, 3.5):
        quad = 0.5 * beta * beta / beta
        lin = beta - 0.5 * beta
        assert quad == lin == 0.5 * beta
        assert smooth_l1(beta, 0.0, beta=beta) == pytest.approx(0.5 * beta, abs=1e-15)


def test_smooth_l1_two_sided_derivative_gap_below_1e9():
    beta, h = 1.0, 1e-7
    left = (smooth_l1(beta, 0.0, beta) - smooth_l1(beta - h, 0.0, beta)) / h
    right = (smooth_l1(beta + h, 0.0, beta) - smooth_l1(beta, 0.0, beta)) / h
    assert abs(left - right) < 1e-7  # FD resolution; true gap is 0
    # exact one-sided slopes: d/beta -> 1 from the left, 1 from the right
    assert abs(left - 1.0) < 1e-6 and abs(right - 1.0) < 1e-6


def test_masked_box_loss_empty_mask(rng):
    pred = rng.normal(0, 1, (6, 6, 2))
    assert masked_box_loss(pred, pred, np.zeros((6, 6), bool), beta=1.0) == 0.0


def test_masked_box_loss_single_cell():
    pred = np.zeros((4, 4, 2))
    target = np.zeros((4, 4, 2))
    pred[2, 3] = (0.5, 0.5)
    mask = np.zeros((4, 4), bool)
    mask[2, 3] = True
    assert masked_box_loss(pred, target, mask, beta=1.0) == \
        pytest.approx(smooth_l1(0.5, 0.0, 1.0), abs=1e-15)


def test_masked_box_loss_matches_loop_oracle(rng):
    pred = rng.normal(0, 2, (8, 8, 2))
    target = rng.normal(0, 2, (8, 8, 2))
    mask = rng.random((8, 8)) < 0.3
    beta = 0.7
    vals = []
    for u in range(8):
        for v in range(8):
            if mask[u, v]:
                for k in range(2):
                    d = abs(pred[u, v, k] - target[u, v, k])
                    vals.append(0.5 * d * d / beta if d < beta else d - 0.5 * beta)
    want = sum(vals) / len(vals)
    assert masked_box_loss(pred, target, mask, beta) == pytest.approx(want, rel=1e-12)


def test_masked_box_loss_shape_mismatch(rng):
    with pytest.raises(ShapeMismatchError):
        masked_box_loss(np.zeros((4, 4, 2)), np.zeros((4, 5, 2)),
                        np.zeros((4, 4), bool), 1.0)


def test_total_loss_zeros_and_ones():
    weights = LossWeights.in_task_order()
    assert total_loss([0.0] * 5, weights) == 0.0
    assert total_loss([1.0] * 5, weights) == pytest.approx(4.48, abs=1e-12)


def test_total_loss_permutation_consistency(rng):
    losses = list(rng.normal(0, 3, 5))
    weights = rotate_weights(losses)
    total = total_loss(losses, weights)
    perm = rng.permutation(5)
    permuted_losses = [losses[i] for i in perm]
    permuted_weights = LossWeights(tuple(weights.per_task[i] for i in perm),
                                   tuple(weights.ranks[i] for i in perm))
    assert total_loss(permuted_losses, permuted_weights) == pytest.approx(total, rel=1e-12)


def test_total_loss_linear_in_each_component(rng):
    weights = rotate_weights([5, 4, 3, 2, 1])
    base = [5.0, 4.0, 3.0, 2.0, 1.0]
    for i in range(5):
        bumped = list(base)
        bumped[i] += 1.0
        delta = total_loss(bumped, weights) - total_loss(base, weights)
        assert delta == pytest.approx(weights.per_task[i], rel=1e-12)


def test_rotate_weights_sorted_and_reversed():
    assert rotate_weights([5, 4, 3, 2, 1]).per_task == WEIGHT_SET
    assert rotate_weights([1, 2, 3, 4, 5]).per_task == tuple(reversed(WEIGHT_SET))


def test_rotate_weights_matches_sort_then_zip_oracle(rng):
    for _ in range(50):
        losses = list(rng.normal(0, 10, 5))
        got = rotate_weights(losses)
        order = sorted(range(5), key=lambda i: (-abs(losses[i]), i))
        expect = [0.0] * 5
        for rank, task in enumerate(order):
            expect[task] = WEIGHT_SET[rank]
        assert got.per_task == tuple(expect)
        assert sorted(got.per_task, reverse=True) == list(WEIGHT_SET)


def test_rotate_weights_tie_break_by_task_order():
    got = rotate_weights([2.0, 2.0, 1.0, 2.0, 1.0])
    # kp, box, rot(sic: third tied loss is index 3), then the 1.0 pair
    assert got.per_task == (0.98, 0.95, 0.85, 0.90, 0.80)


def test_rotate_weights_uses_magnitude():
    got = rotate_weights([-10.0, 1.0, 0.0, 0.5, -2.0])
    assert got.per_task[0] == 0.98  # |-10| is the largest
    assert got.per_task[4] == 0.95  # |-2| second


def test_task_order_is_fixed():
    assert TASK_ORDER == ("keypoint", "box", "rotation", "semantic", "motion")


def test_loss_weights_reject_wrong_multiset():
    with pytest.raises(ValueError):
        LossWeights((1.0, 0.95, 0.90, 0.85, 0.80), (0, 1, 2, 3, 4))

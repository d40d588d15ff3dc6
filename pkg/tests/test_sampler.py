import collections

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lidarbev.errors import MissingRoleError
from lidarbev.sampler import (
    AugmentationSchedule,
    DatasetSpec,
    EpochPlan,
    TaskCurve,
    build_epoch_plan,
    load_plan,
    remap_index,
    select_motion_frames,
    semantic_stride_filter,
)

PAPER_SPECS = [
    DatasetSpec("kitti-det-augmented", 9400, "detection"),
    DatasetSpec("semantickitti-semantic", 9560, "semantic"),
    DatasetSpec("semantickitti-motion", 4719, "motion"),
]
SCHED = AugmentationSchedule(total_epochs=120)


def test_remap_index_examples():
    assert remap_index(5000, DatasetSpec("m", 4719, "motion")) == 281
    assert remap_index(0, DatasetSpec("d", 97, "detection")) == 0
    assert remap_index(9559, DatasetSpec("s", 9560, "semantic")) == 9559


def test_remap_index_rejects_negative():
    with pytest.raises(ValueError):
        remap_index(-1, DatasetSpec("d", 10, "detection"))


@given(st.integers(min_value=0, max_value=10**9), st.integers(min_value=1, max_value=10**5))
def test_remap_index_matches_modulo(index, length):
    assert remap_index(index, DatasetSpec("x", length, "detection")) == index % length


def test_epoch_plan_paper_lengths():
    plan = build_epoch_plan(PAPER_SPECS, epoch=0, sched=SCHED, seed=0)
    assert plan.n_iterations == 9560
    # longest dataset: every index exactly once
    assert sorted(plan.sem_idx.tolist()) == list(range(9560))
    # detection cycles 0..9399 then 0..159
    assert plan.det_idx[9399] == 9399 and plan.det_idx[9400] == 0
    assert plan.det_idx[-1] == 159
    # motion: two full cycles plus 122
    counts = collections.Counter(plan.mot_idx.tolist())
    assert all(counts[i] == 3 for i in range(122))
    assert all(counts[i] == 2 for i in range(122, 4719))


def test_epoch_plan_visit_counts_differ_by_at_most_one():
    plan = build_epoch_plan(PAPER_SPECS, epoch=1, sched=SCHED, seed=5)
    n = plan.n_iterations
    for col, length in ((plan.det_idx, 9400), (plan.mot_idx, 4719)):
        counts = collections.Counter(col.tolist())
        lo, hi = n // length, -(-n // length)
        assert set(counts.values()) <= {lo, hi}


def test_epoch_plan_equal_and_unit_lengths():
    equal = [DatasetSpec("a", 7, "detection"), DatasetSpec("b", 7, "semantic"),
             DatasetSpec("c", 7, "motion")]
    plan = build_epoch_plan(equal, 0, SCHED, seed=1)
    for col in (plan.det_idx, plan.sem_idx, plan.mot_idx):
        assert col.tolist() == list(range(7))
    ones = [DatasetSpec("a", 1, "detection"), DatasetSpec("b", 1, "semantic"),
            DatasetSpec("c", 1, "motion")]
    tiny = build_epoch_plan(ones, 0, SCHED, seed=1)
    assert tiny.n_iterations == 1
    assert tiny.det_idx[0] == tiny.sem_idx[0] == tiny.mot_idx[0] == 0


def test_epoch_plan_missing_and_duplicate_roles():
    with pytest.raises(MissingRoleError):
        build_epoch_plan(PAPER_SPECS[:2], 0, SCHED, seed=0)
    dup = PAPER_SPECS[:2] + [DatasetSpec("again", 5, "semantic")]
    with pytest.raises(MissingRoleError):
        build_epoch_plan(dup, 0, SCHED, seed=0)


def test_epoch_plan_bitwise_deterministic(tmp_path):
    a = build_epoch_plan(PAPER_SPECS, epoch=3, sched=SCHED, seed=9)
    b = build_epoch_plan(PAPER_SPECS, epoch=3, sched=SCHED, seed=9)
    for name in ("det_idx", "sem_idx", "mot_idx", "flip", "rot_deg", "dropout"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    a.save(tmp_path / "a.plan")
    b.save(tmp_path / "b.plan")
    assert (tmp_path / "a.plan").read_bytes() == (tmp_path / "b.plan").read_bytes()


def test_epoch_changes_aug_but_not_indices():
    e0 = build_epoch_plan(PAPER_SPECS, epoch=0, sched=SCHED, seed=4)
    e9 = build_epoch_plan(PAPER_SPECS, epoch=90, sched=SCHED, seed=4)
    np.testing.assert_array_equal(e0.det_idx, e9.det_idx)
    np.testing.assert_array_equal(e0.mot_idx, e9.mot_idx)
    assert not np.array_equal(e0.rot_deg, e9.rot_deg)
    assert e9.dropout[0] < e0.dropout[0]


def test_directives_respect_schedule_bounds():
    plan = build_epoch_plan(PAPER_SPECS, epoch=0, sched=SCHED, seed=2)
    _, rot_range, drop = SCHED.params_for("semantic", 0)
    assert set(np.unique(plan.flip)) <= {0, 1}
    assert np.abs(plan.rot_deg).max() <= rot_range
    assert np.all(plan.dropout == drop)


def test_progressive_schedule_non_increasing_for_segmentation():
    for role in ("semantic", "motion"):
        prev = SCHED.params_for(role, 0)
        for epoch in range(1, 120):
            cur = SCHED.params_for(role, epoch)
            assert cur[1] <= prev[1] + 1e-12  # rotation range
            assert cur[2] <= prev[2] + 1e-12  # dropout
            prev = cur
    # detection curve held constant by default
    assert SCHED.params_for("detection", 0) == SCHED.params_for("detection", 119)


def test_schedule_endpoint_values():
    assert SCHED.params_for("semantic", 0) == (0.5, 15.0, 0.10)
    flip, rot, drop = SCHED.params_for("semantic", 119)
    assert rot == pytest.approx(5.0, abs=1e-12)
    assert drop == pytest.approx(0.02, abs=1e-12)
    assert flip == 0.5


def test_task_curve_validation():
    with pytest.raises(ValueError):
        TaskCurve(flip_prob=(1.5, 0.5))
    with pytest.raises(ValueError):
        TaskCurve(rot_range_deg=(180.0, 5.0))


def test_plan_save_load_round_trip(tmp_path):
    plan = build_epoch_plan(PAPER_SPECS, epoch=2, sched=SCHED, seed=7)
    path = tmp_path / "epoch2.plan"
    plan.save(path)
    rows = load_plan(path)
    assert len(rows) == plan.n_iterations
    for row, orig in zip(rows[:100], list(plan.rows())[:100]):
        assert row.iteration == orig.iteration
        assert (row.det_idx, row.sem_idx, row.mot_idx) == \
            (orig.det_idx, orig.sem_idx, orig.mot_idx)
        assert row.flip == orig.flip
        assert abs(row.rot_deg - orig.rot_deg) < 1e-6
        assert abs(row.dropout - orig.dropout) < 1e-6


def test_select_motion_frames_examples():
    assert select_motion_frames([0, 5, 100], delta=10) == [2]
    assert select_motion_frames([0, 1, 0, 3], delta=0) == [1, 3]
    with pytest.raises(ValueError):
        select_motion_frames([1, -2], delta=0)


@settings(max_examples=50)
@given(st.lists(st.integers(min_value=0, max_value=1000), max_size=50),
       st.integers(min_value=0, max_value=1000))
def test_select_motion_frames_matches_filter_oracle(counts, delta):
    expect = [i for i, c in enumerate(counts) if c > delta]
    assert select_motion_frames(counts, delta) == expect


def test_semantic_stride_filter_examples():
    assert semantic_stride_filter(list(range(10)), 5) == [0, 5]
    assert semantic_stride_filter(list(range(7)), 1) == list(range(7))
    assert len(semantic_stride_filter(list(range(100)), 5)) == 20
    with pytest.raises(ValueError):
        semantic_stride_filter([1, 2], 0)

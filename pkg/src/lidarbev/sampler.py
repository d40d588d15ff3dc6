"""Asynchronous multi-dataset epoch planning.

Three datasets of unequal length (detection / semantic / motion) train
jointly by letting the batch counter run over the longest dataset and
remapping it into each shorter one by modulo, so the longest dataset is seen
exactly once per epoch while the others cycle. Plans also carry per-iteration
augmentation directives drawn from a progressive schedule whose segmentation
curves decay with epoch.

This module only plans and bookkeeps; it never touches a training loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import MissingRoleError

ROLES = ("detection", "semantic", "motion")


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    length: int
    role: str

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("dataset length must be >= 1")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")


@dataclass(frozen=True)
class TaskCurve:
    """Linear (start, end) ramps over the epoch range for one task."""

    flip_prob: tuple = (0.5, 0.5)
    rot_range_deg: tuple = (15.0, 5.0)
    dropout: tuple = (0.10, 0.02)

    def __post_init__(self):
        for lo, hi, name in ((0.0, 1.0, "flip_prob"), (0.0, 180.0, "rot_range_deg"),
                             (0.0, 1.0, "dropout")):
            vals = tuple(getattr(self, name))
            object.__setattr__(self, name, vals)
            if len(vals) != 2:
                raise ValueError(f"{name} must be a (start, end) pair")
            for v in vals:
                if not (lo <= v <= hi) or (name == "rot_range_deg" and v >= 180.0):
                    raise ValueError(f"{name} value {v} outside [{lo}, {hi})")

    def at(self, epoch: int, total_epochs: int) -> tuple:
        """(flip_prob, rot_range_deg, dropout) at the given epoch."""
        if total_epochs <= 1:
            t = 0.0
        else:
            t = min(max(epoch, 0), total_epochs - 1) / (total_epochs - 1)
        interp = lambda pair: pair[0] + (pair[1] - pair[0]) * t
        return interp(self.flip_prob), interp(self.rot_range_deg), interp(self.dropout)


@dataclass(frozen=True)
class AugmentationSchedule:
    """Per-task augmentation curves.

    Defaults implement the progressive strategy: segmentation tasks start
    aggressive (rotation +-15 deg, 10% dropout) and decay linearly to
    (+-5 deg, 2%) by the final epoch, while detection augmentation stays
    constant throughout.
    """

    total_epochs: int = 120
    detection: TaskCurve = TaskCurve(flip_prob=(0.5, 0.5), rot_range_deg=(10.0, 10.0),
                                     dropout=(0.05, 0.05))
    semantic: TaskCurve = TaskCurve()
    motion: TaskCurve = TaskCurve()

    def __post_init__(self):
        if self.total_epochs < 1:
            raise ValueError("total_epochs must be >= 1")

    def params_for(self, role: str, epoch: int) -> tuple:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        return getattr(self, role).at(epoch, self.total_epochs)


class PlanRow(NamedTuple):
    iteration: int
    det_idx: int
    sem_idx: int
    mot_idx: int
    flip: int
    rot_deg: float
    dropout: float


@dataclass(frozen=True)
class EpochPlan:
    """One epoch of remapped indices plus augmentation directives.

    The directive columns (flip, rot_deg, dropout) drive the segmentation
    tasks, which own the progressive part of the schedule; detection
    augmentation parameters are constant per epoch and available from the
    schedule directly.
    """

    epoch: int
    seed: int
    det_idx: np.ndarray
    sem_idx: np.ndarray
    mot_idx: np.ndarray
    flip: np.ndarray
    rot_deg: np.ndarray
    dropout: np.ndarray

    def __post_init__(self):
        n = self.det_idx.shape[0]
        for name in ("det_idx", "sem_idx", "mot_idx", "flip", "rot_deg", "dropout"):
            col = getattr(self, name)
            if col.shape != (n,):
                raise ValueError(f"column {name} has shape {col.shape}, expected ({n},)")
            col.flags.writeable = False

    @property
    def n_iterations(self) -> int:
        return self.det_idx.shape[0]

    def rows(self) -> Iterable[PlanRow]:
        for i in range(self.n_iterations):
            yield PlanRow(i, int(self.det_idx[i]), int(self.sem_idx[i]),
                          int(self.mot_idx[i]), int(self.flip[i]),
                          float(self.rot_deg[i]), float(self.dropout[i]))

    def save(self, path) -> None:
        """Line-oriented text: ``iter det_idx sem_idx mot_idx flip rot_deg dropout``."""
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            for row in self.rows():
                fh.write(f"{row.iteration} {row.det_idx} {row.sem_idx} {row.mot_idx} "
                         f"{row.flip} {row.rot_deg:.6f} {row.dropout:.6f}\n")


def load_plan(path) -> list[PlanRow]:
    """Parse a plan file back into rows (the format written by EpochPlan.save)."""
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            if not line.strip():
                continue
            it, det, sem, mot, flip, rot, drop = line.split()
            rows.append(PlanRow(int(it), int(det), int(sem), int(mot),
                                int(flip), float(rot), float(drop)))
    return rows


def remap_index(index: int, spec: DatasetSpec) -> int:
    """Cycle a global batch index into this dataset: index mod length."""
    if index < 0:
        raise ValueError("index must be non-negative")
    return index % spec.length


def build_epoch_plan(specs: Sequence[DatasetSpec], epoch: int,
                     sched: AugmentationSchedule, seed: int) -> EpochPlan:
    """Plan one epoch over the longest dataset.

    N = max dataset length; iteration i carries i mod L for each role.
    Directive sampling is keyed on (seed, epoch), so plans are bitwise
    reproducible and the index columns never depend on the epoch.
    """
    by_role = {}
    for spec in specs:
        if spec.role in by_role:
            raise MissingRoleError(f"duplicate spec for role {spec.role!r}")
        by_role[spec.role] = spec
    missing = [r for r in ROLES if r not in by_role]
    if missing:
        raise MissingRoleError(f"missing dataset specs for roles: {missing}")

    n = max(spec.length for spec in by_role.values())
    i = np.arange(n, dtype=np.int64)
    det = i % by_role["detection"].length
    sem = i % by_role["semantic"].length
    mot = i % by_role["motion"].length

    flip_p, rot_range, drop = sched.params_for("semantic", epoch)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(epoch)]))
    flip = (rng.random(n) < flip_p).astype(np.uint8)
    rot = rng.uniform(-rot_range, rot_range, n)
    dropout = np.full(n, drop)
    return EpochPlan(epoch=epoch, seed=seed, det_idx=det, sem_idx=sem, mot_idx=mot,
                     flip=flip, rot_deg=rot, dropout=dropout)


def select_motion_frames(per_frame_moving_pixel_counts: Sequence[int], delta: int) -> list[int]:
    """Frame ids whose moving-pixel count strictly exceeds delta, ascending."""
    counts = list(per_frame_moving_pixel_counts)
    if any(c < 0 for c in counts):
        raise ValueError("moving-pixel counts must be non-negative")
    return [i for i, c in enumerate(counts) if c > delta]


def semantic_stride_filter(frame_ids: Sequence, stride: int) -> list:
    """Every stride-th id starting at position 0."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return list(frame_ids[::stride])

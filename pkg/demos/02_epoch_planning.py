#!/usr/bin/env python3
"""Walk-through: asynchronous epoch planning across unequal datasets.

Three datasets train jointly; the batch counter runs over the longest one,
the others cycle by modulo. Augmentation directives come from a progressive
schedule that relaxes the segmentation augmentations as training advances.
"""

import collections

from lidarbev import (
    AugmentationSchedule,
    DatasetSpec,
    build_epoch_plan,
    load_plan,
    select_motion_frames,
    semantic_stride_filter,
)

specs = [
    DatasetSpec("kitti-det-augmented", 9400, "detection"),
    DatasetSpec("semantickitti-semantic", 9560, "semantic"),
    DatasetSpec("semantickitti-motion", 4719, "motion"),
]
sched = AugmentationSchedule(total_epochs=120)

plan = build_epoch_plan(specs, epoch=0, sched=sched, seed=0)
print(f"epoch plan: {plan.n_iterations} iterations (longest dataset)")
counts = collections.Counter(plan.mot_idx.tolist())
print(f"motion dataset visit counts: min {min(counts.values())}, "
      f"max {max(counts.values())} (differ by at most one)")

# The progressive schedule: segmentation augmentations decay, detection stays put.
for epoch in (0, 60, 119):
    flip, rot, drop = sched.params_for("semantic", epoch)
    print(f"epoch {epoch:3d}: semantic rotation +-{rot:.1f} deg, dropout {drop:.3f}")

plan.save("/tmp/demo_epoch0.plan")
rows = load_plan("/tmp/demo_epoch0.plan")
print(f"plan file round trip: {len(rows)} rows, first = {rows[0]}")

# Frame selection for the segmentation tasks.
moving_pixel_counts = [0, 12, 430, 88, 1207, 3, 256]
picked = select_motion_frames(moving_pixel_counts, delta=100)
print(f"motion frames with >100 moving pixels: {picked}")
every_fifth = semantic_stride_filter(list(range(40)), stride=5)
print(f"semantic frames (stride 5): {every_fifth}")

# %% [markdown]
# # Evaluating instance predictions
#
# AJI, object Dice, F1 at IoU 0.5 and mAP over IoU 0.50:0.95.

# %%
import numpy as np

from gradanom import InstanceSet, evaluate, synth_scene

gt_scene = synth_scene("random-cluster", seed=2, height=96, width=96)
gt = InstanceSet.from_scene(gt_scene)

# %% [markdown]
# A perfect prediction, then one with a shifted instance and a missing one.

# %%
print(evaluate(gt, InstanceSet.from_scene(gt_scene, [1.0] * len(gt_scene))).to_dict()["map"])

masks = [inst.mask for inst in gt_scene][:-1]
masks[0] = np.roll(masks[0], 2, axis=1)
pred = InstanceSet(tuple(masks), tuple(np.linspace(0.9, 0.5, len(masks))))
report = evaluate(gt, pred)
print(f"AJI {report.aji:.3f}  Dice {report.dice:.3f}  F1 {report.f1:.3f}  mAP {report.map:.3f}")
for row in report.ap_table:
    print(f"  AP@{row['iou']:.2f} = {row['ap']:.3f}")

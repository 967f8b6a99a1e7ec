# %% [markdown]
# # Anomaly-aware losses
#
# The anomaly maps supervise a predicted map (mean squared error per map,
# summed over maps) and reweight a per-pixel cross-entropy.

# %%
import numpy as np

from gradanom import (
    GammConfig,
    ProbMap,
    gradient_anomaly_loss,
    gradient_anomaly_maps,
    mask_refinement_loss,
    pixel_ce,
    synth_scene,
    total_loss,
)

scene = synth_scene("cross-bars", seed=3, height=64, width=64)
joint, maps = gradient_anomaly_maps(scene, GammConfig(ws=5, f_ga=0.5))

# %%
rng = np.random.default_rng(0)
noisy = [np.clip(m.values + rng.normal(0, 0.05, m.values.shape), 0, None) for m in maps]
print("L_GA perfect:", gradient_anomaly_loss(maps, [m.values for m in maps]))
print("L_GA noisy:  ", gradient_anomaly_loss(maps, noisy))

# %%
fg = scene.mask_stack().any(axis=0)
p_fg = np.where(fg, 0.7, 0.2)
ce = pixel_ce(ProbMap(np.stack([1 - p_fg, p_fg])), fg.astype(int))
literal = mask_refinement_loss(ce, joint, "literal")
offset = mask_refinement_loss(ce, joint, "offset")
print(f"L_MR literal {literal:.3f}  offset {offset:.3f}  plain CE {ce.sum():.3f}")

# %%
print(total_loss(0.01, literal, reg=0.2, cls=0.1, rpn=0.05))

# %% [markdown]
# # Radial fields of overlapping instances
#
# Every instance gets a paraboloid centred on its centroid; the direction of
# its gradient points radially outward.  Where instances overlap, a pixel
# carries one direction per instance.

# %%
import numpy as np

from gradanom import build_field_stack, instance_field, synth_scene

scene = synth_scene("overlap-pair", seed=0, height=64, width=64)
print([(inst.id, inst.area) for inst in scene])

# %%
field = instance_field(scene.instances[0])
print("centroid", field.centroid)
print("distance range", np.nanmin(field.distance_map), np.nanmax(field.distance_map))

# %% [markdown]
# The stacked view: pixels inside the lens hold two layers.

# %%
stack = build_field_stack(scene)
counts = stack.layer_count()
print("pixels with 0/1/2 layers:", [int((counts == k).sum()) for k in range(3)])
y, x = np.argwhere(counts == 2)[0]
print("layers at", (int(x), int(y)), stack.layers(int(x), int(y)))

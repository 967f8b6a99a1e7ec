# %% [markdown]
# # Reference vs optimized window statistics
#
# The reference path revisits every pixel of every window, so its cost grows
# with ws^2.  The optimized path reads window sums from integer summed-area
# tables and a running-max filter, so its cost barely moves with ws.

# %%
from gradanom.bench import run_bench

report = run_bench(256, [3, 5, 7, 9, 12], repeats=2)
print(f"{'ws':>3} {'reference':>10} {'optimized':>10} {'speedup':>8}")
for ws in report.ws:
    print(f"{ws:>3} {report.reference_s[ws]:>9.3f}s {report.optimized_s[ws]:>9.3f}s {report.speedup[ws]:>7.1f}x")

# %% [markdown]
# # Calibration on simulated collisions
#
# Draw states and parameters from the prior, simulate the evidence, run
# inference, and count how often the 95% interval for v contains the truth.
# With 200 cases the count should land in [0.90, 0.99].  This takes a few
# minutes; pass a smaller n to try it quickly (the minimum is 100).

# %%
import sys

from crashrecon import McmcConfig, PriorSpec
from crashrecon.oracle import calibration_experiment

n = int(sys.argv[1]) if len(sys.argv) > 1 else 200
rep = calibration_experiment(n, PriorSpec(), McmcConfig(n_chains=1, iterations=10_000), seed=7)

# %%
width = rep.intervals[:, 1] - rep.intervals[:, 0]
below = (rep.truths < rep.intervals[:, 0]).mean()
above = (rep.truths > rep.intervals[:, 1]).mean()
print(f"coverage {rep.coverage:.3f} over {len(rep.truths)} cases")
print(f"truth below interval {below:.3f}, above {above:.3f}")
print(f"median interval width {sorted(width)[len(width) // 2] * 3.6:.1f} km/h")

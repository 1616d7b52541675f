# %% [markdown]
# # Checking the sampler against brute-force quadrature
#
# With the measurement-model parameters fixed at their means the posterior
# lives in five dimensions, small enough to integrate on a grid.  The grid
# answer is an independent reference for the MCMC output.

# %%
from crashrecon import McmcConfig, PriorSpec, probability_of_necessity, run_inference
from crashrecon.casefile import load_bundled_fixtures
from crashrecon.oracle import GridConfig, grid_posterior

spec = PriorSpec().with_pinned_params()
cases, truths = load_bundled_fixtures()

# %%
for case in cases[:3]:
    grid = grid_posterior(case, spec, GridConfig(x=64, v=48, tp=8, ts=8, f=12), v_star_kmh=60)
    post = run_inference(case, spec, McmcConfig(iterations=20000, seed=0))
    mv = post.pooled("v").mean()
    pn = probability_of_necessity(post, 60)
    print(f"{case.id}: truth v {truths[case.id].v:.2f}  grid {grid.mean_v:.2f}  mcmc {mv:.2f}"
          f"  | PN grid {grid.pn:.3f} mcmc {pn:.3f}")

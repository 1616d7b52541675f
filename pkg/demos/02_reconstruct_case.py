# %% [markdown]
# # Reconstructing one collision
#
# Given a skid mark, a post-impact skid, the pedestrian throw distance and
# the injury, the sampler returns posterior draws of the pre-crash state.

# %%
from crashrecon import Case, McmcConfig, PriorSpec, psrf, run_inference, summarize

case = Case("demo", speed_limit_kmh=50, s1_m=28.0, s2_m=9.0, throw_m=18.0,
            severity="serious")
post = run_inference(case, PriorSpec(), McmcConfig(n_chains=3, burn_in=2000,
                                                  iterations=20000, seed=1))

# %%
for q in ("v", "x", "f", "vi"):
    s = summarize(post, q)
    print(f"{q:>2}: mean {s.mean:7.2f}  95% [{s.q025:7.2f}, {s.q975:7.2f}]")
print("PSRF v, x, f:", [round(psrf(post, q), 3) for q in ("v", "x", "f")])
print("acceptance:", {k: round(float(a.mean()), 2) for k, a in post.acceptance.items()})

# %% [markdown]
# Speeds come out in m/s; multiply by 3.6 for km/h.

# %%
print(f"posterior mean speed {summarize(post, 'v').mean * 3.6:.1f} km/h")

# %% [markdown]
# # Would the pedestrian have been hit at the limit?
#
# Each posterior draw is replayed with the initial speed set to the limit,
# keeping distance, reaction time, transition time and friction.  The
# probability of necessity is the share of replays where the car stops in
# time.  Summing it over cases estimates how many collisions strict
# compliance would have avoided.

# %%
from crashrecon import (Case, McmcConfig, PriorSpec, accident_reduction, build_report,
                        run_inference)

cases = [
    Case("a", speed_limit_kmh=60, s1_m=35.0, s2_m=6.0, throw_m=20.0, severity="serious"),
    Case("b", speed_limit_kmh=60, s1_m=22.0, throw_m=9.0, severity="slight"),
    Case("c", speed_limit_kmh=50, s1_m=45.0, s2_m=20.0, throw_m=35.0, severity="fatal"),
]
cfg = McmcConfig(n_chains=2, burn_in=2000, iterations=10000, seed=3)
reports = [build_report(run_inference(c, PriorSpec(), cfg), c, PriorSpec()) for c in cases]

# %%
for r in reports:
    print(f"{r.case_id}: P(speeding) {r.p_speeding:.2f}  PN {r.pn:.2f}  "
          f"v {r.v_kmh.mean:.1f} km/h  method 1 {r.method1_v_kmh:.1f} km/h")
print(f"expected collisions avoided: {accident_reduction(reports).total:.2f}")

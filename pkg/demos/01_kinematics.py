# %% [markdown]
# # Braking kinematics and the injury model
#
# A car travelling at speed v sees a pedestrian at distance x.  The driver
# reacts for tp seconds at full speed, then the brakes lock and the car
# decelerates at f*g.  For the first ts seconds the tyres leave no mark.
# This script walks through the forward model that every other piece of
# the package is built on.

# %%
import numpy as np

from crashrecon import KinematicState, collision_outcome, impact_speed
from crashrecon.model import InjuryParams, severity_probs

state = KinematicState(x=40.0, v=20.0, tp=1.2, ts=0.3, f=0.7)
out = collision_outcome(state)
print(f"impact speed {out.vi * 3.6:.1f} km/h")
print(f"skid before impact (theoretical) {out.s1_th:.2f} m")
print(f"skid after impact (theoretical)  {out.s2_th:.2f} m")

# %% [markdown]
# Impact speed against the initial distance.  Inside the reaction distance
# the car hits at full speed; past the stopping distance it never reaches
# the pedestrian.

# %%
xs = np.linspace(0, 80, 9)
for x in xs:
    vi = impact_speed(state.replace(x=float(x)))
    print(f"x = {x:5.1f} m  vi = {vi * 3.6:6.2f} km/h")

# %% [markdown]
# The injury model is a cumulative logit in impact speed (km/h).

# %%
params = InjuryParams(a1=4.07, a2=7.21, b_inj=0.095)
for kmh in (20, 40, 60, 80):
    p = severity_probs(float(kmh), params)
    print(f"{kmh:3d} km/h  slight {p[0]:.3f}  serious {p[1]:.3f}  fatal {p[2]:.3f}")

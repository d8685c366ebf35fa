"""The quintic (L2-critical) case on the line: dispersion below the critical mass, collapse above.

For mu = 2 the energy is bounded below only up to m = pi sqrt(3) / 2 ~ 2.72.
Below it the flow spreads the mass out (energy stays near zero); above it the
flow concentrates and the discrete energy falls without bound until the
mesh can no longer resolve the profile.
"""

# %%
import math

from graphnls import SolverConfig, line, solve_ground_state

print(f"critical mass pi*sqrt(3)/2 = {math.pi * math.sqrt(3) / 2:.5f}")
cfg = SolverConfig(h=0.01, L=40.0)

# %%
for m in (2.0, 2.5, 3.0):
    rep = solve_ground_state(line(), m, 2.0, cfg)
    print(f"m={m:.1f}  {rep.status:<10} E={rep.energy:.4e}  iterations={rep.iterations}")

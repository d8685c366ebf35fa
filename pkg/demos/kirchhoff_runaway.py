"""Without any attractive term the star has no ground state: the soliton escapes.

On the free (Kirchhoff) three-star the infimum at mass 1 equals the line
level -1/48 but is not attained. A finite truncation parks the soliton far
out on one edge; lengthening the truncation pushes the energy down towards
-1/48 from above and the solver classifies the result as RUNAWAY.
"""

# %%
from graphnls import SolverConfig, solve_ground_state, star, t_mu

graph = star(3)
print(f"line level -t(1) = {-t_mu(1.0, 1.0):.8f}")

# %% Coarser mesh than the acceptance setting keeps this demo quick
for L in (20.0, 40.0, 80.0):
    rep = solve_ground_state(graph, 1.0, 1.0, SolverConfig(h=0.02, L=L))
    d = rep.diagnostics
    print(f"L={L:5.0f}  {rep.status:<9} E={rep.energy:.8f}  concentration tau={d.tau_estimate:.3f}  {d.classification}")

# %% An explicit witness: soliton profiles pushed down one edge
from graphnls import runaway_witness

energies = runaway_witness(graph, 1.0, 1.0, [5, 10, 20, 30], h=0.02)
print("witness energies:", [f"{E:.8f}" for E in energies])

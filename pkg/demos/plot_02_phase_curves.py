"""
Visit probability across the phase transition
=============================================

Closed-form q(p) against Monte Carlo for the three parameter sets of the
coalescing family, written as CSV for re-plotting.
"""

# %%
import csv
import sys

from tcba import ModelParams, stats, theory

TRIALS = 4000
sets = {"BA": (0, 0, 0), "green": (1 / 8, 3 / 4, 0), "orange": (1 / 4, 1 / 2, 3 / 4)}

# %%
# The critical density is a rational function of (a, b, x).
for name, abx in sets.items():
    print(name, "p* =", theory.p_star_exact(*abx))

# %%
# Below p* every site is visited (q = 1); above it q follows the larger
# root of g. The simulation truncates to n particles, so it slightly
# underestimates q, most visibly close to p*.
w = csv.writer(sys.stdout, lineterminator="\n")
w.writerow(["set", "p", "q_hat", "stderr", "q_theory"])
for name, abx in sets.items():
    for p in (0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95):
        prm = ModelParams(*abx, p)
        e = stats.estimate_q(prm, 500, TRIALS, seed=1)
        w.writerow([name, p, f"{e.value:.4f}", f"{e.stderr:.4f}", f"{theory.q_theory(prm):.4f}"])

"""
Restricted runs on a shared tape
================================

Runs restricted to sub-intervals read the same pre-sampled reactions, which
couples them pathwise. Two consequences: visits to the origin are monotone in
the interval length, and the blockade surplus N is superadditive.
"""

# %%
import numpy as np

from tcba import ModelParams, run_restricted, sample_configuration, sample_tape
from tcba import harness, stats, theory

params = ModelParams(0.2, 0.3, 0.5, 0.45)
rng = np.random.default_rng(7)
cfg = sample_configuration(params, 40, rng=rng)
tape = sample_tape(cfg, params, rng=rng)

# %%
# Visits of 0 by the runs on particles 1..k never switch off as k grows.
visits = [bool(run_restricted(cfg, params, tape, 1, k, probe=0.0).probe_visits) for k in range(1, 41)]
print("".join("x" if v else "." for v in visits))

# %%
# N(j, k) = surviving original blockades minus surviving sharp arrows.
whole = stats.block_counts(cfg, params, tape, 1, 40).N
parts = stats.block_counts(cfg, params, tape, 1, 17).N + stats.block_counts(cfg, params, tape, 18, 40).N
print(f"N(1,40) = {whole} >= N(1,17) + N(18,40) = {parts}")

bad, used = harness.superadditivity_violations(None, 2000, 40, seed=3)
print(f"{bad} violations in {used} random trials")

# %%
# E N_k > 0 for some k is the survival criterion; for k = 1 it is explicit.
for p in (0.3, 0.8):
    prm = params.with_p(p)
    e = stats.estimate_EN(prm, 1, 20000, seed=4)
    print(f"p={p}: E N_1 = {e.value:.3f} +- {e.stderr:.3f}, formula {theory.expected_N1(prm):.3f}")

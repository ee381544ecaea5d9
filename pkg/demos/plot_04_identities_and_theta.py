"""
Collision identities and blockade survival
==========================================

Measure the fate of the first particle and compare with the identities that
lead to the closed form, then settle which map sends q to the survival
probability of a blockade at the origin.
"""

# %%
from tcba import ModelParams, harness

params = ModelParams(1 / 8, 3 / 4, 0, 0.4)
for r in harness.check_identities(params, None, 500, 20000, seed=1):
    print(f"{r.check_id:14s} observed {r.observed:+.5f} expected {r.expected:+.5f} "
          f"tol {r.tolerance:.5f} {'ok' if r.passed else 'MISS'}")

# %%
# With a blockade forced at 0 and independent sides, it survives iff neither
# side visits it: theta = (1 - q)^2. The alternative 1 - q^2 is far off.
r = harness.check_theta_relation(ModelParams(0, 0, 0, 0.5), None, 500, 10000, seed=2)
print(r.detail["verdict"], {k: round(v, 2) for k, v in r.detail["z"].items()})

"""
One realization, event by event
===============================

Sample a one-sided configuration, resolve every collision exactly and look at
what reached the origin.
"""

# %%
# A configuration is a list of positions on (0, inf) with velocities in
# {-1, 0, +1}. Blockades (velocity 0) appear with probability p.
import io

import numpy as np

from tcba import (Lazy, ModelParams, Tape, classify_first_visit, record_tape, run,
                  sample_configuration)

params = ModelParams(a=0.2, b=0.3, x=0.5, p=0.4)
rng = np.random.default_rng(2024)
cfg = sample_configuration(params, 12, rng=rng)
print("positions ", np.round(cfg.position, 2))
print("velocities", cfg.velocity)

# %%
# The lazy backend draws each reaction as it happens. A probe at 0 records
# every arrow that crosses it.
log = run(cfg, params, Lazy(rng), probe=0.0)
for ev in log.events:
    gen = f" -> blockade {ev.generated}" if ev.generated is not None else ""
    print(f"t={ev.time:6.3f} at {ev.location:6.3f}: {ev.kind.name:14s} {ev.left}-{ev.right} "
          f"{ev.outcome.name}{gen}")

print("survivors:", [(s.particle, s.velocity.name, s.quiver) for s in log.survivors])
print("first visit:", classify_first_visit(log).value)

# %%
# Whatever the lazy run drew can be written down as a reaction tape; running
# again from that tape gives back the same log.
tape = record_tape(cfg, log)
assert run(cfg, params, Tape(tape), probe=0.0) == log

buf = io.StringIO()
log.dump_jsonl(buf)
print(buf.getvalue().splitlines()[0])

"""Independent oracles shared by the unit and acceptance tests."""

import mpmath as mp


def mp_q(a, b, x, p, dps=50):
    """Visit probability from the largest root of g's numerator, via mpmath.

    Returns 1 when that root is >= 1 (the subcritical branch).
    """
    with mp.workdps(dps):
        a, b, x, p = (mp.mpf(str(v)) for v in (a, b, x, p))
        c = 1 - a - b
        # numerator of g(p, v): (1-p) - 2(1-x) p v - (b + c p)(1-x) v^2
        roots = mp.polyroots([-(b + c * p) * (1 - x), -2 * (1 - x) * p, 1 - p], maxsteps=200, extraprec=100)
        top = max(mp.re(r) for r in roots)
        return float(min(top, mp.mpf(1)))

"""Closed forms for the visit probability, its roots and the identities around it.

Formulas are written as printed, without algebraic simplification, so that a
transcription slip shows up against the simulation rather than being absorbed
into a rewrite. The one derivative that is misprinted is available in both the
printed and the corrected form.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction

from .core import ModelParams


class DegenerateDenominator(ZeroDivisionError):
    """The root formula divides by zero (p = 0 together with b = 0)."""


class CZero(ValueError):
    """The identity needs c = 1 - (a + b) > 0."""


def _abx(params: ModelParams):
    return params.a, params.b, params.x


def g(params: ModelParams, u: float, v: float) -> float:
    a, b, x = _abx(params)
    num = 1 - u - 2 * (1 - x) * u * v - b * (1 - x) * v**2 - (1 - (a + b)) * (1 - x) * u * v**2
    den = 2 - a + b * (1 - x) * (2 - v) * v
    return num / den


def dg_du(params: ModelParams, u: float, v: float) -> float:
    a, b, x = _abx(params)
    return -(v**2 * (1 - x) * (1 - (a + b)) + 2 * v * (1 - x) + 1) / (
        2 - a + b * (2 - v) * v * (1 - x)
    )


def dg_dv_printed(params: ModelParams, u: float, v: float) -> float:
    """The v-derivative with the sign inside the squared denominator as printed."""
    a, b, x = _abx(params)
    return -(
        2 * (1 - x) * ((2 - a) * u + b * (1 - u)) * ((1 - a) * v + b * v**2 * (1 - x) + 1)
    ) / (2 - a - b * (2 - v) * v * (1 - x)) ** 2


def dg_dv(params: ModelParams, u: float, v: float) -> float:
    """The v-derivative of ``g``; the squared factor is ``g``'s own denominator."""
    a, b, x = _abx(params)
    return -(
        2 * (1 - x) * ((2 - a) * u + b * (1 - u)) * ((1 - a) * v + b * v**2 * (1 - x) + 1)
    ) / (2 - a + b * (2 - v) * v * (1 - x)) ** 2


def p_star(params: ModelParams) -> float:
    a, b, x = _abx(params)
    return (1 - b * (1 - x)) / (4 - 3 * x - (a + b) * (1 - x))


def p_star_exact(a, b, x) -> Fraction:
    """Same expression in rational arithmetic; arguments may be Fractions or strings."""
    a, b, x = Fraction(a), Fraction(b), Fraction(x)
    return (1 - b * (1 - x)) / (4 - 3 * x - (a + b) * (1 - x))


def discriminant(params: ModelParams, p: float) -> float:
    """The quantity under the square root in the root formula."""
    a, b, x = _abx(params)
    return (1 - x) * (b * (1 - p) ** 2 - p * (a * (1 - p) + p * x - 1))


def discriminant_lower_bound(params: ModelParams, p: float) -> float:
    """``b(1-p) + p^2(1-x)``, a strict lower bound for ``discriminant/(1-x)``."""
    return params.b * (1 - p) + p**2 * (1 - params.x)


def q_roots(params: ModelParams, p: float) -> tuple[float, float]:
    """``(q_minus, q_plus)``, the two roots of ``v -> g(p, v)``."""
    a, b, x = _abx(params)
    den = (1 - x) * ((1 - a) * p + b * (1 - p))
    if den == 0:
        raise DegenerateDenominator(f"root denominator vanishes at p={p}, b={b}")
    root = math.sqrt(discriminant(params, p))
    return (-p * (1 - x) - root) / den, (-p * (1 - x) + root) / den


def q_theory(params: ModelParams, p: float | None = None) -> float:
    p = params.p if p is None else p
    if p <= p_star(params):
        return 1.0
    return q_roots(params, p)[1]


def pc_upper_bound(params: ModelParams) -> float:
    return 1.0 / (2.0 - params.x)


def expected_N1(params: ModelParams, p: float | None = None) -> float:
    p = params.p if p is None else p
    return p - (1 - p) / (1 - params.x)


def theta_independent(q: float) -> float:
    """Blockade survival if the two one-sided processes are independent."""
    return (1 - q) ** 2


def theta_printed(q: float) -> float:
    """The alternative map ``1 - q^2``."""
    return 1 - q**2


def p_rml(params: ModelParams, p: float, q: float) -> float:
    """Closed form for P(first particle is a right arrow annihilated by a left arrow)."""
    a, b, x = _abx(params)
    c = 1 - (a + b)
    return c * (p * q**2 * (1 - x) - 2 * p * q * (1 - x) - p + 1) / (
        -a + b * (2 - q) * q * (1 - x) + 2
    )


def s_r_theory(params: ModelParams, p: float | None = None) -> tuple[float, float, float, float]:
    """``(s, r, p_hat, p_rml)`` at ``q = q_theory(params, p)``."""
    p = params.p if p is None else p
    c = 1 - (params.a + params.b)
    if c <= 0:
        raise CZero("closed forms for s and r need c > 0")
    q = q_theory(params, p)
    prml = p_rml(params, p, q)
    p_hat = params.b / c * prml
    s = 0.5 * (p + p_hat) * (1 - params.x) * q**2
    r = (p + p_hat) * (1 - params.x) * q * (1 - q)
    return s, r, p_hat, prml


def p_left_visit(p: float) -> float:
    """P(origin visited and the first particle is a left arrow)."""
    return (1 - p) / 2


def p_blockade_visit(params: ModelParams, p: float, q: float) -> float:
    """P(origin visited and the first particle is a blockade)."""
    x = params.x
    return x * p * q + (1 - x) * p * q**2


def p_right_visit(params: ModelParams, p: float, q: float, prml: float, s: float) -> float:
    """P(origin visited and the first particle is a right arrow)."""
    a, b = params.a, params.b
    c = 1 - (a + b)
    if c <= 0:
        raise CZero("the right-arrow term needs c > 0")
    return (q + (a / 2) / c + (b / c) * p_blockade_visit(params, p, q) / p) * prml + s


def p_rml_from_sr(params: ModelParams, p: float, s: float, r: float) -> float:
    """First form of the mutual-annihilation probability, in terms of s and r."""
    a, b = params.a, params.b
    c = 1 - (a + b)
    if c <= 0:
        raise CZero("needs c > 0")
    return ((1 - p) / 2 - s - r) / (1 + (a / 2) / c + b / c)


@dataclass(frozen=True)
class TheoryPoint:
    params: ModelParams
    p_star: float
    q: float
    q_plus: float | None
    q_minus: float | None
    discriminant: float

    def to_dict(self) -> dict:
        d = asdict(self)
        prm = d.pop("params")
        return {
            "a": prm["a"], "b": prm["b"], "x": prm["x"], "p": prm["p"],
            "p_star": self.p_star, "q": self.q, "q_plus": self.q_plus,
            "q_minus": self.q_minus, "discriminant": self.discriminant,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def theory_point(params: ModelParams) -> TheoryPoint:
    p = params.p
    try:
        qm, qp = q_roots(params, p)
    except DegenerateDenominator:
        qm = qp = None
    return TheoryPoint(params, p_star(params), q_theory(params), qp, qm, discriminant(params, p))

from fractions import Fraction

import mpmath as mp
import pytest
import sympy as sp
from hypothesis import assume, given, settings, strategies as st

from tcba import ModelParams, theory as T

from oracles import mp_q

mp.mp.dps = 40


def mp_q_plus(a, b, x, p):
    """Largest real root of the numerator of g(p, .), found by mpmath."""
    a, b, x, p = (mp.mpf(v) for v in (a, b, x, p))
    c = 1 - a - b
    roots = mp.polyroots([-(b + c * p) * (1 - x), -2 * (1 - x) * p, 1 - p])
    return max(mp.re(r) for r in roots)


@pytest.mark.parametrize("abx", [(0, 0, 0), (0.125, 0.75, 0), (0.25, 0.5, 0.75)])
@pytest.mark.parametrize("p", [0.05, 0.3, 0.6, 0.9])
def test_q_theory_matches_oracle(abx, p):
    assert T.q_theory(ModelParams(*abx, p)) == pytest.approx(mp_q(*abx, p), abs=1e-12)


@pytest.mark.parametrize(
    "abx, ps",
    [((0, 0, 0), Fraction(1, 4)), (("1/8", "3/4", 0), Fraction(2, 25)), (("1/4", "1/2", "3/4"), Fraction(14, 25))],
)
def test_p_star_exact(abx, ps):
    assert T.p_star_exact(*abx) == ps
    prm = ModelParams(*(float(Fraction(v)) for v in abx), 0.5)
    assert abs(T.p_star(prm) - float(ps)) <= 1e-12


def test_g_vanishes_at_critical_point():
    assert T.g(ModelParams(0, 0, 0, 0), 0.25, 1.0) == 0.0
    prm = ModelParams(1 / 8, 3 / 4, 0, 0)
    assert abs(T.g(prm, T.p_star(prm), 1.0)) < 1e-15


def test_ba_q_plus():
    assert T.q_roots(ModelParams(0, 0, 0, 0.36), 0.36)[1] == pytest.approx(2 / 3, abs=1e-14)
    assert T.q_theory(ModelParams(0, 0, 0, 4 / 9)) == pytest.approx(0.5, abs=1e-14)
    assert T.q_theory(ModelParams(0, 0, 0, 0.1)) == 1.0
    assert T.q_theory(ModelParams(0, 0, 0, 1.0)) == pytest.approx(0.0, abs=1e-15)


def test_green_q_plus_high_precision():
    got = T.q_roots(ModelParams(1 / 8, 3 / 4, 0, 0.3), 0.3)[1]
    want = mp_q_plus("0.125", "0.75", 0, "0.3")
    assert abs(got - float(want)) < 1e-13
    assert got == pytest.approx(0.635913, abs=1e-6)


abx_st = st.tuples(st.floats(0, 0.99), st.floats(0, 0.99), st.floats(0, 0.95)).filter(lambda t: t[0] + t[1] <= 1)


@settings(max_examples=200, deadline=None)
@given(abx_st, st.floats(0.01, 0.99))
def test_q_plus_matches_mpmath(abx, p):
    prm = ModelParams(*abx, p)
    _, qp = T.q_roots(prm, p)
    want = float(mp_q_plus(*abx, p))
    assert abs(qp - want) <= 1e-9 * max(1, abs(want))
    assert abs(T.g(prm, p, qp)) <= 1e-9 * max(1, abs(qp)) ** 2


@settings(max_examples=200, deadline=None)
@given(abx_st)
def test_q_plus_is_one_at_critical_point(abx):
    prm = ModelParams(*abx, 0.5)
    ps = T.p_star(prm)
    assert T.q_roots(prm, ps)[1] == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(abx_st, st.floats(0, 1))
def test_discriminant_exceeds_bound(abx, p):
    prm = ModelParams(*abx, p)
    assume(not (p == 1 and abx[1] == 0))
    assert T.discriminant(prm, p) / (1 - prm.x) >= T.discriminant_lower_bound(prm, p) - 1e-12


@settings(max_examples=100, deadline=None)
@given(abx_st)
def test_q_theory_continuous_and_decreasing(abx):
    prm = ModelParams(*abx, 0.5)
    ps = T.p_star(prm)
    grid = [ps + k * (1 - ps) / 50 for k in range(1, 50)]
    vals = [T.q_theory(prm, p) for p in grid]
    assert all(v2 <= v1 + 1e-12 for v1, v2 in zip(vals, vals[1:]))
    assert T.q_theory(prm, ps + 1e-9) == pytest.approx(1.0, abs=1e-6)


def test_degenerate_denominator():
    with pytest.raises(T.DegenerateDenominator):
        T.q_roots(ModelParams(0.3, 0, 0, 0), 0.0)


def _sym():
    a, b, x, u, v = sp.symbols("a b x u v")
    c = 1 - a - b
    g = (1 - u - 2 * (1 - x) * u * v - b * (1 - x) * v**2 - c * (1 - x) * u * v**2) / (
        2 - a + b * (1 - x) * (2 - v) * v
    )
    return (a, b, x, u, v), g


@pytest.mark.parametrize("pt", [(0.1, 0.3, 0.2, 0.4, 0.7), (0.25, 0.5, 0.75, 0.6, 0.42), (0, 0.8, 0.5, 0.3, 1.3)])
def test_derivatives_against_sympy(pt):
    syms, g = _sym()
    sub = dict(zip(syms, pt))
    prm = ModelParams(pt[0], pt[1], pt[2], 0.5)
    u, v = pt[3], pt[4]
    assert T.g(prm, u, v) == pytest.approx(float(g.subs(sub)), rel=1e-12)
    assert T.dg_du(prm, u, v) == pytest.approx(float(sp.diff(g, syms[3]).subs(sub)), rel=1e-12)
    assert T.dg_dv(prm, u, v) == pytest.approx(float(sp.diff(g, syms[4]).subs(sub)), rel=1e-12)


def test_printed_dv_differs_when_b_positive():
    prm = ModelParams(0.1, 0.3, 0.2, 0.5)
    assert T.dg_dv_printed(prm, 0.4, 0.7) != pytest.approx(T.dg_dv(prm, 0.4, 0.7), rel=1e-3)
    ba = ModelParams(0, 0, 0.2, 0.5)
    assert T.dg_dv_printed(ba, 0.4, 0.7) == T.dg_dv(ba, 0.4, 0.7)


@pytest.mark.parametrize("x, bound", [(0, 0.5), (0.8, 1 / 1.2)])
def test_pc_upper_bound(x, bound):
    assert T.pc_upper_bound(ModelParams(0, 0, x, 0)) == pytest.approx(bound, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(abx_st)
def test_p_star_below_bound(abx):
    prm = ModelParams(*abx, 0.5)
    assert T.p_star(prm) <= T.pc_upper_bound(prm) + 1e-12


@pytest.mark.parametrize(
    "p, x, want",
    [(0.6, 0.2, 0.1), (1 / 1.7, 0.3, 0.0), (0.0, 0.0, -1.0), (0.0, 0.5, -2.0), (0.9, 0.0, 0.8)],
)
def test_expected_N1(p, x, want):
    assert T.expected_N1(ModelParams(0, 0, x, p)) == pytest.approx(want, abs=1e-12)


def test_theta_maps():
    q = 2**0.5 - 1
    assert T.theta_independent(q) == pytest.approx(0.3431, abs=1e-4)
    assert T.theta_printed(q) == pytest.approx(0.8284, abs=1e-4)


def test_s_r_ba():
    s, r, p_hat, prml = T.s_r_theory(ModelParams(0, 0, 0, 0.36))
    assert (s, r, p_hat) == pytest.approx((0.08, 0.08, 0.0), abs=1e-14)
    assert prml == pytest.approx(0.16, abs=1e-14)


def test_s_r_needs_c():
    with pytest.raises(T.CZero):
        T.s_r_theory(ModelParams(0.5, 0.5, 0, 0.6))


@settings(max_examples=200, deadline=None)
@given(abx_st.filter(lambda t: t[0] + t[1] < 0.99), st.floats(0.05, 0.95))
def test_closed_forms_consistent(abx, p):
    # the two forms of p_rml and the partition into first-particle types agree at q = q_theory
    prm = ModelParams(*abx, p)
    s, r, p_hat, prml = T.s_r_theory(prm)
    q = T.q_theory(prm)
    assert T.p_rml_from_sr(prm, p, s, r) == pytest.approx(prml, rel=1e-9, abs=1e-12)
    total = T.p_left_visit(p) + T.p_blockade_visit(prm, p, q) + T.p_right_visit(prm, p, q, prml, s)
    assert total == pytest.approx(q, rel=1e-9)


def test_theory_point_json():
    tp = T.theory_point(ModelParams(0, 0, 0, 0.25))
    d = tp.to_dict()
    assert list(d) == ["a", "b", "x", "p", "p_star", "q", "q_plus", "q_minus", "discriminant"]
    assert d["p_star"] == 0.25 and d["q"] == 1.0
    assert T.theory_point(ModelParams(0.3, 0, 0, 0)).q_plus is None

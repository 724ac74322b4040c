import math

import numpy as np
import pytest

from helpers import random_problem, random_q0_problem, random_unit
from sturmsep.integrator import InitialCondition, integrate
from sturmsep.problem import Const, ProblemSpec, Segment, SignStep, Trig, turning_points
from sturmsep.recurrence import Recurrence, alternating, fibonacci
from sturmsep.theorems import (cos_turning, reciprocal, sign_problem, th00_fixture, th2_fixture,
                               verify_c21, verify_c22, verify_th0, verify_th2, verify_th3,
                               verify_th00)


@pytest.fixture(scope="module")
def th2_problem():
    return th2_fixture()


@pytest.fixture(scope="module")
def th00_problem():
    return th00_fixture()


# -- c21 ----------------------------------------------------------------------

@pytest.mark.parametrize("prob, conj", [
    (ProblemSpec.single(0, math.pi, Trig(1, 1, 0, "cos"), Const(0)), True),
    (ProblemSpec.single(0, 1, Const(1), Const(0)), False),
    (sign_problem(q_zero=True), True),
])
def test_c21_examples(prob, conj):
    rep = verify_c21(prob)
    assert rep.hypotheses_met and rep.verified
    assert rep.witnesses[0]["conjugate"] is conj


def test_c21_needs_q_zero():
    rep = verify_c21(cos_turning())
    assert not rep.hypotheses_met and not rep.verified


def test_c21_random_iff():
    rng = np.random.default_rng(12)
    both = set()
    for _ in range(40):
        rep = verify_c21(random_q0_problem(rng))
        assert rep.verified
        both.add(rep.witnesses[0]["conjugate"])
    assert both == {True, False}


# -- th0 ----------------------------------------------------------------------

def test_th0_cos_turning():
    rep = verify_th0(cos_turning(), samples=60)
    assert rep.hypotheses_met and rep.verified
    q = rep.quantities
    assert q["NoZeros"] + q["SingleBounce"] + q["TwoCrossings"] == 60


def test_th0_sign_problem():
    rep = verify_th0(sign_problem(), samples=40)
    assert rep.verified


def test_th0_sign_problem_partner_has_no_zeros():
    from sturmsep.oscillation import locate_zeros
    # cos(|x| - 1): u(-1) = 1, v(-1) = -sin(0) * (-1) = 0
    t = integrate(sign_problem(), InitialCondition(-1, 1, 0))
    xs = np.linspace(-1, 1, 101)
    np.testing.assert_allclose(t.u_at(xs), np.cos(np.abs(xs) - 1), atol=1e-8)
    assert len(locate_zeros(t)) == 0


def test_th0_needs_turning_point():
    rep = verify_th0(ProblemSpec.single(0, 1, Const(1), Const(-1)), samples=5)
    assert not rep.hypotheses_met and not rep.verified


def test_th0_is_seeded():
    a = verify_th0(cos_turning(), samples=20, seed=3).quantities
    b = verify_th0(cos_turning(), samples=20, seed=3).quantities
    assert a == b


# -- reciprocal ---------------------------------------------------------------

def test_reciprocal_involution():
    prob = ProblemSpec.single(0, 1, SignStep(0.5, -1, 1), Const(1))
    assert reciprocal(reciprocal(prob)).segments == prob.segments


def test_reciprocal_field_swap():
    prob = ProblemSpec.single(-1, 1, SignStep(0, -1, 1), Const(1))
    seg = reciprocal(prob).segments[0]
    assert seg.inv_p == Const(1) and seg.q == SignStep(0, -1, 1)


def test_reciprocal_rejects_vanishing_q():
    with pytest.raises(ValueError):
        reciprocal(cos_turning())


def test_reciprocal_correspondence_random():
    rng = np.random.default_rng(13)
    for _ in range(10):
        base = random_problem(rng, q_kinds=("const", "signstep"))
        segs = tuple(Segment(s.lo, s.hi, s.inv_p,
                             Const(1.0) if s.q(0.5 * (s.lo + s.hi)) > 0 else Const(-1.0))
                     for s in base.segments)
        prob = ProblemSpec(base.a, base.b, segs)
        u0, v0 = random_unit(rng)
        t = integrate(prob, InitialCondition(prob.a, u0, v0))
        r = integrate(reciprocal(prob), InitialCondition(prob.a, v0, u0))
        xs = np.linspace(prob.a, prob.b, 400)
        assert np.max(np.abs(r.u_at(xs) - t.v_at(xs))) <= 1e-8 * (1 + t.scale)
        assert np.max(np.abs(r.v_at(xs) - t.u_at(xs))) <= 1e-8 * (1 + t.scale)


# -- th2 ----------------------------------------------------------------------

def test_th2_fixture_tuned(th2_problem):
    t = integrate(th2_problem, InitialCondition(0, 1, 0))
    assert abs(t.v[-1]) <= 1e-8 * np.max(np.abs(t.v))
    g = th2_problem.segments[0].inv_p.right
    assert isinstance(g, float) and g > 0


def test_th2_fixture_verified(th2_problem):
    rep = verify_th2(th2_problem, samples=100)
    assert rep.hypotheses_met and rep.verified
    assert rep.quantities["violations"] == 0


def test_th2_rejects_sign_changing_q():
    rep = verify_th2(cos_turning())
    assert not rep.hypotheses_met
    assert rep.hypotheses[0]["name"] == "q_one_signed"


def test_th2_needs_v_vanishing_solution():
    prob = ProblemSpec.single(0, 1, SignStep(0.5, -1, 1), Const(1))
    rep = verify_th2(prob, samples=5)
    assert not rep.hypotheses_met


# -- th3 ----------------------------------------------------------------------

def test_th3_cos_turning():
    rep = verify_th3(cos_turning())
    assert rep.hypotheses_met and rep.verified
    assert rep.quantities["relative"] <= 1e-7
    assert rep.witnesses[0]["Pq_changes_sign"]
    # P q = -sin x cos x: positive and negative halves have equal measure
    assert rep.quantities["measure_Pq_pos"] == pytest.approx(rep.quantities["measure_Pq_neg"])


def test_th3_q_zero_not_applicable():
    rep = verify_th3(ProblemSpec.single(0, math.pi, Trig(1, 1, 0, "cos"), Const(0)))
    assert not rep.hypotheses_met


def test_th3_P_b_nonzero_not_applicable():
    rep = verify_th3(ProblemSpec.single(0, 1, Const(1), Const(-1)))
    assert not rep.hypotheses_met
    assert rep.hypotheses[-1]["name"] == "P_b_zero"


# -- th00 ---------------------------------------------------------------------

def test_th00_fixture(th00_problem):
    tps = turning_points(th00_problem)
    np.testing.assert_allclose([t.location for t in tps], [math.pi / 4, 3 * math.pi / 4])
    rep = verify_th00(th00_problem)
    assert rep.hypotheses_met and rep.verified


def test_th00_single_turning_point_deferred():
    rep = verify_th00(cos_turning())
    assert not rep.hypotheses_met


def test_th00_anchor_with_interior_zero():
    # lam far from the tuned value leaves an interior zero or no conjugacy
    prob = ProblemSpec.single(0.0, math.pi, Trig(1, 2, 0, "cos"), Const(-30.0))
    rep = verify_th00(prob)
    assert not rep.hypotheses_met


# -- c22 ----------------------------------------------------------------------

def test_c22_alternating():
    rep = verify_c22(alternating(6))
    assert rep.hypotheses_met and rep.verified
    assert rep.quantities["zeros_b"] == 0


def test_c22_general_vanishing_sum():
    rep = verify_c22(Recurrence((2.0, 1.0, 1.0, -0.5), (0.0, 0.0, 0.0)))
    assert rep.hypotheses_met and rep.verified


def test_c22_not_applicable():
    assert not verify_c22(fibonacci(4)).hypotheses_met
    assert not verify_c22(Recurrence((1.0,) * 4, (0.0,) * 3)).hypotheses_met


def test_report_dict_schema():
    d = verify_th3(cos_turning()).to_dict()
    assert set(d) == {"name", "hypotheses", "quantities", "verified", "witnesses"}
    assert set(d["hypotheses"][0]) == {"name", "met", "detail"}

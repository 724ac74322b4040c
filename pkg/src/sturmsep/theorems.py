"""Executable checks of the separation, conjugacy and sign-condition results.

Every verifier returns a :class:`VerifierReport`.  Hypotheses are tested,
never assumed: when one fails the report says so and ``verified`` stays
False.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as spi

from .integrator import (InitialCondition, conjugate_test, fundamental, integrate,
                         wronskian)
from .oscillation import (TOL_BOUNCE, TOL_ZERO, CROSSING, ENDPOINT, PreconditionError,
                          TheoremViolation, classify_th0, count_zeros, interlace_check,
                          locate_zeros)
from .problem import ProblemSpec, Segment, turning_points
from .recurrence import Recurrence, c22_check, polygon_zeros, step

QMIN = 1e-9


@dataclass
class VerifierReport:
    name: str
    hypotheses: list = field(default_factory=list)
    quantities: dict = field(default_factory=dict)
    verified: bool = False
    witnesses: list = field(default_factory=list)

    @property
    def hypotheses_met(self) -> bool:
        return all(h["met"] for h in self.hypotheses)

    def hypothesis(self, name: str, met: bool, detail: str = "") -> bool:
        self.hypotheses.append({"name": name, "met": bool(met), "detail": detail})
        return bool(met)

    def to_dict(self) -> dict:
        return {"name": self.name, "hypotheses": self.hypotheses,
                "quantities": self.quantities, "verified": self.verified,
                "witnesses": self.witnesses}


def _rng(seed):
    return np.random.default_rng(seed)


# ----------------------------------------------------------------------------
# q == 0: conjugacy iff the integral of 1/p vanishes
# ----------------------------------------------------------------------------


def verify_c21(problem: ProblemSpec, tol: float = 1e-9, int_tol: float = 1e-10) -> VerifierReport:
    rep = VerifierReport("c21")
    if not rep.hypothesis("q_zero", all(s.q.is_zero() for s in problem.segments),
                          "q must vanish identically"):
        return rep
    pb = float(problem.primitive(problem.b))
    # Runge-Kutta on every block so the shot does not reuse the closed-form primitive
    shot = conjugate_test(problem, int_tol, zero_tol=tol, exact_blocks=False)
    criterion = abs(pb) <= tol
    rep.quantities.update(P_b=pb, u_b=shot.u_b, tol=tol)
    rep.witnesses.append({"criterion": criterion, "conjugate": shot.conjugate})
    rep.verified = criterion == shot.conjugate
    return rep


# ----------------------------------------------------------------------------
# One turning point: SSP fails, trichotomy for the partner
# ----------------------------------------------------------------------------


def _anchor(rep, problem, tol, tol_zero, tol_bounce):
    """u1 with u1(a) = u1(b) = 0 and no interior zero, or None."""
    shot = conjugate_test(problem, tol)
    rep.quantities["u1_b"] = shot.u_b
    if not rep.hypothesis("conjugate_endpoints", shot.conjugate,
                          f"|u1(b)| = {abs(shot.u_b):.3e}"):
        return None
    z1 = locate_zeros(shot.trajectory, tol_zero, tol_bounce, strict=False)
    ok = len(z1) == 2 and all(z.kind == ENDPOINT for z in z1)
    if not rep.hypothesis("u1_no_interior_zero", ok, f"zeros {z1.xs}"):
        return None
    return shot.trajectory, z1


def verify_th0(problem: ProblemSpec, samples: int = 100, tol: float = 1e-10,
               tol_zero: float = TOL_ZERO, tol_bounce: float = TOL_BOUNCE,
               seed: int = 0) -> VerifierReport:
    rep = VerifierReport("th0")
    tps = turning_points(problem)
    if not rep.hypothesis("one_turning_point", len(tps) == 1, f"found {len(tps)}"):
        return rep
    got = _anchor(rep, problem, tol, tol_zero, tol_bounce)
    if got is None:
        return rep
    t1, z1 = got
    fund = fundamental(problem, problem.a, tol, True)
    turning = [tps[0].location]
    rng = _rng(seed)
    counts = {"NoZeros": 0, "SingleBounce": 0, "TwoCrossings": 0}
    failures = 0
    for _ in range(samples):
        # independent of u1 = (0, 1) means u2(a) != 0
        theta = rng.uniform(-0.49 * math.pi, 0.49 * math.pi)
        t2 = fund.trajectory(math.cos(theta), math.sin(theta))
        z2 = locate_zeros(t2, tol_zero, tol_bounce, strict=False, turning=turning)
        try:
            cls = classify_th0(problem, t1, t2, tol_zero, tol_bounce, zeros1=z1, zeros2=z2)
        except (TheoremViolation, PreconditionError) as exc:
            failures += 1
            rep.witnesses.append({"theta": theta, "error": str(exc)})
            continue
        counts[cls.name] += 1
        if interlace_check(z1, z2).holds:
            failures += 1
            rep.witnesses.append({"theta": theta, "error": "SSP held"})
    rep.quantities.update(samples=samples, violations=failures, **counts)
    rep.verified = failures == 0
    return rep


# ----------------------------------------------------------------------------
# Reciprocal transformation and quasi-derivative separation
# ----------------------------------------------------------------------------


def _min_abs(fn, lo, hi) -> float:
    """Smallest |fn| over (lo, hi); jumps split the interval into continuous pieces."""
    pts = [lo] + fn.jumps(lo, hi) + [hi]
    best = math.inf
    for s, t in zip(pts[:-1], pts[1:]):
        piece = fn.restrict(s, t)
        if piece.zeros(s, t):
            return 0.0
        xs = np.linspace(s, t, 257)
        best = min(best, float(np.min(np.abs(piece(xs)))))
    return best


def reciprocal(problem: ProblemSpec, qmin: float = QMIN) -> ProblemSpec:
    """Swap the roles of inv_p and q; (v, u) then solves the new system."""
    for i, s in enumerate(problem.segments):
        if _min_abs(s.q, s.lo, s.hi) < qmin:
            raise ValueError(f"segment {i}: q comes within {qmin} of zero")
    segs = tuple(Segment(s.lo, s.hi, s.q, s.inv_p) for s in problem.segments)
    return ProblemSpec(problem.a, problem.b, segs, problem.label + " (reciprocal)")


def _q_sign(problem) -> int:
    signs = set()
    for s in problem.segments:
        vals = s.q.restrict(s.lo, s.hi)(np.linspace(s.lo, s.hi, 257)[1:-1])
        signs.update(np.sign(vals).astype(int).tolist())
    return signs.pop() if len(signs) == 1 else 0


def verify_th2(problem: ProblemSpec, samples: int = 100, tol: float = 1e-10,
               shoot_tol: float = 1e-8, tol_zero: float = TOL_ZERO,
               tol_bounce: float = TOL_BOUNCE, seed: int = 0) -> VerifierReport:
    rep = VerifierReport("th2")
    sg = _q_sign(problem)
    if not rep.hypothesis("q_one_signed", sg != 0, "q must keep one sign"):
        return rep
    try:
        rec = reciprocal(problem)
    except ValueError as exc:
        rep.hypothesis("q_bounded_away_from_zero", False, str(exc))
        return rep
    rep.hypothesis("q_bounded_away_from_zero", True)
    tps = turning_points(problem)
    if not rep.hypothesis("p_sign_indefinite", len(tps) >= 1, f"{len(tps)} turning points"):
        return rep
    y = integrate(problem, InitialCondition(problem.a, 1.0, 0.0), tol)
    vb = float(y.v[-1])
    vscale = float(np.max(np.abs(y.v)))
    rep.quantities["v_b"] = vb
    if not rep.hypothesis("quasi_derivative_vanishes_at_ends", abs(vb) <= shoot_tol * vscale,
                          f"|v(b)| = {abs(vb):.3e}"):
        return rep
    fund = fundamental(problem, problem.a, tol, True)
    rng = _rng(seed)
    bad = 0
    for _ in range(samples):
        # (1, 0) is the v-vanishing solution; stay away from it
        theta = rng.uniform(0.05 * math.pi, 0.95 * math.pi)
        y1 = fund.trajectory(math.cos(theta), math.sin(theta))
        zv = locate_zeros(y1.swapped(rec), tol_zero, tol_bounce, strict=False, turning=[])
        inner = [z for z in zv if z.kind != ENDPOINT]
        if len(inner) != 1 or inner[0].kind != CROSSING:
            bad += 1
            rep.witnesses.append({"theta": theta, "v_zeros": zv.to_list()})
    rep.quantities.update(samples=samples, violations=bad)
    rep.verified = bad == 0
    return rep


# ----------------------------------------------------------------------------
# Sign change of P q
# ----------------------------------------------------------------------------


def verify_th3(problem: ProblemSpec, tol: float = 1e-7, int_tol: float = 1e-10,
               p_tol: float = 1e-9, grid: int = 4096) -> VerifierReport:
    rep = VerifierReport("th3")
    l1q = sum(spi.quad(lambda t, s=s: abs(s.q(t)), s.lo, s.hi, limit=200,
                       points=s.q.zeros(s.lo, s.hi) or None)[0] for s in problem.segments)
    rep.quantities["q_L1"] = l1q
    if not rep.hypothesis("q_nonzero", l1q > 0, f"||q||_1 = {l1q:.3e}"):
        return rep
    pb = float(problem.primitive(problem.b))
    pscale = max(abs(float(problem.primitive(t))) for t in np.linspace(problem.a, problem.b, 257))
    rep.quantities["P_b"] = pb
    if not rep.hypothesis("P_b_zero", abs(pb) <= p_tol * max(pscale, 1.0), f"P(b) = {pb:.3e}"):
        return rep
    shot = conjugate_test(problem, int_tol)
    if not rep.hypothesis("conjugate_endpoints", shot.conjugate, f"u(b) = {shot.u_b:.3e}"):
        return rep
    u = shot.trajectory
    mid = 0.5 * (problem.a + problem.b)
    sgn = -1.0 if u.u_at(mid) < 0 else 1.0
    z = locate_zeros(u, strict=False)
    positive = all(e.kind == ENDPOINT for e in z)
    if not rep.hypothesis("u_positive_inside", positive, f"zeros {z.xs}"):
        return rep

    def f(t):
        return float(problem.primitive(t)) * float(problem.q(t)) * sgn * u.u_at(t)

    pts = sorted({s.lo for s in problem.segments} | {s.hi for s in problem.segments})
    spans = list(zip(pts[:-1], pts[1:]))
    A = sum(spi.quad(lambda t: abs(f(t)), lo, hi, limit=400, epsabs=0, epsrel=1e-12)[0]
            for lo, hi in spans)
    I = sum(spi.quad(f, lo, hi, limit=400, epsabs=1e-13 * A, epsrel=1e-12)[0]
            for lo, hi in spans)
    rel = abs(I) / A if A > 0 else 0.0
    xs = np.linspace(problem.a, problem.b, grid)
    pq = problem.primitive(xs) * problem.q(xs)
    delta = 1e-8 * float(np.max(np.abs(pq))) if np.any(pq) else 0.0
    w = np.full(grid, (problem.b - problem.a) / (grid - 1))
    w[0] = w[-1] = 0.5 * w[1]
    pos = float(np.sum(w[pq > delta]))
    neg = float(np.sum(w[pq < -delta]))
    identically_zero = not np.any(np.abs(pq) > delta)
    rep.quantities.update(integral_Pqu=I, integral_abs_Pqu=A, relative=rel,
                          measure_Pq_pos=pos, measure_Pq_neg=neg, delta=delta, grid=grid)
    sign_ok = identically_zero or (pos > 0 and neg > 0)
    rep.witnesses.append({"identity_holds": rel <= tol, "Pq_changes_sign": pos > 0 and neg > 0,
                          "Pq_zero": identically_zero})
    rep.verified = rel <= tol and sign_ok
    return rep


# ----------------------------------------------------------------------------
# Two or more turning points
# ----------------------------------------------------------------------------


def verify_th00(problem: ProblemSpec, tol: float = 1e-10, tol_zero: float = TOL_ZERO,
                tol_bounce: float = TOL_BOUNCE) -> VerifierReport:
    rep = VerifierReport("th00")
    tps = turning_points(problem)
    if not rep.hypothesis("two_or_more_turning_points", len(tps) >= 2, f"found {len(tps)}"):
        return rep
    got = _anchor(rep, problem, tol, tol_zero, tol_bounce)
    if got is None:
        return rep
    t1, z1 = got
    c_prev, c_last = tps[-2].location, tps[-1].location
    x0 = 0.5 * (c_prev + c_last)
    t2 = integrate(problem, InitialCondition(x0, 0.0, 1.0), tol)
    z2 = locate_zeros(t2, tol_zero, tol_bounce, strict=False)
    second = [z.x for z in z2 if c_last < z.x < problem.b and z.kind == CROSSING]
    ssp = interlace_check(z1, z2)
    rep.quantities.update(x0=x0, zeros_u2=count_zeros(z2),
                          wronskian=float(wronskian(t1, t2, problem.a)))
    rep.witnesses.append({"u2_zeros": z2.to_list(), "zero_after_last_turning_point": second,
                          "ssp": ssp.to_dict()["witness"]})
    rep.verified = not ssp.holds
    return rep


# ----------------------------------------------------------------------------
# Recurrences with vanishing sum of 1/c_n
# ----------------------------------------------------------------------------


def verify_c22(rec: Recurrence, tol: float = 1e-12) -> VerifierReport:
    """Exhibit two solutions without interlacing when sum 1/c_n = 0 and Q = 0.

    With Q = 0 the quantity c_n (y_{n+1} - y_n) is conserved, so the seed
    (-1/c_{-1}, 0) yields y_0 = y_m = 0 while the constant solution never vanishes.
    """
    rep = VerifierReport("c22")
    res = c22_check(rec, tol)
    rep.quantities["sum_inv_c"] = res.sum_inv_c
    if not rep.hypothesis("sum_inv_c_zero_and_Q_zero", res.applies):
        return rep
    y_a = step(rec, (-1.0 / rec.c[0], 0.0))
    y_b = step(rec, (1.0, 1.0))
    za, zb = polygon_zeros(y_a), polygon_zeros(y_b)
    ssp = interlace_check(za, zb)
    rep.quantities.update(zeros_a=len(za), zeros_b=len(zb))
    rep.witnesses.append({"y_a": list(y_a.y), "y_b": list(y_b.y), "ssp": ssp.witness})
    rep.verified = not ssp.holds
    return rep


# ----------------------------------------------------------------------------
# Fixtures
# ----------------------------------------------------------------------------


def cos_turning() -> ProblemSpec:
    from .problem import Trig
    return ProblemSpec.single(0.0, math.pi, Trig(1.0, 1.0, 0.0, "cos"),
                              Trig(-1.0, 1.0, 0.0, "cos"), "cos-turning")


def sign_problem(q_zero: bool = False) -> ProblemSpec:
    from .problem import Const, SignStep
    q = Const(0.0) if q_zero else SignStep(0.0, 1.0, -1.0)
    return ProblemSpec.single(-1.0, 1.0, SignStep(0.0, -1.0, 1.0), q, "sign")


def _bisect_param(fn, lo, hi, iters=55):
    flo = fn(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def th2_fixture(a: float = 0.0, b: float = 1.0, c: float = 0.5) -> ProblemSpec:
    """inv_p = -g left of c and +g right of c, q = 1, with g tuned so that the
    solution from (a, 1, 0) has v(b) = 0."""
    from .problem import Const, SignStep

    def make(g):
        return ProblemSpec.single(a, b, SignStep(c, -g, g), Const(1.0), "th2-fixture")

    def vb(g):
        return integrate(make(g), InitialCondition(a, 1.0, 0.0), 1e-12).v[-1]

    # first sign change of v(b) in g, bracketed by a coarse scan
    gs = np.linspace(1.0, 60.0, 60)
    vals = [vb(g) for g in gs]
    for g0, g1, f0, f1 in zip(gs[:-1], gs[1:], vals[:-1], vals[1:]):
        if f0 * f1 < 0:
            return make(_bisect_param(vb, g0, g1))
    raise RuntimeError("no admissible g found")


def th00_fixture() -> ProblemSpec:
    """inv_p = cos 2x on [0, pi] with q = -lam, lam tuned so u(pi) = 0 for u(0) = 0."""
    from .problem import Const, Trig

    def make(lam):
        return ProblemSpec.single(0.0, math.pi, Trig(1.0, 2.0, 0.0, "cos"), Const(-lam),
                                  "cos2x-two-turning")

    def ub(lam):
        return integrate(make(lam), InitialCondition(0.0, 0.0, 1.0), 1e-12).u[-1]

    return make(_bisect_param(ub, 1.5, 2.0))

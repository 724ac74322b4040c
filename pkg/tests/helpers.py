"""Seeded generators of random problems and recurrences for the test suites."""

from __future__ import annotations

import math

import numpy as np

from sturmsep.problem import (Const, Poly, ProblemSpec, Segment, SignStep, Trig, validate)
from sturmsep.recurrence import Recurrence


def _split(rng, a, b, nseg):
    inner = np.sort(rng.uniform(a, b, nseg - 1)) if nseg > 1 else np.empty(0)
    pts = [a, *inner.tolist(), b]
    # keep segments from becoming slivers
    if any(t - s < 0.05 * (b - a) for s, t in zip(pts[:-1], pts[1:])):
        pts = np.linspace(a, b, nseg + 1).tolist()
    return pts


def random_fn(rng, lo, hi, kinds=("const", "poly", "trig", "signstep"), scale=1.0):
    kind = kinds[rng.integers(len(kinds))]
    if kind == "const":
        v = rng.uniform(0.3, 2.0) * rng.choice([-1.0, 1.0])
        return Const(scale * v)
    if kind == "poly":
        deg = int(rng.integers(0, 4))
        return Poly(tuple((scale * rng.uniform(-1.0, 1.0, deg + 1)).tolist()))
    if kind == "trig":
        return Trig(scale * rng.uniform(0.3, 2.0), rng.uniform(0.5, 3.0),
                    rng.uniform(-math.pi, math.pi), "sin" if rng.random() < 0.5 else "cos")
    pivot = rng.uniform(lo + 0.2 * (hi - lo), hi - 0.2 * (hi - lo))
    left = rng.uniform(0.3, 2.0) * rng.choice([-1.0, 1.0])
    right = rng.uniform(0.3, 2.0) * rng.choice([-1.0, 1.0])
    return SignStep(pivot, scale * left, scale * right)


def _valid(problem):
    try:
        return not validate(problem)
    except Exception:  # pragma: no cover - generator retry path
        return False


def random_problem(rng, max_segments=3, inv_kinds=("const", "poly", "trig", "signstep"),
                   q_kinds=("const", "poly", "trig", "signstep")) -> ProblemSpec:
    """Random valid problem on a random interval of length 1..4."""
    while True:
        a = float(rng.uniform(-1.0, 1.0))
        b = a + float(rng.uniform(1.0, 4.0))
        nseg = int(rng.integers(1, max_segments + 1))
        pts = _split(rng, a, b, nseg)
        segs = tuple(Segment(float(s), float(t), random_fn(rng, s, t, inv_kinds),
                             random_fn(rng, s, t, q_kinds))
                     for s, t in zip(pts[:-1], pts[1:]))
        prob = ProblemSpec(a, b, segs, "random")
        if _valid(prob):
            return prob


def random_lemma_problem(rng, max_segments=3):
    """Random problem with q = -lam * inv_p on every segment; returns (problem, lam)."""
    lam = float(rng.uniform(0.2, 4.0))
    while True:
        a = float(rng.uniform(-1.0, 1.0))
        b = a + float(rng.uniform(1.0, 3.0))
        nseg = int(rng.integers(1, max_segments + 1))
        pts = _split(rng, a, b, nseg)
        segs = []
        for s, t in zip(pts[:-1], pts[1:]):
            f = random_fn(rng, s, t, ("const", "poly", "trig", "signstep"))
            segs.append(Segment(float(s), float(t), f, f.scaled(-lam)))
        prob = ProblemSpec(a, b, tuple(segs), "lemma")
        if _valid(prob):
            return prob, lam


def random_q0_problem(rng) -> ProblemSpec:
    """q == 0 everywhere; about half the cases are built with P(b) = 0."""
    a = float(rng.uniform(-1.0, 1.0))
    L = float(rng.uniform(0.5, 3.0))
    b = a + L
    balanced = rng.random() < 0.5
    choice = int(rng.integers(3))
    if choice == 0:
        g = float(rng.uniform(0.3, 3.0))
        if balanced:
            step = SignStep(a + 0.5 * L, -g, g)
        else:
            step = SignStep(float(rng.uniform(a + 0.2 * L, b - 0.2 * L)), -g,
                            float(rng.uniform(0.3, 3.0)))
        segs = (Segment(a, b, step, Const(0.0)),)
    elif choice == 1:
        amp = float(rng.uniform(0.3, 2.0))
        k = int(rng.integers(1, 4))
        omega = 2 * math.pi * k / L if balanced else float(rng.uniform(0.5, 6.0))
        segs = (Segment(a, b, Trig(amp, omega, float(-omega * a), "sin"), Const(0.0)),)
    else:
        m = a + float(rng.uniform(0.3, 0.7)) * L
        g1 = float(rng.uniform(0.3, 3.0))
        g2 = g1 * (m - a) / (b - m) if balanced else float(rng.uniform(0.3, 3.0))
        segs = (Segment(a, m, Const(g1), Const(0.0)), Segment(m, b, Const(-g2), Const(0.0)))
    return ProblemSpec(a, b, segs, "q0")


def random_alternating(rng, blocks=None):
    """Alternating p-blocks (q == 0) and q-blocks (inv_p == 0)."""
    nb = int(blocks or rng.integers(3, 8))
    first_q = bool(rng.random() < 0.3)
    a = 0.0
    widths = rng.uniform(0.3, 1.0, nb)
    pts = np.concatenate([[a], a + np.cumsum(widths)]).tolist()
    segs = []
    for i, (s, t) in enumerate(zip(pts[:-1], pts[1:])):
        is_q = (i % 2 == 0) == first_q
        if is_q:
            q = random_fn(rng, s, t, ("const", "poly", "trig"), scale=2.0)
            segs.append(Segment(float(s), float(t), Const(0.0), q))
        else:
            # keep the integral of inv_p away from zero
            inv = Const(float(rng.uniform(0.3, 2.0) * rng.choice([-1.0, 1.0])))
            segs.append(Segment(float(s), float(t), inv, Const(0.0)))
    return ProblemSpec(float(pts[0]), float(pts[-1]), tuple(segs), "alternating")


def random_positive_recurrence(rng, m=None) -> Recurrence:
    m = int(m or rng.integers(4, 16))
    c = rng.uniform(0.2, 3.0, m + 1)
    Q = rng.uniform(-3.0, 3.0, m)
    return Recurrence(tuple(c.tolist()), tuple(Q.tolist()))


def random_unit(rng, avoid=None, margin=1e-3):
    """Random point on the unit circle, away from +-avoid."""
    while True:
        t = rng.uniform(0.0, 2 * math.pi)
        v = (math.cos(t), math.sin(t))
        if avoid is None or abs(v[0] * avoid[1] - v[1] * avoid[0]) > margin:
            return v

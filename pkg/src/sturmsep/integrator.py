"""Caratheodory solutions of u' = inv_p * v, v' = q * u.

Inside each smooth piece the system is advanced by the Dormand-Prince 5(4)
embedded pair.  Pieces are cut at segment boundaries, turning points,
coefficient jumps and the initial point, so every such location is a node.
The state carried across a cut is (u, v); u' may jump there.

Blocks where inv_p vanishes identically (p infinite) or q vanishes
identically are solved exactly from the closed-form antiderivatives.

The solver always propagates the fundamental matrix normalized at the
initial abscissa, so trajectories of one problem that start at the same
point share a node grid and are exact linear combinations of each other.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .problem import (ProblemSpec, require_valid, same_shape_scaled,
                      turning_points)


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class InitialCondition:
    x0: float
    u0: float
    v0: float


# Dormand-Prince 5(4)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6] + (0.0,)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def hmax_for(problem: ProblemSpec) -> float:
    return (problem.b - problem.a) / 256


# ----------------------------------------------------------------------------
# Trajectory
# ----------------------------------------------------------------------------


class Trajectory:
    """Dense solution: nodes plus a piecewise cubic Hermite interpolant.

    ``du``/``dv`` hold one-sided derivatives per interval: ``[:, 0]`` at the
    left node and ``[:, 1]`` at the right node, each computed with the
    coefficients of that interval (u' = v/p may jump at a join).
    """

    def __init__(self, problem, ic, x, u, v, du, dv):
        self.problem = problem
        self.ic = ic
        self.x = np.asarray(x, dtype=float)
        self.u = np.asarray(u, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.du = np.asarray(du, dtype=float)
        self.dv = np.asarray(dv, dtype=float)
        for arr in (self.x, self.u, self.v, self.du, self.dv):
            arr.setflags(write=False)

    def __len__(self):
        return len(self.x)

    def _interval(self, xq):
        i = np.searchsorted(self.x, xq, side="right") - 1
        return np.clip(i, 0, len(self.x) - 2)

    def _hermite(self, y, dy, xq):
        scalar = np.ndim(xq) == 0
        xq = np.atleast_1d(np.asarray(xq, dtype=float))
        i = self._interval(xq)
        x0, x1 = self.x[i], self.x[i + 1]
        h = x1 - x0
        t = (xq - x0) / h
        t2, t3 = t * t, t * t * t
        out = ((2 * t3 - 3 * t2 + 1) * y[i] + (t3 - 2 * t2 + t) * h * dy[i, 0]
               + (-2 * t3 + 3 * t2) * y[i + 1] + (t3 - t2) * h * dy[i, 1])
        return float(out[0]) if scalar else out

    def u_at(self, xq):
        return self._hermite(self.u, self.du, xq)

    def u_piece(self, i: int):
        """Scalar evaluator of the u interpolant on interval ``i`` (plain floats)."""
        x0 = float(self.x[i])
        h = float(self.x[i + 1]) - x0
        y0, y1 = float(self.u[i]), float(self.u[i + 1])
        m0, m1 = h * float(self.du[i, 0]), h * float(self.du[i, 1])
        a3 = 2 * y0 - 2 * y1 + m0 + m1
        a2 = -3 * y0 + 3 * y1 - 2 * m0 - m1

        def f(xq):
            t = (xq - x0) / h
            return ((a3 * t + a2) * t + m0) * t + y0
        return f

    def v_at(self, xq):
        return self._hermite(self.v, self.dv, xq)

    def __call__(self, xq):
        return self.u_at(xq), self.v_at(xq)

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.u)))

    def swapped(self, problem=None) -> "Trajectory":
        """(v, u) as a solution of the reciprocal problem (roles of inv_p and q swapped)."""
        ic = InitialCondition(self.ic.x0, self.ic.v0, self.ic.u0)
        return Trajectory(problem, ic, self.x, self.v, self.u, self.dv, self.du)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "u", "v"])
            for row in zip(self.x, self.u, self.v):
                w.writerow([format(float(t), ".17g") for t in row])

    def to_dict(self) -> dict:
        return {"ic": {"x0": self.ic.x0, "u0": self.ic.u0, "v0": self.ic.v0},
                "nodes": [{"x": float(a), "u": float(b), "v": float(c)}
                          for a, b, c in zip(self.x, self.u, self.v)]}


def combine(alpha: float, t1: Trajectory, beta: float, t2: Trajectory) -> Trajectory:
    """alpha * t1 + beta * t2 for trajectories on a shared node grid."""
    if t1.problem is not t2.problem and t1.problem != t2.problem:
        raise ValueError("trajectories belong to different problems")
    if len(t1.x) != len(t2.x) or not np.array_equal(t1.x, t2.x):
        raise ValueError("trajectories do not share a node grid")
    ic = InitialCondition(t1.ic.x0, alpha * t1.ic.u0 + beta * t2.ic.u0,
                          alpha * t1.ic.v0 + beta * t2.ic.v0)
    return Trajectory(t1.problem, ic, t1.x, alpha * t1.u + beta * t2.u,
                      alpha * t1.v + beta * t2.v, alpha * t1.du + beta * t2.du,
                      alpha * t1.dv + beta * t2.dv)


# ----------------------------------------------------------------------------
# Fundamental matrix
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Fundamental:
    """Columns of the fundamental matrix started from (1, 0) and (0, 1) at x0."""

    problem: ProblemSpec
    x0: float
    x: np.ndarray
    phi: np.ndarray   # (n, 4): u1, v1, u2, v2
    dphi: np.ndarray  # (n-1, 2, 4): one-sided derivatives per interval

    def trajectory(self, u0: float, v0: float) -> Trajectory:
        u = u0 * self.phi[:, 0] + v0 * self.phi[:, 2]
        v = u0 * self.phi[:, 1] + v0 * self.phi[:, 3]
        du = u0 * self.dphi[:, :, 0] + v0 * self.dphi[:, :, 2]
        dv = u0 * self.dphi[:, :, 1] + v0 * self.dphi[:, :, 3]
        return Trajectory(self.problem, InitialCondition(self.x0, u0, v0), self.x, u, v, du, dv)


def _cuts(problem: ProblemSpec, x0: float) -> list[float]:
    pts = {problem.a, problem.b, x0}
    for s in problem.segments:
        pts.add(s.lo)
        pts.add(s.hi)
        pts.update(s.inv_p.jumps(s.lo, s.hi))
        pts.update(s.q.jumps(s.lo, s.hi))
    pts.update(tp.location for tp in turning_points(problem, check_separation=False))
    return sorted(p for p in pts if problem.a <= p <= problem.b)


def _pieces(problem: ProblemSpec, x0: float):
    """Smooth pieces (lo, hi, inv_p, q) with coefficients restricted to the piece."""
    cuts = _cuts(problem, x0)
    out = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        seg = problem.segment_at(0.5 * (lo + hi))
        out.append((lo, hi, seg.inv_p.restrict(lo, hi), seg.q.restrict(lo, hi)))
    return out


def _deriv(ip, qq, y):
    # y = (u1, v1, u2, v2)
    return (ip * y[1], qq * y[0], ip * y[3], qq * y[2])


def _grid(lo, hi, hmax):
    n = max(1, math.ceil((hi - lo) / hmax - 1e-9))
    return np.linspace(lo, hi, n + 1)


def _exact_block(xs, ip_fn, q_fn, y0, x_start):
    """Exact solution on a block where inv_p == 0 or q == 0 identically."""
    ys = []
    if ip_fn.is_zero():
        Q0 = q_fn.antiderivative(x_start)
        for x in xs:
            dq = float(q_fn.antiderivative(x) - Q0)
            ys.append((y0[0], y0[1] + dq * y0[0], y0[2], y0[3] + dq * y0[2]))
    else:
        P0 = ip_fn.antiderivative(x_start)
        for x in xs:
            dp = float(ip_fn.antiderivative(x) - P0)
            ys.append((y0[0] + dp * y0[1], y0[1], y0[2] + dp * y0[3], y0[3]))
    return ys


def _rk_piece(xs_start, xs_end, ip_fn, q_fn, y0, tol, hmax, hmin):
    """Dormand-Prince over one smooth piece; returns (xs, ys, dys)."""
    direction = 1.0 if xs_end > xs_start else -1.0
    x = xs_start
    y = y0
    ip, qq = ip_fn(x), q_fn(x)
    k1 = _deriv(ip, qq, y)
    xs, ys, ds = [x], [y], [k1]
    h = min(hmax, abs(xs_end - xs_start))
    while direction * (xs_end - x) > 0:
        h = min(h, hmax)
        last = False
        remaining = abs(xs_end - x)
        # stretch onto the end rather than leave a sliver behind
        if h >= remaining * (1 - 1e-12) or remaining - h < max(hmin, 0.01 * h):
            h = remaining
            last = True
        if h < hmin and not last:
            raise IntegrationError(f"step size underflow at x={x!r}")
        hs = direction * h
        ks = [k1]
        for s in range(1, 7):
            a = _A[s]
            yi = tuple(y[c] + hs * sum(a[j] * ks[j][c] for j in range(s)) for c in range(4))
            xi = xs_end if (last and s >= 5) else x + _C[s] * hs
            ks.append(_deriv(ip_fn(xi), q_fn(xi), yi))
        ynew = tuple(y[c] + hs * sum(_B[j] * ks[j][c] for j in range(7)) for c in range(4))
        err = 0.0
        for c in range(4):
            e = hs * sum(_E[j] * ks[j][c] for j in range(7))
            sc = tol * (1.0 + max(abs(y[c]), abs(ynew[c])))
            err = max(err, abs(e) / sc)
        if err <= 1.0:
            x = xs_end if last else x + hs
            y = ynew
            k1 = ks[6]
            xs.append(x)
            ys.append(y)
            ds.append(k1)
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = h * fac
        else:
            h = h * max(0.2, 0.9 * err ** -0.2)
    return xs, ys, ds


def _sweep(pieces, y0, x_start, tol, hmax, hmin, exact_blocks):
    """Integrate across consecutive pieces (in travel order)."""
    xs_all, ys_all, left_d, right_d = [x_start], [y0], [], []
    y = y0
    for lo, hi, ip_fn, q_fn in pieces:
        start, end = (lo, hi) if x_start <= lo else (hi, lo)
        if exact_blocks and (ip_fn.is_zero() or q_fn.is_zero()):
            grid = _grid(lo, hi, hmax)
            if start > end:
                grid = grid[::-1]
            ys = _exact_block(grid, ip_fn, q_fn, y, start)
            xs = list(grid)
            ds = [_deriv(ip_fn(t), q_fn(t), yy) for t, yy in zip(xs, ys)]
            ys[0] = y
        else:
            xs, ys, ds = _rk_piece(start, end, ip_fn, q_fn, y, tol, hmax, hmin)
        for j in range(1, len(xs)):
            xs_all.append(xs[j])
            ys_all.append(ys[j])
            left_d.append(ds[j - 1])
            right_d.append(ds[j])
        y = ys[-1]
    return xs_all, ys_all, left_d, right_d


@lru_cache(maxsize=256)
def fundamental(problem: ProblemSpec, x0: float, tol: float = 1e-10,
                exact_blocks: bool = True) -> Fundamental:
    require_valid(problem)
    if not problem.a <= x0 <= problem.b:
        raise IntegrationError(f"x0={x0!r} outside [{problem.a}, {problem.b}]")
    if not tol > 0:
        raise ValueError("tol must be positive")
    hmax = hmax_for(problem)
    hmin = 1e-14 * (problem.b - problem.a)
    pieces = _pieces(problem, x0)
    fwd = [p for p in pieces if p[0] >= x0]
    bwd = [p for p in reversed(pieces) if p[1] <= x0]
    y0 = (1.0, 0.0, 0.0, 1.0)
    fx, fy, fl, fr = _sweep(fwd, y0, x0, tol, hmax, hmin, exact_blocks)
    bx, by, bl, br = _sweep(bwd, y0, x0, tol, hmax, hmin, exact_blocks)
    # backward sweep runs right-to-left: reverse and swap interval ends
    x = bx[::-1] + fx[1:]
    phi = by[::-1] + fy[1:]
    left = br[::-1] + fl
    right = bl[::-1] + fr
    dphi = np.stack([np.asarray(left, dtype=float).reshape(-1, 4),
                     np.asarray(right, dtype=float).reshape(-1, 4)], axis=1)
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    bad = ~np.all(np.isfinite(phi), axis=1)
    if bad.any():
        raise IntegrationError(f"solution overflowed near x={float(x[np.argmax(bad)])!r}")
    return Fundamental(problem, x0, x, phi, dphi)


def integrate(problem: ProblemSpec, ic: InitialCondition, tol: float = 1e-10,
              allow_trivial: bool = False, exact_blocks: bool = True) -> Trajectory:
    """Solve the system from ``ic`` across [a, b].

    With ``exact_blocks=False`` blocks where q or inv_p vanish are also
    stepped by Runge-Kutta, which keeps the solve independent of the
    closed-form primitive.
    """
    if not allow_trivial and ic.u0 == 0 and ic.v0 == 0:
        raise IntegrationError("trivial initial condition (0, 0)")
    fund = fundamental(problem, float(ic.x0), float(tol), exact_blocks)
    return fund.trajectory(ic.u0, ic.v0)


# ----------------------------------------------------------------------------
# Closed form for q = -lambda * inv_p
# ----------------------------------------------------------------------------


def lemma_family_check(problem: ProblemSpec, lam: float) -> bool:
    return all(same_shape_scaled(s.inv_p, s.q, -lam) for s in problem.segments)


def closed_form_lemma2(problem: ProblemSpec, lam: float, c1: float, c2: float) -> Trajectory:
    """u = c1 cos(sqrt(lam) P) + c2 sin(sqrt(lam) P) when q = -lam * inv_p."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not lemma_family_check(problem, lam):
        raise ValueError("q is not -lambda * inv_p on every segment")
    require_valid(problem)
    r = math.sqrt(lam)
    hmax = hmax_for(problem)
    xs = [problem.a]
    for lo, hi, _, _ in _pieces(problem, problem.a):
        xs.extend(_grid(lo, hi, hmax)[1:])
    x = np.asarray(xs)
    theta = r * problem.primitive(x)
    u = c1 * np.cos(theta) + c2 * np.sin(theta)
    v = r * (-c1 * np.sin(theta) + c2 * np.cos(theta))
    # one-sided coefficients per interval
    n = len(x) - 1
    du = np.empty((n, 2))
    dv = np.empty((n, 2))
    for i in range(n):
        seg = problem.segment_at(0.5 * (x[i] + x[i + 1]))
        ip = seg.inv_p.restrict(x[i], x[i + 1])
        qq = seg.q.restrict(x[i], x[i + 1])
        for j, k in ((0, i), (1, i + 1)):
            du[i, j] = ip(x[k]) * v[k]
            dv[i, j] = qq(x[k]) * u[k]
    return Trajectory(problem, InitialCondition(problem.a, c1, r * c2), x, u, v, du, dv)


# ----------------------------------------------------------------------------
# Wronskian and conjugacy
# ----------------------------------------------------------------------------


def wronskian(t1: Trajectory, t2: Trajectory, x):
    """u2 v1 - u1 v2, constant along solutions of one problem."""
    if t1.problem != t2.problem:
        raise ValueError("trajectories belong to different problems")
    u1, v1 = t1(x)
    u2, v2 = t2(x)
    return u2 * v1 - u1 * v2


@dataclass(frozen=True)
class ConjugateResult:
    u_b: float
    conjugate: bool
    trajectory: Trajectory


def conjugate_test(problem: ProblemSpec, tol: float = 1e-10, zero_tol: float | None = None,
                   exact_blocks: bool = True) -> ConjugateResult:
    """Shoot from (a, 0, 1); a, b are conjugate iff u(b) vanishes."""
    zt = tol if zero_tol is None else zero_tol
    traj = integrate(problem, InitialCondition(problem.a, 0.0, 1.0), tol,
                     exact_blocks=exact_blocks)
    ub = float(traj.u[-1])
    return ConjugateResult(ub, abs(ub) <= zt * traj.scale, traj)





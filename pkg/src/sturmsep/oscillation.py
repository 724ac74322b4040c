"""Zero location, interlacing checks and SSP verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .problem import bisect, turning_points

TOL_ZERO = 1e-10
TOL_BOUNCE = 1e-7

CROSSING = "crossing"
TANGENTIAL = "tangential"
ENDPOINT = "endpoint"


class AnomalousZeroError(RuntimeError):
    """A zero without sign change away from every turning point."""


class TheoremViolation(RuntimeError):
    """An observed pattern that the trichotomy rules out."""


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class ZeroEvent:
    x: float
    kind: str
    bracket: tuple = ()
    associated_turning_point: float | None = None
    anomalous: bool = False

    def to_dict(self) -> dict:
        d = {"x": self.x, "kind": self.kind}
        if self.associated_turning_point is not None:
            d["turning_point"] = self.associated_turning_point
        if self.anomalous:
            d["anomalous"] = True
        return d


@dataclass(frozen=True)
class ZeroSet:
    zeros: tuple
    interval: tuple = (-math.inf, math.inf)
    tol_zero: float = TOL_ZERO
    tol_bounce: float = TOL_BOUNCE

    def __iter__(self):
        return iter(self.zeros)

    def __len__(self):
        return len(self.zeros)

    @property
    def xs(self) -> list[float]:
        return [z.x for z in self.zeros]

    @property
    def anomalies(self) -> list[ZeroEvent]:
        return [z for z in self.zeros if z.anomalous]

    def interior(self) -> list[ZeroEvent]:
        return [z for z in self.zeros if z.kind != ENDPOINT]

    def to_list(self) -> list[dict]:
        return [z.to_dict() for z in self.zeros]


def zero_set(xs, kinds=None, interval=(-math.inf, math.inf)) -> ZeroSet:
    """Build a ZeroSet from bare positions (crossings unless kinds given)."""
    kinds = kinds or [CROSSING] * len(xs)
    return ZeroSet(tuple(ZeroEvent(float(x), k) for x, k in sorted(zip(xs, kinds))), interval)


# ----------------------------------------------------------------------------
# Zero location
# ----------------------------------------------------------------------------


def _cubic_coeffs(traj, idx):
    x0, x1 = traj.x[idx], traj.x[idx + 1]
    h = x1 - x0
    y0, y1 = traj.u[idx], traj.u[idx + 1]
    m0, m1 = h * traj.du[idx, 0], h * traj.du[idx, 1]
    # p(t) = a3 t^3 + a2 t^2 + m0 t + y0 on t in [0, 1]
    a3 = 2 * y0 - 2 * y1 + m0 + m1
    a2 = -3 * y0 + 3 * y1 - 2 * m0 - m1
    return x0, h, a3, a2, m0, y0


def _extrema(traj, idx):
    """Interior critical points of the Hermite cubics on intervals ``idx``.

    Returns (interval index, abscissa, value) arrays.
    """
    idx = np.asarray(idx, dtype=int)
    if idx.size == 0:
        return idx, np.empty(0), np.empty(0)
    x0, h, a3, a2, a1, y0 = _cubic_coeffs(traj, idx)
    # 3 a3 t^2 + 2 a2 t + a1 = 0
    A, B, C = 3 * a3, 2 * a2, a1
    disc = B * B - 4 * A * C
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = np.abs(A) > 1e-300
        t1 = np.where(quad, (-B - sq) / (2 * A), np.where(B != 0, -C / B, -1.0))
        t2 = np.where(quad, (-B + sq) / (2 * A), -1.0)
    ii, ts = [], []
    for t in (t1, t2):
        m = ok & (t > 0) & (t < 1)
        ii.append(idx[m])
        ts.append(t[m])
    ii = np.concatenate(ii)
    ts = np.concatenate(ts)
    pos = np.searchsorted(idx, ii)
    xs = x0[pos] + ts * h[pos]
    vals = ((a3[pos] * ts + a2[pos]) * ts + a1[pos]) * ts + y0[pos]
    return ii, xs, vals


def locate_zeros(traj, tol_zero: float = TOL_ZERO, tol_bounce: float = TOL_BOUNCE,
                 strict: bool = True, turning=None) -> ZeroSet:
    """Locate and classify the zeros of the u component of a trajectory.

    A zero is *tangential* when u enters the band |u| <= tol_bounce * sup|u|
    and leaves it on the side it came from; such zeros are snapped to the
    nearest turning point.  Sign changes outside the band are *crossings*,
    refined by bisection on the interpolant to width tol_zero * (b - a).
    """
    x, u = traj.x, traj.u
    a, b = float(x[0]), float(x[-1])
    scale = float(np.max(np.abs(u)))
    if scale == 0:
        raise ValueError("trivial solution has no isolated zeros")
    tz = tol_zero * scale
    tb = tol_bounce * scale
    xtol = tol_zero * (b - a)
    if turning is None:
        turning = ([tp.location for tp in turning_points(traj.problem, check_separation=False)]
                   if traj.problem is not None else [])
    snap = 10 * tol_zero * (b - a)

    events: list[ZeroEvent] = []

    def crossing(lo, hi, piece=None):
        f = traj.u_at if piece is None else traj.u_piece(int(piece))
        r = bisect(f, float(lo), float(hi), xtol)
        events.append(ZeroEvent(float(r), CROSSING, (float(lo), float(hi))))

    def tangential(xm, lo, hi):
        near = [c for c in turning if abs(c - xm) <= snap]
        if near:
            c = min(near, key=lambda c: abs(c - xm))
            events.append(ZeroEvent(c, TANGENTIAL, (float(lo), float(hi)), c))
        else:
            if strict:
                raise AnomalousZeroError(
                    f"zero without sign change at x={xm!r} with no turning point nearby")
            events.append(ZeroEvent(xm, TANGENTIAL, (lo, hi), None, anomalous=True))

    outside = np.flatnonzero(np.abs(u) > tb)
    n = len(x)

    # leading run of band nodes
    first = outside[0]
    if abs(u[0]) <= tz:
        events.append(ZeroEvent(a, ENDPOINT, (a, a)))
    elif first > 0 and np.sign(u[0]) != np.sign(u[first]):
        crossing(a, x[first])
    # trailing run
    last = outside[-1]
    tail = []
    if abs(u[-1]) <= tz:
        tail.append(ZeroEvent(b, ENDPOINT, (b, b)))
    elif last < n - 1 and np.sign(u[-1]) != np.sign(u[last]):
        crossing(x[last], b)

    adjacent = outside[:-1][np.diff(outside) == 1]
    same = adjacent[np.sign(u[adjacent]) == np.sign(u[adjacent + 1])]
    ei, ex, ev = _extrema(traj, same)
    hit = (np.abs(ev) <= tb) | (np.sign(ev) != np.sign(u[ei]))
    dips = {}
    for i, xe, ve in zip(ei[hit], ex[hit], ev[hit]):
        dips.setdefault(int(i), []).append((float(xe), float(ve)))

    js, ks = outside[:-1], outside[1:]
    busy = (np.sign(u[js]) != np.sign(u[ks])) | (ks != js + 1) | np.isin(js, list(dips))
    for j, k in zip(js[busy], ks[busy]):
        sj, sk = np.sign(u[j]), np.sign(u[k])
        if k == j + 1:
            if sj != sk:
                crossing(x[j], x[k], j)
                continue
            for xe, ue in sorted(dips.get(int(j), [])):
                if abs(ue) <= tb:
                    tangential(xe, x[j], x[k])
                else:
                    crossing(x[j], xe, j)
                    crossing(xe, x[k], j)
        else:
            if sj != sk:
                crossing(x[j], x[k])
            else:
                cands = [(abs(u[i]), x[i]) for i in range(j + 1, k)]
                _, exs, evs = _extrema(traj, np.arange(j, k))
                cands.extend(zip(np.abs(evs), exs))
                tangential(float(min(cands)[1]), x[j], x[k])

    events.extend(tail)
    events.sort(key=lambda e: e.x)
    return ZeroSet(tuple(events), (a, b), tol_zero, tol_bounce)


def count_zeros(zs: ZeroSet, include_endpoints: bool = True) -> int:
    return sum(1 for z in zs if include_endpoints or z.kind != ENDPOINT)


@dataclass(frozen=True)
class GapViolation:
    x1: float
    x2: float


def min_gap_guard(zs, eps_gap: float):
    """None if consecutive zeros are at least eps_gap apart, else the offending pair."""
    xs = sorted(z.x if isinstance(z, ZeroEvent) else float(z) for z in zs)
    for x1, x2 in zip(xs[:-1], xs[1:]):
        if x2 - x1 < eps_gap:
            return GapViolation(x1, x2)
    return None


# ----------------------------------------------------------------------------
# Interlacing
# ----------------------------------------------------------------------------


@dataclass
class SSPReport:
    verdict: str
    zeros1: ZeroSet
    zeros2: ZeroSet
    witness: dict | None = None
    trichotomy: str | None = None
    tolerances: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "zeros1": self.zeros1.to_list(),
                "zeros2": self.zeros2.to_list(), "witness": self.witness,
                "trichotomy": self.trichotomy}


def _first_bad_gap(za: ZeroSet, zb: ZeroSet, which: int):
    xs_b = zb.xs
    xa = za.xs
    for lo, hi in zip(xa[:-1], xa[1:]):
        cnt = sum(1 for x in xs_b if lo < x < hi)
        if cnt != 1:
            return {"lo": lo, "hi": hi, "count": cnt, "solution": which, "reason": "count"}
    return None


def interlace_check(z1: ZeroSet, z2: ZeroSet, interval=None) -> SSPReport:
    """Sturm separation between the zero sets of two independent solutions.

    Fails when some pair of consecutive zeros of one solution does not
    enclose exactly one zero of the other, or when either solution has a
    zero without sign change (a bounce).
    """
    w = _first_bad_gap(z1, z2, 1) or _first_bad_gap(z2, z1, 2)
    if w is None:
        for which, zs in ((1, z1), (2, z2)):
            bounce = next((z for z in zs if z.kind == TANGENTIAL), None)
            if bounce is not None:
                w = {"lo": bounce.x, "hi": bounce.x, "count": 1, "solution": which,
                     "reason": "tangential"}
                break
    return SSPReport("holds" if w is None else "fails", z1, z2, w)


# ----------------------------------------------------------------------------
# Trichotomy for one turning point
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class NoZeros:
    name = "NoZeros"


@dataclass(frozen=True)
class SingleBounce:
    c: float
    name = "SingleBounce"


@dataclass(frozen=True)
class TwoCrossings:
    x0: float
    x1: float
    name = "TwoCrossings"


def classify_th0(problem, traj1, traj2, tol_zero: float = TOL_ZERO,
                 tol_bounce: float = TOL_BOUNCE, zeros1=None, zeros2=None):
    """Sort the interior zeros of traj2 into one of the three admissible classes."""
    from .integrator import wronskian

    tps = turning_points(problem)
    if len(tps) != 1:
        raise PreconditionError(f"need exactly one turning point, found {len(tps)}")
    c = tps[0].location
    z1 = zeros1 if zeros1 is not None else locate_zeros(traj1, tol_zero, tol_bounce)
    kinds = [(z.kind, z.x) for z in z1]
    if (len(z1) != 2 or any(k != ENDPOINT for k, _ in kinds)):
        raise PreconditionError("traj1 must vanish at a and b only")
    if abs(wronskian(traj1, traj2, problem.a)) <= tol_bounce * max(traj1.scale, 1.0) * max(
            traj2.scale, 1.0):
        raise PreconditionError("solutions are not linearly independent")
    z2 = zeros2 if zeros2 is not None else locate_zeros(traj2, tol_zero, tol_bounce, strict=False)
    inner = z2.interior()
    ends = [z for z in z2 if z.kind == ENDPOINT]
    if ends or z2.anomalies:
        raise TheoremViolation(f"unexpected zero pattern {z2.to_list()}")
    if not inner:
        return NoZeros()
    if len(inner) == 1 and inner[0].kind == TANGENTIAL and inner[0].x == c:
        return SingleBounce(c)
    if len(inner) == 2 and all(z.kind == CROSSING for z in inner):
        return TwoCrossings(inner[0].x, inner[1].x)
    raise TheoremViolation(f"unexpected zero pattern {z2.to_list()}")

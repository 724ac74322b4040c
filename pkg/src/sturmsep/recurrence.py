"""Three-term recurrences from problems with alternating p = inf / q = 0 blocks.

Indexing: ``c = [c_{-1}, c_0, ..., c_{m-1}]`` and ``Q = [Q_0, ..., Q_{m-1}]``,
so ``step`` produces ``y_{-1}, y_0, ..., y_m`` from the seed ``(y_{-1}, y_0)``
via

    c_n y_{n+1} + c_{n-1} y_{n-1} - d_n y_n = 0,   d_n = c_n + c_{n-1} + Q_n.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .oscillation import CROSSING, ENDPOINT, TANGENTIAL, ZeroEvent, ZeroSet
from .problem import ProblemSpec, integral


class ReductionError(ValueError):
    pass


@dataclass(frozen=True)
class Block:
    kind: str  # "p" (q == 0) or "q" (inv_p == 0)
    lo: float
    hi: float


@dataclass(frozen=True)
class AtkinsonPartition:
    blocks: tuple
    node_points: tuple       # a_{-1} (or virtual), a_0, ..., a_m
    virtual_first: bool      # True when the problem opens with a q-block
    tail_Q: float | None     # integral of q over a trailing q-block, if any


@dataclass(frozen=True)
class Recurrence:
    c: tuple
    Q: tuple

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(t) for t in self.c))
        object.__setattr__(self, "Q", tuple(float(t) for t in self.Q))
        if len(self.c) != len(self.Q) + 1:
            raise ValueError(f"need len(c) == len(Q) + 1, got {len(self.c)} and {len(self.Q)}")

    @property
    def m(self) -> int:
        return len(self.Q)

    @property
    def d(self) -> tuple:
        # d_n for n = 0..m-1; c[n + 1] is c_n
        return tuple(self.c[n + 1] + self.c[n] + self.Q[n] for n in range(self.m))

    def to_dict(self) -> dict:
        return {"c": list(self.c), "Q": list(self.Q), "d": list(self.d)}

    @classmethod
    def from_dict(cls, d: dict) -> "Recurrence":
        if "c" not in d:
            raise ValueError("recurrence config is missing field 'c'")
        c = list(d["c"])
        Q = list(d.get("Q", [0.0] * (len(c) - 1)))
        return cls(tuple(c), tuple(Q))


@dataclass(frozen=True)
class PolygonSolution:
    """Piecewise-linear curve through (n, y_n), n = start, start + 1, ..."""

    y: tuple
    start: int = -1

    @property
    def n(self) -> list[int]:
        return list(range(self.start, self.start + len(self.y)))

    @property
    def vertices(self) -> list[tuple[int, float]]:
        return list(zip(self.n, self.y))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "y"])
            for n, y in self.vertices:
                w.writerow([n, format(float(y), ".17g")])


def _block_kind(seg) -> str:
    if seg.inv_p.is_zero():
        return "q"
    if seg.q.is_zero():
        return "p"
    raise ReductionError(f"segment [{seg.lo}, {seg.hi}] has neither inv_p == 0 nor q == 0")


def _p_scale(fn, lo, hi) -> float:
    return float(np.max(np.abs(fn(np.linspace(lo, hi, 65))))) * (hi - lo)


def atkinson_reduce(problem: ProblemSpec) -> tuple[AtkinsonPartition, Recurrence]:
    """Reduce an alternating block problem to its three-term recurrence.

    Adjacent segments of the same kind are merged into one block.
    """
    blocks: list[tuple[str, float, float, list]] = []
    for seg in problem.segments:
        k = _block_kind(seg)
        if blocks and blocks[-1][0] == k:
            blocks[-1] = (k, blocks[-1][1], seg.hi, blocks[-1][3] + [seg])
        else:
            blocks.append((k, seg.lo, seg.hi, [seg]))
    c, Q, nodes = [], [], []
    virtual_first = blocks[0][0] == "q"
    if virtual_first:
        c.append(1.0)
        nodes.append(None)
    else:
        nodes.append(problem.a)
    tail_Q = None
    for i, (k, lo, hi, segs) in enumerate(blocks):
        if k == "p":
            inv_c = sum(integral(s.inv_p, s.lo, s.hi) for s in segs)
            scale = sum(_p_scale(s.inv_p, s.lo, s.hi) for s in segs)
            if abs(inv_c) <= 1e-13 * scale:
                raise ReductionError(f"p-block [{lo}, {hi}] has zero integral of 1/p "
                                     "(c_n would be infinite)")
            c.append(1.0 / inv_c)
            if i == len(blocks) - 1:
                nodes.append(hi)
        else:
            nodes.append(lo)
            qn = sum(integral(s.q, s.lo, s.hi) for s in segs)
            if i == len(blocks) - 1:
                tail_Q = qn
            else:
                Q.append(qn)
    part = AtkinsonPartition(tuple(Block(k, lo, hi) for k, lo, hi, _ in blocks),
                             tuple(nodes), virtual_first, tail_Q)
    return part, Recurrence(tuple(c), tuple(Q))


def seeds_from_state(part: AtkinsonPartition, rec: Recurrence, u_a: float, v_a: float):
    """(y_{-1}, y_0) for the solution with u(a) = u_a, (p u')(a) = v_a."""
    if part.virtual_first:
        # virtual node a_{-1} with c_{-1} = 1 ahead of the opening q-block
        return u_a - v_a / rec.c[0], u_a
    return u_a, u_a + v_a / rec.c[0]


def step(rec: Recurrence, y_init) -> PolygonSolution:
    y_prev, y_cur = (float(t) for t in y_init)
    if any(cn == 0 for cn in rec.c):
        raise ZeroDivisionError("recurrence has a zero coefficient c_n")
    ys = [y_prev, y_cur]
    d = rec.d
    for n in range(rec.m):
        y_next = (d[n] * y_cur - rec.c[n] * y_prev) / rec.c[n + 1]
        ys.append(y_next)
        y_prev, y_cur = y_cur, y_next
    return PolygonSolution(tuple(ys), -1)


def difference_residual(rec: Recurrence, poly: PolygonSolution) -> list[float]:
    """-D(c_{n-1} D y_{n-1}) + Q_n y_n for n = 0..m-1, each scaled by its term size."""
    y = poly.y  # y[k] is y_{k-1}
    out = []
    for n in range(rec.m):
        left = rec.c[n + 1] * (y[n + 2] - y[n + 1])
        right = rec.c[n] * (y[n + 1] - y[n])
        r = -(left - right) + rec.Q[n] * y[n + 1]
        size = abs(left) + abs(right) + abs(rec.Q[n] * y[n + 1])
        out.append(r / size if size else 0.0)
    return out


def polygon_zeros(poly: PolygonSolution) -> ZeroSet:
    """Zeros of the polygonal curve through the vertices (n, y_n)."""
    y = poly.y
    ns = poly.n
    if all(t == 0 for t in y):
        raise ValueError("trivial polygon")
    ev = []
    last = len(y) - 1
    for i, t in enumerate(y):
        if t == 0:
            if i == 0 or i == last:
                ev.append(ZeroEvent(float(ns[i]), ENDPOINT, (ns[i], ns[i])))
                continue
            # nearest nonzero neighbours decide crossing vs touch
            lft = next((y[j] for j in range(i - 1, -1, -1) if y[j] != 0), 0.0)
            rgt = next((y[j] for j in range(i + 1, len(y)) if y[j] != 0), 0.0)
            kind = CROSSING if lft * rgt < 0 else TANGENTIAL
            ev.append(ZeroEvent(float(ns[i]), kind, (ns[i - 1], ns[i + 1]), float(ns[i])))
        if i < last and t * y[i + 1] < 0:
            x = ns[i] + t / (t - y[i + 1])
            ev.append(ZeroEvent(float(x), CROSSING, (ns[i], ns[i + 1])))
    ev.sort(key=lambda e: e.x)
    return ZeroSet(tuple(ev), (float(ns[0]), float(ns[-1])))


def moulton_check(rec: Recurrence) -> bool:
    """c_n c_{n-1} > 0 for all n: the SSP is then guaranteed."""
    return all(a * b > 0 for a, b in zip(rec.c[:-1], rec.c[1:]))


@dataclass(frozen=True)
class C22Result:
    sum_inv_c: float
    applies: bool


def c22_check(rec: Recurrence, tol: float = 1e-12) -> C22Result:
    """Sum of 1/c_n over n = 0..m-1 vanishes and every Q_n is zero."""
    s = math.fsum(1.0 / cn for cn in rec.c[1:])
    return C22Result(s, abs(s) <= tol and all(qn == 0 for qn in rec.Q))


def fibonacci(m: int) -> Recurrence:
    """y_{n+1} = y_n + y_{n-1}: alternating c_n = (-1)^{n+1}, Q_n = c_n."""
    c = [(-1.0) ** (n + 1) for n in range(-1, m)]
    return Recurrence(tuple(c), tuple(c[1:]))


def alternating(m: int, flip: bool = False) -> Recurrence:
    """c_{n-1} = (-1)^n, Q = 0, which reduces to y_{n+1} = y_{n-1}.

    With ``flip`` all c_n = 1 and Q_n = -2, giving y_{n+1} = -y_{n-1}.
    """
    if flip:
        return Recurrence(tuple([1.0] * (m + 1)), tuple([-2.0] * m))
    return Recurrence(tuple((-1.0) ** (n + 1) for n in range(-1, m)), tuple([0.0] * m))

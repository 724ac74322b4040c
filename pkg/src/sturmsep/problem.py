"""Coefficient primitives and piecewise problems for -(p y')' + q y = 0.

Problems are stored in system form u' = inv_p * v, v' = q * u, where
``inv_p`` is 1/p.  An infinite leading term is the ordinary value
``inv_p = Const(0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

# relative threshold under which a coefficient value counts as zero
_ZERO_REL = 1e-13


# ----------------------------------------------------------------------------
# Function primitives
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float

    kind = "const"

    def __call__(self, x):
        if isinstance(x, np.ndarray):
            return np.full_like(x, self.value, dtype=float)
        return float(self.value)

    def antiderivative(self, x):
        return self.value * x

    def is_zero(self) -> bool:
        return self.value == 0.0

    def scaled(self, k: float) -> "Const":
        return Const(k * self.value)

    def zeros(self, lo: float, hi: float) -> list[float]:
        return []

    def jumps(self, lo: float, hi: float) -> list[float]:
        return []

    def restrict(self, lo: float, hi: float) -> "FunctionSpec":
        return self

    def to_dict(self) -> dict:
        return {"kind": "const", "value": self.value}


@dataclass(frozen=True)
class Poly:
    """Polynomial with ascending coefficients, ``c[0] + c[1] x + ...``."""

    coefficients: tuple

    kind = "poly"

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            raise ValueError("Poly needs at least one coefficient")
        if len(coeffs) > 4:
            raise ValueError("Poly degree is capped at 3")
        object.__setattr__(self, "coefficients", coeffs)

    def __call__(self, x):
        out = 0.0
        for c in reversed(self.coefficients):
            out = out * x + c
        if isinstance(x, np.ndarray):
            return np.asarray(out, dtype=float) + np.zeros_like(x, dtype=float)
        return float(out)

    def antiderivative(self, x):
        out = 0.0
        for k in range(len(self.coefficients) - 1, -1, -1):
            out = out * x + self.coefficients[k] / (k + 1)
        return out * x

    def derivative_coefficients(self) -> tuple:
        return tuple(k * c for k, c in enumerate(self.coefficients))[1:] or (0.0,)

    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.coefficients)

    def scaled(self, k: float) -> "Poly":
        return Poly(tuple(k * c for c in self.coefficients))

    def zeros(self, lo: float, hi: float) -> list[float]:
        """Distinct real zeros in the open interval (lo, hi).

        Critical points come from the quadratic formula; the polynomial is
        monotone between them, so each sign-changing piece is bisected.
        Critical points where the value vanishes are double roots.
        """
        if self.is_zero():
            return []
        crit = [c for c in _real_roots_upto2(self.derivative_coefficients()) if lo < c < hi]
        pts = [lo] + sorted(crit) + [hi]
        scale = max(abs(self(t)) for t in np.linspace(lo, hi, 9)) or 1.0
        out = []
        for s, t in zip(pts[:-1], pts[1:]):
            fs, ft = self(s), self(t)
            if fs * ft < 0:
                out.append(bisect(self, s, t))
        for c in crit:
            if abs(self(c)) <= _ZERO_REL * scale:
                out.append(c)
        return _dedupe(sorted(z for z in out if lo < z < hi), tol=1e-12 * (hi - lo))

    def jumps(self, lo: float, hi: float) -> list[float]:
        return []

    def restrict(self, lo: float, hi: float) -> "FunctionSpec":
        return self

    def to_dict(self) -> dict:
        return {"kind": "poly", "coefficients": list(self.coefficients)}


@dataclass(frozen=True)
class Trig:
    """``amplitude * sin(omega x + phase)`` or the cos variant."""

    amplitude: float
    omega: float
    phase: float = 0.0
    fn: str = "sin"

    kind = "trig"

    def __post_init__(self):
        if self.omega == 0:
            raise ValueError("Trig omega must be nonzero")
        if self.fn not in ("sin", "cos"):
            raise ValueError(f"Trig kind must be 'sin' or 'cos', got {self.fn!r}")

    def __call__(self, x):
        arg = self.omega * x + self.phase
        if isinstance(x, np.ndarray):
            return self.amplitude * (np.sin(arg) if self.fn == "sin" else np.cos(arg))
        return self.amplitude * (math.sin(arg) if self.fn == "sin" else math.cos(arg))

    def antiderivative(self, x):
        arg = self.omega * x + self.phase
        k = self.amplitude / self.omega
        if self.fn == "sin":
            return -k * np.cos(arg)
        return k * np.sin(arg)

    def is_zero(self) -> bool:
        return self.amplitude == 0.0

    def scaled(self, k: float) -> "Trig":
        return Trig(k * self.amplitude, self.omega, self.phase, self.fn)

    def zeros(self, lo: float, hi: float) -> list[float]:
        if self.is_zero():
            return []
        shift = 0.0 if self.fn == "sin" else math.pi / 2
        # omega x + phase = shift + j pi
        ends = sorted(((self.omega * lo + self.phase - shift) / math.pi,
                       (self.omega * hi + self.phase - shift) / math.pi))
        out = []
        for j in range(math.floor(ends[0]), math.ceil(ends[1]) + 1):
            z = (shift + j * math.pi - self.phase) / self.omega
            if lo < z < hi:
                out.append(z)
        return sorted(out)

    def jumps(self, lo: float, hi: float) -> list[float]:
        return []

    def restrict(self, lo: float, hi: float) -> "FunctionSpec":
        return self

    def to_dict(self) -> dict:
        return {"kind": "trig", "amplitude": self.amplitude, "omega": self.omega,
                "phase": self.phase, "fn": self.fn}


@dataclass(frozen=True)
class SignStep:
    """``left`` for x < pivot, ``right`` for x >= pivot."""

    pivot: float
    left: float
    right: float

    kind = "signstep"

    def __call__(self, x):
        if isinstance(x, np.ndarray):
            return np.where(x < self.pivot, self.left, self.right).astype(float)
        return float(self.left if x < self.pivot else self.right)

    def antiderivative(self, x):
        if isinstance(x, np.ndarray):
            return np.where(x < self.pivot, self.left * (x - self.pivot),
                            self.right * (x - self.pivot))
        return (self.left if x < self.pivot else self.right) * (x - self.pivot)

    def is_zero(self) -> bool:
        return self.left == 0.0 and self.right == 0.0

    def scaled(self, k: float) -> "SignStep":
        return SignStep(self.pivot, k * self.left, k * self.right)

    def zeros(self, lo: float, hi: float) -> list[float]:
        if lo < self.pivot < hi and self.left * self.right < 0:
            return [self.pivot]
        return []

    def jumps(self, lo: float, hi: float) -> list[float]:
        if lo < self.pivot < hi and self.left != self.right:
            return [self.pivot]
        return []

    def restrict(self, lo: float, hi: float) -> "FunctionSpec":
        if hi <= self.pivot:
            return Const(self.left)
        if lo >= self.pivot:
            return Const(self.right)
        return self

    def to_dict(self) -> dict:
        return {"kind": "signstep", "pivot": self.pivot, "left": self.left,
                "right": self.right}


FunctionSpec = Union[Const, Poly, Trig, SignStep]


def eval_fn(fn: FunctionSpec, x):
    """Pointwise value of a coefficient primitive."""
    return fn(x)


def integral(fn: FunctionSpec, lo: float, hi: float) -> float:
    return float(fn.antiderivative(hi) - fn.antiderivative(lo))


def function_from_dict(d: dict) -> FunctionSpec:
    kind = d.get("kind")
    if kind == "const":
        return Const(float(d["value"]))
    if kind == "poly":
        return Poly(tuple(d["coefficients"]))
    if kind == "trig":
        return Trig(float(d["amplitude"]), float(d["omega"]), float(d.get("phase", 0.0)),
                    d.get("fn", "sin"))
    if kind == "signstep":
        return SignStep(float(d["pivot"]), float(d["left"]), float(d["right"]))
    raise ValueError(f"unknown function kind {kind!r}")


def same_shape_scaled(f: FunctionSpec, g: FunctionSpec, k: float, rtol: float = 1e-12) -> bool:
    """True if g == k * f structurally (same primitive kind, scaled parameters)."""
    h = f.scaled(k)
    if type(h) is not type(g):
        # Const(0) is the zero function whatever the other kind
        return h.is_zero() and g.is_zero()
    a, b = h.to_dict(), g.to_dict()
    for key, va in a.items():
        vb = b[key]
        if isinstance(va, str):
            if va != vb:
                return False
        elif isinstance(va, list):
            if len(va) != len(vb) or not np.allclose(va, vb, rtol=rtol, atol=rtol):
                return False
        elif not math.isclose(va, vb, rel_tol=rtol, abs_tol=rtol):
            return False
    return True


# ----------------------------------------------------------------------------
# Problems
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    lo: float
    hi: float
    inv_p: FunctionSpec
    q: FunctionSpec

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "inv_p": self.inv_p.to_dict(),
                "q": self.q.to_dict()}


@dataclass(frozen=True)
class TurningPoint:
    location: float
    direction: int  # +1: inv_p goes negative -> positive


@dataclass(frozen=True)
class Violation:
    index: int | None
    rule: str
    message: str

    def __str__(self):
        where = "" if self.index is None else f"segment {self.index}: "
        return f"{where}{self.rule}: {self.message}"


class ProblemError(ValueError):
    """Raised when a problem fails validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class ProblemSpec:
    a: float
    b: float
    segments: tuple
    label: str = ""
    _starts: tuple = field(default=(), init=False, repr=False, compare=False)
    _cumP: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "_starts", tuple(s.lo for s in self.segments))
        cum = [0.0]
        for s in self.segments[:-1]:
            cum.append(cum[-1] + integral(s.inv_p, s.lo, s.hi))
        object.__setattr__(self, "_cumP", tuple(cum))

    @classmethod
    def single(cls, a, b, inv_p, q, label=""):
        return cls(a, b, (Segment(a, b, inv_p, q),), label)

    @property
    def length(self) -> float:
        return self.b - self.a

    def segment_index(self, x: float) -> int:
        """Index of the segment containing x; boundaries resolve to the right."""
        i = int(np.searchsorted(self._starts, x, side="right")) - 1
        return min(max(i, 0), len(self.segments) - 1)

    def segment_at(self, x: float) -> Segment:
        return self.segments[self.segment_index(x)]

    def inv_p(self, x):
        return self._piecewise(x, "inv_p")

    def q(self, x):
        return self._piecewise(x, "q")

    def _piecewise(self, x, name):
        if np.ndim(x) == 0:
            return getattr(self.segment_at(float(x)), name)(float(x))
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self._starts, x, side="right") - 1, 0,
                      len(self.segments) - 1)
        out = np.empty_like(x)
        for i, seg in enumerate(self.segments):
            m = idx == i
            if m.any():
                out[m] = getattr(seg, name)(x[m])
        return out

    def primitive(self, x):
        """P(x) = integral of inv_p from a to x (vectorized)."""
        if np.ndim(x) == 0:
            x = float(x)
            i = self.segment_index(x)
            s = self.segments[i]
            return self._cumP[i] + float(s.inv_p.antiderivative(x) - s.inv_p.antiderivative(s.lo))
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self._starts, x, side="right") - 1, 0,
                      len(self.segments) - 1)
        out = np.empty_like(x)
        for i, s in enumerate(self.segments):
            m = idx == i
            if m.any():
                out[m] = self._cumP[i] + s.inv_p.antiderivative(x[m]) - s.inv_p.antiderivative(s.lo)
        return out

    def to_dict(self) -> dict:
        return {"label": self.label, "a": self.a, "b": self.b,
                "segments": [s.to_dict() for s in self.segments]}

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        for key in ("a", "b", "segments"):
            if key not in d:
                raise ValueError(f"problem is missing field {key!r}")
        segs = []
        for i, s in enumerate(d["segments"]):
            try:
                segs.append(Segment(float(s["lo"]), float(s["hi"]),
                                    function_from_dict(s["inv_p"]), function_from_dict(s["q"])))
            except KeyError as exc:
                raise ValueError(f"segments[{i}] is missing field {exc.args[0]!r}") from None
        return cls(float(d["a"]), float(d["b"]), tuple(segs), d.get("label", ""))


def eps_sep(problem: ProblemSpec) -> float:
    return 1e-6 * (problem.b - problem.a)


def _sign_pieces(problem: ProblemSpec) -> list[tuple[float, float, int]]:
    """Maximal subintervals of (a, b) on which inv_p has constant sign."""
    pieces = []
    for seg in problem.segments:
        cuts = sorted(set(seg.inv_p.zeros(seg.lo, seg.hi)) | set(seg.inv_p.jumps(seg.lo, seg.hi)))
        pts = [seg.lo] + cuts + [seg.hi]
        for s, t in zip(pts[:-1], pts[1:]):
            if seg.inv_p.is_zero():
                sg = 0
            else:
                mid = seg.inv_p.restrict(s, t)(0.5 * (s + t))
                sg = int(np.sign(mid))
            if pieces and pieces[-1][2] == sg:
                pieces[-1] = (pieces[-1][0], t, sg)
            else:
                pieces.append((s, t, sg))
    return pieces


def turning_points(problem: ProblemSpec, check_separation: bool = True) -> list[TurningPoint]:
    """Sign changes of inv_p in (a, b), sorted.

    A sign change across a block where inv_p vanishes identically is placed at
    the midpoint of that block.
    """
    pieces = _sign_pieces(problem)
    out = []
    prev = None  # last nonzero-sign piece
    for k, (s, t, sg) in enumerate(pieces):
        if sg == 0:
            continue
        if prev is not None and prev[2] != sg:
            gap_lo, gap_hi = prev[1], s
            loc = gap_lo if gap_lo == gap_hi else 0.5 * (gap_lo + gap_hi)
            out.append(TurningPoint(loc, 1 if sg > 0 else -1))
        prev = (s, t, sg)
    if check_separation:
        for t1, t2 in zip(out[:-1], out[1:]):
            if t2.location - t1.location < eps_sep(problem):
                raise ProblemError([Violation(None, "separation",
                                              f"turning points at {t1.location!r} and "
                                              f"{t2.location!r} are closer than {eps_sep(problem)!r}")])
    return out


def primitive_P(problem: ProblemSpec, x):
    return problem.primitive(x)


def validate(problem: ProblemSpec) -> list[Violation]:
    """Return the list of broken standing hypotheses; empty means valid."""
    out = []
    if not problem.b > problem.a:
        out.append(Violation(None, "interval", f"need a < b, got [{problem.a}, {problem.b}]"))
    segs = problem.segments
    if not segs:
        out.append(Violation(None, "tiling", "no segments"))
        return out
    tol = 1e-12 * max(1.0, abs(problem.b - problem.a))
    if abs(segs[0].lo - problem.a) > tol:
        out.append(Violation(0, "tiling", f"first segment starts at {segs[0].lo}, not a={problem.a}"))
    if abs(segs[-1].hi - problem.b) > tol:
        out.append(Violation(len(segs) - 1, "tiling",
                             f"last segment ends at {segs[-1].hi}, not b={problem.b}"))
    for i, s in enumerate(segs):
        if not s.lo < s.hi:
            out.append(Violation(i, "order", f"lo={s.lo} is not below hi={s.hi}"))
        if s.inv_p.is_zero() and s.q.is_zero():
            out.append(Violation(i, "degenerate", "inv_p and q both vanish identically"))
        if i > 0:
            prev = segs[i - 1]
            if s.lo > prev.hi + tol:
                out.append(Violation(i, "gap", f"gap between {prev.hi} and {s.lo}"))
            elif s.lo < prev.hi - tol:
                out.append(Violation(i, "overlap", f"overlap between {s.lo} and {prev.hi}"))
    if all(s.inv_p.is_zero() for s in segs):
        out.append(Violation(None, "global-degeneracy", "inv_p vanishes identically on [a, b]"))
    if not out:
        try:
            turning_points(problem)
        except ProblemError as exc:
            out.extend(exc.violations)
    return out


def require_valid(problem: ProblemSpec) -> None:
    v = validate(problem)
    if v:
        raise ProblemError(v)


# ----------------------------------------------------------------------------
# Small numeric helpers
# ----------------------------------------------------------------------------


def bisect(f, lo: float, hi: float, xtol: float = 0.0, maxiter: int = 200) -> float:
    """Bisection on a sign-changing bracket; stops at width xtol or at float resolution."""
    flo = f(lo)
    if flo == 0:
        return lo
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if mid <= min(lo, hi) or mid >= max(lo, hi) or abs(hi - lo) <= xtol:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _real_roots_upto2(coeffs: tuple) -> list[float]:
    """Real roots of a polynomial of degree <= 2 (ascending coefficients)."""
    c = list(coeffs) + [0.0] * (3 - len(coeffs))
    c0, c1, c2 = c[:3]
    if c2 == 0.0:
        return [] if c1 == 0.0 else [-c0 / c1]
    disc = c1 * c1 - 4 * c2 * c0
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    # numerically stable pair
    t = -0.5 * (c1 + math.copysign(sq, c1))
    roots = [t / c2]
    if t != 0.0:
        roots.append(c0 / t)
    else:
        roots.append(0.0)
    return sorted(roots)


def _dedupe(xs, tol):
    out = []
    for x in xs:
        if not out or x - out[-1] > tol:
            out.append(x)
    return out

"""Zero-count differences between independent solutions of profile problems.

A profile is a list of vertex heights of a piecewise-linear primitive ``P``
on an equispaced grid with ``P(a) = 0``.  Each cell gets ``inv_p = P'``
(constant) and ``q = -lam * inv_p``, so every solution is a phase shift of
``cos(sqrt(lam) * P)`` and zero counts can be read off the profile.

The anchor ``u1 = sin(sqrt(lam) * P)`` vanishes at both ends whenever
``sqrt(lam) * P(b)`` is a multiple of pi.  Partners are
``u2 = cos(sqrt(lam) * P + phi)``; the record stores
``k = |count(u1) - count(u2)|``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .integrator import Trajectory, closed_form_lemma2, combine
from .oscillation import TOL_BOUNCE, TOL_ZERO, count_zeros, locate_zeros
from .problem import Const, ProblemSpec, Segment

ANCHOR_TOL = 1e-9
DEPENDENT_TOL = 1e-12


@dataclass(frozen=True)
class Profile:
    heights: tuple
    a: float = 0.0
    b: float = 1.0
    profile_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "heights", tuple(float(h) for h in self.heights))
        if len(self.heights) < 2:
            raise ValueError("a profile needs at least two heights")
        if self.heights[0] != 0.0:
            raise ValueError("profile must start at height 0")
        if not self.b > self.a:
            raise ValueError("need a < b")
        if not self.profile_id:
            object.__setattr__(self, "profile_id",
                               "P(" + ",".join(format(h, "g") for h in self.heights) + ")")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.a, self.b, len(self.heights))

    @property
    def slopes(self) -> list[float]:
        h = (self.b - self.a) / (len(self.heights) - 1)
        return [(y1 - y0) / h for y0, y1 in zip(self.heights[:-1], self.heights[1:])]

    @property
    def turning_points(self) -> list[float]:
        """Interior vertices that are strict local extrema."""
        s = self.slopes
        xs = self.nodes
        return [float(xs[i + 1]) for i in range(len(s) - 1) if s[i] * s[i + 1] < 0]

    def to_dict(self) -> dict:
        return {"profile_id": self.profile_id, "heights": list(self.heights),
                "a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, d: dict) -> "Profile":
        if "heights" not in d:
            raise ValueError("profile is missing field 'heights'")
        return cls(tuple(d["heights"]), float(d.get("a", 0.0)), float(d.get("b", 1.0)),
                   str(d.get("profile_id", "")))


@dataclass(frozen=True)
class ProfileFamily:
    name: str
    profiles: tuple
    lambda_grid: tuple

    def __post_init__(self):
        if not self.profiles:
            raise ValueError("family has no profiles")
        lams = tuple(float(t) for t in self.lambda_grid)
        if not lams or any(not t > 0 for t in lams):
            raise ValueError("lambda_grid must be a non-empty list of positive numbers")
        object.__setattr__(self, "lambda_grid", lams)
        for p in self.profiles:
            if any(s == 0 for s in p.slopes):
                raise ValueError(f"{p.profile_id}: zero slope cell")

    def to_dict(self) -> dict:
        return {"name": self.name, "profiles": [p.to_dict() for p in self.profiles],
                "lambda_grid": list(self.lambda_grid)}

    @classmethod
    def from_dict(cls, d: dict) -> "ProfileFamily":
        for key in ("profiles", "lambda_grid"):
            if key not in d:
                raise ValueError(f"family config is missing field '{key}'")
        return cls(str(d.get("name", "custom")),
                   tuple(Profile.from_dict(p) for p in d["profiles"]),
                   tuple(d["lambda_grid"]))


@dataclass
class ExplorationRecord:
    profile_id: str
    lam: float
    phase: float
    n: int
    count2: int
    k: int
    n_open: int
    count2_open: int
    k_open: int
    basis_pair: str = ""
    turning: int = 0
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"profile_id": self.profile_id, "lambda": self.lam, "phase": self.phase,
                "basis_pair": self.basis_pair, "turning_points": self.turning,
                "n": self.n, "count2": self.count2, "k": self.k, "n_open": self.n_open, "count2_open": self.count2_open,
                "k_open": self.k_open, "flags": list(self.flags)}


def build_problem(profile: Profile, lam: float) -> ProblemSpec:
    """Piecewise-constant inv_p from the profile slopes, q = -lam * inv_p."""
    slopes = profile.slopes
    if any(s == 0 for s in slopes):
        raise ValueError(f"{profile.profile_id}: zero slope cell")
    xs = profile.nodes
    segs = tuple(Segment(float(lo), float(hi), Const(s), Const(-lam * s))
                 for lo, hi, s in zip(xs[:-1], xs[1:], slopes))
    return ProblemSpec(profile.a, profile.b, segs, f"{profile.profile_id} lam={lam:.17g}")


def anchor_solution(problem: ProblemSpec, lam: float) -> Trajectory | None:
    """sin(sqrt(lam) P) when it vanishes at b as well as at a, else None."""
    theta_b = math.sqrt(lam) * float(problem.primitive(problem.b))
    j = round(theta_b / math.pi)
    if abs(theta_b - j * math.pi) > ANCHOR_TOL:
        return None
    return closed_form_lemma2(problem, lam, 0.0, 1.0)


def critical_phases(profile: Profile, lam: float) -> list[float]:
    """Phases in [0, pi) putting a zero of cos(sqrt(lam) P + phi) on a turning point."""
    r = math.sqrt(lam)
    out = []
    heights = dict(zip(profile.nodes.tolist(), profile.heights))
    for c in profile.turning_points:
        out.append(math.fmod(math.pi / 2 - r * heights[c], math.pi) % math.pi)
    return out


def phase_grid(profile: Profile, lam: float, phases: int) -> list[float]:
    """Equispaced phases plus the critical ones, without those that reproduce u1."""
    if phases < 1:
        raise ValueError("phases must be a positive integer")
    grid = [math.pi * j / phases for j in range(phases)] + critical_phases(profile, lam)
    grid = sorted(set(round(p, 15) for p in grid if abs(math.cos(p)) > DEPENDENT_TOL))
    return grid


def _count(zs, include_endpoints):
    return count_zeros(zs, include_endpoints)


def _explore_one(profile: Profile, lam: float, phases: int, tol_zero: float,
                 tol_bounce: float) -> list[ExplorationRecord]:
    problem = build_problem(profile, lam)
    u1 = anchor_solution(problem, lam)
    if u1 is None:
        return []
    turning = profile.turning_points
    z1 = locate_zeros(u1, tol_zero, tol_bounce, strict=True, turning=turning)
    n, n_open = _count(z1, True), _count(z1, False)
    cos_t = closed_form_lemma2(problem, lam, 1.0, 0.0)
    out = []
    for phi in phase_grid(profile, lam, phases):
        # cos(s + phi) = cos(phi) cos(s) - sin(phi) sin(s)
        u2 = combine(math.cos(phi), cos_t, -math.sin(phi), u1)
        z2 = locate_zeros(u2, tol_zero, tol_bounce, strict=True, turning=turning)
        c2, c2_open = _count(z2, True), _count(z2, False)
        rec = ExplorationRecord(profile.profile_id, lam, phi, n, c2, abs(n - c2),
                                n_open, c2_open, abs(n_open - c2_open),
                                f"sin(sqrt(lam)P), cos(sqrt(lam)P + {phi:.17g})",
                                len(turning))
        if rec.k > n:
            rec.flags.append("exceeds_n")
        out.append(rec)
    return out


def _threads() -> int:
    try:
        return max(0, int(os.environ.get("STURMSEP_THREADS", "0")))
    except ValueError:
        return 0


def sweep(family: ProfileFamily, phases: int = 32, tol_zero: float = TOL_ZERO,
          tol_bounce: float = TOL_BOUNCE) -> list[ExplorationRecord]:
    """Records for every (profile, lambda) with a valid anchor, in grid order."""
    if phases < 1:
        raise ValueError("phases must be a positive integer")
    jobs = [(p, lam) for p in family.profiles for lam in family.lambda_grid]
    threads = _threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda j: _explore_one(*j, phases, tol_zero, tol_bounce), jobs))
    else:
        parts = [_explore_one(p, lam, phases, tol_zero, tol_bounce) for p, lam in jobs]
    return [r for part in parts for r in part]


def achieved(records, open_interval: bool = False) -> dict[int, list[int]]:
    """{n: sorted achieved k} over all records."""
    table: dict[int, set] = {}
    for r in records:
        n, k = (r.n_open, r.k_open) if open_interval else (r.n, r.k)
        table.setdefault(n, set()).add(k)
    return {n: sorted(ks) for n, ks in sorted(table.items())}


def gaps(table: dict[int, list[int]], n_max: int | None = None) -> dict[int, list[int]]:
    """k in 0..n never observed, per n (restricted to n <= n_max if given)."""
    out = {}
    for n, ks in table.items():
        if n_max is not None and n > n_max:
            continue
        missing = sorted(set(range(n + 1)) - set(ks))
        if missing:
            out[n] = missing
    return out


def summarize(records, n_max: int | None = None, open_interval: bool = False) -> dict:
    """Achieved-k tables plus gaps.

    Gaps are only sought among profiles with a turning point; profiles
    without one form the control arm and report their largest k instead.
    """
    turning = [r for r in records if r.turning > 0]
    control = [r for r in records if r.turning == 0]
    table = achieved(turning, open_interval)
    return {"achieved": {str(n): ks for n, ks in achieved(records).items()},
            "achieved_open": {str(n): ks for n, ks in achieved(records, True).items()},
            "conjecture_gaps": {str(n): ks for n, ks in gaps(table, n_max).items()},
            "control_max_k": max((r.k_open if open_interval else r.k for r in control),
                                 default=None),
            "exceeds_n": sum(1 for r in records if "exceeds_n" in r.flags),
            "records": len(records)}


def cos_turning_record() -> dict:
    """Fixed record for inv_p = cos x, q = -cos x on [0, pi].

    The anchor sin(sin x) vanishes at 0 and pi only; the partners
    cos(sin x) - sin(sin x), sin(1 - sin x) and cos(sin x) have two, one
    and no zeros.
    """
    from .oscillation import classify_th0
    from .theorems import cos_turning
    from .integrator import InitialCondition, integrate

    prob = cos_turning()
    u1 = integrate(prob, InitialCondition(0.0, 0.0, 1.0))
    z1 = locate_zeros(u1)
    n = count_zeros(z1)
    partners = {"cos(sin x) - sin(sin x)": (1.0, -1.0),
                "sin(1 - sin x)": (math.sin(1.0), -math.cos(1.0)),
                "cos(sin x)": (1.0, 0.0)}
    pairs = []
    for name, (u0, v0) in partners.items():
        t2 = integrate(prob, InitialCondition(0.0, u0, v0))
        z2 = locate_zeros(t2)
        cls = classify_th0(prob, u1, t2, zeros1=z1, zeros2=z2)
        pairs.append({"partner": name, "count2": count_zeros(z2),
                      "k": abs(n - count_zeros(z2)), "class": cls.name})
    return {"profile_id": "cos-turning", "n": n, "pairs": pairs,
            "achieved": sorted({p["k"] for p in pairs})}


def _grid_lambdas(steps: int = 48, per_pi: int = 8) -> tuple:
    # sqrt(lam) on j * pi / per_pi, j = 1..steps
    return tuple((j * math.pi / per_pi) ** 2 for j in range(1, steps + 1))


def tent_family() -> ProfileFamily:
    """Alternating tent chains of unit height; sqrt(lam) * H runs over (0, 6 pi]."""
    profiles = (Profile((0, 1, 0), profile_id="tent1"),
                Profile((0, 1, -1, 0), profile_id="tent2"),
                Profile((0, 1, -1, 1, 0), profile_id="tent3"))
    return ProfileFamily("tent", profiles, _grid_lambdas())


def monotone_family() -> ProfileFamily:
    """Increasing profiles with P(b) = 1; anchors exist when sqrt(lam) is a multiple of pi."""
    profiles = (Profile((0, 1), profile_id="mono1"),
                Profile((0, 0.25, 1), profile_id="mono2"),
                Profile((0, 0.75, 1), profile_id="mono3"),
                Profile((0, 0.1, 0.5, 1), profile_id="mono4"))
    return ProfileFamily("monotone", profiles, _grid_lambdas())


FAMILIES = {"tent": tent_family, "monotone": monotone_family}


def records_to_csv(records, path) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "k", "lambda", "profile_id", "phase"])
        for r in records:
            w.writerow([r.n, r.k, format(r.lam, ".17g"), r.profile_id, format(r.phase, ".17g")])

import math

import numpy as np
import pytest

from sturmsep.explorer import (ExplorationRecord, Profile, ProfileFamily, achieved, anchor_solution,
                               build_problem, critical_phases, cos_turning_record, gaps,
                               monotone_family, phase_grid, records_to_csv, summarize, sweep,
                               tent_family)
from sturmsep.integrator import closed_form_lemma2, combine
from sturmsep.oscillation import count_zeros, locate_zeros
from sturmsep.problem import turning_points


def level_count(profile: Profile, r: float, phi: float) -> int:
    """Zeros of cos(r P + phi) on [a, b] from the piecewise-linear profile alone."""
    xs = profile.nodes
    th = [r * h + phi for h in profile.heights]
    hits = []
    for x0, x1, t0, t1 in zip(xs[:-1], xs[1:], th[:-1], th[1:]):
        lo, hi = min(t0, t1), max(t0, t1)
        j0 = math.ceil((lo - math.pi / 2) / math.pi - 1e-12)
        j1 = math.floor((hi - math.pi / 2) / math.pi + 1e-12)
        for j in range(j0, j1 + 1):
            lev = math.pi / 2 + j * math.pi
            s = (lev - t0) / (t1 - t0)
            hits.append(x0 + min(max(s, 0.0), 1.0) * (x1 - x0))
    hits.sort()
    out = []
    for h in hits:
        if not out or h - out[-1] > 1e-9:
            out.append(h)
    return len(out)


# -- construction -------------------------------------------------------------

def test_tent_problem_shape():
    prob = build_problem(Profile((0, 2, 0)), 3.0)
    assert len(prob.segments) == 2
    assert [t.location for t in turning_points(prob)] == [0.5]
    seg = prob.segments[0]
    assert seg.inv_p.value == 4.0 and seg.q.value == -12.0


def test_monotone_profile_has_no_turning_point():
    assert turning_points(build_problem(Profile((0, 1)), 1.0)) == []


def test_three_cell_turning_points():
    prob = build_problem(Profile((0, 2, -1, 0)), 1.0)
    np.testing.assert_allclose([t.location for t in turning_points(prob)], [1 / 3, 2 / 3])


def test_zero_slope_rejected():
    with pytest.raises(ValueError, match="zero slope"):
        build_problem(Profile((0, 1, 1)), 1.0)
    with pytest.raises(ValueError):
        ProfileFamily("x", (Profile((0, 0)),), (1.0,))


def test_profile_must_start_at_zero():
    with pytest.raises(ValueError):
        Profile((1, 2))


def test_primitive_matches_heights():
    p = Profile((0, 1.5, -0.5, 0.25), a=-1.0, b=2.0)
    prob = build_problem(p, 1.0)
    np.testing.assert_allclose(prob.primitive(p.nodes), p.heights, atol=1e-14)


# -- anchors ------------------------------------------------------------------

def test_anchor_tent_always_valid():
    for lam in (0.37, 2.0, 55.5):
        prob = build_problem(Profile((0, 1.3, 0)), lam)
        u1 = anchor_solution(prob, lam)
        assert u1 is not None
        assert u1.u[0] == 0.0 and abs(u1.u[-1]) <= 1e-15


def test_anchor_monotone():
    p = Profile((0, 1))
    assert anchor_solution(build_problem(p, math.pi ** 2), math.pi ** 2) is not None
    assert anchor_solution(build_problem(p, 1.0), 1.0) is None


def test_anchor_is_sin_of_rP():
    lam = 7.3
    p = Profile((0, 1, -0.5, 0))
    prob = build_problem(p, lam)
    u1 = anchor_solution(prob, lam)
    xs = np.linspace(0, 1, 200)
    np.testing.assert_allclose(u1.u_at(xs), np.sin(math.sqrt(lam) * prob.primitive(xs)),
                               atol=1e-6)


# -- zero-count oracle ----------------------------------------------------------

@pytest.mark.parametrize("heights", [(0, 1, 0), (0, 1, -1, 0), (0, 2, -1, 0), (0, 1, -1, 1, 0),
                                     (0, 0.3, 1)])
def test_locate_zeros_matches_level_count(heights):
    p = Profile(heights)
    rng = np.random.default_rng(len(heights))
    for r in (0.7, math.pi, 2.5 * math.pi, 4.1):
        lam = r * r
        prob = build_problem(p, lam)
        base_c = closed_form_lemma2(prob, lam, 1.0, 0.0)
        base_s = closed_form_lemma2(prob, lam, 0.0, 1.0)
        for phi in list(rng.uniform(0, math.pi, 6)) + critical_phases(p, lam):
            if abs(math.cos(phi)) < 1e-9:
                continue
            u2 = combine(math.cos(phi), base_c, -math.sin(phi), base_s)
            zs = locate_zeros(u2, turning=p.turning_points)
            assert count_zeros(zs) == level_count(p, r, phi), (heights, r, phi)


def test_tent_two_and_a_half_pi():
    p = Profile((0, 1, 0))
    lam = (2.5 * math.pi) ** 2
    recs = [r for r in sweep(ProfileFamily("one", (p,), (lam,)), phases=16)]
    # endpoints plus pi and 2 pi hit on the way up and down
    assert {r.n for r in recs} == {6}
    assert {0, 1} <= {r.k for r in recs}


# -- phases -------------------------------------------------------------------

def test_phase_grid_excludes_dependent_phase():
    grid = phase_grid(Profile((0, 1, 0)), 4.0, 8)
    assert all(abs(math.cos(p)) > 1e-12 for p in grid)
    assert len(grid) == 8  # 7 equispaced plus one critical
    assert grid == sorted(grid)


def test_critical_phase_gives_bounce():
    p = Profile((0, 1, 0))
    lam = 5.0
    (phi,) = critical_phases(p, lam)
    assert math.cos(math.sqrt(lam) * 1.0 + phi) == pytest.approx(0.0, abs=1e-14)


def test_phases_must_be_positive():
    with pytest.raises(ValueError):
        sweep(tent_family(), phases=0)


# -- summaries ------------------------------------------------------------------

def _rec(n, k, turning=1):
    return ExplorationRecord("p", 1.0, 0.0, n, n - k, k, n, n - k, k, "", turning)


def test_achieved_and_gaps():
    recs = [_rec(2, 0), _rec(2, 2), _rec(3, 1)]
    assert achieved(recs) == {2: [0, 2], 3: [1]}
    assert gaps(achieved(recs)) == {2: [1], 3: [0, 2, 3]}
    assert gaps(achieved(recs), n_max=2) == {2: [1]}


def test_summary_ignores_control_for_gaps():
    s = summarize([_rec(2, 1, turning=0)])
    assert s["conjecture_gaps"] == {} and s["control_max_k"] == 1


def test_cos_turning_record():
    rec = cos_turning_record()
    assert rec["n"] == 2
    assert rec["achieved"] == [0, 1, 2]
    assert {p["class"] for p in rec["pairs"]} == {"NoZeros", "SingleBounce", "TwoCrossings"}


def test_monotone_control_never_exceeds_one():
    fam = monotone_family()
    fam = ProfileFamily(fam.name, fam.profiles, fam.lambda_grid[:24])
    recs = sweep(fam, phases=12)
    assert recs and max(r.k for r in recs) <= 1


def test_sweep_is_reproducible():
    fam = ProfileFamily("t", (Profile((0, 1, -1, 0)),), tuple((j * math.pi / 4) ** 2
                                                              for j in range(1, 9)))
    a = [r.to_dict() for r in sweep(fam, phases=8)]
    b = [r.to_dict() for r in sweep(fam, phases=8)]
    assert a == b


def test_sweep_threads_match_serial(monkeypatch):
    fam = ProfileFamily("t", (Profile((0, 1, 0)),), ((1.5 * math.pi) ** 2, 9.0, 30.0))
    serial = [r.to_dict() for r in sweep(fam, phases=6)]
    monkeypatch.setenv("STURMSEP_THREADS", "3")
    assert [r.to_dict() for r in sweep(fam, phases=6)] == serial


def test_records_csv(tmp_path):
    path = tmp_path / "r.csv"
    records_to_csv([_rec(2, 1)], path)
    assert path.read_text().splitlines() == ["n,k,lambda,profile_id,phase", "2,1,1,p,0"]


def test_family_dict_roundtrip():
    fam = tent_family()
    assert ProfileFamily.from_dict(fam.to_dict()) == fam
    with pytest.raises(ValueError, match="lambda_grid"):
        ProfileFamily.from_dict({"profiles": []})

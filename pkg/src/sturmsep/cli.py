"""Command-line front end.

Exit codes: 0 success, 1 internal error or refuted conclusion,
2 invalid input or hypotheses not met, 3 conjecture gap found by ``explore``.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .explorer import FAMILIES, ProfileFamily, cos_turning_record, records_to_csv, summarize, sweep
from .integrator import IntegrationError, InitialCondition, integrate
from .oscillation import (TOL_BOUNCE, TOL_ZERO, AnomalousZeroError, count_zeros,
                          interlace_check, locate_zeros, min_gap_guard)
from .problem import ProblemError, ProblemSpec, Trig, Const, require_valid, turning_points
from .recurrence import (ReductionError, Recurrence, alternating, atkinson_reduce, c22_check,
                         moulton_check, polygon_zeros, seeds_from_state, step)
from .report import envelope, write_json
from . import theorems

EXIT_OK, EXIT_ERROR, EXIT_UNMET, EXIT_GAP = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def _load(path):
    if path is None:
        return None
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read input: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"input is not valid JSON: {exc}") from None


def _tolerances(args) -> dict:
    tol = {"tol": args.tol, "tol_zero": args.tol_zero, "tol_bounce": args.tol_bounce,
           "eps_gap": args.eps_gap}
    for k, v in tol.items():
        if not (v > 0 and math.isfinite(v)):
            raise ConfigError(f"tolerance {k} must be positive")
    return tol


def _atomic_csv(obj, path) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".csv")
    os.close(fd)
    try:
        obj.to_csv(tmp) if hasattr(obj, "to_csv") else obj(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _side_path(output, tag: str, ext: str = ".csv") -> str:
    p = Path(output)
    return str(p.with_name(f"{p.stem}_{tag}{ext}"))


def _problem(cfg) -> ProblemSpec:
    if not isinstance(cfg, dict):
        raise ConfigError("problem config must be a JSON object")
    try:
        prob = ProblemSpec.from_dict(cfg)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    return prob


def _ics(cfg, prob) -> list[InitialCondition]:
    raw = cfg.get("ics")
    if raw is None:
        return [InitialCondition(prob.a, 0.0, 1.0), InitialCondition(prob.a, 1.0, 0.0)]
    out = []
    for i, ic in enumerate(raw):
        try:
            if isinstance(ic, dict):
                out.append(InitialCondition(float(ic.get("x0", prob.a)), float(ic["u0"]),
                                            float(ic["v0"])))
            else:
                x0, u0, v0 = ic
                out.append(InitialCondition(float(x0), float(u0), float(v0)))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"ics[{i}] is malformed: {exc}") from None
    if not out:
        raise ConfigError("ics is empty")
    return out


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    tol = _tolerances(args)
    cfg = _load(args.input)
    prob = _problem(cfg)
    require_valid(prob)
    ics = _ics(cfg, prob)
    tps = turning_points(prob)
    sols, zsets = [], []
    for i, ic in enumerate(ics):
        traj = integrate(prob, ic, tol["tol"])
        zs = locate_zeros(traj, tol["tol_zero"], tol["tol_bounce"], strict=False)
        gap = min_gap_guard(zs, tol["eps_gap"])
        csv_path = _side_path(args.output, f"traj{i}")
        _atomic_csv(traj, csv_path)
        zsets.append(zs)
        sols.append({"index": i, "ic": {"x0": ic.x0, "u0": ic.u0, "v0": ic.v0},
                     "csv": os.path.basename(csv_path),
                     "zeros": zs.to_list(),
                     "count": count_zeros(zs, not args.open_interval),
                     "anomalies": len(zs.anomalies),
                     "gap_violation": None if gap is None else vars(gap),
                     "trajectory": traj.to_dict()})
    pairs = []
    for i, j in itertools.combinations(range(len(ics)), 2):
        rep = interlace_check(zsets[i], zsets[j], (prob.a, prob.b))
        pairs.append({"pair": [i, j], **rep.to_dict()})
    verdict = "fails" if any(p["verdict"] == "fails" for p in pairs) else "holds"
    body = {"problem": prob.to_dict(),
            "turning_points": [{"x": t.location, "direction": t.direction} for t in tps],
            "solutions": sols, "ssp": pairs, "verdict": verdict}
    write_json(args.output, envelope("analyze", body, tol, args.seed))
    return EXIT_OK


def cmd_reduce(args) -> int:
    tol = _tolerances(args)
    cfg = _load(args.input)
    prob = _problem(cfg)
    require_valid(prob)
    try:
        part, rec = atkinson_reduce(prob)
    except ReductionError as exc:
        raise ConfigError(str(exc)) from None
    nodes = [x for x in part.node_points if x is not None]
    sols = []
    for i, ic in enumerate(_ics(cfg, prob)):
        if ic.x0 != prob.a:
            raise ConfigError(f"ics[{i}]: reduction needs initial data at a")
        y0 = seeds_from_state(part, rec, ic.u0, ic.v0)
        poly = step(rec, y0)
        traj = integrate(prob, ic, tol["tol"])
        u_nodes = [float(traj.u_at(x)) for x in nodes]
        y_nodes = list(poly.y[1:] if part.virtual_first else poly.y)
        csv_path = _side_path(args.output, f"poly{i}")
        _atomic_csv(poly, csv_path)
        sols.append({"index": i, "seeds": list(y0), "y": list(poly.y), "csv": os.path.basename(csv_path),
                     "u_at_nodes": u_nodes,
                     "max_abs_diff": max(abs(a - b) for a, b in zip(u_nodes, y_nodes)),
                     "zeros": polygon_zeros(poly).to_list()})
    c22 = c22_check(rec)
    body = {"problem": prob.to_dict(),
            "partition": {"blocks": [vars(b) for b in part.blocks],
                          "node_points": list(part.node_points),
                          "virtual_first": part.virtual_first, "tail_Q": part.tail_Q},
            "recurrence": rec.to_dict(), "moulton": moulton_check(rec),
            "c22": {"sum_inv_c": c22.sum_inv_c, "applies": c22.applies},
            "solutions": sols}
    write_json(args.output, envelope("reduce", body, tol, args.seed))
    return EXIT_OK


def _recurrence(cfg) -> tuple[Recurrence, list]:
    if not isinstance(cfg, dict):
        raise ConfigError("recurrence config must be a JSON object")
    try:
        rec = Recurrence.from_dict(cfg)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    seeds = cfg.get("seeds", [[0.0, 1.0], [1.0, 0.0]])
    try:
        seeds = [(float(s[0]), float(s[1])) for s in seeds]
    except (TypeError, ValueError, IndexError):
        raise ConfigError("seeds must be a list of [y_-1, y_0] pairs") from None
    return rec, seeds


def cmd_recurrence(args) -> int:
    tol = _tolerances(args)
    rec, seeds = _recurrence(_load(args.input))
    polys, zsets, sols = [], [], []
    for i, s in enumerate(seeds):
        try:
            poly = step(rec, s)
            zs = polygon_zeros(poly)
        except (ZeroDivisionError, ValueError) as exc:
            raise ConfigError(f"seeds[{i}]: {exc}") from None
        csv_path = _side_path(args.output, f"poly{i}")
        _atomic_csv(poly, csv_path)
        polys.append(poly)
        zsets.append(zs)
        sols.append({"index": i, "seeds": list(s), "y": list(poly.y),
                     "csv": os.path.basename(csv_path), "zeros": zs.to_list(),
                     "count": count_zeros(zs, not args.open_interval)})
    pairs = []
    for i, j in itertools.combinations(range(len(seeds)), 2):
        rep = interlace_check(zsets[i], zsets[j])
        pairs.append({"pair": [i, j], **rep.to_dict()})
    c22 = c22_check(rec)
    body = {"recurrence": rec.to_dict(), "moulton": moulton_check(rec),
            "c22": {"sum_inv_c": c22.sum_inv_c, "applies": c22.applies},
            "solutions": sols, "interlacing": pairs,
            "verdict": "fails" if any(p["verdict"] == "fails" for p in pairs) else "holds"}
    write_json(args.output, envelope("recurrence", body, tol, args.seed))
    return EXIT_OK


FIXTURES = {
    "cos-turning": theorems.cos_turning,
    "sign": theorems.sign_problem,
    "sign-q0": lambda: theorems.sign_problem(q_zero=True),
    "cos-profile": lambda: ProblemSpec.single(0.0, math.pi, Trig(1.0, 1.0, 0.0, "cos"),
                                              Const(0.0), "cos-profile"),
    "th2": theorems.th2_fixture,
    "th00": theorems.th00_fixture,
}
DEFAULT_FIXTURE = {"c21": "cos-profile", "th0": "cos-turning", "th2": "th2",
                   "th3": "cos-turning", "th00": "th00"}


def _verify_problem(name, cfg) -> ProblemSpec:
    if cfg is None:
        return FIXTURES[DEFAULT_FIXTURE[name]]()
    if isinstance(cfg, dict) and "fixture" in cfg:
        key = cfg["fixture"]
        if key not in FIXTURES:
            raise ConfigError(f"unknown fixture {key!r}; choose from {sorted(FIXTURES)}")
        return FIXTURES[key]()
    prob = _problem(cfg)
    require_valid(prob)
    return prob


def cmd_verify(args) -> int:
    tol = _tolerances(args)
    cfg = _load(args.input)
    name = args.verifier
    if name == "c22":
        if cfg is None:
            rec = alternating(6)
        else:
            rec, _ = _recurrence(cfg)
        rep = theorems.verify_c22(rec)
    else:
        prob = _verify_problem(name, cfg)
        if name == "c21":
            rep = theorems.verify_c21(prob, int_tol=tol["tol"])
        elif name == "th0":
            rep = theorems.verify_th0(prob, args.samples, tol["tol"], tol["tol_zero"],
                                      tol["tol_bounce"], args.seed)
        elif name == "th2":
            rep = theorems.verify_th2(prob, args.samples, tol["tol"], tol_zero=tol["tol_zero"],
                                      tol_bounce=tol["tol_bounce"], seed=args.seed)
        elif name == "th3":
            rep = theorems.verify_th3(prob, int_tol=tol["tol"])
        else:
            rep = theorems.verify_th00(prob, tol["tol"], tol["tol_zero"], tol["tol_bounce"])
    body = {"report": rep.to_dict()}
    if name != "c22":
        body["problem"] = prob.to_dict()
    write_json(args.output, envelope(f"verify-{name}", body, tol, args.seed))
    if not rep.hypotheses_met:
        return EXIT_UNMET
    return EXIT_OK if rep.verified else EXIT_ERROR


def _family(cfg) -> ProfileFamily:
    if cfg is None:
        return FAMILIES["tent"]()
    if not isinstance(cfg, dict):
        raise ConfigError("family config must be a JSON object")
    if "family" in cfg and "profiles" not in cfg:
        key = cfg["family"]
        if key not in FAMILIES:
            raise ConfigError(f"unknown family {key!r}; choose from {sorted(FAMILIES)}")
        return FAMILIES[key]()
    try:
        return ProfileFamily.from_dict(cfg)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def cmd_explore(args) -> int:
    tol = _tolerances(args)
    if args.phases < 1:
        raise ConfigError("phases must be a positive integer")
    fam = _family(_load(args.input))
    records = sweep(fam, args.phases, tol["tol_zero"], tol["tol_bounce"])
    summary = summarize(records, args.n_max, args.open_interval)
    body = {"family": fam.to_dict(), "phases": args.phases,
            "endpoints_counted": not args.open_interval, "gap_n_max": args.n_max,
            "summary": summary, "fixed_records": [cos_turning_record()],
            "records": [r.to_dict() for r in records]}
    write_json(args.output, envelope("explore", body, tol, args.seed))
    csv_path = args.csv or _side_path(args.output, "records")
    _atomic_csv(lambda p: records_to_csv(records, p), csv_path)
    return EXIT_GAP if summary["conjecture_gaps"] else EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "reduce": cmd_reduce, "recurrence": cmd_recurrence,
            "verify": cmd_verify, "explore": cmd_explore}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", "-i", help="input JSON config")
    common.add_argument("--output", "-o", required=True, help="output JSON report")
    common.add_argument("--tol", type=float, default=1e-10, help="integration tolerance")
    common.add_argument("--tol-zero", type=float, default=TOL_ZERO)
    common.add_argument("--tol-bounce", type=float, default=TOL_BOUNCE)
    common.add_argument("--eps-gap", type=float, default=1e-9)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--open-interval", action="store_true",
                        help="do not count zeros at the endpoints")

    p = argparse.ArgumentParser(prog="sturmsep", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="integrate, locate zeros, check interlacing")
    sub.add_parser("reduce", parents=[common], help="reduce a block problem to a recurrence")
    sub.add_parser("recurrence", parents=[common], help="step a recurrence from seeds")
    v = sub.add_parser("verify", parents=[common], help="run one theorem verifier")
    v.add_argument("verifier", choices=["c21", "th0", "th2", "th3", "th00", "c22"])
    v.add_argument("--samples", type=int, default=100)
    e = sub.add_parser("explore", parents=[common], help="zero-count difference sweep")
    e.add_argument("--phases", type=int, default=32)
    e.add_argument("--n-max", type=int, default=4, help="largest n checked for gaps")
    e.add_argument("--csv", help="record CSV path (default: next to the report)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ProblemError) as exc:
        print(f"sturmsep: {exc}", file=sys.stderr)
        return EXIT_UNMET
    except (IntegrationError, AnomalousZeroError, theorems.TheoremViolation) as exc:
        print(f"sturmsep: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001
        print(f"sturmsep: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

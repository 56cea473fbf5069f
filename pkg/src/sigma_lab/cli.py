"""Command-line driver: ``sigma-lab {decompose,qmeasure,mc} SPEC [flags]``.

Reports go to stdout as JSON (or CSV tables with ``--csv``); a human-readable
table goes to stderr. Exit status is 0 iff every requested check passed,
1 if a check failed, 2 for unusable input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from fractions import Fraction

from .decomposition import NotSubmartingaleError, check_sigma_class, doob_decompose
from .gallery import ProcessSpec, SpecError, make_process
from .montecarlo import ScalingSpec, estimate_q_functional, estimate_q_g_tail
from .pathspace import PathSpace, SpaceError, expect
from .qmeasure import (
    QIdentityError,
    build_qn,
    q_eval_witnesses,
    q_law_of_g,
    qn_density_matrix_witnesses,
    qn_future_zero_witnesses,
    restriction_witnesses,
    uniqueness_probe,
)

DEFAULT_MAX_HORIZON = 16
CSV_COLUMNS = ("n", "E_P[X_n]", "Q[g=n]")


class UsageError(Exception):
    """Input the driver refuses to run on (exit status 2)."""


def _q(x) -> str | None:
    return None if x is None else str(Fraction(x))


def _check(status: bool, witness=None, **extra) -> dict:
    out = {"status": "PASS" if status else "FAIL"}
    if not status:
        out["witness"] = witness
    out.update(extra)
    return out


def _guarded(fn) -> dict:
    """Run a check; an exception becomes a FAIL carrying the message as witness."""
    try:
        return fn()
    except (NotSubmartingaleError, QIdentityError, SpaceError, ValueError) as exc:
        return {"status": "FAIL", "witness": {"error": type(exc).__name__, "message": str(exc)}}


def load_spec(path: str) -> ProcessSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read spec file {path!r}: {exc.strerror}") from exc
    try:
        return ProcessSpec.from_json(text)
    except SpecError as exc:
        where = f" at line {exc.position[0]}, column {exc.position[1]}" if exc.position else ""
        raise UsageError(f"parse error in {path}{where}: {exc}") from exc


def _with_horizon(spec: ProcessSpec, horizon: int | None) -> ProcessSpec:
    if horizon is None or horizon == spec.horizon:
        return spec
    if spec.kind == "custom":
        raise UsageError("--horizon cannot resize a custom spec; edit its values instead")
    try:
        return ProcessSpec(spec.kind, horizon)
    except SpecError as exc:
        raise UsageError(str(exc)) from exc


def _build(spec: ProcessSpec):
    try:
        return make_process(spec)
    except SpecError as exc:
        raise UsageError(f"invalid spec: {exc}") from exc


def _sigma_checks(space: PathSpace, X) -> tuple[dict, object]:
    checks = {}
    try:
        dec = doob_decompose(X)
    except NotSubmartingaleError as exc:
        checks["submartingale"] = _check(False, {"node": list(exc.path), "drift": _q(exc.drift)})
        return checks, None
    checks["submartingale"] = _check(True)
    rep = check_sigma_class(X, dec)
    first = rep.violations[0] if rep.violations else None
    witness = None
    if first is not None:
        node, inc, x = first
        witness = {"node": list(space.path(node)), "A_increment": _q(inc), "X": _q(x),
                   "violations": len(rep.violations)}
    elif rep.invariant_failures:
        witness = {"invariants": rep.invariant_failures}
    checks["sigma_class"] = _check(rep.ok, witness)
    if rep.negative_nodes:
        checks["sigma_class"]["negative_values_at"] = [
            list(space.path(v)) for v in rep.negative_nodes[:10]]
    return checks, dec


def cmd_decompose(args) -> dict:
    spec = load_spec(args.spec)
    space, X = _build(spec)
    checks, dec = _sigma_checks(space, X)
    tables = {}
    if dec is not None:
        tables["N"] = [[_q(v) for v in row] for row in dec.N.levels()]
        tables["A"] = [[_q(v) for v in row] for row in dec.A.levels()]
    return {"command": "decompose", "spec_digest": spec.digest(), "horizon": space.horizon,
            "checks": checks, "tables": tables}


def _law_table(space: PathSpace, X, law) -> list[dict]:
    rows = []
    for n in range(space.horizon + 1):
        rows.append({
            "n": n,
            "E_P[X_n]": _q(expect(X, n)),
            "Q[g=n]": _q(law.masses[n]) if law is not None and n < space.horizon else None,
        })
    return rows


def cmd_qmeasure(args) -> dict:
    spec = _with_horizon(load_spec(args.spec), args.horizon)
    if spec.horizon > args.max_horizon:
        raise UsageError(
            f"horizon {spec.horizon} exceeds the enumeration cap {args.max_horizon} "
            f"({2 ** spec.horizon} leaves); use `sigma-lab mc` for Monte Carlo estimates "
            f"or raise --max-horizon")
    space, X = _build(spec)
    H = space.horizon
    checks, _ = _sigma_checks(space, X)

    def identity():
        bad = q_eval_witnesses(space, X)
        w = None
        if bad:
            n, atom, lhs, rhs = bad[0]
            w = {"n": n, "atom": list(space.path(atom)), "E_P[1_atom X_n]": _q(lhs),
                 "Q^(n-1) mass": _q(rhs), "failures": len(bad)}
        return _check(not bad, w)

    checks["identity"] = _guarded(identity)

    law_box = {}

    def law():
        law_box["law"] = q_law_of_g(space, X)
        return _check(True, zero_free=_q(law_box["law"].zero_free))

    checks["law_of_g"] = _guarded(law)

    if args.all_checks:
        def proof_chain():
            qns = [build_qn(space, X, lv) for lv in range(H)]
            out = {}
            density = next((
                {"level": lv, "p": p, "atom": list(space.path(a)), "got": _q(got), "want": _q(want)}
                for lv in range(H)
                for p, a, got, want in qn_density_matrix_witnesses(qns[lv])), None)
            out["density"] = _check(density is None, density)
            kills = next(({"level": lv, "leaf": list(space.path(space.leaves[i]))}
                          for lv in range(H) for i in qn_future_zero_witnesses(qns[lv])), None)
            out["kills_future_zeros"] = _check(kills is None, kills)
            restr = next(({"m": m, "n": n, "leaf": list(space.path(space.leaves[i]))}
                          for n in range(H) for m in range(n + 1)
                          for i in restriction_witnesses(qns[m], qns[n])), None)
            out["restriction"] = _check(restr is None, restr)
            mono = next(({"level": lv, "leaf": list(space.path(space.leaves[i]))}
                         for lv in range(H - 1)
                         for i, (a, b) in enumerate(zip(qns[lv].weights, qns[lv + 1].weights))
                         if a > b), None)
            out["monotone"] = _check(mono is None, mono)
            totals = next(({"level": lv, "total": _q(qns[lv].total), "E_P[X_{level+1}]": _q(expect(X, lv + 1))}
                           for lv in range(H) if qns[lv].total != expect(X, lv + 1)), None)
            out["totals"] = _check(totals is None, totals)
            return out

        try:
            checks.update(proof_chain())
        except (SpaceError, ValueError) as exc:
            checks["proof_chain"] = {"status": "FAIL",
                                     "witness": {"error": type(exc).__name__, "message": str(exc)}}
        checks["uniqueness"] = _guarded(lambda: _check(
            uniqueness_probe(space, X), {"message": "reconstruction differs from build_qn"}))

    return {"command": "qmeasure", "spec_digest": spec.digest(), "horizon": H, "checks": checks,
            "tables": {"law": _law_table(space, X, law_box.get("law"))}}


def cmd_mc(args) -> dict:
    spec = load_spec(args.spec)
    for name in ("count", "streams", "scaling_m"):
        val = getattr(args, name)
        if val is not None and val < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be >= 1, got {val}")
    if args.seed < 0 or args.seed >= 2 ** 64:
        raise UsageError(f"--seed must lie in [0, 2**64), got {args.seed}")
    warnings = []
    if args.count < 2:
        warnings.append("degenerate sample: count < 2, standard error reported as 0")

    if args.scaling_m is not None:
        if spec.kind != "reflected_srw":
            raise UsageError("the scaling probe needs a reflected_srw spec")
        t = 1.0 if args.t is None else args.t
        try:
            scaling = ScalingSpec(t, args.scaling_m)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        est = estimate_q_g_tail(scaling, args.count, args.seed, streams=args.streams)
        result = {"mode": "scaling", "t": t, "m": scaling.m, "steps": scaling.horizon,
                  "discrete_target": est.discrete_target,
                  "discretization_gap": est.discrete_target - est.target}
    else:
        if spec.kind == "custom":
            raise UsageError("mc supports gallery kinds only")
        n = spec.horizon if args.n is None else args.n
        if n < 1:
            raise UsageError(f"--n must be >= 1, got {n}")
        target = None
        if n <= DEFAULT_MAX_HORIZON:
            space, X = make_process(ProcessSpec(spec.kind, n))
            target = float(expect(X, n))
        est = estimate_q_functional(None, spec.kind, n, None, args.count, args.seed,
                                    streams=args.streams, target=target)
        result = {"mode": "functional", "kind": spec.kind, "n": n}

    z = est.z
    result.update({"estimate": est.estimate, "stderr": est.stderr, "count": est.count,
                   "seed": est.seed, "streams": args.streams, "target": est.target,
                   "z": None if z is None or not math.isfinite(z) else z})
    checks = {}
    if est.target is not None and not est.degenerate:
        checks["z_within_4"] = _check(abs(z) <= 4, {"z": result["z"]})
    return {"command": "mc", "spec_digest": spec.digest(), "checks": checks,
            "result": result, "warnings": warnings}


def _all_pass(checks: dict) -> bool:
    return all(c.get("status") == "PASS" for c in checks.values())


def _human_table(report: dict) -> str:
    lines = [f"{report['command']}: " + ", ".join(
        f"{k}={v['status']}" for k, v in report.get("checks", {}).items())]
    law = report.get("tables", {}).get("law")
    if law:
        lines.append(f"{'n':>3}  {'E_P[X_n]':>14}  {'Q[g=n]':>14}")
        for row in law:
            lines.append(f"{row['n']:>3}  {row['E_P[X_n]']:>14}  {row['Q[g=n]'] or '-':>14}")
    for name in ("N", "A"):
        tab = report.get("tables", {}).get(name)
        if tab:
            lines.append(f"{name}:")
            lines.extend(f"  depth {d}: " + " ".join(row) for d, row in enumerate(tab))
    res = report.get("result")
    if res:
        lines.append(" ".join(f"{k}={v}" for k, v in res.items()))
    lines.extend(f"warning: {w}" for w in report.get("warnings", []))
    return "\n".join(lines)


def _csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    law = report.get("tables", {}).get("law")
    if law:
        writer.writerow(CSV_COLUMNS)
        for row in law:
            writer.writerow([row["n"], row["E_P[X_n]"], row["Q[g=n]"] or ""])
    for name in ("N", "A"):
        tab = report.get("tables", {}).get(name)
        if tab:
            writer.writerow(("table", "depth", "position", "value"))
            for d, row in enumerate(tab):
                for i, v in enumerate(row):
                    writer.writerow((name, d, i, v))
    res = report.get("result")
    if res:
        writer.writerow(list(res))
        writer.writerow(["" if v is None else v for v in res.values()])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sigma-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("spec", help="JSON process spec")
        p.add_argument("--csv", action="store_true", help="emit tables as CSV instead of JSON")
        p.add_argument("--no-timing", action="store_true", help="omit wall-clock timing")

    p = sub.add_parser("decompose", help="Doob decomposition and class (Sigma) verdict")
    common(p)
    p.set_defaults(run=cmd_decompose)

    p = sub.add_parser("qmeasure", help="exact Q construction and identity checks")
    common(p)
    p.add_argument("--horizon", type=int, help="override the spec horizon (gallery kinds)")
    p.add_argument("--all-checks", action="store_true", help="also run the full proof-chain matrix")
    p.add_argument("--max-horizon", type=int, default=DEFAULT_MAX_HORIZON,
                   help="enumeration cap (default %(default)s)")
    p.set_defaults(run=cmd_qmeasure)

    p = sub.add_parser("mc", help="Monte Carlo estimates")
    common(p)
    p.add_argument("--n", type=int, help="time index of the functional (default: spec horizon)")
    p.add_argument("--count", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--streams", type=int, default=1, help="independent sub-streams (affects results)")
    p.add_argument("--scaling-m", type=int, help="run the scaling probe with m steps per unit time")
    p.add_argument("--t", type=float, help="target time for the scaling probe (default 1)")
    p.set_defaults(run=cmd_mc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        report = args.run(args)
    except UsageError as exc:
        print(f"sigma-lab {args.command}: {exc}", file=sys.stderr)
        json.dump({"command": args.command, "error": str(exc)}, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 2
    if not args.no_timing:
        report["timing"] = {"seconds": round(time.perf_counter() - started, 6)}
    if args.csv:
        sys.stdout.write(_csv(report))
    else:
        json.dump(report, sys.stdout, indent=2)
        sys.stdout.write("\n")
    print(_human_table(report), file=sys.stderr)
    return 0 if _all_pass(report["checks"]) else 1


if __name__ == "__main__":
    sys.exit(main())

"""Command line: validate, gap, iterate, report.

Exit codes
  validate  0 pass, 2 validation failure, 1 I/O or parse error
  gap       0 verdict true, 3 verdict false, 4 variational and not refuted
  iterate   0 converged, 3 non-contractive, 5 step budget exhausted
  report    first nonzero code of validate, gap, iterate (in that order)

Configuration errors (unreadable files, bad JSON, an inadmissible
method/space/gauge combination) exit with 1.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from . import complex as cx
from . import energy, fixedpoint, gap
from .errors import LinkGapError, UnsupportedMethod
from .gauge import PowerGauge, gauge_from_dict
from .maps import EquivariantMap, Representation
from .parallel import worker_count
from .spaces import Euclidean, space_from_dict

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_FALSE, EXIT_NONCERT, EXIT_BUDGET = 0, 1, 2, 3, 4, 5
IDENTITY_RTOL = 1e-12


class ConfigError(Exception):
    pass


def tolerances() -> dict:
    return {
        "admissibility_rtol": cx.ADMISSIBILITY_RTOL,
        "identity_rtol": IDENTITY_RTOL,
        "descent_max_steps": energy.DESCENT_MAX_STEPS,
        "armijo": energy.ARMIJO,
        "degenerate_rtol": gap.DEGENERATE_RTOL,
        "orbit_check_atol": gap.ORBIT_CHECK_ATOL,
        "search_tol": gap.SEARCH_TOL,
        **fixedpoint.TOLERANCES,
    }


def _json_arg(value, what):
    """A path to a JSON file or an inline JSON document."""
    if value is None:
        return None
    try:
        if os.path.exists(value):
            with open(value) as fh:
                return json.load(fh)
        return json.loads(value)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {what}: {exc}") from exc


def _load(args):
    try:
        with open(args.complex) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read complex: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("complex file must hold a JSON object")
    return data


def _space_gauge(args):
    try:
        S = space_from_dict(_json_arg(args.space, "space")) if args.space else Euclidean(3)
        f = gauge_from_dict(_json_arg(args.gauge, "gauge")) if args.gauge else PowerGauge(2.0)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad space or gauge: {exc}") from exc
    return S, f


def _method(args, S, f) -> str:
    regime = fixedpoint.spectral_regime(S, f)
    method = args.method or ("spectral" if regime else "variational")
    if method == "spectral" and not regime:
        raise ConfigError("spectral method needs a euclidean space and the gauge x**2")
    return method


def _config(args, S=None, f=None) -> dict:
    cfg = {
        "command": args.command,
        "complex": args.complex,
        "seed": args.seed,
        "restarts": args.restarts,
        "steps": args.steps,
        "map": getattr(args, "map", None),
    }
    if S is not None:
        cfg.update(space=S.to_dict(), gauge=f.to_dict(), method=_method(args, S, f))
    return cfg


def _header(args, S=None, f=None) -> dict:
    return {"config": _config(args, S, f), "seed": args.seed, "version": __version__, "tolerances": tolerances()}


def _emit(text: str, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o)}")


# ---------------------------------------------------------------------------
# validate


def run_validate(data: dict, seed: int = 0) -> tuple[int, dict]:
    report: dict = {"checks": []}

    def check(name, passed, **info):
        report["checks"].append({"name": name, "passed": bool(passed), **info})

    try:
        X, gens = cx.complex_from_dict(data)
        report["complex"] = {"vertices": X.vertex_count, "triangles": len(X.triangles), "weight_constant": X.weight_constant}
        res = X.admissibility_residual()
        check("admissibility", res <= cx.ADMISSIBILITY_RTOL, residual=res)
        for u in X.vertices:
            L = energy.cached_link(X, u)
            check(f"link {u}", L.is_connected() and L.degree_residual() <= cx.ADMISSIBILITY_RTOL,
                  connected=L.is_connected(), degree_residual=L.degree_residual())
        G = cx.build_action(X, gens)
        orb = G.orbits
        report["action"] = {"order": G.order, "vertex_representatives": orb.vertex_reps()}
        for k in range(3):
            ok = all(orb.orbit_size[k][r] * orb.stabilizer[k][r] == G.order for r in orb.representatives[k])
            check(f"orbit-stabilizer k={k}", ok)
        rng = np.random.default_rng(seed)
        for l, k in ((0, 1), (0, 2), (1, 2)):
            funcs = {
                "ones": lambda t, s: 1.0,
                "simplex_weight": lambda t, s: X.weight(s),
                "random_integer": cx.random_invariant_pair_function(X, G, l, k, rng, integer=True),
            }
            for name, fn in funcs.items():
                lhs, rhs = cx.check_orbit_identity(X, G, fn, l, k)
                rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
                check(f"orbit sum exchange l={l} k={k} {name}", rel <= IDENTITY_RTOL, lhs=lhs, rhs=rhs)
    except LinkGapError as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        report["passed"] = False
        return EXIT_INVALID, report
    except (KeyError, TypeError, IndexError) as exc:
        raise ConfigError(f"malformed complex: {exc!r}") from exc
    passed = all(c["passed"] for c in report["checks"])
    report["passed"] = passed
    return (EXIT_OK if passed else EXIT_INVALID), report


# ---------------------------------------------------------------------------
# gap / iterate


def _action(data):
    try:
        X, gens = cx.complex_from_dict(data)
    except (KeyError, TypeError, IndexError) as exc:
        raise ConfigError(f"malformed complex: {exc!r}") from exc
    return X, cx.build_action(X, gens)


def run_gap(data, S, f, method, seed, restarts) -> tuple[int, gap.GapReport]:
    X, G = _action(data)
    rep = gap.global_gap(X, G, method, S, f, restarts=restarts, seed=seed)
    if rep.verdict and rep.certifying:
        code = EXIT_OK
    elif rep.certifying or not rep.verdict:
        # an upper bound at or below the threshold refutes the hypothesis too
        code = EXIT_FALSE
    else:
        code = EXIT_NONCERT
    return code, rep


def run_iterate(data, S, f, method, seed, restarts, steps, map_data=None):
    X, G = _action(data)
    grep = gap.global_gap(X, G, method, S, f, restarts=restarts, seed=seed)
    try:
        if map_data is None:
            rep = Representation.trivial(G, S)
            phi0 = fixedpoint.starting_map(rep, seed)
        elif "values" in map_data:
            phi0 = EquivariantMap.from_dict(G, S, map_data)
        else:
            rep = Representation.from_dict(G, S, map_data.get("representation", {}))
            phi0 = fixedpoint.starting_map(rep, seed)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed map: {exc!r}") from exc
    trace = fixedpoint.iterate(phi0, f, grep.kappa, steps=steps, certifying=grep.certifying)
    s = trace.summary
    if s["non_contractive"]:
        code = EXIT_FALSE
    elif s["converged"]:
        code = EXIT_OK
    else:
        code = EXIT_BUDGET
    return code, grep, trace


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    code, report = run_validate(_load(args), args.seed)
    _emit(_dump({**_header(args), "exit_code": code, "validation": report}), args.out)
    return code


def cmd_gap(args) -> int:
    S, f = _space_gauge(args)
    method = _method(args, S, f)
    code, rep = run_gap(_load(args), S, f, method, args.seed, args.restarts)
    _emit(_dump({**_header(args, S, f), "exit_code": code, "gap": rep.to_dict()}), args.out)
    return code


def cmd_iterate(args) -> int:
    S, f = _space_gauge(args)
    method = _method(args, S, f)
    map_data = _json_arg(args.map, "map")
    code, grep, trace = run_iterate(_load(args), S, f, method, args.seed, args.restarts, args.steps, map_data)
    head = {**_header(args, S, f), "gap": {"kappa": grep.kappa, "certifying": grep.certifying,
                                          "global_lambda": grep.global_lambda, "verdict": grep.verdict}}
    lines = json.dumps(head, sort_keys=True) + "\n" + trace.jsonl() + json.dumps({"exit_code": code}) + "\n"
    _emit(lines, args.out)
    if args.csv:
        _emit(trace.csv(), args.csv)
    return code


def cmd_report(args) -> int:
    data = _load(args)
    v_code, v_report = run_validate(data, args.seed)
    out = {**_header(args), "validation": v_report, "exit_codes": {"validate": v_code}}
    code = v_code
    if v_code == EXIT_OK:
        S, f = _space_gauge(args)
        method = _method(args, S, f)
        out.update(_header(args, S, f))
        g_code, grep = run_gap(data, S, f, method, args.seed, args.restarts)
        i_code, _, trace = run_iterate(data, S, f, method, args.seed, args.restarts, args.steps, _json_arg(args.map, "map"))
        out["gap"] = grep.to_dict()
        out["iterate"] = {"summary": trace.summary, "records": trace.records}
        out["exit_codes"].update(gap=g_code, iterate=i_code)
        code = g_code or i_code
        if args.csv:
            _emit(trace.csv(), args.csv)
    out["exit_code"] = code
    _emit(_dump(out), args.out)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linkgap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--complex", required=True, help="complex JSON file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--restarts", type=int, default=gap.DEFAULT_RESTARTS)
    common.add_argument("--steps", type=int, default=fixedpoint.DEFAULT_STEPS)
    target = argparse.ArgumentParser(add_help=False)
    target.add_argument("--space", help='space JSON file or inline, e.g. \'{"kind": "euclidean", "dim": 3}\'')
    target.add_argument("--gauge", help='gauge JSON file or inline, e.g. \'{"kind": "power", "p": 2}\'')
    target.add_argument("--method", choices=("spectral", "variational"),
                        help="default: spectral for euclidean + x**2, else variational")
    target.add_argument("--map", help="starting map JSON (values and/or representation)")
    target.add_argument("--csv", help="also write the iteration trace as CSV")

    sub.add_parser("validate", parents=[common], help="check the complex, action and orbit identities")
    sub.add_parser("gap", parents=[common, target], help="link constants and the contraction verdict")
    sub.add_parser("iterate", parents=[common, target], help="run the contracting iteration")
    sub.add_parser("report", parents=[common, target], help="validate, gap and iterate in one report")
    return p


COMMANDS = {"validate": cmd_validate, "gap": cmd_gap, "iterate": cmd_iterate, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            worker_count()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"linkgap: {exc}", file=sys.stderr)
        return EXIT_IO
    except UnsupportedMethod as exc:
        print(f"linkgap: {exc}", file=sys.stderr)
        return EXIT_IO
    except LinkGapError as exc:
        print(f"linkgap: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

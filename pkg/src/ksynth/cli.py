"""Command-line front end.  Each subcommand prints one JSON line on stdout.

Exit codes: 0 realizable or verified, 1 unrealizable or refuted, 2 bad input,
3 search budget exhausted.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .environment import EnvironmentValidationError, read_environment, transform_did, transform_say
from .kbp import KBPError, kbp_implement, kbp_to_spec, parse_kbp
from .logic import FormulaSyntaxError, parse_formula, render
from .protocol_runtime import ProtocolError, load_protocol, run_protocol, verify_realizes
from .synthesis import Realizable, synthesize
from .tree_automata import BudgetExceeded

OK, NO, BAD_INPUT, BUDGET = 0, 1, 2, 3


class InputError(Exception):
    pass


def _report(doc: dict) -> None:
    print(json.dumps(doc, sort_keys=True, separators=(",", ":")))


def _write(path: str | None, text: str) -> None:
    if path:
        try:
            Path(path).write_text(text if text.endswith("\n") else text + "\n")
        except OSError as exc:
            raise InputError(f"cannot write {path}: {exc.strerror}") from None


def _env(path: str):
    try:
        return read_environment(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _stats(stats) -> dict:
    d = stats.as_dict()
    d.pop("seconds")  # keeps reports byte-identical across runs
    return d


def cmd_synth(args) -> int:
    e = _env(args.env)
    psi = parse_formula(args.spec)
    result = synthesize(psi, e, budget=args.budget)
    doc = {"command": "synth", "spec": render(psi), "environment_states": len(e.states),
           "stats": _stats(result.stats)}
    if not isinstance(result, Realizable):
        _report(dict(doc, result="unrealizable"))
        return NO
    p = result.protocol
    _write(args.out, p.dumps())
    _write(args.dot, p.to_dot())
    _report(dict(doc, result="realizable", protocol_states=len(p.states),
                 witness_nodes=len(result.witness.nodes)))
    return OK


def cmd_check(args) -> int:
    e = _env(args.env)
    psi = parse_formula(args.spec)
    try:
        p = load_protocol(args.protocol, e)
    except OSError as exc:
        raise InputError(f"cannot read {args.protocol}: {exc.strerror}") from None
    ok = verify_realizes(e, p, psi)
    _report({"command": "check", "spec": render(psi), "protocol_states": len(p.states),
             "result": "realizes" if ok else "fails"})
    return OK if ok else NO


def cmd_simulate(args) -> int:
    e = _env(args.env)
    try:
        p = load_protocol(args.protocol, e)
    except OSError as exc:
        raise InputError(f"cannot read {args.protocol}: {exc.strerror}") from None
    if args.steps < 0:
        raise InputError("--steps must be nonnegative")
    run = run_protocol(e, p, args.steps, args.seed)
    _report({"command": "simulate", "seed": args.seed, "states": list(run.states),
             "observations": list(run.observations(e)),
             "actions": [{"env": ae, "agent": a} for ae, a in run.joint_actions]})
    return OK


def cmd_kbp(args) -> int:
    e = _env(args.env)
    try:
        text = Path(args.program).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {args.program}: {exc.strerror}") from None
    pg = parse_kbp(text, e.agent_actions)
    _, spec = kbp_to_spec(pg, e)
    p = kbp_implement(pg, e, budget=args.budget)
    doc = {"command": "kbp", "program": str(pg), "spec": render(spec)}
    if p is None:
        _report(dict(doc, result="no implementation"))
        return NO
    _write(args.out, p.dumps())
    _report(dict(doc, result="implemented", protocol_states=len(p.states)))
    return OK


def cmd_transform(args) -> int:
    e = _env(args.env)
    if args.did:
        e2 = transform_did(e)
        kind = "did"
    else:
        phis = [parse_formula(s) for s in args.say.split(",") if s.strip()]
        e2 = transform_say(e, phis)
        kind = "say"
    _write(args.out, json.dumps(e2.to_json(), indent=2, sort_keys=True))
    _report({"command": "transform", "kind": kind, "states_before": len(e.states),
             "states_after": len(e2.states), "agent_actions": len(e2.agent_actions)})
    return OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ksynth", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="decide realizability and extract a protocol")
    s.add_argument("--env", required=True)
    s.add_argument("--spec", required=True)
    s.add_argument("--out")
    s.add_argument("--dot")
    s.add_argument("--budget", type=int, default=2_000_000, help="arena state limit")
    s.set_defaults(func=cmd_synth)

    c = sub.add_parser("check", help="model check a protocol against a specification")
    c.add_argument("--env", required=True)
    c.add_argument("--spec", required=True)
    c.add_argument("--protocol", required=True)
    c.set_defaults(func=cmd_check)

    m = sub.add_parser("simulate", help="sample a run prefix")
    m.add_argument("--env", required=True)
    m.add_argument("--protocol", required=True)
    m.add_argument("--steps", type=int, required=True)
    m.add_argument("--seed", type=int, required=True)
    m.set_defaults(func=cmd_simulate)

    k = sub.add_parser("kbp", help="implement a knowledge-based program")
    k.add_argument("--env", required=True)
    k.add_argument("--program", required=True)
    k.add_argument("--out")
    k.add_argument("--budget", type=int, default=2_000_000)
    k.set_defaults(func=cmd_kbp)

    t = sub.add_parser("transform", help="apply the say or did environment transform")
    t.add_argument("--env", required=True)
    g = t.add_mutually_exclusive_group(required=True)
    g.add_argument("--say", metavar="FORMULAS")
    g.add_argument("--did", action="store_true")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_transform)
    return ap


def _distinct_paths(args) -> None:
    keys = [k for k in ("env", "protocol", "program", "out", "dot") if getattr(args, k, None)]
    paths = [Path(getattr(args, k)).resolve() for k in keys]
    if len(set(paths)) != len(paths):
        raise InputError("input and output paths must be distinct")


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return BAD_INPUT if exc.code else OK
    try:
        _distinct_paths(args)
        return args.func(args)
    except BudgetExceeded as exc:
        _report({"command": args.command, "result": "budget exceeded"})
        print(f"ksynth: {exc}", file=sys.stderr)
        return BUDGET
    except (InputError, FormulaSyntaxError, EnvironmentValidationError, ProtocolError,
            KBPError, ValueError) as exc:
        _report({"command": args.command, "result": "error", "message": str(exc)})
        print(f"ksynth: {exc}", file=sys.stderr)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())

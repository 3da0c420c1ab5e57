"""Command-line front end: model checking, classification, correspondence
experiments, and proof checking as reproducible batch runs.

Exit codes: 0 success, 1 property or verdict failure, 2 input error,
3 resource cap exceeded.  Human output is line oriented, one verdict per
line; --json switches to the documented machine-readable schemas.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import formula as F
from .definability import ExperimentConfig, PropertyId, run_experiment
from .process import InvalidProcessError, bits, classify, load_process
from .proofs import ProofFileError, builtin_corpus, check_proof_file, load_proof_file
from .semantics import (
    DEFAULT_FRAME_CAP,
    Model,
    MissingAtomError,
    ResourceCapError,
    extension,
    frame_valid,
)
from .stochastic import (
    FrameClassError,
    is_ergodic,
    is_irreducible,
    is_mixing,
    is_recurrent,
    is_stationary,
)

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_INPUT = 2
EXIT_RESOURCE = 3


class _CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _ast_dict(f: F.Formula) -> dict:
    if isinstance(f, F.Atom):
        return {"node": "Atom", "name": f.name}
    if isinstance(f, F.Neg):
        return {"node": "Neg", "body": _ast_dict(f.body)}
    if isinstance(f, F.And):
        return {"node": "And", "items": [_ast_dict(g) for g in f.items]}
    if isinstance(f, F.Next):
        return {"node": "Next", "body": _ast_dict(f.body)}
    if isinstance(f, F.L):
        return {"node": "L", "threshold": str(f.threshold), "body": _ast_dict(f.body)}
    if isinstance(f, F.InitL):
        return {"node": "InitL", "threshold": str(f.threshold), "body": _ast_dict(f.body)}
    if isinstance(f, F.NStepL):
        return {"node": "NStepL", "steps": f.steps, "threshold": str(f.threshold), "body": _ast_dict(f.body)}
    if isinstance(f, F.LimL) or isinstance(f, F.LimM):
        return {"node": type(f).__name__, "threshold": str(f.threshold), "template": _ast_dict(f.template.body)}
    if isinstance(f, F.Iter):
        return {"node": "Iter", "body": _ast_dict(f.body)}
    if isinstance(f, (F.BigAnd, F.BigOr)):
        fam = f.family
        node = {"node": type(f).__name__}
        if isinstance(fam, F.FiniteFamily):
            node["family"] = "finite"
            node["members"] = [_ast_dict(g) for g in fam.members]
        elif isinstance(fam, F.NatFamily):
            node["family"] = "tail"
            node["prefix"] = [_ast_dict(g) for g in fam.prefix]
            node["tail"] = _ast_dict(fam.tail)
        else:
            node["family"] = "threshold"
            node["var"] = fam.var
            node["bound"] = str(fam.bound)
            node["strict"] = fam.strict
            node["template"] = _ast_dict(fam.template)
        return node
    raise F.FormulaError(f"cannot dump {type(f).__name__}")


def _ast_lines(f: F.Formula, indent: int = 0) -> list[str]:
    d = _ast_dict(f)

    def walk(node: dict, depth: int) -> list[str]:
        head = node["node"]
        extra = []
        for key in ("name", "threshold", "steps", "var", "bound", "strict", "family"):
            if key in node:
                extra.append(f"{key}={node[key]}")
        lines = ["  " * depth + head + (" [" + ", ".join(extra) + "]" if extra else "")]
        for key in ("body", "template", "tail"):
            if key in node:
                lines.extend(walk(node[key], depth + 1))
        for key in ("items", "members", "prefix"):
            for child in node.get(key, ()):
                lines.extend(walk(child, depth + 1))
        return lines

    return walk(d, indent)


def _parse_formula(text: str) -> F.Formula:
    try:
        return F.parse(text)
    except F.ParseError as e:
        raise _CliError(f"formula error: {e}", EXIT_INPUT)
    except F.FormulaError as e:
        raise _CliError(f"formula error: {e}", EXIT_INPUT)


def _load(path: str):
    try:
        return load_process(path)
    except FileNotFoundError:
        raise _CliError(f"no such file: {path}", EXIT_INPUT)
    except InvalidProcessError as e:
        raise _CliError(f"invalid process file: {e}", EXIT_INPUT)


def _emit(args, doc: dict, human_lines: list[str]):
    if args.json:
        print(json.dumps(doc, indent=None, sort_keys=True))
    else:
        for line in human_lines:
            print(line)


def _cmd_parse(args) -> int:
    f = _parse_formula(args.formula)
    doc = {"formula": F.print_formula(f), "ast": _ast_dict(f)}
    _emit(args, doc, [F.print_formula(f)] + _ast_lines(f))
    return EXIT_OK


def _cmd_check(args) -> int:
    process, valuation = _load(args.model)
    f = _parse_formula(args.formula)
    model = Model(process, valuation)
    try:
        ext = extension(model, f)
    except MissingAtomError as e:
        raise _CliError(f"no valuation for atom {e.args[0]!r}", EXIT_INPUT)
    except F.FormulaError as e:
        raise _CliError(str(e), EXIT_INPUT)
    doc = {"formula": F.print_formula(f), "extension": sorted(bits(ext))}
    lines = [f"extension: {{{','.join(str(i) for i in bits(ext))}}}"]
    code = EXIT_OK
    if args.world is not None:
        if not (0 <= args.world < process.n_states):
            raise _CliError(f"world {args.world} out of range", EXIT_INPUT)
        sat = bool(ext >> args.world & 1)
        doc["world"] = args.world
        doc["satisfied"] = sat
        lines.append(f"world {args.world}: {'true' if sat else 'false'}")
        code = EXIT_OK if sat else EXIT_VERDICT
    _emit(args, doc, lines)
    return code


def _cmd_frame_valid(args) -> int:
    process, _ = _load(args.process)
    f = _parse_formula(args.formula)
    try:
        verdict = frame_valid(process, f, cap=args.cap)
    except ResourceCapError as e:
        raise _CliError(str(e), EXIT_RESOURCE)
    except F.FormulaError as e:
        raise _CliError(str(e), EXIT_INPUT)
    if verdict.valid:
        _emit(args, {"valid": True}, ["valid"])
        return EXIT_OK
    ce = verdict.counterexample
    doc = {
        "valid": False,
        "counterexample": {
            "valuation": {k: sorted(bits(v)) for k, v in ce.valuation.items()},
            "world": ce.world,
            "formula": F.print_formula(ce.formula),
        },
    }
    lines = ["invalid"]
    for k, v in sorted(ce.valuation.items()):
        lines.append(f"valuation {k} = {{{','.join(str(i) for i in bits(v))}}}")
    lines.append(f"world {ce.world}")
    lines.append(f"formula {F.print_formula(ce.formula)}")
    _emit(args, doc, lines)
    return EXIT_VERDICT


def _cmd_classify(args) -> int:
    process, _ = _load(args.process)
    c = classify(process)
    doc = {
        "measure_preserving": c.measure_preserving,
        "purely_probabilistic": c.purely_probabilistic,
        "dps": c.dynamic_probability_space,
        "ads": c.abstract_dynamical_system,
        "harsanyi": c.harsanyi,
        "stationary": None,
        "ergodic": None,
        "mixing": None,
        "irreducible": None,
        "recurrent": None,
    }
    if process.init is not None:
        doc["stationary"] = is_stationary(process)
        doc["irreducible"] = is_irreducible(process)
        doc["recurrent"] = is_recurrent(process)
    if c.dynamic_probability_space:
        doc["ergodic"] = is_ergodic(process)
    if c.abstract_dynamical_system:
        doc["mixing"] = is_mixing(process)
    lines = [
        f"{key}: {'n/a' if value is None else str(value).lower()}"
        for key, value in doc.items()
    ]
    _emit(args, doc, lines)
    return EXIT_OK


def _cmd_correspond(args) -> int:
    try:
        prop = PropertyId(args.property)
    except ValueError:
        names = ", ".join(p.value for p in PropertyId)
        raise _CliError(f"unknown property {args.property!r} (one of: {names})", EXIT_INPUT)
    mode = "exhaustive" if args.exhaustive else "random"
    config = ExperimentConfig(
        mode=mode,
        n_states=args.states,
        denom_bound=args.denom,
        samples=args.samples,
        seed=args.seed,
    )
    try:
        _, summary = run_experiment(prop, config)
    except ResourceCapError as e:
        raise _CliError(str(e), EXIT_RESOURCE)
    except FrameClassError as e:
        raise _CliError(str(e), EXIT_INPUT)
    doc = summary.as_dict()
    lines = [
        f"property {summary.prop.value}",
        f"mode {summary.mode}",
        f"total {summary.total}",
        f"agree {summary.agree}",
        f"disagree {summary.disagree}",
    ]
    for w in summary.witnesses:
        lines.append(f"disagreement: {w}")
    _emit(args, doc, lines)
    return EXIT_OK if summary.disagree == 0 else EXIT_VERDICT


def _cmd_prove(args) -> int:
    try:
        if args.builtin:
            derivations = builtin_corpus()
        else:
            derivations = load_proof_file(args.proofs)
    except FileNotFoundError:
        raise _CliError(f"no such file: {args.proofs}", EXIT_INPUT)
    except ProofFileError as e:
        raise _CliError(str(e), EXIT_INPUT)
    results = check_proof_file(derivations)
    doc = {
        "lemmas": [
            {"name": r.name, "ok": r.ok, "step": r.step_id, "rule": r.rule, "reason": r.reason}
            for r in results
        ]
    }
    lines = [r.message() for r in results]
    _emit(args, doc, lines)
    return EXIT_OK if all(r.ok for r in results) else EXIT_VERDICT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="markovlogic",
        description="Exact model checking, correspondence experiments, and proof checking "
                    "for probability logic with a dynamic operator over finite Markov processes.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a formula and dump its tree")
    p.add_argument("-f", "--formula", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("check", help="evaluate a formula on a model file")
    p.add_argument("model")
    p.add_argument("-f", "--formula", required=True)
    p.add_argument("-w", "--world", type=int, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("frame-valid", help="check validity over every valuation and world")
    p.add_argument("process")
    p.add_argument("-f", "--formula", required=True)
    p.add_argument("--cap", type=int, default=DEFAULT_FRAME_CAP)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_frame_valid)

    p = sub.add_parser("classify", help="taxonomy flags and stochastic properties")
    p.add_argument("process")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("correspond", help="frame-definability correspondence experiment")
    p.add_argument("property")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--exhaustive", action="store_true")
    group.add_argument("--random", action="store_true")
    p.add_argument("-n", "--states", type=int, default=2)
    p.add_argument("--denom", type=int, default=2)
    p.add_argument("-N", "--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_correspond)

    p = sub.add_parser("prove", help="check a proof file lemma by lemma")
    p.add_argument("proofs", nargs="?", default=None)
    p.add_argument("--builtin", action="store_true", help="check the shipped lemma corpus")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_prove)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "prove" and not args.builtin and args.proofs is None:
        print("error: provide a proof file or --builtin", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except _CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except InvalidProcessError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

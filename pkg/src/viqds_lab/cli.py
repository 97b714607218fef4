"""Command-line front end.

    viqds-lab exact --p 2 --l 3
    viqds-lab soundness --p 3 [--tensor 2 | --mixed 2,3]
    viqds-lab zk --p 2 --instruments honest,eigenbasis,random:20
    viqds-lab viqds --scenario scn.json
    viqds-lab suite --seed 7

Every command builds a report {command, config, rows, pass}. JSON output is
canonical (sorted keys) so equal (config, seed) pairs give equal bytes.
Exit codes: 0 success, 1 a bound was violated, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import os
import sys
from typing import Sequence

import numpy as np

from . import adversaries as adv
from .concatenation import concat_type2_bound, mixed_type2_bound
from .field_linalg import is_prime
from .serialization import dumps
from .soundness_opt import build_game_from_vis, solve_game
from .vis_core import Witness, all_witnesses, exact_acceptance, run_seeds
from .viqds import load_scenario, relay_exact_enumerated, run_scenario

SEED_ENV = "VIQDS_SEED"
DEFAULT_SEED = 20240601
EXACT_TOL = 1e-10
SDP_VALUE_TOL = 1e-5
SDP_GAP_TOL = 1e-6
ZK_TOL = 1e-9
EXHAUSTIVE_MAX_P = 3
SAMPLED_PAIRS = 1000


class UsageError(Exception):
    pass


def _prime(text: str) -> int:
    try:
        p = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("p must be an integer") from None
    if not is_prime(p):
        raise argparse.ArgumentTypeError("p must be prime")
    return p


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer") from None


# --------------------------------------------------------------------------- #
# commands                                                                    #
# --------------------------------------------------------------------------- #

def _witness_pairs(p: int, rng: np.random.Generator):
    if p <= EXHAUSTIVE_MAX_P:
        ws = list(all_witnesses(p))
        return ws, [(a, b) for a in ws for b in ws if a != b]
    ws = [Witness.random(p, rng) for _ in range(200)]
    pairs = []
    while len(pairs) < SAMPLED_PAIRS:
        a, b = Witness.random(p, rng), Witness.random(p, rng)
        if a != b:
            pairs.append((a, b))
    return ws, pairs


def cmd_exact(p: int, l: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    ws, pairs = _witness_pairs(p, rng)
    comp = min(exact_acceptance(w, w) for w in ws)
    sound = max(exact_acceptance(a, b) for a, b in pairs)
    rows = [
        {"quantity": "completeness", "p": p, "l": l, "value": comp ** l, "bound": 1.0,
         "witnesses": len(ws)},
        {"quantity": "soundness", "p": p, "l": l, "value": sound ** l, "bound": float(p) ** -l,
         "pairs": len(pairs)},
    ]
    ok = abs(rows[0]["value"] - 1.0) <= EXACT_TOL and rows[1]["value"] <= rows[1]["bound"] + EXACT_TOL
    return {"command": "exact", "config": {"p": p, "l": l, "seed": seed}, "rows": rows, "pass": ok}


def cmd_soundness(p: int, tensor: int = 1, mixed: Sequence[int] | None = None) -> dict:
    if mixed:
        rep = mixed_type2_bound(mixed)
        target = float(np.prod([1.0 / q for q in mixed]))
        config = {"mixed": list(mixed)}
    elif tensor > 1:
        rep = concat_type2_bound(tensor, p)
        target = float(p) ** -tensor
        config = {"p": p, "tensor": tensor}
    else:
        rep = solve_game(build_game_from_vis(p))
        target = 1.0 / p
        config = {"p": p, "tensor": 1}
    row = {**rep.to_dict(), "target": target}
    ok = abs(rep.primal - target) <= SDP_VALUE_TOL and rep.gap < SDP_GAP_TOL
    return {"command": "soundness", "config": config, "rows": [row], "pass": bool(ok)}


def _parse_instruments(spec: str, p: int, rng: np.random.Generator) -> list:
    named = {
        "honest": adv.honest_verifier_instrument,
        "identity": adv.identity_instrument,
        "computational": adv.computational_measure_instrument,
        "eigenbasis": adv.eigenbasis_measure_instrument,
    }
    out = []
    for token in filter(None, (t.strip() for t in spec.split(","))):
        kind, _, count = token.partition(":")
        if kind == "random":
            try:
                n = int(count)
            except ValueError:
                raise UsageError(f"bad instrument count in {token!r}") from None
            if n < 1:
                raise UsageError("random instrument count must be >= 1")
            for i in range(n):
                inst = adv.random_specious_instrument(p, rng)
                out.append(adv.Instrument(inst.p, inst.outcomes, inst.choi, f"random-specious-{i}"))
        elif kind in named:
            out.append(named[kind](p))
        else:
            raise UsageError(f"unknown instrument {kind!r}")
    if not out:
        raise UsageError("no instruments given")
    return out


def cmd_zk(p: int, instruments: str, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    rows = []
    for inst in _parse_instruments(instruments, p, rng):
        rep = adv.zero_knowledge_report(inst)
        if rep.is_specious:
            ok = rep.max_tv < ZK_TOL and rep.closed_form_error < ZK_TOL
        else:
            ok = True  # a control: the leak is reported, not judged
        rows.append({"instrument": rep.name, "specious": rep.is_specious, "residual": rep.residual,
                     "max_tv": rep.max_tv, "closed_form_error": rep.closed_form_error,
                     "leaks": rep.max_tv > 0.01, "pass": bool(ok)})
    return {"command": "zk", "config": {"p": p, "instruments": instruments, "seed": seed},
            "rows": rows, "pass": all(r["pass"] for r in rows)}


def cmd_viqds(scenario: dict) -> dict:
    lines, summary = run_scenario(scenario)
    ok = True
    if "completeness_rate" in summary:
        ok = summary["completeness_rate"] == 1.0
    if "exact_forgery" in summary:
        ok = summary["exact_forgery"] <= summary["exact_bound"] + EXACT_TOL
    if summary.get("scheme") == "bitwise":
        n = len(str(scenario.get("bits", "0")))
        ok = ok and summary["key_systems"] == 2 * n and summary["challenges"] == n
        if "forgery_bound" in summary:
            ok = ok and summary["exact_accept"] <= summary["forgery_bound"] + EXACT_TOL
        else:
            ok = ok and summary["accept_rate"] == 1.0
    return {"command": "viqds", "config": scenario, "rows": lines, "summary": summary, "pass": bool(ok)}


def cmd_suite(seed: int, sessions: int = 10_000) -> dict:
    """Every acceptance check reachable from the command line, one row each."""
    seeds = iter(run_seeds(seed, 64))
    reports = []
    for p in (2, 3):
        reports.append(cmd_exact(p, 1, next(seeds)))
    for l in (2, 3, 4):
        reports.append(cmd_exact(2, l, next(seeds)))
    for p in (2, 3, 5):
        reports.append(cmd_soundness(p))
    reports.append(cmd_soundness(2, tensor=2))
    reports.append(cmd_soundness(2, mixed=[2, 3]))
    reports.append(cmd_zk(2, "honest,eigenbasis,computational,random:20", next(seeds)))
    base = {"p": 2, "L": 2, "N": 3, "l": 1, "messages": [0, 1]}
    reports.append(cmd_viqds({**base, "sessions": sessions, "seed": next(seeds)}))
    for adv_spec in ({"kind": "constant", "parameters": {"value": 0}},
                     {"kind": "relay", "parameters": {}},
                     {"kind": "misdirect", "parameters": {}},
                     {"kind": "random_povm", "parameters": {"abort": False}}):
        r = cmd_viqds({**base, "sessions": 2000, "seed": next(seeds), "adversary": adv_spec})
        r["rows"] = []  # keep the summary only
        reports.append(r)
    reports.append(cmd_viqds({"p": 2, "N": 1, "l": 1, "scheme": "bitwise", "bits": "10110010",
                              "sessions": 20, "seed": next(seeds)}))
    relay = relay_exact_enumerated(2)
    rows = []
    for r in reports:
        rows.append({"command": r["command"], "config": r["config"], "pass": r["pass"],
                     "rows": r["rows"], **({"summary": r["summary"]} if "summary" in r else {})})
    rows.append({"command": "relay-enumeration", "config": {"p": 2}, "pass": abs(relay - 0.5) < EXACT_TOL,
                 "rows": [{"value": relay, "bound": 0.5}]})
    return {"command": "suite", "config": {"seed": seed, "sessions": sessions}, "rows": rows,
            "pass": all(r["pass"] for r in rows)}


# --------------------------------------------------------------------------- #
# output                                                                      #
# --------------------------------------------------------------------------- #

def _flat(row: dict) -> dict:
    return {k: (dumps(v) if isinstance(v, (dict, list)) else v) for k, v in row.items()}


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return dumps(report) + "\n"
    rows = [_flat(r) for r in report["rows"]]
    keys = sorted(set(itertools.chain.from_iterable(rows))) if rows else []
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    # table
    lines = [f"command={report['command']} pass={report['pass']}"]
    if rows:
        cells = [[str(r.get(k, "")) for k in keys] for r in rows]
        widths = [max(len(k), *(len(c[i]) for c in cells)) for i, k in enumerate(keys)]
        lines.append("  ".join(k.ljust(w) for k, w in zip(keys, widths)))
        lines.extend("  ".join(c.ljust(w) for c, w in zip(cs, widths)) for cs in cells)
    for k, v in sorted(report.get("summary", {}).items()):
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="viqds-lab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"RNG seed (default: ${SEED_ENV} or {DEFAULT_SEED})")
    common.add_argument("--format", choices=("json", "csv", "table"), default="json")
    common.add_argument("--output", default="-", help="output path, '-' for stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", parents=[common], help="exact completeness and soundness tables")
    p.add_argument("--p", type=_prime, default=2)
    p.add_argument("--l", type=_positive, default=1)

    p = sub.add_parser("soundness", parents=[common], help="stateless-prover optimum with dual certificate")
    p.add_argument("--p", type=_prime, default=2)
    p.add_argument("--tensor", type=_positive, default=1)
    p.add_argument("--mixed", default=None, help="comma-separated primes, e.g. 2,3")

    p = sub.add_parser("zk", parents=[common], help="transcript leakage per verifier instrument")
    p.add_argument("--p", type=_prime, default=2)
    p.add_argument("--instruments", default="honest,eigenbasis,random:5")

    p = sub.add_parser("viqds", parents=[common], help="run a signature scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--jsonl", action="store_true", help="emit one JSON line per session, then the summary")

    p = sub.add_parser("suite", parents=[common], help="all command-line checks in one report")
    p.add_argument("--sessions", type=_positive, default=10_000)
    return parser


def run(argv: Sequence[str] | None = None) -> tuple[int, str]:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        seed = args.seed if args.seed is not None else _default_seed()
        if args.command == "exact":
            report = cmd_exact(args.p, args.l, seed)
        elif args.command == "soundness":
            mixed = None
            if args.mixed:
                try:
                    mixed = [_prime(t) for t in args.mixed.split(",")]
                except argparse.ArgumentTypeError as exc:
                    raise UsageError(f"--mixed: {exc}") from None
            report = cmd_soundness(args.p, args.tensor, mixed)
        elif args.command == "zk":
            report = cmd_zk(args.p, args.instruments, seed)
        elif args.command == "viqds":
            try:
                scn = load_scenario(args.scenario)
            except OSError as exc:
                raise UsageError(str(exc)) from None
            if args.seed is not None:
                scn["seed"] = args.seed
            scn.setdefault("seed", seed)
            report = cmd_viqds(scn)
        else:
            report = cmd_suite(seed, args.sessions)
    except (UsageError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2, ""
    if args.command == "viqds" and args.jsonl:
        text = "".join(dumps(line) + "\n" for line in report["rows"])
        text += dumps({"summary": report["summary"], "pass": report["pass"]}) + "\n"
    else:
        text = render(report, args.format)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w") as fh:
            fh.write(text)
    return (0 if report["pass"] else 1), text


def main(argv: Sequence[str] | None = None) -> int:
    return run(argv)[0]


if __name__ == "__main__":
    sys.exit(main())

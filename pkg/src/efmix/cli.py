"""Command-line entry point: ``efmix solve | verify | gen``.

Exit codes are stable for scripting: 0 success, 2 unreadable or malformed
input, 3 search budget exhausted, 4 a fairness check failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

from efmix.division import cake_valuers, lift_to_efm
from efmix.envy import PERMUTATION_GUARD, build_envy_graph, envy_freeable_by_permutation, has_positive_cycle
from efmix.exceptions import InstanceParseError, PreconditionError, SearchBudgetExceeded
from efmix.formats import (
    allocation_to_dict,
    certificate_from_dict,
    certificate_to_dict,
    dumps,
    mixed_to_dict,
    parse_allocation,
    report_to_dict,
    write_atomic,
)
from efmix.generate import random_instance
from efmix.model import Instance, MixedAllocation, format_ratio, instance_to_dict, normalize, parse_instance
from efmix.solver import DEFAULT_BUDGET, replay, solve_ef1_envy_freeable
from efmix.verify import FairnessReport, check_ef1, check_efm

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_BUDGET = 3
EXIT_VERIFY = 4

logger = logging.getLogger("efmix")


@dataclass(frozen=True)
class RunConfig:
    command: str
    mode: str = "discrete"
    search_budget: int = DEFAULT_BUDGET
    heuristic: bool = False
    seed: Optional[int] = None
    threads: int = 1

    def __post_init__(self):
        if self.command not in ("solve", "verify", "gen"):
            raise ValueError(f"unknown command {self.command!r}")
        if self.mode not in ("discrete", "efm"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.search_budget < 1:
            raise ValueError("search budget must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InstanceParseError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"{path}: invalid JSON ({exc})") from exc


def load_instance(path: str) -> Instance:
    return parse_instance(_load_json(path))


def _emit(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        write_atomic(path, text)


def run_solve(config: RunConfig, instance_path: str, out: Optional[str] = None,
              cert_out: Optional[str] = None, replay_path: Optional[str] = None) -> int:
    inst = load_instance(instance_path)
    if config.mode == "efm":
        if not inst.has_cake:
            raise PreconditionError("efm mode requires a cake in the instance")
        inst = normalize(inst)
    if replay_path is not None:
        cert = certificate_from_dict(inst, _load_json(replay_path))
        discrete = replay(inst, cert)
    else:
        discrete, cert = solve_ef1_envy_freeable(
            inst, budget=config.search_budget, heuristic=config.heuristic,
            workers=config.threads)
    cert_doc = certificate_to_dict(inst, cert)
    if config.mode == "efm":
        mixed, paid, q, sched = lift_to_efm(inst, discrete)
        doc = mixed_to_dict(inst, mixed)
        cert_doc["efm"] = {
            "paid": [inst.agents[i] for i in paid],
            "subsidies": {inst.agents[i]: format_ratio(x) for i, x in zip(paid, q)},
            "final_round": sched.final_round if sched else None,
            "residual_share": format_ratio(sched.residual_share) if sched else "0",
        }
    else:
        doc = allocation_to_dict(inst, discrete)
    _emit(dumps(doc), out)
    if cert_out is None and out not in (None, "-"):
        cert_out = out[:-5] + ".cert.json" if out.endswith(".json") else out + ".cert.json"
    if cert_out is not None:
        _emit(dumps(cert_doc), cert_out)
    if cert.heuristic:
        logger.warning("heuristic search: result not certified optimal for the search objective")
    return EXIT_OK


def verify_documents(inst: Instance, alloc_doc) -> dict[str, FairnessReport]:
    """Every applicable check on an allocation document, keyed by check name."""
    discrete, payments, pieces = parse_allocation(inst, alloc_doc)
    if (payments is not None or pieces is not None) and inst.has_cake:
        inst = normalize(inst)
    reports = {"ef1": check_ef1(inst, discrete)}
    cyc = FairnessReport()
    if has_positive_cycle(build_envy_graph(inst, discrete)):
        cyc.witnesses.append((0, 0, "positive envy cycle"))
    reports["envy_freeable"] = cyc
    if inst.n <= PERMUTATION_GUARD:
        perm = FairnessReport()
        if not envy_freeable_by_permutation(inst, discrete):
            perm.witnesses.append((0, 0, "bundle permutation raises welfare"))
        reports["envy_freeable_oracle"] = perm
    if pieces is not None:
        if not inst.has_cake:
            raise InstanceParseError("allocation has cake pieces but the instance has no cake")
        reports["efm"] = check_efm(inst, MixedAllocation(discrete, None, pieces))
    if payments is not None:
        group = cake_valuers(inst) if inst.has_cake else range(inst.n)
        reports["efm_money"] = check_efm(inst, MixedAllocation(discrete, payments), group)
    return reports


def run_verify(config: RunConfig, instance_path: str, allocation_path: str,
               out: Optional[str] = None) -> int:
    inst = load_instance(instance_path)
    reports = verify_documents(inst, _load_json(allocation_path))
    passed = all(r.verdict for r in reports.values())
    doc = {"passed": passed,
           "checks": {name: report_to_dict(inst, r) for name, r in reports.items()}}
    _emit(dumps(doc), out)
    return EXIT_OK if passed else EXIT_VERIFY


def run_gen(config: RunConfig, agents: int, items: int, *, low: int = -3, high: int = 3,
            denominator: int = 1, cake: bool = False, segments: int = 3,
            chores_only: bool = False, out: Optional[str] = None) -> int:
    if config.seed is None:
        raise ValueError("gen needs a seed")
    inst = random_instance(config.seed, agents, items, low=low, high=high,
                           denominator=denominator, cake=cake, max_segments=segments,
                           chores_only=chores_only)
    _emit(dumps(instance_to_dict(inst)), out)
    return EXIT_OK


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="efmix", description=(
        "EF1 + envy-freeable allocation of goods and chores, and EFM with a cake."))
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="allocate an instance")
    p.add_argument("instance")
    p.add_argument("--mode", choices=("discrete", "efm"), default="discrete")
    p.add_argument("-o", "--out", help="allocation file (default: stdout)")
    p.add_argument("--cert", help="certificate file (default: next to --out)")
    p.add_argument("--budget", type=_positive, default=DEFAULT_BUDGET,
                   help="maximum candidates an exhaustive search may visit")
    p.add_argument("--heuristic", action="store_true",
                   help="hill-climb instead of exhaustive search")
    p.add_argument("--threads", type=_positive, default=1,
                   help="worker processes for exhaustive search")
    p.add_argument("--replay", metavar="CERT",
                   help="rebuild the allocation from a certificate instead of searching")

    p = sub.add_parser("verify", help="check an allocation against an instance")
    p.add_argument("instance")
    p.add_argument("allocation")
    p.add_argument("-o", "--out", help="report file (default: stdout)")

    p = sub.add_parser("gen", help="generate a random instance")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--agents", type=_positive, required=True)
    p.add_argument("--items", type=int, required=True)
    p.add_argument("--low", type=int, default=-3)
    p.add_argument("--high", type=int, default=3)
    p.add_argument("--denominator", type=_positive, default=1)
    p.add_argument("--cake", action="store_true")
    p.add_argument("--segments", type=_positive, default=3,
                   help="maximum density segments per agent")
    p.add_argument("--chores-only", action="store_true")
    p.add_argument("-o", "--out", help="instance file (default: stdout)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve":
            config = RunConfig("solve", args.mode, args.budget, args.heuristic,
                               threads=args.threads)
            return run_solve(config, args.instance, args.out, args.cert, args.replay)
        if args.command == "verify":
            return run_verify(RunConfig("verify"), args.instance, args.allocation, args.out)
        if args.items < 0:
            raise InstanceParseError("--items must be non-negative")
        return run_gen(RunConfig("gen", seed=args.seed), args.agents, args.items,
                       low=args.low, high=args.high, denominator=args.denominator,
                       cake=args.cake, segments=args.segments,
                       chores_only=args.chores_only, out=args.out)
    except SearchBudgetExceeded as exc:
        print(f"efmix: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, OSError) as exc:
        # parse errors, inconsistent files and unmet preconditions
        print(f"efmix: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())

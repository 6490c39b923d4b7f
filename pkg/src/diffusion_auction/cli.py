"""``diffauction``: run mechanisms on network files, generate instances, run verification campaigns.

Exit codes: 0 success, 1 property violations found, 2 parse or configuration
error, 3 infeasible action profile, 4 internal invariant breach.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, fileformat, fixture_path
from .mechanisms import InternalInvariant, NoParticipants, run_gidm, run_idm, run_vcg_local
from .network import FeasibilityError, check_feasible, truthful_profile
from .verify import KINDS, Campaign, InstanceGenConfig, default_jobs, gen_instance, parse_values, run_campaign

EXIT_OK, EXIT_VIOLATION, EXIT_PARSE, EXIT_FEASIBILITY, EXIT_INTERNAL = 0, 1, 2, 3, 4
BUNDLED_PREFIX = "bundled:"


class ConfigError(ValueError):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diffauction", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a mechanism on a network file")
    run.add_argument("--mechanism", required=True, choices=["idm", "gidm", "vcg-local"])
    run.add_argument("--items", type=int, help="number of items (default: the file's item count)")
    run.add_argument("--network", required=True,
                     help=f"network file, or {BUNDLED_PREFIX}NAME for a bundled one (e.g. {BUNDLED_PREFIX}figure1)")
    run.add_argument("--actions", help="file whose 'actions' list overrides the network's")
    run.add_argument("--out", help="write the report here instead of standard output")
    run.add_argument("--format", choices=["text", "structured"], default="text")
    run.add_argument("--trace", action="store_true", help="include the GIDM allocation trace")
    run.add_argument("--dot", help="write the GIDM allocation tree in DOT format")
    run.add_argument("--float", dest="exact", action="store_false",
                     help="parse valuations as floats instead of exact rationals")
    run.add_argument("--metadata", action="store_true", help="add timestamp and platform details to the report")

    ver = sub.add_parser("verify", help="run a seeded verification campaign")
    ver.add_argument("kind", choices=KINDS)
    ver.add_argument("--trials", type=int, required=True)
    ver.add_argument("--buyers", type=int, required=True, help="maximum number of buyers per instance")
    ver.add_argument("--items", default="1", help="item count, or a comma list cycled over trials")
    ver.add_argument("--seed", type=int, required=True)
    ver.add_argument("--edge-prob", type=float, default=0.4)
    ver.add_argument("--values", default="0..9", help='valuation domain, "LO..HI" or a comma list')
    ver.add_argument("--jobs", type=int, default=None, help="worker processes (default from environment)")
    ver.add_argument("--out", help="write the JSON campaign report here")

    gen = sub.add_parser("gen", help="generate a random network file")
    gen.add_argument("--buyers", type=int, required=True)
    gen.add_argument("--edge-prob", type=float, required=True)
    gen.add_argument("--items", type=int, default=1)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--values", default="0..9")
    gen.add_argument("--out", required=True)
    return p


def _read_network(arg: str, exact: bool):
    if arg.startswith(BUNDLED_PREFIX):
        ref = fixture_path(arg[len(BUNDLED_PREFIX):])
        if not ref.is_file():
            raise ConfigError(f"no bundled network named {arg[len(BUNDLED_PREFIX):]!r}")
        return fileformat.loads(ref.read_text(encoding="utf-8"), exact)
    try:
        return fileformat.load(arg, exact)
    except OSError as exc:
        raise ConfigError(f"cannot read {arg}: {exc.strerror}") from None


def _write(path, text: str):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _items(raw: str):
    try:
        items = tuple(int(x) for x in raw.split(","))
    except ValueError:
        raise ConfigError(f"--items expects integers, got {raw!r}") from None
    if not items or min(items) < 1:
        raise ConfigError("--items must be positive")
    return items


def cmd_run(args) -> int:
    net, profile = _read_network(args.network, args.exact)
    if args.actions:
        _, override = _read_network(args.actions, args.exact)
        if override is None:
            raise ConfigError(f"{args.actions} has no 'actions' list")
        profile = override
    truthful = profile is None
    if truthful:
        profile = truthful_profile(net)
    check_feasible(net, profile)
    k = net.item_count if args.items is None else args.items
    if k < 1:
        raise ConfigError("--items must be positive")
    if args.mechanism == "idm":
        if k != 1:
            raise ConfigError("idm sells a single item; use --items 1")
        outcome = run_idm(net, profile)
    elif args.mechanism == "gidm":
        outcome = run_gidm(net, profile, k)
    else:
        # the baseline uses true values of the seller's neighbours, so reports play no part
        outcome = run_vcg_local(net, k)
    meta = None
    if args.metadata:
        meta = {"generated": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                "python": platform.python_version(), "version": __version__}
    doc = fileformat.outcome_document(net, outcome, fileformat.digest(net, None if truthful else profile),
                                      truthful, args.trace, meta)
    if args.format == "structured":
        _write(args.out, json.dumps(doc, indent=2) + "\n")
    else:
        _write(args.out, fileformat.render_text(doc))
    if args.dot:
        if outcome.tree is None:
            raise ConfigError("--dot needs a GIDM run with at least one participant")
        Path(args.dot).write_text(fileformat.tree_to_dot(net, outcome.tree), encoding="utf-8")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        camp = Campaign(args.kind, args.trials, args.buyers, _items(args.items), args.seed,
                        args.edge_prob, parse_values(args.values))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    jobs = default_jobs() if args.jobs is None else max(1, args.jobs)
    report = run_campaign(camp, jobs)
    text = json.dumps(report, indent=2) + "\n"
    _write(args.out, text)
    if args.out:
        status = "ok" if report["ok"] else f"{len(report['violations'])} violations, {len(report['failures'])} failures"
        print(f"{camp.kind}: {report['instances_run']} instances, {status}", file=sys.stderr)
    if camp.kind == "order-sensitivity":
        return EXIT_OK
    return EXIT_OK if report["ok"] else EXIT_VIOLATION


def cmd_gen(args) -> int:
    try:
        cfg = InstanceGenConfig(args.buyers, args.edge_prob, parse_values(args.values), args.items, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    Path(args.out).write_text(fileformat.dumps(gen_instance(cfg)), encoding="utf-8")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "gen": cmd_gen}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NoParticipants)
        try:
            code = COMMANDS[args.command](args)
        except (fileformat.ParseError, ConfigError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            code = EXIT_PARSE
        except FeasibilityError as exc:
            print(f"infeasible action profile: {exc}", file=sys.stderr)
            code = EXIT_FEASIBILITY
        except InternalInvariant as exc:
            print(f"internal invariant violated: {exc}", file=sys.stderr)
            code = EXIT_INTERNAL
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``rulesynth <command> ...``.

Every invocation emits one JSON manifest (argv, configuration, seed,
version, timestamps and the result record) to ``--manifest`` or, if that
is not given, as a single line on stderr.  ``rulesynth replay MANIFEST``
re-runs the recorded argv and compares result records.

Exit codes::

    0  success
    1  replay mismatch
    2  usage error
    3  grammar syntax error
    4  no rule matches the input
    5  evaluation budget exceeded
    6  invalid configuration or arguments
    7  malformed data file
    8  external proposer could not be started
    9  no examples satisfy the request (unsatisfiable / not representable)
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import shlex
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import __version__
from .episodes import (
    SPLIT_KINDS,
    build_scan_dataset,
    format_episode,
    format_scan,
    load_scan_file,
    make_episode,
    make_number_episode,
    make_split,
    read_episode,
    run_grammar,
    select_support,
)
from .errors import (
    BudgetExceeded,
    ConfigError,
    FormatError,
    GrammarSyntaxError,
    NoMatch,
    NotRepresentable,
    PoolExhausted,
    SpawnError,
    Unsatisfiable,
    UnknownSplit,
)
from .grammar import parse_grammar
from .metagrammar import (
    FAMILIES,
    FAMILY_NAMES,
    make_rng,
    params_from_config,
    params_to_config,
    sample,
)
from .numeric import NumGrammar, evaluate_number, invert, load_lexicon, parse_num_grammar
from .synthesis import (
    SearchConfig,
    enumeration_proposer,
    external_proposer,
    mcmc_proposer,
    prior_proposer,
    query_accuracy,
    ransac_search,
    search,
    subprocess_proposer,
    support_vocab,
)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_NO_MATCH = 4
EXIT_BUDGET = 5
EXIT_CONFIG = 6
EXIT_FORMAT = 7
EXIT_SPAWN = 8
EXIT_UNSATISFIABLE = 9

log = logging.getLogger("rulesynth")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ----------------------------------------------------------------------------
# helpers


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load_any_grammar(path: str, kind: str = "auto"):
    """Number grammars are tried first when ``kind`` is auto.

    Sequence right hand sides (``[x1] [x1]``, ``RED``) never parse as
    arithmetic, so the only ambiguous files are tiny ones like ``u1 x1 ->
    [u1]``; pass ``--sequence`` to force the other reading.
    """
    text = _read_text(path)
    if kind == "number":
        return parse_num_grammar(text)
    if kind == "sequence":
        return parse_grammar(text)
    try:
        return parse_num_grammar(text)
    except GrammarSyntaxError:
        return parse_grammar(text)


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load_params(family: str, path: Optional[str], seed: int):
    if path is None:
        return FAMILIES[family](seed=seed)
    text = _read_text(path)
    p = params_from_config(text) if "family" in text else params_from_config(text, FAMILIES[family])
    if FAMILY_NAMES.get(type(p)) != family:
        raise ConfigError(f"file describes {FAMILY_NAMES.get(type(p))!r}, not {family!r}", "family")
    return dataclasses.replace(p, seed=seed)


def _search_config(args, *, ransac_default_seconds=20.0) -> SearchConfig:
    if args.budget_seconds is None and args.budget_proposals is None:
        raise ConfigError("give --budget-seconds and/or --budget-proposals", "budget")
    return SearchConfig(
        max_seconds=args.budget_seconds,
        max_proposals=args.budget_proposals,
        eval_budget=args.eval_budget,
        prefilter_k=args.prefilter,
        subset_size=args.subset_size,
        subset_seconds=args.subset_seconds if args.subset_seconds is not None else (
            ransac_default_seconds if args.subset_proposals is None else None),
        subset_proposals=args.subset_proposals,
        heuristics=not args.no_heuristics,
        seed=args.seed,
    )


def _make_proposer_factory(args, family_default: str):
    """Return ``factory(support, rng)`` building the requested proposer."""
    kind = args.proposer
    if kind == "external":
        if args.external_cmd:
            argv = shlex.split(args.external_cmd)
            return lambda support, rng: subprocess_proposer(argv)
        if args.external_file:
            path = args.external_file
            if not os.path.exists(path):
                raise SpawnError(f"external proposer file {path!r} does not exist")
            return lambda support, rng: external_proposer(path)
        raise ConfigError("external proposer needs --external-cmd or --external-file", "proposer")
    family = args.family or family_default
    if family == "number":
        raise ConfigError("prior, enum and mcmc proposers cover sequence grammars; "
                          "use the external proposer for number episodes", "proposer")
    params = _load_params(family, args.params, args.seed)
    if kind == "prior":
        def factory(support, rng):
            ins, outs = support_vocab(support)
            return prior_proposer(params, ins, rng, outs)
    elif kind == "enum":
        def factory(support, rng):
            ins, outs = support_vocab(support)
            return enumeration_proposer(ins, outs)
    elif kind == "mcmc":
        def factory(support, rng):
            return mcmc_proposer(params, support, args.beta, rng, args.eval_budget)
    else:  # argparse restricts the choices
        raise ConfigError(f"unknown proposer {kind!r}", "proposer")
    return factory


# ----------------------------------------------------------------------------
# commands; each returns (exit code, result record)


def cmd_apply(args):
    g = _load_any_grammar(args.grammar, args.kind)
    words = " ".join(args.words).split()
    try:
        out = run_grammar(g, words, args.eval_budget)
    except NoMatch as exc:
        print(f"apply: {exc}", file=sys.stderr)
        return EXIT_NO_MATCH, {"error": "NoMatch", "words": list(exc.words)}
    except BudgetExceeded as exc:
        print(f"apply: evaluation budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET, {"error": "BudgetExceeded"}
    text = str(out) if isinstance(out, int) else " ".join(out)
    print(text)
    return EXIT_OK, {"output": text}


def cmd_sample(args):
    p = _load_params(args.family, args.params, args.seed)
    rng = make_rng(args.seed)
    grammars = [sample(p, rng) for _ in range(args.count)]
    texts = [str(g) for g in grammars]
    _write(args.out, "\n\n".join(texts) + "\n")
    return EXIT_OK, {"family": args.family, "count": args.count, "params": params_to_config(p),
                     "grammars": texts}


def cmd_episode(args):
    if args.n_query < 1:
        raise ConfigError("must be >= 1", "n_query")
    if args.n_support is not None and args.n_support < 1 and args.family != "number":
        raise ConfigError("must be >= 1", "n_support")
    rng = make_rng(args.seed)
    if args.grammar:
        g = _load_any_grammar(args.grammar, "number" if args.family == "number" else "sequence")
    else:
        g = sample(_load_params(args.family, args.params, args.seed), rng)
    if isinstance(g, NumGrammar):
        ep = make_number_episode(g, rng, n_compositional=args.n_support, n_query=args.n_query,
                                 test_time=args.test_time)
    else:
        n_support = args.n_support if args.n_support is not None else 14
        ep = make_episode(g, n_support, args.n_query, rng, domain=args.family)
    _write(args.out, format_episode(ep))
    if args.grammar_out:
        Path(args.grammar_out).write_text(str(g) + "\n", encoding="utf-8")
    return EXIT_OK, {"grammar": str(g), "n_support": len(ep.support), "n_query": len(ep.query),
                     "episode": format_episode(ep)}


def cmd_scan(args):
    if args.action == "build":
        data = build_scan_dataset()
        _write(args.out, format_scan(data))
        return EXIT_OK, {"examples": len(data), "max_output": max(len(e.output) for e in data)}
    if args.action == "load":
        path = args.kind_or_path or args.path
        if not path:
            raise ConfigError("scan load needs a file", "path")
        data = load_scan_file(path, normalize_actions=args.normalize)
        if args.out:
            _write(args.out, format_scan(data))
        else:
            print(len(data))
        return EXIT_OK, {"examples": len(data)}
    # split
    if not args.kind_or_path:
        raise ConfigError("scan split needs a split kind", "kind")
    data = load_scan_file(args.path, args.normalize) if args.path else build_scan_dataset()
    train, test = make_split(data, args.kind_or_path)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{args.kind_or_path}_train.txt").write_text(format_scan(train), encoding="utf-8")
    (out_dir / f"{args.kind_or_path}_test.txt").write_text(format_scan(test), encoding="utf-8")
    rec = {"split": args.kind_or_path, "train": len(train), "test": len(test),
           "max_train_output": max(len(e.output) for e in train),
           "min_test_output": min(len(e.output) for e in test)}
    print(json.dumps(rec))
    return EXIT_OK, rec


def _finish_synth(args, report, query, label):
    best = report.best
    acc = query_accuracy(best.grammar, query, args.eval_budget) if best and query else 0.0
    print(f"{label}: accuracy={acc:.3f} termination={report.termination} "
          f"proposals={report.proposals_seen} parse_failures={report.parse_failures} "
          f"rounds={report.rounds} elapsed={report.elapsed:.2f}s")
    if args.out and best is not None:
        Path(args.out).write_text(str(best.grammar) + "\n", encoding="utf-8")
    rec = report.to_record(include_elapsed=False)
    rec["query_accuracy"] = acc
    rec["n_query"] = len(query)
    return EXIT_OK, rec


def cmd_synth(args):
    cfg = _search_config(args)
    if args.split:
        data = load_scan_file(args.scan_file, args.normalize) if args.scan_file else build_scan_dataset()
        train, test = make_split(data, args.split)
        factory = _make_proposer_factory(args, "scanlike")
        if args.ransac:
            report = ransac_search(train, factory, cfg)
        else:
            rng = make_rng(args.seed)
            support = select_support(train, min(cfg.subset_size, len(train)), cfg.heuristics, rng)
            report = search(support, factory(support, rng), cfg)
        return _finish_synth(args, report, test, f"scan/{args.split}")
    if not args.episode:
        raise ConfigError("synth needs --episode or --split", "input")
    ep = read_episode(args.episode)
    numeric = ep.domain == "number"
    factory = _make_proposer_factory(args, "number" if numeric else "miniscan")
    rng = make_rng(args.seed)
    if args.ransac:
        report = ransac_search(ep.support, factory, cfg)
    else:
        report = search(ep.support, factory(ep.support, rng), cfg)
    return _finish_synth(args, report, ep.query, "episode")


def cmd_numbers(args):
    rng = make_rng(args.seed)
    if args.grammar:
        g = _load_any_grammar(args.grammar, "number")
    else:
        g = sample(_load_params("number", args.params, args.seed), rng)
    lexicon = load_lexicon(args.lexicon) if args.lexicon else None
    ep = make_number_episode(g, rng, n_compositional=args.n_compositional,
                             n_query=args.n_query, test_time=True)
    rec = {"grammar": str(g), "n_support": len(ep.support), "n_query": len(ep.query)}
    if args.out:
        Path(args.out).write_text(format_episode(ep), encoding="utf-8")

    if args.roundtrip:
        ok = fail = skipped = 0
        for _ in range(args.roundtrip):
            n = int(rng.integers(0, 100_000_000))
            try:
                words = invert(g, n)
            except NotRepresentable:
                skipped += 1
                continue
            if evaluate_number(g, words) == n:
                ok += 1
            else:
                fail += 1
        rec["roundtrip"] = {"agree": ok, "disagree": fail, "not_representable": skipped}
        print(f"roundtrip: agree={ok} disagree={fail} not_representable={skipped}")

    if args.mode == "evaluate":
        acc = query_accuracy(g, ep.query, args.eval_budget)
        rec["query_accuracy"] = acc
        if lexicon:
            rec["lexicon_size"] = len(lexicon)
        print(f"numbers: accuracy={acc:.3f} support={len(ep.support)} query={len(ep.query)}")
        return EXIT_OK, rec

    cfg = _search_config(args)
    factory = _make_proposer_factory(args, "number")
    report = search(ep.support, factory(ep.support, rng), cfg)
    code, srec = _finish_synth(args, report, ep.query, "numbers")
    rec.update(srec)
    return code, rec


def cmd_replay(args):
    manifest = json.loads(_read_text(args.manifest))
    argv = manifest["argv"]
    if argv and argv[0] == "replay":
        raise ConfigError("refusing to replay a replay", "argv")
    code, rec = _run(argv, emit=False)
    same = _stable(rec) == _stable(manifest.get("result"))
    print("replay: identical" if same else "replay: MISMATCH")
    return (EXIT_OK if same and code == manifest.get("exit_code") else EXIT_MISMATCH,
            {"identical": same, "exit_code": code})


def _stable(rec):
    if isinstance(rec, dict):
        return {k: _stable(v) for k, v in rec.items() if k not in ("elapsed",)}
    return rec


# ----------------------------------------------------------------------------
# argument parsing


def _add_search_flags(p):
    p.add_argument("--budget-seconds", type=float, default=None)
    p.add_argument("--budget-proposals", type=int, default=None)
    p.add_argument("--prefilter", type=int, default=4, help="probe count; 0 disables")
    p.add_argument("--ransac", action="store_true")
    p.add_argument("--subset-size", type=int, default=100)
    p.add_argument("--subset-seconds", type=float, default=None)
    p.add_argument("--subset-proposals", type=int, default=None)
    p.add_argument("--no-heuristics", action="store_true",
                   help="draw RANSAC subsets uniformly")
    p.add_argument("--proposer", choices=("prior", "enum", "mcmc", "external"), default="prior")
    p.add_argument("--external-cmd", default=None, help="command printing grammar blocks")
    p.add_argument("--external-file", default=None, help="file of grammar blocks")
    p.add_argument("--family", choices=sorted(FAMILIES), default=None)
    p.add_argument("--params", default=None, help="key = value parameter file")
    p.add_argument("--beta", type=float, default=1.0, help="MCMC pseudo-likelihood weight")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--eval-budget", type=int, default=1000)
    common.add_argument("--out", default=None)
    common.add_argument("--manifest", default=None, help="write the run manifest here")

    parser = _Parser(prog="rulesynth", description="Rewrite-grammar toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("apply", parents=[common], help="evaluate a grammar on an input")
    p.add_argument("grammar")
    p.add_argument("words", nargs="+")
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--number", dest="kind", action="store_const", const="number")
    kind.add_argument("--sequence", dest="kind", action="store_const", const="sequence")
    p.set_defaults(func=cmd_apply, kind="auto")

    p = sub.add_parser("sample", parents=[common], help="draw grammars from a family")
    p.add_argument("family", choices=sorted(FAMILIES))
    p.add_argument("--params", default=None)
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("episode", parents=[common], help="write a support/query episode")
    p.add_argument("family", choices=sorted(FAMILIES))
    p.add_argument("--params", default=None)
    p.add_argument("--grammar", default=None, help="use this grammar instead of sampling")
    p.add_argument("--grammar-out", default=None)
    p.add_argument("--n-support", type=int, default=None)
    p.add_argument("--n-query", type=int, default=10)
    p.add_argument("--test-time", action="store_true", help="favour longer numbers")
    p.set_defaults(func=cmd_episode)

    p = sub.add_parser("scan", parents=[common], help="build, load or split the SCAN corpus")
    p.add_argument("action", choices=("build", "load", "split"))
    p.add_argument("kind_or_path", nargs="?", default=None,
                   help="file for load; split kind for split")
    p.add_argument("--data", dest="path", default=None, help="corpus file for split")
    p.add_argument("--normalize", action="store_true", help="map I_WALK style action names")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("synth", parents=[common], help="search for a consistent grammar")
    p.add_argument("--episode", default=None)
    p.add_argument("--split", default=None, help=f"SCAN split: {', '.join(SPLIT_KINDS)}")
    p.add_argument("--scan-file", default=None)
    p.add_argument("--normalize", action="store_true")
    _add_search_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("numbers", parents=[common], help="number-word episodes")
    p.add_argument("--grammar", default=None)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--n-compositional", type=int, default=30)
    p.add_argument("--n-query", type=int, default=10)
    p.add_argument("--roundtrip", type=int, default=0, help="check invert/evaluate on N integers")
    p.add_argument("--mode", choices=("evaluate", "synth"), default="evaluate")
    _add_search_flags(p)
    p.set_defaults(func=cmd_numbers)

    p = sub.add_parser("replay", help="re-run a manifest and compare results")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay, seed=None)
    return parser


_ERROR_CODES = (
    (UsageError, EXIT_USAGE),
    (GrammarSyntaxError, EXIT_PARSE),
    (NoMatch, EXIT_NO_MATCH),
    (BudgetExceeded, EXIT_BUDGET),
    (FormatError, EXIT_FORMAT),
    (SpawnError, EXIT_SPAWN),
    (Unsatisfiable, EXIT_UNSATISFIABLE),
    (NotRepresentable, EXIT_UNSATISFIABLE),
    (ConfigError, EXIT_CONFIG),
    (UnknownSplit, EXIT_CONFIG),
    (PoolExhausted, EXIT_CONFIG),
    (ValueError, EXIT_CONFIG),
    (OSError, EXIT_FORMAT),
)


def _run(argv, emit=True):
    started = datetime.now(timezone.utc).isoformat()
    args = None
    try:
        if "RULESYNTH_LOG" in os.environ:
            logging.basicConfig(level=os.environ["RULESYNTH_LOG"].upper(),
                                format="%(levelname)s %(name)s: %(message)s")
        args = build_parser().parse_args(argv)
        code, rec = args.func(args)
    except Exception as exc:  # mapped onto stable exit codes below
        for cls, code in _ERROR_CODES:
            if isinstance(exc, cls):
                break
        else:
            raise
        print(f"rulesynth: {type(exc).__name__}: {exc}", file=sys.stderr)
        rec = {"error": type(exc).__name__, "message": str(exc)}
    if emit:
        manifest = {
            "command": argv[0] if argv else None,
            "argv": list(argv),
            "config": {k: v for k, v in vars(args).items() if k != "func"} if args else None,
            "seed": getattr(args, "seed", None),
            "version": __version__,
            "started": started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "exit_code": code,
            "result": rec,
        }
        text = json.dumps(manifest, sort_keys=True, default=str)
        target = getattr(args, "manifest", None) if args and args.command != "replay" else None
        if target:
            Path(target).write_text(text + "\n", encoding="utf-8")
        else:
            print(text, file=sys.stderr)
    return code, rec


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    code, _ = _run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Guess-and-check synthesis: consistency checks, proposers and search loops.

A proposer is any iterator of grammar texts (or already-parsed grammars).
``search`` pulls from it, keeps the candidate that satisfies the most
support examples, and stops at the first fully consistent one or when its
budget runs out.  ``ransac_search`` retries on fresh support subsets.
"""

from __future__ import annotations

import itertools
import math
import os
import subprocess
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .episodes import Example, run_grammar, select_support
from .errors import (
    ConfigError,
    EvaluationError,
    GrammarSyntaxError,
    SpawnError,
)
from .grammar import DEFAULT_BUDGET, Grammar, Lit, Rule, Var, parse_grammar
from .metagrammar import (
    ALT_CONCAT,
    STANDARD_CONCAT,
    RuleMetaParams,
    _count_bounds,
    make_rng,
    prior_logprob,
    resample_rule,
    restrict_params,
    sample_miniscan,
)
from .numeric import NumGrammar, parse_num_grammar

AnyGrammar = Union[Grammar, NumGrammar]
Proposal = Union[str, Grammar, NumGrammar]
Proposer = Iterator[Proposal]

FOUND = "FoundConsistent"
EXHAUSTED = "BudgetExhausted"


@dataclass(frozen=True)
class Candidate:
    grammar: AnyGrammar
    n_satisfied: int
    fully_consistent: bool
    index: Optional[int] = None


@dataclass(frozen=True)
class FastVerdict:
    fully_consistent: bool
    n_satisfied_lower_bound: int
    evaluations: int


def _satisfies(g: AnyGrammar, ex: Example, eval_budget: int) -> bool:
    try:
        return run_grammar(g, ex.input, eval_budget) == ex.output
    except (EvaluationError, RecursionError):
        return False


def check_consistency(g: AnyGrammar, support: Sequence[Example],
                      eval_budget: int = DEFAULT_BUDGET) -> Candidate:
    """Evaluate ``g`` on every support example and count exact matches."""
    if not support:
        raise ValueError("support must be nonempty")
    n = sum(_satisfies(g, ex, eval_budget) for ex in support)
    return Candidate(g, n, n == len(support))


def check_fast(g: AnyGrammar, support: Sequence[Example], prefilter_k: int = 4,
               rng=None, eval_budget: int = DEFAULT_BUDGET) -> FastVerdict:
    """Probe ``prefilter_k`` random examples before doing the full check.

    When every probe fails the candidate is rejected after exactly
    ``prefilter_k`` evaluations and the reported count is a lower bound (0).
    Otherwise the remaining examples are evaluated too, so the count is
    exact and each example is evaluated once.
    """
    if not support:
        raise ValueError("support must be nonempty")
    n = len(support)
    if prefilter_k < 0 or prefilter_k > n:
        raise ValueError(f"prefilter_k must lie in [0, {n}]")
    if prefilter_k == 0:
        c = check_consistency(g, support, eval_budget)
        return FastVerdict(c.fully_consistent, c.n_satisfied, n)
    rng = make_rng(rng)
    probes = rng.choice(n, size=prefilter_k, replace=False)
    hits = sum(_satisfies(g, support[i], eval_budget) for i in probes)
    if hits == 0:
        return FastVerdict(False, 0, prefilter_k)
    probed = set(probes.tolist())
    hits += sum(_satisfies(g, support[i], eval_budget) for i in range(n) if i not in probed)
    return FastVerdict(hits == n, hits, n)


def query_accuracy(g: AnyGrammar, query: Sequence[Example],
                   eval_budget: int = DEFAULT_BUDGET) -> float:
    """Fraction of ``query`` reproduced exactly; evaluation errors count as misses."""
    if not query:
        raise ValueError("query must be nonempty")
    return sum(_satisfies(g, ex, eval_budget) for ex in query) / len(query)


def support_vocab(support: Iterable[Example]) -> tuple[list[str], list[str]]:
    """Sorted input words and output words (empty for integer outputs)."""
    ins, outs = set(), set()
    for ex in support:
        ins.update(ex.input)
        if not isinstance(ex.output, int):
            outs.update(ex.output)
    return sorted(ins), sorted(outs)


# ----------------------------------------------------------------------------
# proposers


def prior_proposer(params: RuleMetaParams, support_vocab: Sequence[str], rng=None,
                   output_vocab: Optional[Sequence[str]] = None) -> Proposer:
    """Endless draws from the meta-grammar restricted to the episode's words.

    Raises PoolExhausted immediately when the vocabularies cannot host the
    minimum rule counts.
    """
    if not support_vocab:
        raise ValueError("support_vocab must be nonempty")
    outputs = output_vocab if output_vocab is not None else params.color_pool
    p = restrict_params(params, support_vocab, outputs)
    _count_bounds(p, len(p.word_pool))
    rng = make_rng(rng)

    def stream():
        while True:
            yield sample_miniscan(p, rng)

    return stream()


@dataclass(frozen=True)
class ShapeLimits:
    """Bounds on the grammars the enumerator visits."""

    n_primitives: tuple[int, int] = (1, 9)
    n_higher: tuple[int, int] = (0, 7)
    rhs_max_len: int = 8
    allow_empty: bool = False
    concat_rules: tuple[Rule, ...] = (STANDARD_CONCAT, ALT_CONCAT)


# variable patterns for higher-order rules, with canonical names
_HIGHER_SHAPES = (
    ((Var("u1"),), ()),
    ((Var("x1"),), ()),
    ((Var("u1"),), (Var("u2"),)),
    ((Var("u1"),), (Var("x1"),)),
    ((Var("x1"),), (Var("u1"),)),
    ((Var("x1"),), (Var("x2"),)),
)


def _higher_bodies(word: str, length: int):
    for before, after in _HIGHER_SHAPES:
        names = before + after
        lhs = before + (Lit(word),) + after
        for rhs in itertools.product(names, repeat=length):
            yield Rule(lhs, rhs)


def _compositions(total: int, parts: int, lo: int, hi: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(lo, min(hi, total - lo * (parts - 1)) + 1):
        for rest in _compositions(total - first, parts - 1, lo, hi):
            yield (first,) + rest


def enumeration_proposer(support_vocab: Sequence[str], output_vocab: Sequence[str],
                         shape_limits: ShapeLimits = ShapeLimits()) -> Proposer:
    """Every grammar within ``shape_limits``, smallest first, without repeats.

    Grammars are ordered by number of rules, then total right hand side
    length, then a fixed nesting order over word choices and rule bodies.
    Primitive rules appear in sorted word order, so grammars that differ
    only by a permutation of primitives are visited once.
    """
    words = sorted(set(support_vocab))
    outs = sorted(set(output_vocab))
    if not words:
        raise ValueError("support_vocab must be nonempty")
    lim = shape_limits
    lo_p, hi_p = lim.n_primitives
    lo_h, hi_h = lim.n_higher
    hi_p = min(hi_p, len(words))

    def level(n_prim: int, n_higher: int, total: int):
        for n_full in range(n_prim, -1, -1):
            if n_full < n_prim and not lim.allow_empty:
                break
            if n_full > len(outs):
                continue
            rest = total - n_full
            for lengths in _compositions(rest, n_higher, 1, lim.rhs_max_len):
                for prim_words in itertools.combinations(words, n_prim):
                    left = [w for w in words if w not in prim_words]
                    for full_at in itertools.combinations(range(n_prim), n_full):
                        for colors in itertools.permutations(outs, n_full):
                            it = iter(colors)
                            prims = [Rule((Lit(w),), (Lit(next(it)),) if k in full_at else ())
                                     for k, w in enumerate(prim_words)]
                            for hwords in itertools.permutations(left, n_higher):
                                bodies = [_higher_bodies(w, n) for w, n in zip(hwords, lengths)]
                                for higher in itertools.product(*[list(b) for b in bodies]):
                                    for final in lim.concat_rules:
                                        yield Grammar(tuple(prims) + higher + (final,))

    def stream():
        max_rules = hi_p + hi_h
        for n_rules in range(lo_p + lo_h, max_rules + 1):
            splits = [(p, n_rules - p) for p in range(lo_p, hi_p + 1)
                      if lo_h <= n_rules - p <= hi_h and n_rules - p <= len(words) - p]
            if not splits:
                continue
            top = max(p + h * lim.rhs_max_len for p, h in splits)
            for total in range(0, top + 1):
                for p, h in splits:
                    if h > total or total > p + h * lim.rhs_max_len:
                        continue
                    yield from level(p, h, total)

    return stream()


def mcmc_proposer(params: RuleMetaParams, support: Sequence[Example], beta: float = 1.0,
                  rng=None, eval_budget: int = DEFAULT_BUDGET) -> Proposer:
    """Metropolis-Hastings over the prior, yielding the chain state each step.

    The target is ``prior(g) * exp(beta * n_satisfied(g))``.  Each step
    resamples one uniformly chosen rule from the prior's conditional and
    accepts with the full Hastings ratio.
    """
    if not support:
        raise ValueError("support must be nonempty")
    ins, outs = support_vocab(support)
    p = restrict_params(params, ins, outs or params.color_pool)
    _count_bounds(p, len(p.word_pool))
    rng = make_rng(rng)

    def score(g):
        return check_consistency(g, support, eval_budget).n_satisfied

    def chain():
        state = sample_miniscan(p, rng)
        lp, n = prior_logprob(state, p), score(state)
        while True:
            yield state
            idx = int(rng.integers(len(state.rules)))
            new, log_fwd, log_rev = resample_rule(state, idx, p, rng)
            lp_new = prior_logprob(new, p)
            if not math.isfinite(lp_new) or not math.isfinite(log_rev):
                continue
            n_new = score(new)
            log_alpha = lp_new - lp + beta * (n_new - n) + log_rev - log_fwd
            if log_alpha >= 0 or rng.random() < math.exp(log_alpha):
                state, lp, n = new, lp_new, n_new

    return chain()


def _blocks(lines: Iterable[str]) -> Iterator[str]:
    buf: list[str] = []
    for line in lines:
        if line.strip():
            buf.append(line.rstrip("\n"))
        elif buf:
            yield "\n".join(buf)
            buf = []
    if buf:
        yield "\n".join(buf)


def external_proposer(source) -> Proposer:
    """Grammar texts separated by blank lines.

    ``source`` may be a path, an open text stream, or an iterable of lines.
    End of input ends the stream.
    """
    if isinstance(source, (str, os.PathLike)):
        def from_file():
            with open(source, encoding="utf-8") as fh:
                yield from _blocks(fh)
        return from_file()
    return _blocks(source)


def subprocess_proposer(argv: Sequence[str]) -> Proposer:
    """Run ``argv`` and read grammar blocks from its standard output."""
    try:
        proc = subprocess.Popen(list(argv), stdout=subprocess.PIPE, stdin=subprocess.DEVNULL,
                                text=True, encoding="utf-8")
    except OSError as exc:
        raise SpawnError(f"could not start {argv[0]!r}: {exc}") from exc

    def stream():
        try:
            yield from _blocks(proc.stdout)
        finally:
            if proc.poll() is None:
                proc.kill()
            proc.stdout.close()
            proc.wait()

    return stream()


# ----------------------------------------------------------------------------
# search


@dataclass(frozen=True)
class SearchConfig:
    max_seconds: Optional[float] = None
    max_proposals: Optional[int] = None
    eval_budget: int = DEFAULT_BUDGET
    prefilter_k: int = 4
    subset_size: int = 100
    subset_seconds: Optional[float] = 20.0
    subset_proposals: Optional[int] = None
    heuristics: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_seconds is None and self.max_proposals is None:
            raise ConfigError("set max_seconds and/or max_proposals", "budget")
        if self.max_seconds is not None and self.max_seconds <= 0:
            raise ConfigError("must be positive", "max_seconds")
        if self.max_proposals is not None and self.max_proposals < 0:
            raise ConfigError("must be >= 0", "max_proposals")
        if self.eval_budget < 1:
            raise ConfigError("must be >= 1", "eval_budget")
        if self.prefilter_k < 0:
            raise ConfigError("must be >= 0", "prefilter_k")
        if self.subset_size < 1:
            raise ConfigError("must be >= 1", "subset_size")


@dataclass
class SearchReport:
    best: Optional[Candidate] = None
    proposals_seen: int = 0
    parse_failures: int = 0
    evaluations: int = 0
    elapsed: float = 0.0
    termination: str = EXHAUSTED
    trajectory: list[int] = field(default_factory=list)
    rounds: int = 0
    examples_drawn: int = 0
    examples_used: int = 0
    support: list[Example] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.termination == FOUND

    def to_record(self, include_elapsed: bool = True) -> dict:
        best = self.best
        rec = {
            "termination": self.termination,
            "best_grammar": str(best.grammar) if best else None,
            "best_n_satisfied": best.n_satisfied if best else None,
            "best_index": best.index if best else None,
            "fully_consistent": bool(best and best.fully_consistent),
            "proposals_seen": self.proposals_seen,
            "parse_failures": self.parse_failures,
            "evaluations": self.evaluations,
            "trajectory": list(self.trajectory),
            "rounds": self.rounds,
            "examples_drawn": self.examples_drawn,
            "examples_used": self.examples_used,
        }
        if include_elapsed:
            rec["elapsed"] = round(self.elapsed, 6)
        return rec


def _parse_proposal(item: Proposal, numeric: bool) -> AnyGrammar:
    if isinstance(item, (Grammar, NumGrammar)):
        return item
    if not isinstance(item, str):
        raise GrammarSyntaxError(f"proposal of type {type(item).__name__} is not grammar text")
    return parse_num_grammar(item) if numeric else parse_grammar(item)


def search(support: Sequence[Example], proposer: Iterable[Proposal],
           config: SearchConfig) -> SearchReport:
    """Best-so-far guess and check over ``proposer``.

    Ties keep the earlier candidate.  With the prefilter on, counts of
    candidates rejected by the probes are lower bounds (0).
    """
    if not support:
        raise ValueError("support must be nonempty")
    support = list(support)
    numeric = isinstance(support[0].output, int)
    k = min(config.prefilter_k, len(support))
    rng = make_rng(config.seed)
    report = SearchReport(rounds=1, support=support)
    start = time.perf_counter()
    stream = iter(proposer)

    while True:
        if config.max_proposals is not None and report.proposals_seen >= config.max_proposals:
            break
        if config.max_seconds is not None and time.perf_counter() - start >= config.max_seconds:
            break
        try:
            item = next(stream)
        except StopIteration:
            break
        index = report.proposals_seen
        report.proposals_seen += 1
        try:
            g = _parse_proposal(item, numeric)
        except GrammarSyntaxError:
            report.parse_failures += 1
            continue
        verdict = check_fast(g, support, k, rng, config.eval_budget)
        report.evaluations += verdict.evaluations
        n = verdict.n_satisfied_lower_bound
        if report.best is None or n > report.best.n_satisfied:
            report.best = Candidate(g, n, verdict.fully_consistent, index)
            report.trajectory.append(n)
        if verdict.fully_consistent:
            report.termination = FOUND
            break

    report.elapsed = time.perf_counter() - start
    report.examples_drawn = report.examples_used = len(support)
    return report


def ransac_search(train: Sequence[Example],
                  proposer_factory: Callable[[list[Example], np.random.Generator], Iterable[Proposal]],
                  config: SearchConfig) -> SearchReport:
    """Search on random support subsets until one yields a consistent grammar.

    Each round draws ``config.subset_size`` examples with ``select_support``
    and gets a fresh proposer from ``proposer_factory(subset, rng)``.  Rounds
    are bounded by ``subset_seconds`` / ``subset_proposals``; the whole run
    by ``max_seconds`` / ``max_proposals``.
    """
    if len(train) < config.subset_size:
        raise ValueError(f"train has {len(train)} examples, fewer than subset_size")
    rng = make_rng(config.seed)
    total = SearchReport()
    seen: set[Example] = set()
    start = time.perf_counter()
    best_frac = -1.0

    while True:
        elapsed = time.perf_counter() - start
        secs = config.subset_seconds
        if config.max_seconds is not None:
            left = config.max_seconds - elapsed
            if left <= 0:
                break
            secs = left if secs is None else min(secs, left)
        props = config.subset_proposals
        if config.max_proposals is not None:
            left_p = config.max_proposals - total.proposals_seen
            if left_p <= 0:
                break
            props = left_p if props is None else min(props, left_p)
        if secs is None and props is None:
            raise ConfigError("ransac rounds need a per-subset or overall budget", "budget")

        round_rng, search_rng = rng.spawn(2)
        subset = select_support(train, config.subset_size, config.heuristics, round_rng)
        sub_cfg = SearchConfig(max_seconds=secs, max_proposals=props,
                               eval_budget=config.eval_budget, prefilter_k=config.prefilter_k,
                               seed=int(search_rng.integers(2**63)))
        rep = search(subset, proposer_factory(subset, search_rng), sub_cfg)

        total.rounds += 1
        total.examples_drawn += len(subset)
        seen.update(subset)
        total.proposals_seen += rep.proposals_seen
        total.parse_failures += rep.parse_failures
        total.evaluations += rep.evaluations
        if rep.best is not None:
            frac = rep.best.n_satisfied / len(subset)
            if frac > best_frac or rep.found:
                best_frac = frac
                total.best = rep.best
                total.support = subset
        # keep the aggregate trajectory a running maximum across rounds
        for n in rep.trajectory:
            if not total.trajectory or n > total.trajectory[-1]:
                total.trajectory.append(n)
        if rep.found:
            total.termination = FOUND
            break

    total.examples_used = len(seen)
    total.elapsed = time.perf_counter() - start
    return total

"""Few-shot episodes, the SCAN corpus and its splits, and support selection."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import (
    BudgetExceeded,
    FormatError,
    NoMatch,
    NotRepresentable,
    Unsatisfiable,
    UnknownSplit,
)
from .grammar import DEFAULT_BUDGET, Grammar, Lit, Var, evaluate, parse_grammar
from .metagrammar import ScanMetaParams, make_rng, sample_scanlike
from .numeric import NumGrammar, evaluate_number, invert

Output = Union[tuple[str, ...], int]


@dataclass(frozen=True)
class Example:
    input: tuple[str, ...]
    output: Output

    def __post_init__(self):
        object.__setattr__(self, "input", tuple(self.input))
        if not isinstance(self.output, int):
            object.__setattr__(self, "output", tuple(self.output))
        if not self.input:
            raise ValueError("example input must be nonempty")

    @classmethod
    def of(cls, inp: str, out) -> "Example":
        if isinstance(out, str):
            out = tuple(out.split())
        return cls(tuple(inp.split()), out)

    def __str__(self):
        out = self.output if isinstance(self.output, int) else " ".join(self.output)
        return f"{' '.join(self.input)} -> {out}"


@dataclass
class Episode:
    support: list[Example]
    query: list[Example]
    target: Optional[Union[Grammar, NumGrammar]] = None
    domain: str = "miniscan"


def run_grammar(g, words, budget: int = DEFAULT_BUDGET) -> Output:
    """Evaluate either kind of grammar."""
    if isinstance(g, NumGrammar):
        return evaluate_number(g, words, budget)
    return evaluate(g, words, budget)


# ----------------------------------------------------------------------------
# sampling inputs from the LHS language


def _primitive_words(g: Grammar) -> list[str]:
    return [r.lhs[0].word for r in g.rules if r.is_primitive and len(r.lhs) == 1]


def _draw_phrase(g: Grammar, prims: list[str], rng, depth: int, max_depth: int) -> list[str]:
    rules = g.rules
    if depth >= max_depth:
        rules = [r for r in rules
                 if not any(isinstance(e, Var) and e.kind != "u" for e in r.lhs)] or list(rules)
    rule = rules[int(rng.integers(len(rules)))]
    out: list[str] = []
    for e in rule.lhs:
        if isinstance(e, Lit):
            out.append(e.word)
        elif e.kind == "u":
            out.append(prims[int(rng.integers(len(prims)))])
        elif e.kind == "y" and rng.random() < 0.5:
            continue
        else:
            out.extend(_draw_phrase(g, prims, rng, depth + 1, max_depth))
    return out


def sample_inputs(g: Grammar, n: int, len_bounds=(1, 10), rng=None, *,
                  max_depth: int = 4, budget: int = DEFAULT_BUDGET,
                  max_failures: int = 2000) -> list[tuple[str, ...]]:
    """Draw ``n`` distinct inputs from the language of ``g``'s left hand sides.

    A start symbol expands to a randomly chosen rule's LHS; ``u`` variables
    expand to a primitive word, ``x`` variables recurse.  Draws outside
    ``len_bounds``, duplicates, and inputs ``g`` cannot evaluate are
    rejected; ``max_failures`` consecutive rejections raise Unsatisfiable.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(rng)
    prims = _primitive_words(g)
    if not prims:
        raise Unsatisfiable("grammar has no single-word primitive rules")
    lo, hi = len_bounds
    seen: dict[tuple[str, ...], None] = {}
    failures = 0
    while len(seen) < n:
        words = tuple(_draw_phrase(g, prims, rng, 0, max_depth))
        ok = lo <= len(words) <= hi and words not in seen
        if ok:
            try:
                evaluate(g, words, budget)
            except (NoMatch, BudgetExceeded):
                ok = False
        if ok:
            seen[words] = None
            failures = 0
        else:
            failures += 1
            if failures >= max_failures:
                raise Unsatisfiable(
                    f"found only {len(seen)} of {n} distinct inputs within bounds {len_bounds}")
    return list(seen)


def make_episode(g: Grammar, n_support: int, n_query: int, rng=None, *,
                 len_bounds=(1, 10), domain: str = "miniscan",
                 budget: int = DEFAULT_BUDGET) -> Episode:
    """Sample disjoint support and query sets labelled by ``g``."""
    if isinstance(g, NumGrammar):
        return make_number_episode(g, rng, n_compositional=n_support, n_query=n_query)
    if n_support < 1 or n_query < 1:
        raise ValueError("n_support and n_query must be >= 1")
    inputs = sample_inputs(g, n_support + n_query, len_bounds, rng, budget=budget)
    examples = [Example(x, evaluate(g, x, budget)) for x in inputs]
    return Episode(examples[:n_support], examples[n_support:], g, domain)


# ----------------------------------------------------------------------------
# number episodes


def sample_integer(rng, ceiling: int = 99_999_999, long_bias: float = 0.0) -> int:
    """Draw a digit count, then a uniform integer with that many digits.

    With probability ``long_bias`` the digit count is drawn from 4 upwards
    instead of from 1 upwards, favouring longer number words.
    """
    max_digits = len(str(ceiling))
    lo_digits = 4 if rng.random() < long_bias and max_digits >= 4 else 1
    d = int(rng.integers(lo_digits, max_digits + 1))
    lo, hi = 10 ** (d - 1), min(10**d - 1, ceiling)
    return int(rng.integers(lo, hi + 1))


def necessary_examples(g: NumGrammar, budget: int = DEFAULT_BUDGET) -> list[Example]:
    """One example per primitive rule: digit words, tens, powers of ten."""
    out = []
    for rule in g.rules:
        if rule.is_primitive:
            words = tuple(e.word for e in rule.lhs)
            try:
                value = evaluate_number(g, words, budget)
            except (NoMatch, BudgetExceeded):
                continue
            if value == rule.rhs.value():
                out.append(Example(words, value))
    return out


def make_number_episode(g: NumGrammar, rng=None, *, n_compositional=None,
                        n_query: int = 10, test_time: bool = False,
                        ceiling: int = 99_999_999, long_bias: float = 0.6,
                        max_tries: int = 10_000) -> Episode:
    """Support = every necessary word + compositional pairs; query disjoint.

    ``n_compositional`` defaults to a uniform draw from 60-100.  At test time
    the integer distribution is tilted toward longer numbers by ``long_bias``.
    """
    rng = make_rng(rng)
    if n_compositional is None:
        n_compositional = int(rng.integers(60, 101))
    if n_compositional < 0 or n_query < 1:
        raise ValueError("n_compositional must be >= 0 and n_query >= 1")
    bias = long_bias if test_time else 0.0
    support = necessary_examples(g)
    taken = {ex.input for ex in support}
    drawn: list[Example] = []
    tries = 0
    while len(drawn) < n_compositional + n_query:
        tries += 1
        if tries > max_tries:
            raise Unsatisfiable("could not draw enough distinct number examples")
        n = sample_integer(rng, ceiling, bias)
        try:
            words = invert(g, n, ceiling)
        except NotRepresentable:
            continue
        if words in taken:
            continue
        taken.add(words)
        drawn.append(Example(words, n))
    return Episode(support + drawn[:n_compositional], drawn[n_compositional:], g, "number")


# ----------------------------------------------------------------------------
# episode files


def write_episode(ep: Episode, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_episode(ep))


def format_episode(ep: Episode) -> str:
    lines = []
    for tag, examples in (("SUPPORT", ep.support), ("QUERY", ep.query)):
        for ex in examples:
            out = str(ex.output) if isinstance(ex.output, int) else " ".join(ex.output)
            lines.append(f"{tag}\t{' '.join(ex.input)}\t{out}")
    return "\n".join(lines) + "\n"


def read_episode(path, numeric: Optional[bool] = None) -> Episode:
    """Read ``SUPPORT``/``QUERY`` records; numeric outputs are auto-detected."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for i, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[0] not in ("SUPPORT", "QUERY") or not parts[1].strip():
                raise FormatError("expected 'SUPPORT|QUERY<TAB>input<TAB>output'", i)
            records.append((parts[0], parts[1], parts[2], i))
    if numeric is None:
        numeric = bool(records) and all(r[2].strip().isdigit() for r in records)
    ep = Episode([], [], None, "number" if numeric else "sequence")
    for tag, inp, out, i in records:
        if numeric:
            if not out.strip().isdigit():
                raise FormatError(f"expected an integer output, got {out!r}", i)
            ex = Example(tuple(inp.split()), int(out))
        else:
            ex = Example(tuple(inp.split()), tuple(out.split()))
        (ep.support if tag == "SUPPORT" else ep.query).append(ex)
    return ep


# ----------------------------------------------------------------------------
# SCAN


SCAN_PRIMITIVES = ("walk", "look", "run", "jump")
DIRECTIONS = ("left", "right")


def canonical_scan_grammar() -> Grammar:
    """The shipped rule system that interprets every SCAN command."""
    text = resources.files("rulesynth").joinpath("data/scan.grammar").read_text()
    return parse_grammar(text)


def scan_commands(max_conjunctions: int = 1) -> list[tuple[str, ...]]:
    """Every SCAN command, unsorted.

    Verb phrases are a primitive, a primitive or ``turn`` with a direction,
    or a primitive or ``turn`` followed by ``opposite``/``around`` and a
    direction.  Clauses optionally add ``twice``/``thrice``; a command joins
    up to ``max_conjunctions + 1`` clauses with ``and``/``after``.
    """
    verbs = [(u,) for u in SCAN_PRIMITIVES]
    for u in SCAN_PRIMITIVES + ("turn",):
        for d in DIRECTIONS:
            verbs.append((u, d))
    for mod in ("opposite", "around"):
        for u in SCAN_PRIMITIVES + ("turn",):
            for d in DIRECTIONS:
                verbs.append((u, mod, d))
    clauses = [v + rep for v in verbs for rep in ((), ("twice",), ("thrice",))]
    commands = list(clauses)
    frontier = list(clauses)
    for _ in range(max_conjunctions):
        frontier = [a + (conj,) + b for a in frontier for conj in ("and", "after")
                    for b in clauses]
        commands.extend(frontier)
    return commands


def build_scan_dataset(canonical: Optional[Grammar] = None,
                       max_conjunctions: int = 1) -> list[Example]:
    """Enumerate the SCAN corpus, sorted by input text.

    With the default single conjunction this yields the 20,910 commands of
    the public corpus.
    """
    g = canonical if canonical is not None else canonical_scan_grammar()
    cmds = sorted(scan_commands(max_conjunctions), key=" ".join)
    return [Example(c, evaluate(g, c)) for c in cmds]


ACTION_NAMES = {"I_WALK": "WALK", "I_JUMP": "JUMP", "I_RUN": "RUN",
                "I_LOOK": "LOOK", "I_TURN_LEFT": "LTURN", "I_TURN_RIGHT": "RTURN"}


def load_scan_file(path, normalize_actions: bool = False) -> list[Example]:
    """Read ``IN: <words> OUT: <words>`` lines.

    ``normalize_actions`` maps the public corpus action names (``I_WALK``,
    ``I_TURN_LEFT``...) onto the short names used by the shipped grammar.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if not line.startswith("IN: ") or " OUT:" not in line:
                raise FormatError("expected 'IN: <words> OUT: <words>'", i)
            left, _, right = line[4:].partition(" OUT:")
            inp = tuple(left.split())
            outp = tuple(right.split())
            if not inp:
                raise FormatError("empty input", i)
            if normalize_actions:
                outp = tuple(ACTION_NAMES.get(a, a) for a in outp)
            out.append(Example(inp, outp))
    return out


def format_scan(examples: Iterable[Example]) -> str:
    return "".join(f"IN: {' '.join(e.input)} OUT: {' '.join(e.output)}\n" for e in examples)


def write_scan_file(examples: Iterable[Example], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_scan(examples))


SPLIT_KINDS = ("simple", "length", "add-jump", "add-around-right")


@dataclass(frozen=True)
class SplitSpec:
    kind: str
    train_fraction: float = 0.8
    seed: int = 0
    max_train_output: int = 22
    holdout_word: str = "jump"
    holdout_phrase: tuple[str, ...] = ("around", "right")


def _contains(words: Sequence[str], phrase: Sequence[str]) -> bool:
    k = len(phrase)
    return any(tuple(words[i:i + k]) == tuple(phrase) for i in range(len(words) - k + 1))


def make_split(data: Sequence[Example], spec: Union[SplitSpec, str]) -> tuple[list[Example], list[Example]]:
    """Partition ``data`` into (train, test) according to ``spec``."""
    if isinstance(spec, str):
        spec = SplitSpec(spec)
    if not data:
        raise ValueError("data must be nonempty")
    if spec.kind == "simple":
        rng = make_rng(spec.seed)
        order = rng.permutation(len(data))
        cut = int(round(spec.train_fraction * len(data)))
        train_idx = set(order[:cut].tolist())
        in_train = [i in train_idx for i in range(len(data))]
    elif spec.kind == "length":
        in_train = [len(e.output) <= spec.max_train_output for e in data]
    elif spec.kind == "add-jump":
        w = spec.holdout_word
        in_train = [w not in e.input or e.input == (w,) for e in data]
    elif spec.kind == "add-around-right":
        in_train = [not _contains(e.input, spec.holdout_phrase) for e in data]
    else:
        raise UnknownSplit(f"unknown split {spec.kind!r}; choose from {', '.join(SPLIT_KINDS)}")
    train = [e for e, t in zip(data, in_train) if t]
    test = [e for e, t in zip(data, in_train) if not t]
    return train, test


# ----------------------------------------------------------------------------
# support selection


@lru_cache(maxsize=4)
def training_length_histogram(n_grammars: int = 200, per_grammar: int = 30,
                              seed: int = 0, max_len: int = 9) -> tuple[float, ...]:
    """Input-length distribution of episodes drawn from the SCAN-like family.

    Entry ``i`` is the probability of length ``i + 1``; lengths above
    ``max_len`` are folded into the last bin.
    """
    rng = make_rng(seed)
    counts = Counter()
    p = ScanMetaParams()
    for _ in range(n_grammars):
        g = sample_scanlike(p, rng)
        try:
            xs = sample_inputs(g, per_grammar, (1, max_len), rng, max_failures=200)
        except Unsatisfiable:
            continue
        counts.update(len(x) for x in xs)
    total = sum(counts.values())
    return tuple(counts[i] / total for i in range(1, max_len + 1))


UPWEIGHT_WORDS = ("opposite", "around")


def select_support(train: Sequence[Example], k: int = 100, heuristics: bool = True,
                   rng=None, *, length_hist: Optional[Sequence[float]] = None,
                   upweight: float = 3.0, upweight_words=UPWEIGHT_WORDS,
                   cap: int = 10_000) -> list[Example]:
    """Choose ``k`` distinct support examples from ``train``.

    With heuristics on, each proposal first draws an input length from
    ``length_hist`` (entry ``i`` is length ``i + 1``, the last bin absorbs
    longer inputs) and then a uniform candidate of that length, accepted
    with probability ``boost / max boost`` where inputs containing one of
    ``upweight_words`` carry ``upweight``.  The default histogram is the
    length distribution of ``train`` itself.  After ``cap`` proposals the
    remainder is filled uniformly.
    """
    if k > len(train):
        raise ValueError(f"cannot select {k} examples from {len(train)}")
    if k < 0:
        raise ValueError("k must be >= 0")
    rng = make_rng(rng)
    n = len(train)
    if not heuristics:
        idx = rng.choice(n, size=k, replace=False)
        return [train[i] for i in idx]

    if length_hist is None:
        top = max(len(e.input) for e in train)
        counts = Counter(len(e.input) for e in train)
        hist = np.array([counts[i] for i in range(1, top + 1)], dtype=float)
    else:
        hist = np.asarray(length_hist, dtype=float)
    if hist.ndim != 1 or len(hist) == 0 or (hist < 0).any() or hist.sum() <= 0:
        raise ValueError("length_hist must be a nonnegative, nonzero vector")
    buckets: list[list[int]] = [[] for _ in hist]
    for i, e in enumerate(train):
        buckets[min(len(e.input), len(hist)) - 1].append(i)
    boost = [upweight if any(w in e.input for w in upweight_words) else 1.0 for e in train]
    top_boost = [max((boost[i] for i in b), default=1.0) for b in buckets]

    chosen: dict[int, None] = {}
    proposals = 0
    while len(chosen) < k and proposals < cap:
        mass = np.array([h if b else 0.0 for h, b in zip(hist, buckets)])
        if mass.sum() <= 0:
            break
        length = int(rng.choice(len(mass), p=mass / mass.sum()))
        bucket = buckets[length]
        j = int(rng.integers(len(bucket)))
        i = bucket[j]
        proposals += 1
        if rng.random() < boost[i] / top_boost[length]:
            chosen[i] = None
            bucket[j] = bucket[-1]
            bucket.pop()
    if len(chosen) < k:
        rest = np.array([i for i in range(n) if i not in chosen])
        fill = rng.choice(rest, size=k - len(chosen), replace=False)
        chosen.update((int(i), None) for i in fill)
    return [train[i] for i in chosen]

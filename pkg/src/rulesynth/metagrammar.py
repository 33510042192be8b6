"""Random grammar families and their prior.

Three families are provided:

* MiniSCAN: 3-4 primitive rules (word -> colour), 2-4 higher-order rules, and
  the concatenation rule ``u1 x1 -> [u1] [x1]`` last.
* SCAN-like: 4-9 primitives (which may rewrite to nothing), 3-7 higher-order
  rules, and a final concatenation rule that is ``u1 u2 -> [u2] [u1]`` with
  probability ``alt_concat_prob``.
* number words: digit words, tens, powers of ten, optional exception and
  conjunction rules, over the generic ``tokenNN`` vocabulary.

The rule families are sampled through :class:`_Chooser`, which can also be run
in replay mode: instead of drawing, it is told which value the target
grammar needs at each step.  :func:`prior_logprob` uses that mode, so the
prior and the sampler cannot drift apart.

All randomness comes from ``numpy.random.Generator`` over the Philox
counter-based bit generator (see :func:`make_rng`).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, PoolExhausted
from .grammar import EMPTY_STRING, Grammar, Lit, Rule, Var, is_variable
from .numeric import ArithRhs, NumGrammar, NumRule

NONCE_WORDS = (
    "dax", "wif", "lug", "zup", "fep", "blicket", "kiki", "mup", "kleek",
    "gazzer", "tufa", "dox", "zorp", "tiv", "nelf", "snarp", "glorp", "vark",
    "pilt", "quib", "rald", "sorf", "tegg", "yurn", "wug", "bem", "cral",
    "drib", "frop", "gimp", "hask", "jeft", "koob", "lorm", "mib", "nupe",
    "plim", "ropp",
)
SCAN_WORDS = ("walk", "jump", "run", "look", "turn", "left", "right",
              "opposite", "around", "twice", "thrice", "and", "after")
COLORS = ("RED", "GREEN", "BLUE", "YELLOW", "PURPLE", "PINK", "BLACK", "WHITE")
SCAN_ACTIONS = ("WALK", "JUMP", "RUN", "LOOK", "LTURN", "RTURN")
NUMBER_TOKENS = tuple(f"token{i:02d}" for i in range(1, 51))

VAR_NAMES = ("u1", "u2", "x1", "x2")
SHAPES = ("VW", "VWV")
STANDARD_CONCAT = Rule((Var("u1"), Var("x1")), (Var("u1"), Var("x1")))
ALT_CONCAT = Rule((Var("u1"), Var("u2")), (Var("u2"), Var("u1")))


def make_rng(seed=None) -> np.random.Generator:
    """A Philox-backed generator; portable across platforms for a given seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def split_rng(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    return list(rng.spawn(n))


# ----------------------------------------------------------------------------
# parameters


def _range(value, name):
    if not isinstance(value, tuple) or len(value) != 2:
        raise ConfigError(f"expected 'low,high', got {value!r}", name)
    lo, hi = value
    if not (isinstance(lo, int) and isinstance(hi, int)) or lo < 0 or hi < lo:
        raise ConfigError(f"bad range {value!r}", name)
    return lo, hi


@dataclass(frozen=True)
class RuleMetaParams:
    """Shared parameters of the MiniSCAN and SCAN-like families."""

    n_primitives: tuple[int, int] = (3, 4)
    n_higher: tuple[int, int] = (2, 4)
    word_pool: tuple[str, ...] = NONCE_WORDS
    color_pool: tuple[str, ...] = COLORS
    rhs_max_len: int = 5
    allow_empty_primitive: bool = False
    empty_prob: float = 0.0
    alt_concat_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        _range(self.n_primitives, "n_primitives")
        _range(self.n_higher, "n_higher")
        if not 1 <= self.rhs_max_len <= 8:
            raise ConfigError("must lie in [1, 8]", "rhs_max_len")
        for name in ("empty_prob", "alt_concat_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"probability {p} outside [0, 1]", name)
        if len(set(self.word_pool)) != len(self.word_pool):
            raise ConfigError("duplicate words", "word_pool")
        for w in self.word_pool:
            if is_variable(w) or not w or any(c in w for c in "[]") or w == "->" or w.split() != [w]:
                raise ConfigError(f"{w!r} is not a valid input word", "word_pool")
        if len(set(self.color_pool)) != len(self.color_pool):
            raise ConfigError("duplicate words", "color_pool")
        for w in self.color_pool:
            if w == EMPTY_STRING or any(c in w for c in "[]") or w == "->" or w.split() != [w]:
                raise ConfigError(f"{w!r} is not a valid output word", "color_pool")


@dataclass(frozen=True)
class MiniScanParams(RuleMetaParams):
    pass


@dataclass(frozen=True)
class ScanMetaParams(RuleMetaParams):
    n_primitives: tuple[int, int] = (4, 9)
    n_higher: tuple[int, int] = (3, 7)
    word_pool: tuple[str, ...] = NONCE_WORDS[:20] + SCAN_WORDS
    color_pool: tuple[str, ...] = SCAN_ACTIONS + COLORS
    rhs_max_len: int = 8
    allow_empty_primitive: bool = True
    empty_prob: float = 0.15
    alt_concat_prob: float = 0.5


@dataclass(frozen=True)
class NumberMetaParams:
    base: int = 10
    token_pool: tuple[str, ...] = NUMBER_TOKENS
    regular_tens_prob: float = 0.5
    myriad_prob: float = 0.3
    standalone_power_prob: float = 0.5
    exception_prob: float = 0.25
    conjunctive_prob: float = 0.3
    max_power: int = 10**6
    ceiling: int = 99_999_999
    seed: int = 0

    def __post_init__(self):
        if self.base != 10:
            raise ConfigError("only base 10 is supported", "base")
        for name in ("regular_tens_prob", "myriad_prob", "standalone_power_prob",
                     "exception_prob", "conjunctive_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"probability {p} outside [0, 1]", name)
        if self.max_power < 10**4:
            raise ConfigError("must be at least 10000", "max_power")
        if self.max_power < 10**6 and self.ceiling >= 10**8:
            raise ConfigError("a ceiling of 10**8 or more needs max_power >= 10**6", "ceiling")
        if len(set(self.token_pool)) != len(self.token_pool):
            raise ConfigError("duplicate tokens", "token_pool")
        for w in self.token_pool:
            if is_variable(w) or not w or w.split() != [w]:
                raise ConfigError(f"{w!r} is not a valid input word", "token_pool")


Params = Union[RuleMetaParams, NumberMetaParams]


def params_to_config(p: Params) -> str:
    """Serialise parameters as flat ``key = value`` lines."""
    lines = [f"family = {FAMILY_NAMES[type(p)]}"]
    for f in dataclasses.fields(p):
        v = getattr(p, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def params_from_config(text: str, cls=None) -> Params:
    """Parse ``key = value`` lines into a parameter object.

    ``cls`` may be omitted when the text carries a ``family`` key.
    """
    values = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {i}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    family = values.pop("family", None)
    if cls is None:
        if family not in FAMILIES:
            raise ConfigError(f"unknown family {family!r}", "family")
        cls = FAMILIES[family]
    fields = {f.name: f for f in dataclasses.fields(cls)}
    defaults = cls()
    kwargs = {}
    for key, value in values.items():
        if key not in fields:
            raise ConfigError("unknown parameter", key)
        current = getattr(defaults, key)
        try:
            if isinstance(current, bool):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                kwargs[key] = value.lower() in ("true", "1", "yes")
            elif isinstance(current, tuple):
                items = [x.strip() for x in value.split(",") if x.strip()]
                if current and isinstance(current[0], int):
                    kwargs[key] = tuple(int(x) for x in items)
                else:
                    kwargs[key] = tuple(items)
            elif isinstance(current, int):
                kwargs[key] = int(value.replace("_", ""))
            elif isinstance(current, float):
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        except ValueError:
            raise ConfigError(f"cannot parse {value!r}", key) from None
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


FAMILIES = {"miniscan": MiniScanParams, "scanlike": ScanMetaParams,
            "number": NumberMetaParams}
FAMILY_NAMES = {v: k for k, v in FAMILIES.items()}
FAMILY_NAMES[RuleMetaParams] = "miniscan"


# ----------------------------------------------------------------------------
# choice recording

_NOTHING = object()


class _OutOfSupport(Exception):
    pass


class _Chooser:
    """Draws uniform choices, or replays forced ones, accumulating log-prob."""

    def __init__(self, rng: Optional[np.random.Generator]):
        self.rng = rng
        self.logp = 0.0

    def choice(self, options: Sequence, want=_NOTHING):
        if not options:
            raise _OutOfSupport("no options")
        if self.rng is not None:
            val = options[int(self.rng.integers(len(options)))]
        else:
            if want not in options:
                raise _OutOfSupport(f"{want!r} not among options")
            val = want
        self.logp -= math.log(len(options))
        return val

    def bernoulli(self, p: float, want=_NOTHING) -> bool:
        if self.rng is not None:
            val = bool(self.rng.random() < p)
        else:
            val = bool(want)
        q = p if val else 1.0 - p
        if q <= 0.0:
            raise _OutOfSupport("zero-probability branch")
        self.logp += math.log(q)
        return val


def _count_bounds(p: RuleMetaParams, n_words: int):
    lo_p, hi_p = p.n_primitives
    lo_h, hi_h = p.n_higher
    hi_p = min(hi_p, n_words - lo_h)
    if not p.allow_empty_primitive:
        hi_p = min(hi_p, len(p.color_pool))
    if hi_p < lo_p:
        raise PoolExhausted(
            f"pools too small: need {lo_p} primitives and {lo_h} higher-order "
            f"rules from {n_words} words and {len(p.color_pool)} outputs")
    return (lo_p, hi_p), (lo_h, hi_h)


def _pair_names():
    return [(a, b) for a in VAR_NAMES for b in VAR_NAMES if a != b]


def _split_target(g: Grammar):
    """Split a grammar into (primitives, higher-order rules, final rule)."""
    rules = list(g.rules)
    if len(rules) < 1:
        raise _OutOfSupport("empty grammar")
    body, final = rules[:-1], rules[-1]
    n_prim = 0
    while n_prim < len(body) and body[n_prim].is_primitive:
        n_prim += 1
    prims, higher = body[:n_prim], body[n_prim:]
    for r in prims:
        if len(r.lhs) != 1 or len(r.rhs) > 1:
            raise _OutOfSupport("primitive rules map one word to at most one word")
    return prims, higher, final


def _higher_rule(ch: _Chooser, word: str, p: RuleMetaParams, target: Optional[Rule]):
    want_shape = want_names = want_len = _NOTHING
    if target is not None:
        kinds = "".join("W" if isinstance(e, Lit) else "V" for e in target.lhs)
        if kinds not in SHAPES or target.lhs[1] != Lit(word):
            raise _OutOfSupport("not a higher-order rule for this word")
        want_shape = kinds
        if kinds == "VW":
            want_names = target.lhs[0].name
        else:
            want_names = (target.lhs[0].name, target.lhs[2].name)
        want_len = len(target.rhs)
    shape = ch.choice(SHAPES, want_shape)
    if shape == "VW":
        names = (ch.choice(VAR_NAMES, want_names),)
        lhs = (Var(names[0]), Lit(word))
    else:
        names = ch.choice(_pair_names(), want_names)
        lhs = (Var(names[0]), Lit(word), Var(names[1]))
    length = ch.choice(range(1, p.rhs_max_len + 1), want_len)
    rhs = []
    for i in range(length):
        want = target.rhs[i] if target is not None else _NOTHING
        if target is not None and not isinstance(want, Var):
            raise _OutOfSupport("higher-order right hand sides hold variables only")
        name = ch.choice(names, want.name if target is not None else _NOTHING)
        rhs.append(Var(name))
    return Rule(lhs, tuple(rhs))


def _generate(p: RuleMetaParams, ch: _Chooser, target: Optional[Grammar] = None) -> Grammar:
    words_pool = list(p.word_pool)
    (lo_p, hi_p), (lo_h, hi_h) = _count_bounds(p, len(words_pool))
    if target is not None:
        t_prims, t_higher, t_final = _split_target(target)
    n_prim = ch.choice(range(lo_p, hi_p + 1),
                       len(t_prims) if target is not None else _NOTHING)
    n_higher = ch.choice(range(lo_h, min(hi_h, len(words_pool) - n_prim) + 1),
                         len(t_higher) if target is not None else _NOTHING)

    if target is not None:
        t_words = [r.lhs[0].word for r in t_prims]
        for r in t_higher:
            lits = [e for e in r.lhs if isinstance(e, Lit)]
            if len(lits) != 1:
                raise _OutOfSupport("higher-order rules carry exactly one word")
            t_words.append(lits[0].word)
    words = []
    for i in range(n_prim + n_higher):
        w = ch.choice(words_pool, t_words[i] if target is not None else _NOTHING)
        words_pool.remove(w)
        words.append(w)

    rules = []
    colors = list(p.color_pool)
    for i in range(n_prim):
        want_empty = want_color = _NOTHING
        if target is not None:
            want_empty = len(t_prims[i].rhs) == 0
            if not want_empty:
                want_color = t_prims[i].rhs[0].word
        if p.allow_empty_primitive:
            empty = True if not colors else ch.bernoulli(p.empty_prob, want_empty)
        elif target is not None and want_empty:
            raise _OutOfSupport("empty primitive not allowed")
        else:
            empty = False
        if empty:
            rules.append(Rule((Lit(words[i]),), ()))
        else:
            c = ch.choice(colors, want_color)
            colors.remove(c)
            rules.append(Rule((Lit(words[i]),), (Lit(c),)))
    for j in range(n_higher):
        rules.append(_higher_rule(ch, words[n_prim + j], p,
                                  t_higher[j] if target is not None else None))

    if p.alt_concat_prob > 0:
        want_alt = _NOTHING
        if target is not None:
            if t_final not in (STANDARD_CONCAT, ALT_CONCAT):
                raise _OutOfSupport("final rule must be a concatenation rule")
            want_alt = t_final == ALT_CONCAT
        alt = ch.bernoulli(p.alt_concat_prob, want_alt)
    else:
        if target is not None and t_final != STANDARD_CONCAT:
            raise _OutOfSupport("final rule must be u1 x1 -> [u1] [x1]")
        alt = False
    rules.append(ALT_CONCAT if alt else STANDARD_CONCAT)
    g = Grammar(tuple(rules))
    if target is not None and g != target:
        raise _OutOfSupport("replay did not reproduce the grammar")
    return g


def sample_miniscan(p: RuleMetaParams = MiniScanParams(), rng=None) -> Grammar:
    """Draw a MiniSCAN-style grammar.  ``rng`` defaults to ``make_rng(p.seed)``."""
    return _generate(p, _Chooser(make_rng(p.seed if rng is None else rng)))


def sample_scanlike(p: RuleMetaParams = ScanMetaParams(), rng=None) -> Grammar:
    """Draw a SCAN-like grammar (empty primitives, optional swapped concat)."""
    return _generate(p, _Chooser(make_rng(p.seed if rng is None else rng)))


def prior_logprob(g: Grammar, p: RuleMetaParams) -> float:
    """Log-probability that the sampler for ``p`` emits exactly ``g``.

    Returns ``-inf`` outside the sampler's support.  Only the rule families
    (MiniSCAN / SCAN-like) have a prior.
    """
    if not isinstance(p, RuleMetaParams):
        raise TypeError("prior_logprob is defined for MiniSCAN and SCAN-like parameters")
    if not isinstance(g, Grammar):
        return -math.inf
    ch = _Chooser(None)
    try:
        _count_bounds(p, len(p.word_pool))
        _generate(p, ch, g)
    except (_OutOfSupport, PoolExhausted, IndexError, AttributeError):
        return -math.inf
    return ch.logp


def resample_rule(g: Grammar, index: int, p: RuleMetaParams, rng) -> tuple[Grammar, float, float]:
    """Redraw rule ``index`` of ``g`` from the sampler's conditional.

    The rule keeps its role (primitive, higher-order or final concatenation)
    and its replacement avoids words and outputs used elsewhere.  Returns the
    new grammar with the log-probabilities of drawing the new rule and of
    drawing the old rule back, as a Metropolis-Hastings kernel needs.
    """
    prims, higher, final = _split_target(g)
    rules = list(g.rules)
    old = rules[index]
    used_words = set()
    used_colors = set()
    for k, r in enumerate(rules[:-1]):
        if k == index:
            continue
        used_words.update(e.word for e in r.lhs if isinstance(e, Lit))
        if r.is_primitive:
            used_colors.update(e.word for e in r.rhs)
    words = [w for w in p.word_pool if w not in used_words]
    colors = [c for c in p.color_pool if c not in used_colors]

    def draw(ch, target):
        if index == len(rules) - 1:
            if p.alt_concat_prob > 0:
                alt = ch.bernoulli(p.alt_concat_prob,
                                   target == ALT_CONCAT if target is not None else _NOTHING)
            else:
                if target is not None and target != STANDARD_CONCAT:
                    raise _OutOfSupport("bad final rule")
                alt = False
            return ALT_CONCAT if alt else STANDARD_CONCAT
        if index < len(prims):
            tw = target.lhs[0].word if target is not None else _NOTHING
            w = ch.choice(words, tw)
            if p.allow_empty_primitive:
                want = len(target.rhs) == 0 if target is not None else _NOTHING
                empty = True if not colors else ch.bernoulli(p.empty_prob, want)
            else:
                empty = False
            if empty:
                return Rule((Lit(w),), ())
            c = ch.choice(colors, target.rhs[0].word if target is not None else _NOTHING)
            return Rule((Lit(w),), (Lit(c),))
        tw = _NOTHING
        if target is not None:
            tw = next(e.word for e in target.lhs if isinstance(e, Lit))
        w = ch.choice(words, tw)
        return _higher_rule(ch, w, p, target)

    fwd = _Chooser(make_rng(rng))
    new = draw(fwd, None)
    rev = _Chooser(None)
    try:
        draw(rev, old)
        log_rev = rev.logp
    except (_OutOfSupport, StopIteration, IndexError):
        log_rev = -math.inf
    rules[index] = new
    return Grammar(tuple(rules)), fwd.logp, log_rev


def restrict_params(p: RuleMetaParams, words: Sequence[str], outputs: Sequence[str]) -> RuleMetaParams:
    """Copy of ``p`` whose pools are exactly the given vocabularies."""
    return dataclasses.replace(p, word_pool=tuple(sorted(set(words))),
                               color_pool=tuple(sorted(set(outputs))))


# ----------------------------------------------------------------------------
# number words


def sample_number(p: NumberMetaParams = NumberMetaParams(), rng=None) -> NumGrammar:
    """Draw a base-10 number-word grammar over ``p.token_pool``.

    Layout (top to bottom): digit words; tens words (irregular multiples
    ``twenty``, ``thirty``... or a single regular tens word); power words;
    for each power from the largest down an optional exception rule and the
    multiplier rule ``x1 W y1 -> [x1]*P + [y1]``; an optional conjunction
    rule; and the additive concatenation rule ``u1 x1 -> [u1] + [x1]``.
    """
    rng = make_rng(p.seed if rng is None else rng)
    pool = list(p.token_pool)

    def take():
        if not pool:
            raise PoolExhausted(f"token pool of {len(p.token_pool)} is too small")
        return pool.pop(int(rng.integers(len(pool))))

    def const(*factors):
        return ArithRhs((tuple(factors),))

    def mult(x, power, y):
        return ArithRhs(((Var(x), power), (Var(y),)))

    primitives: list[NumRule] = []
    digits = {d: take() for d in range(1, 10)}
    for d in range(1, 10):
        primitives.append(NumRule((Lit(digits[d]),), const(d)))

    regular_tens = bool(rng.random() < p.regular_tens_prob)
    if not regular_tens:
        for k in range(1, 10):
            primitives.append(NumRule((Lit(take()),), const(10 * k)))

    myriad = bool(rng.random() < p.myriad_prob) or p.max_power < 10**6
    powers = [100, 1000, 10**4 if myriad else 10**6]
    powers = [q for q in powers if q <= p.max_power]
    if regular_tens:
        powers = [10] + powers

    power_words = {}
    for q in powers:
        w = take()
        power_words[q] = w
        if rng.random() < p.standalone_power_prob:
            primitives.append(NumRule((Lit(w),), const(q)))
        else:
            primitives.append(NumRule((Lit(digits[1]), Lit(w)), const(q)))

    structural: list[NumRule] = []
    y = Var("y1")
    for q in sorted(powers, reverse=True):
        w = power_words[q]
        if rng.random() < p.exception_prob:
            if rng.random() < 0.5:
                structural.append(NumRule((Lit(take()), y), ArithRhs(((q, 1), (y,)))))
            else:
                d = int(rng.integers(2, 10))
                structural.append(NumRule((Lit(take()), Lit(w), y), ArithRhs(((q, d), (y,)))))
        structural.append(NumRule((Var("x1"), Lit(w), y), mult("x1", q, "y1")))

    if rng.random() < p.conjunctive_prob:
        structural.append(NumRule((Var("u1"), Lit(take()), Var("x1")),
                                  ArithRhs(((Var("u1"),), (Var("x1"),)))))
    structural.append(NumRule((Var("u1"), Var("x1")),
                              ArithRhs(((Var("u1"),), (Var("x1"),)))))
    return NumGrammar(tuple(primitives + structural))


def sample(p: Params, rng=None):
    """Dispatch to the sampler for ``p``'s family."""
    if isinstance(p, NumberMetaParams):
        return sample_number(p, rng)
    if isinstance(p, ScanMetaParams):
        return sample_scanlike(p, rng)
    return sample_miniscan(p, rng)

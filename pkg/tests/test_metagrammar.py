import itertools
import math

import numpy as np
import pytest

from rulesynth import (
    ConfigError,
    Grammar,
    Lit,
    MiniScanParams,
    NumberMetaParams,
    Rule,
    ScanMetaParams,
    Var,
    make_rng,
    params_from_config,
    params_to_config,
    parse_grammar,
    prior_logprob,
    print_grammar,
    sample,
    sample_miniscan,
    sample_number,
    sample_scanlike,
    validate,
)
from rulesynth.errors import PoolExhausted
from rulesynth.metagrammar import (
    ALT_CONCAT,
    STANDARD_CONCAT,
    VAR_NAMES,
    RuleMetaParams,
    resample_rule,
)
from rulesynth.numeric import parse_num_grammar, print_num_grammar


def _split(g):
    prims = [r for r in g.rules[:-1] if r.is_primitive]
    higher = [r for r in g.rules[:-1] if not r.is_primitive]
    return prims, higher, g.rules[-1]


def test_seeded_determinism():
    p = MiniScanParams()
    assert sample_miniscan(p, make_rng(3)) == sample_miniscan(p, make_rng(3))
    assert sample_miniscan(p, make_rng(3)) != sample_miniscan(p, make_rng(4))
    assert sample_number(NumberMetaParams(), make_rng(3)) == sample_number(NumberMetaParams(), make_rng(3))


def test_default_rng_comes_from_params_seed():
    p = MiniScanParams(seed=9)
    assert sample_miniscan(p) == sample_miniscan(p, make_rng(9))


def test_pinned_stream():
    # Philox is counter based; this draw must not change across platforms
    assert make_rng(0).integers(1_000_000, size=3).tolist() == \
        np.random.Generator(np.random.Philox(0)).integers(1_000_000, size=3).tolist()


@pytest.mark.parametrize("family,params", [
    ("miniscan", MiniScanParams()),
    ("scanlike", ScanMetaParams()),
])
def test_shapes_and_ranges(family, params):
    rng = make_rng(1)
    for _ in range(300):
        g = sample(params, rng)
        prims, higher, final = _split(g)
        assert params.n_primitives[0] <= len(prims) <= params.n_primitives[1]
        assert params.n_higher[0] <= len(higher) <= params.n_higher[1]
        assert final in (STANDARD_CONCAT, ALT_CONCAT)
        if params.alt_concat_prob == 0:
            assert final == STANDARD_CONCAT
        assert validate(g) == []
        assert parse_grammar(print_grammar(g)) == g
        words = [e.word for r in g.rules for e in r.lhs if isinstance(e, Lit)]
        assert len(words) == len(set(words))
        for r in higher:
            assert 1 <= len(r.rhs) <= params.rhs_max_len
            assert all(isinstance(e, Var) for e in r.rhs)
        assert math.isfinite(prior_logprob(g, params))


def test_miniscan_never_empty_and_scanlike_sometimes_empty():
    rng = make_rng(2)
    assert all(r.rhs for _ in range(200)
               for r in _split(sample_miniscan(MiniScanParams(), rng))[0])
    empties = sum(1 for _ in range(200)
                  for r in _split(sample_scanlike(ScanMetaParams(), rng))[0] if not r.rhs)
    assert empties > 0


def test_alt_concat_rate():
    rng = make_rng(2024)
    p = ScanMetaParams()
    n = 10_000
    alt = sum(sample_scanlike(p, rng).rules[-1] == ALT_CONCAT for _ in range(n))
    assert 0.47 <= alt / n <= 0.53


def test_alt_concat_disabled():
    p = ScanMetaParams(alt_concat_prob=0.0)
    rng = make_rng(0)
    assert all(sample_scanlike(p, rng).rules[-1] == STANDARD_CONCAT for _ in range(200))


def test_pool_exhausted():
    p = MiniScanParams(n_primitives=(4, 4), n_higher=(0, 0), word_pool=("a", "b", "c"))
    with pytest.raises(PoolExhausted):
        sample_miniscan(p, make_rng(0))


def test_number_pool_exhausted():
    with pytest.raises(PoolExhausted):
        sample_number(NumberMetaParams(token_pool=tuple(f"t{i}" for i in range(12))), make_rng(0))


def test_prior_outside_support():
    g = sample_miniscan(MiniScanParams(), make_rng(0))
    prims, higher, final = _split(g)
    extra = [Rule((Var("u1"), Lit(f"q{i}w")), (Var("u1"),)) for i in range(1, 8)]
    big = Grammar(tuple(prims + higher + extra[: 7 - len(higher)] + [final]))
    assert len(_split(big)[1]) == 7
    assert prior_logprob(big, MiniScanParams()) == -math.inf
    assert prior_logprob(parse_grammar("dax -> RED"), MiniScanParams()) == -math.inf
    reordered = Grammar((final,) + g.rules[:-1])
    assert prior_logprob(reordered, MiniScanParams()) == -math.inf


def test_prior_rejects_number_params():
    with pytest.raises(TypeError):
        prior_logprob(parse_grammar("dax -> RED"), NumberMetaParams())


def _superset(p):
    """Generous enumeration of grammars around the sampler's support."""
    words, colors = p.word_pool, p.color_pool
    outputs = [()] + [(Lit(c),) for c in colors]
    pairs = [(a, b) for a in VAR_NAMES for b in VAR_NAMES if a != b]
    for n_prim in range(p.n_primitives[0], p.n_primitives[1] + 1):
        for n_high in range(p.n_higher[0], p.n_higher[1] + 1):
            for ws in itertools.permutations(words, n_prim + n_high):
                for outs in itertools.product(outputs, repeat=n_prim):
                    prims = [Rule((Lit(w),), o) for w, o in zip(ws, outs)]
                    bodies = []
                    for w in ws[n_prim:]:
                        opts = []
                        for a in VAR_NAMES:
                            for n in range(1, p.rhs_max_len + 1):
                                opts.append(Rule((Var(a), Lit(w)), (Var(a),) * n))
                        for a, b in pairs:
                            for n in range(1, p.rhs_max_len + 1):
                                for rhs in itertools.product((a, b), repeat=n):
                                    opts.append(Rule((Var(a), Lit(w), Var(b)),
                                                     tuple(Var(x) for x in rhs)))
                        bodies.append(opts)
                    for higher in itertools.product(*bodies):
                        for final in (STANDARD_CONCAT, ALT_CONCAT):
                            yield Grammar(tuple(prims) + tuple(higher) + (final,))


def test_prior_normalises_tiny():
    p = RuleMetaParams(n_primitives=(1, 1), n_higher=(0, 0), word_pool=("a", "b"),
                       color_pool=("R",))
    total = sum(math.exp(prior_logprob(g, p)) for g in _superset(p))
    assert abs(total - 1.0) < 1e-9


def test_prior_normalises_richer():
    p = RuleMetaParams(n_primitives=(1, 2), n_higher=(0, 1), word_pool=("a", "b", "c"),
                       color_pool=("R", "G"), rhs_max_len=2, allow_empty_primitive=True,
                       empty_prob=0.3, alt_concat_prob=0.5)
    total = 0.0
    n_support = 0
    for g in _superset(p):
        lp = prior_logprob(g, p)
        if lp > -math.inf:
            n_support += 1
            total += math.exp(lp)
    assert n_support > 1000
    assert abs(total - 1.0) < 1e-9


def test_prior_matches_empirical_frequency():
    p = RuleMetaParams(n_primitives=(1, 1), n_higher=(0, 0), word_pool=("a", "b"),
                       color_pool=("R", "G"), alt_concat_prob=0.25)
    rng = make_rng(7)
    n = 20_000
    counts = {}
    for _ in range(n):
        g = sample_miniscan(p, rng)
        counts[g] = counts.get(g, 0) + 1
    for g, c in counts.items():
        q = math.exp(prior_logprob(g, p))
        assert abs(c / n - q) < 5 * math.sqrt(q * (1 - q) / n)


def test_resample_rule_stays_in_support():
    p = ScanMetaParams()
    rng = make_rng(3)
    g = sample_scanlike(p, rng)
    for _ in range(300):
        i = int(rng.integers(len(g.rules)))
        new, fwd, rev = resample_rule(g, i, p, rng)
        assert math.isfinite(fwd) and math.isfinite(rev)
        assert math.isfinite(prior_logprob(new, p))
        assert len(new.rules) == len(g.rules)
        g = new


def test_resample_reverse_probability_matches_forward_of_reverse_move():
    p = MiniScanParams()
    rng = make_rng(8)
    g = sample_miniscan(p, rng)
    for i in range(len(g.rules)):
        new, fwd, rev = resample_rule(g, i, p, rng)
        # drawing g's rule back from `new` has log-prob `rev`
        found = False
        for _ in range(50000):
            back, fwd2, _ = resample_rule(new, i, p, rng)
            if back == g:
                assert fwd2 == pytest.approx(rev)
                found = True
                break
        if math.exp(rev) > 1e-3:
            assert found


# ---------------------------------------------------------------- numbers


def test_number_grammar_shape():
    rng = make_rng(4)
    for _ in range(200):
        g = sample_number(NumberMetaParams(), rng)
        assert parse_num_grammar(print_num_grammar(g)) == g
        final = g.rules[-1]
        assert str(final) == "u1 x1 -> [u1] + [x1]"
        values = sorted(r.rhs.value() for r in g.rules if r.is_primitive)
        assert values[:9] == list(range(1, 10))
        # each exception rule sits directly above its general rule
        for k, r in enumerate(g.rules):
            if not r.is_primitive and r.rhs.terms[0] and all(isinstance(f, int) for f in r.rhs.terms[0]):
                nxt = g.rules[k + 1]
                assert isinstance(nxt.lhs[0], Var) and nxt.lhs[0].kind == "x"


def test_number_no_exceptions_when_disabled():
    p = NumberMetaParams(exception_prob=0.0, conjunctive_prob=0.0)
    rng = make_rng(6)
    for _ in range(100):
        g = sample_number(p, rng)
        for r in g.rules:
            if r.is_primitive:
                continue
            assert all(any(isinstance(f, Var) for f in t) for t in r.rhs.terms)
        assert len([r for r in g.rules if len(r.lhs) == 3 and r.lhs[0] == Var("u1")]) == 0


def test_number_irregular_tens_shape():
    p = NumberMetaParams(regular_tens_prob=0.0, myriad_prob=1.0)
    g = sample_number(p, make_rng(0))
    values = {r.rhs.value() for r in g.rules if r.is_primitive}
    assert {10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 1000, 10000} <= values


# ---------------------------------------------------------------- params


@pytest.mark.parametrize("p", [MiniScanParams(seed=3), ScanMetaParams(), NumberMetaParams(seed=5)])
def test_params_config_round_trip(p):
    assert params_from_config(params_to_config(p)) == p


@pytest.mark.parametrize("text,field", [
    ("family = miniscan\nrhs_max_len = 9\n", "rhs_max_len"),
    ("family = miniscan\nn_primitives = 3\n", "n_primitives"),
    ("family = miniscan\nbogus = 1\n", "bogus"),
    ("family = scanlike\nempty_prob = 1.5\n", "empty_prob"),
    ("family = number\nmax_power = ten\n", "max_power"),
    ("family = nothing\n", "family"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as err:
        params_from_config(text)
    assert err.value.field == field

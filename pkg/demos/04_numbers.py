"""Number words as arithmetic rewrite rules.

Each right side is a sum of products, so the same machinery maps a token
sequence to an integer.  ``invert`` goes the other way.
"""

from importlib import resources

from rulesynth import NumberMetaParams, evaluate_number, invert, make_rng, parse_num_grammar, sample_number

text = resources.files("rulesynth").joinpath("data", "numbers_b.grammar").read_text()
g = parse_num_grammar(text)
for n in [7, 41000, 2_500_017]:
    words = invert(g, n)
    print(f"{n:>10,} -> {' '.join(words):40} -> {evaluate_number(g, words):,}")

print("\na freshly sampled number system:")
sampled = sample_number(NumberMetaParams(), make_rng(12))
print(sampled)
for n in [19, 305, 86_000]:
    print(f"{n:>7,}: {' '.join(invert(sampled, n))}")

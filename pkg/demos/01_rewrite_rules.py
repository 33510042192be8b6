"""Ordered rewrite rules on SCAN commands.

Loads the bundled SCAN grammar, runs a few commands through it and shows
why the order of the rules matters.
"""

from rulesynth import canonical_scan_grammar, evaluate, parse_grammar

scan = canonical_scan_grammar()
print("The bundled SCAN grammar has", len(scan), "rules:\n")
print(scan, "\n")

for command in ["jump", "walk left twice", "jump around left", "run opposite right after look"]:
    print(f"{command!r:34} -> {' '.join(evaluate(scan, command))}")

# The first rule whose left side matches the whole input fires, so moving
# the concatenation rule above "and" changes the reading of a conjunction.
greedy = parse_grammar("""
walk -> WALK
and -> AND
u1 x1 -> [u1] [x1]
x1 and x2 -> [x1] [x2]
""")
careful = parse_grammar("""
walk -> WALK
and -> AND
x1 and x2 -> [x1] [x2]
u1 x1 -> [u1] [x1]
""")
print("\nwith concatenation first: ", evaluate(greedy, "walk and walk"))
print("with the 'and' rule first:", evaluate(careful, "walk and walk"))

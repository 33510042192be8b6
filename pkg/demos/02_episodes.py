"""Sample a MiniSCAN-style grammar and build a few-shot episode from it."""

from rulesynth import MiniScanParams, make_episode, make_rng, sample_miniscan

rng = make_rng(7)
target = sample_miniscan(MiniScanParams(), rng)
print("hidden grammar:\n" + str(target) + "\n")

episode = make_episode(target, n_support=12, n_query=4, rng=rng)
print("support (what a learner sees):")
for ex in episode.support:
    print(f"  {' '.join(ex.input):28} {' '.join(ex.output)}")
print("\nquery (held out):")
for ex in episode.query:
    print(f"  {' '.join(ex.input):28} {' '.join(ex.output)}")

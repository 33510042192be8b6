"""Guess and check.

First a prior-sampling search on a small episode, then the RANSAC loop on
the SCAN add-jump split with the true grammar fed in as an external
proposal stream.
"""

from rulesynth import (
    MiniScanParams,
    SearchConfig,
    build_scan_dataset,
    canonical_scan_grammar,
    external_proposer,
    make_episode,
    make_rng,
    make_split,
    prior_proposer,
    query_accuracy,
    ransac_search,
    sample_miniscan,
    search,
)
from rulesynth.synthesis import support_vocab

rng = make_rng(3)
params = MiniScanParams(n_primitives=(3, 4), n_higher=(1, 2))
target = sample_miniscan(params, rng)
episode = make_episode(target, 10, 5, rng)
ins, outs = support_vocab(episode.support)

report = search(episode.support, prior_proposer(params, ins, rng, outs),
                SearchConfig(max_seconds=10, seed=3))
print(f"prior search: {report.termination} after {report.proposals_seen} proposals")
print("best-so-far counts:", report.trajectory)
print("best grammar:\n" + str(report.best.grammar))
print(f"query accuracy {query_accuracy(report.best.grammar, episode.query):.2f}\n")

train, test = make_split(build_scan_dataset(), "add-jump")
oracle = str(canonical_scan_grammar())
report = ransac_search(train, lambda subset, r: external_proposer(oracle.splitlines()),
                       SearchConfig(max_proposals=20, subset_proposals=5))
print(f"add-jump with oracle proposals: {report.termination} in {report.rounds} round(s), "
      f"{report.examples_drawn} of {len(train)} training examples drawn")
print(f"test accuracy {query_accuracy(report.best.grammar, test):.3f}")

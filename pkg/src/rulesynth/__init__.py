"""Interpretation grammars: rewrite rules, samplers, episodes and synthesis."""

__version__ = "0.1.0"

from .errors import (
    BudgetExceeded,
    ConfigError,
    DuplicateVariable,
    EvaluationError,
    FormatError,
    GrammarSyntaxError,
    NegativeLiteral,
    NoMatch,
    NotRepresentable,
    PoolExhausted,
    RuleSynthError,
    SpawnError,
    UnboundVariable,
    Unsatisfiable,
    UnknownSplit,
)
from .grammar import (
    EMPTY_STRING,
    Grammar,
    Lit,
    Rule,
    Var,
    evaluate,
    load_grammar,
    match_lhs,
    parse_grammar,
    parse_rule,
    print_grammar,
    validate,
)
from .numeric import (
    NumGrammar,
    evaluate_number,
    invert,
    load_lexicon,
    load_num_grammar,
    parse_num_grammar,
    print_num_grammar,
)
from .metagrammar import (
    MiniScanParams,
    NumberMetaParams,
    ScanMetaParams,
    make_rng,
    params_from_config,
    params_to_config,
    prior_logprob,
    sample,
    sample_miniscan,
    sample_number,
    sample_scanlike,
)
from .episodes import (
    Episode,
    Example,
    SplitSpec,
    build_scan_dataset,
    canonical_scan_grammar,
    load_scan_file,
    make_episode,
    make_number_episode,
    make_split,
    read_episode,
    sample_inputs,
    select_support,
    write_episode,
)
from .synthesis import (
    Candidate,
    SearchConfig,
    SearchReport,
    check_consistency,
    check_fast,
    enumeration_proposer,
    external_proposer,
    mcmc_proposer,
    prior_proposer,
    query_accuracy,
    ransac_search,
    search,
)

__all__ = [
    "__version__",
    "BudgetExceeded",
    "ConfigError",
    "DuplicateVariable",
    "EvaluationError",
    "FormatError",
    "GrammarSyntaxError",
    "NegativeLiteral",
    "NoMatch",
    "NotRepresentable",
    "PoolExhausted",
    "RuleSynthError",
    "SpawnError",
    "UnboundVariable",
    "Unsatisfiable",
    "UnknownSplit",
    "EMPTY_STRING",
    "Grammar",
    "Lit",
    "Rule",
    "Var",
    "evaluate",
    "load_grammar",
    "match_lhs",
    "parse_grammar",
    "parse_rule",
    "print_grammar",
    "validate",
    "NumGrammar",
    "evaluate_number",
    "invert",
    "load_lexicon",
    "load_num_grammar",
    "parse_num_grammar",
    "print_num_grammar",
    "MiniScanParams",
    "NumberMetaParams",
    "ScanMetaParams",
    "make_rng",
    "params_from_config",
    "params_to_config",
    "prior_logprob",
    "sample",
    "sample_miniscan",
    "sample_number",
    "sample_scanlike",
    "Episode",
    "Example",
    "SplitSpec",
    "build_scan_dataset",
    "canonical_scan_grammar",
    "load_scan_file",
    "make_episode",
    "make_number_episode",
    "make_split",
    "read_episode",
    "sample_inputs",
    "select_support",
    "write_episode",
    "Candidate",
    "SearchConfig",
    "SearchReport",
    "check_consistency",
    "check_fast",
    "enumeration_proposer",
    "external_proposer",
    "mcmc_proposer",
    "prior_proposer",
    "query_accuracy",
    "ransac_search",
    "search",
]

"""DNS observation attacks and privacy defenses on resolver-side query logs."""

from .fingerprint import (
    AccessPattern,
    PatternDB,
    detect_stream,
    extract_pattern,
    match_window,
    uniqueness_report,
)
from .linker import (
    MultinomialLinker,
    VocabularyRestrictor,
    epoch_sweep,
    evaluate_linkage,
    link_epoch_pair,
    restrict_vocabulary,
)
from .model import (
    DnsQuery,
    EpochSpec,
    Session,
    SessionStore,
    normalize_domain,
    parse_query_log,
    sessionize,
)
from .pushdns import PushConfig, bandwidth_estimate, coverage, coverage_curve, rank_domains
from .rangequery import defense_benchmark, pattern_dummies, random_dummies, range_attack
from .synth import PopulationConfig, generate_pattern_db, generate_population, simulate

__version__ = "0.1.0"
FORMAT_VERSION = "1"

"""k-way set-associative cache simulation under data-plane constraints."""

from .core import (
    MISS,
    CacheElement,
    LayoutConfig,
    LayoutError,
    OpCounter,
    RegisterStore,
    StorageError,
    hash_to_set,
    ternary_match,
)
from .harness import (
    CacheSpec,
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    run_experiment,
    run_sweep,
)
from .hyperbolic import HyperbolicEngine, LogTable, build_log_table, priority_score
from .multiregion import (
    CountingFilter,
    MultiRegionCache,
    MultiRegionConfig,
    RegionSpec,
)
from .oracle import (
    ExhaustiveReport,
    ReferenceCache,
    ReferenceMultiCache,
    exhaustive_check,
)
from .policies import (
    FetchResult,
    FifoEngine,
    LfuEngine,
    LruEngine,
    PolicyEngine,
    TableBacking,
    fetch_value,
    identity_backing,
    make_engine,
)
from .traces import (
    Trace,
    TraceEvent,
    TraceFormatError,
    ZipfSpec,
    generate_zipf,
    parse_trace,
    zipf_frequency,
)

__version__ = "0.1.0"

"""Environment-style configuration knobs.

Settings are read once from the environment at import; CLI flags and
explicit constructor arguments always win over these defaults.
"""

import os

#: Default worker count for parallel executors (``OPALG_WORKERS`` env var,
#: hardware parallelism otherwise).
DEFAULT_WORKERS = int(os.environ.get("OPALG_WORKERS", 0)) or (os.cpu_count() or 1)

#: When True, objects invalidated by an ownership transfer raise
#: ContractViolation on any further use. Cheap flag check per call.
debug_contracts = os.environ.get("OPALG_DEBUG_CONTRACTS", "1") != "0"

#: Default floating-point value type (8-byte IEEE double). 4-byte floats are
#: supported by constructing matrices/vectors with ``value_dtype``.
DEFAULT_VALUE_DTYPE = "float64"

#: Default index type for sparse formats (4-byte signed).
DEFAULT_INDEX_DTYPE = "int32"

"""Channel-adapted approximate quantum error correction codes.

Codes are searched over Cartan-parameterised encoding unitaries and scored by
the worst-case fidelity loss under Petz recovery.
"""

from .channels import NoiseSpec, QuantumChannel
from .errors import (
    CapacityError,
    ConsistencyError,
    DegenerateChannelError,
    InvalidArgument,
    UnsupportedString,
)
from .qec import Code, fidelity_loss, grid_oracle, named_code, petz_recovery
from .search import SearchConfig, search_code, sweep

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "Code",
    "ConsistencyError",
    "DegenerateChannelError",
    "InvalidArgument",
    "NoiseSpec",
    "QuantumChannel",
    "SearchConfig",
    "UnsupportedString",
    "__version__",
    "fidelity_loss",
    "grid_oracle",
    "named_code",
    "petz_recovery",
    "search_code",
    "sweep",
]

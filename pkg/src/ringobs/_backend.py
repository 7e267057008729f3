"""Backend dispatch for the integration chunk drivers.

Selects the compiled extension core when it is importable and supports
the scenario's model/input family, else the pure-Python reference
drivers.  ``RINGOBS_FORCE_PUREPY=1`` in the environment forces the
reference backend (useful for benchmarking and for isolating
backend-specific behavior).
"""

from __future__ import annotations

import os

from ringobs import _purepy

try:  # pragma: no cover - exercised only when the extension is built
    from ringobs import _core
except ImportError:  # pragma: no cover
    _core = None


def compiled_available() -> bool:
    """True when the compiled chunk drivers can be used at all."""
    if os.environ.get("RINGOBS_FORCE_PUREPY", "") == "1":
        return False
    return _core is not None


def get_backend(params, input_signal):
    """Chunk-driver module for this model/input pair."""
    if compiled_available() and _core.supports(params, input_signal):
        return _core
    return _purepy

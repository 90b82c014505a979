"""Kernel backend selection.

The compiled extension is preferred when present; set CCSHAP_PURE_PYTHON=1
to force the numpy fallback. Both backends expose the same functions and
agree up to floating-point summation order.
"""

from __future__ import annotations

import os

from . import _shapley_py

if os.environ.get("CCSHAP_PURE_PYTHON", "") not in ("", "0"):
    _impl = _shapley_py
    _BACKEND = "python"
else:
    try:
        from . import _shapley_fast as _impl  # type: ignore[no-redef]

        _BACKEND = "compiled"
    except ImportError:
        _impl = _shapley_py
        _BACKEND = "python"

exact_phi_from_table = _impl.exact_phi_from_table
coalition_weights = _shapley_py.coalition_weights


def backend_name() -> str:
    """Which kernel implementation is active: "compiled" or "python"."""
    return _BACKEND


def available_backends() -> dict[str, object]:
    """All importable kernel modules, for benchmarking one against the other."""
    backends: dict[str, object] = {"python": _shapley_py}
    try:
        from . import _shapley_fast

        backends["compiled"] = _shapley_fast
    except ImportError:
        pass
    return backends

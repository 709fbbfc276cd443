"""Backend selection for the integration inner loop.

The compiled extension (_core) and the pure-Python reference (_pyloop)
implement the same kernel; the compiled one is preferred when the build
produced it.  The environment variable TDDEBIF_BACKEND ("compiled" or
"python") forces a choice, as does the backend argument of integrate.
"""

from __future__ import annotations

import os

from . import _pyloop

try:
    from . import _core
except ImportError:
    _core = None

__all__ = ["available", "select", "STATUS_NAMES"]

STATUS_NAMES = {
    _pyloop.OK: "ok",
    _pyloop.CAPACITY: "capacity",
    _pyloop.TAU_RANGE: "tau-range",
    _pyloop.TIME_ORDER: "time-order",
    _pyloop.NOT_FINITE: "not-finite",
}


def available() -> tuple[str, ...]:
    """Names of the loadable backends, preferred first."""
    if _core is not None:
        return ("compiled", "python")
    return ("python",)


def select(name: str | None = None):
    """Resolve a backend to (name, run_loop).

    name=None consults TDDEBIF_BACKEND, then falls back to the compiled
    loop when present.  Asking for "compiled" without the built extension
    is an error rather than a silent slowdown.
    """
    if name is None:
        name = os.environ.get("TDDEBIF_BACKEND") or None
    if name is None:
        name = "compiled" if _core is not None else "python"
    if name == "python":
        return "python", _pyloop.run_loop
    if name == "compiled":
        if _core is None:
            raise ValueError("compiled backend requested but the extension is not built")
        return "compiled", _core.run_loop
    raise ValueError(f"unknown backend {name!r}; expected 'compiled' or 'python'")

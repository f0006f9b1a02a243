"""Kernel backend selection.

The compiled extension is used when importable. Setting FRONTLAB_BACKEND=python forces the
numpy fallback; FRONTLAB_BACKEND=compiled makes a missing extension an import error.
"""
import os

_choice = os.environ.get("FRONTLAB_BACKEND", "auto").lower()
if _choice not in ("auto", "python", "compiled"):
    raise ImportError(f"FRONTLAB_BACKEND must be auto, python or compiled, not {_choice!r}")

kernels = None
if _choice != "python":
    try:
        from . import _kernels as kernels
    except ImportError:
        if _choice == "compiled":
            raise
if kernels is None:
    from . import _pykernels as kernels

NAME = "python" if kernels.__name__.endswith("_pykernels") else "compiled"


def get(name: str):
    """Kernel module by name ("compiled" or "python"), for comparisons and benchmarks."""
    if name == "python":
        from . import _pykernels
        return _pykernels
    from . import _kernels
    return _kernels

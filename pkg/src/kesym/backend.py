"""Backend selection: compiled kernel when built, pure Python otherwise.

Set KESYM_BACKEND=python to force the fallback, KESYM_BACKEND=compiled to
require the extension (ImportError if it is missing).  Both implementations
share opcodes, tableau, and control constants; results agree to float64
rounding and the test suite checks parity whenever both are importable.
"""
import os

from . import _purevm

_choice = os.environ.get("KESYM_BACKEND", "").strip().lower()

if _choice == "python":
    _impl = _purevm
elif _choice == "compiled":
    from . import _kernel as _impl  # noqa: F401  (ImportError is the point)
elif _choice == "":
    try:
        from . import _kernel as _impl
    except ImportError:
        _impl = _purevm
else:
    raise ValueError(
        f"KESYM_BACKEND={_choice!r}: expected 'python' or 'compiled'")

NAME = _impl.NAME
COMPILED = NAME == "compiled"
eval_many = _impl.eval_many
eval_one = _impl.eval_one
integrate_core = _impl.integrate_core


def available_backends():
    """Names of importable backends, preferred first."""
    out = []
    try:
        from . import _kernel  # noqa: F401
        out.append("compiled")
    except ImportError:
        pass
    out.append("python")
    return out


def get_impl(name: str):
    """Fetch a specific backend module (for parity tests and benchmarks)."""
    if name == "python":
        return _purevm
    if name == "compiled":
        from . import _kernel
        return _kernel
    raise ValueError(f"unknown backend {name!r}")

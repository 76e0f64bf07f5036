"""Kernel backend selection.

The compiled extension is preferred when it imports cleanly; the numpy
reference implementation is always available.  Set CURVEFORGE_KERNEL to
"python" or "cython" to force a backend (forcing "cython" when the
extension is missing raises at import, which is the desired loud failure
for benchmark runs).
"""

import os

from . import _kernels_py


def _load():
    requested = os.environ.get("CURVEFORGE_KERNEL", "").strip().lower()
    if requested not in ("", "python", "cython"):
        raise RuntimeError(
            f"CURVEFORGE_KERNEL must be 'python' or 'cython', "
            f"got {requested!r}")
    if requested == "python":
        return _kernels_py, "python"
    try:
        from . import _kernels_cy
        return _kernels_cy, "cython"
    except ImportError:
        if requested == "cython":
            raise RuntimeError(
                "CURVEFORGE_KERNEL=cython but the compiled extension "
                "is not importable") from None
        return _kernels_py, "python"


_impl, _name = _load()

loss_terms_grid = _impl.loss_terms_grid
quat_chain = _impl.quat_chain
quat_chain_batch = _impl.quat_chain_batch


def backend_name():
    """Active kernel backend: 'cython' or 'python'."""
    return _name


def backends():
    """All importable backends, name -> module (for benchmarks/tests)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels_cy
        out["cython"] = _kernels_cy
    except ImportError:
        pass
    return out

"""Kernel backend selection.

The compiled extension is used when it imports; set ``L1INTERP_PURE_PYTHON=1``
to force the pure-Python fallback. ``BACKEND`` names the active choice.
"""

import os

from . import _pykernels

if os.environ.get("L1INTERP_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

KernelError = (_pykernels.KernelError,) + (
    (_impl.KernelError,) if _impl is not _pykernels else ()
)

tail_sum = _impl.tail_sum
atom_mse = _impl.atom_mse
mse_sum = _impl.mse_sum
solve_alpha = _impl.solve_alpha
interp_residual = _impl.interp_residual
solve_interp = _impl.solve_interp
se_map = _impl.se_map
solve_tau_of_alpha = _impl.solve_tau_of_alpha
lasso_cd = _impl.lasso_cd
kkt_violation = _impl.kkt_violation


def python_backend():
    """The pure-Python module, for parity checks and benchmarks."""
    return _pykernels


def compiled_backend():
    """The compiled module, or ``None`` if it was not built."""
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels

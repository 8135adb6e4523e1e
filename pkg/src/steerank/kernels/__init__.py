"""Numeric kernel backend selection.

Two interchangeable backends expose the same function surface:

* ``_ckern``  - compiled extension, built at install time when a C
  toolchain is available.
* ``_npkern`` - numpy implementation, always available.

The compiled backend is preferred when importable. Set
``STEERANK_BACKEND=numpy`` or ``STEERANK_BACKEND=cython`` to force a
choice; forcing ``cython`` raises if the extension failed to build.

Both backends take float64 C-contiguous arrays (index arrays int64,
masks uint8) and return freshly allocated outputs. Results agree to
~1e-12 but are not bit-identical: summation order differs.
"""

import os

from . import _npkern

try:
    from . import _ckern
except ImportError:
    _ckern = None

_forced = os.environ.get("STEERANK_BACKEND", "").strip().lower()
if _forced == "numpy":
    _impl = _npkern
elif _forced == "cython":
    if _ckern is None:
        raise ImportError(
            "STEERANK_BACKEND=cython but the compiled extension is not "
            "available; reinstall with a C toolchain or unset the variable"
        )
    _impl = _ckern
elif _forced:
    raise ImportError(f"unknown STEERANK_BACKEND value: {_forced!r}")
else:
    _impl = _ckern if _ckern is not None else _npkern


def get_backend():
    """Name of the active backend: ``"cython"`` or ``"numpy"``."""
    return _impl.NAME


def get_module(name=None):
    """Return a backend module by name, or the active one."""
    if name is None:
        return _impl
    if name == "numpy":
        return _npkern
    if name == "cython":
        if _ckern is None:
            raise ValueError("compiled backend not available")
        return _ckern
    raise ValueError(f"unknown backend: {name!r}")


mm_nn = _impl.mm_nn
mm_nt = _impl.mm_nt
mm_tn = _impl.mm_tn
bmm_nn = _impl.bmm_nn
bmm_nt = _impl.bmm_nt
bmm_tn = _impl.bmm_tn
add = _impl.add
sub = _impl.sub
mul = _impl.mul
neg = _impl.neg
scale = _impl.scale
add_scalar = _impl.add_scalar
add_bias = _impl.add_bias
col_sum = _impl.col_sum
sum_all = _impl.sum_all
tanh_fwd = _impl.tanh_fwd
tanh_bwd = _impl.tanh_bwd
sigmoid_fwd = _impl.sigmoid_fwd
sigmoid_bwd = _impl.sigmoid_bwd
exp_fwd = _impl.exp_fwd
log_fwd = _impl.log_fwd
log_bwd = _impl.log_bwd
clip_fwd = _impl.clip_fwd
clip_bwd = _impl.clip_bwd
masked_softmax_fwd = _impl.masked_softmax_fwd
masked_softmax_bwd = _impl.masked_softmax_bwd
gather_rows = _impl.gather_rows
scatter_add_rows = _impl.scatter_add_rows
gather_cols = _impl.gather_cols
scatter_add_cols = _impl.scatter_add_cols
take_per_row = _impl.take_per_row
put_per_row = _impl.put_per_row

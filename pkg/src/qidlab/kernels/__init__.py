"""Backend selection for the hot count-vector moment kernels.

The compiled Cython backend is used when importable; set QIDLAB_KERNEL=ref
or QIDLAB_KERNEL=fast to force a backend (fast raises if the extension is
missing).  Both implement the same `count_stats(counts, p, mu, ov, tri)`
contract and agree to machine precision (see tests/test_kernels.py and
benchmarks/bench_kernels.py).
"""

import os

from . import _ref

_choice = os.environ.get("QIDLAB_KERNEL", "auto").lower()

if _choice == "ref":
    _impl = _ref
    BACKEND = "ref"
else:
    try:
        from . import _fast as _impl  # type: ignore[attr-defined]

        BACKEND = "fast"
    except ImportError:
        if _choice == "fast":
            raise
        _impl = _ref
        BACKEND = "ref"

count_stats = _impl.count_stats
count_stats_ref = _ref.count_stats


def backend_name():
    return BACKEND

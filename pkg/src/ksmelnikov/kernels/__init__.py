"""Hot-kernel backend selection.

Prefers the compiled Cython extension; falls back to the pure-numpy
implementation when the extension is not built.  Both expose the same API
and agree to floating-point tolerance (see tests/test_backends.py and
benchmarks/bench_kernels.py).
"""

try:
    from . import _core as _impl

    BACKEND = "compiled"
except ImportError:  # extension not built
    from . import _fallback as _impl

    BACKEND = "python"

ks_rhs_odd = _impl.ks_rhs_odd
ks_rhs_cplx = _impl.ks_rhs_cplx
etdrk4_run_odd = _impl.etdrk4_run_odd
etdrk4_run_cplx = _impl.etdrk4_run_cplx
adjoint_backward_odd = _impl.adjoint_backward_odd


def available_backends():
    """Name -> module for every importable backend (used by benchmarks/tests)."""
    out = {}
    from . import _fallback

    out["python"] = _fallback
    try:
        from . import _core

        out["compiled"] = _core
    except ImportError:
        pass
    return out

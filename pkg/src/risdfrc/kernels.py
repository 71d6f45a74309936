"""Backend selection for the hot kernels.

The compiled extension is used when it imports; set ``RISDFRC_PURE_PYTHON=1``
to force the numpy fallback. ``BACKEND`` names the active one. Candidate
scoring defaults to numpy on either backend.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_py = _kernels_py
_cy = None
if os.environ.get("RISDFRC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _cy  # type: ignore[attr-defined]
    except ImportError:
        _cy = None

BACKEND = "cython" if _cy is not None else "python"
_impl = _cy if _cy is not None else _py

bisect_mu = _impl.bisect_mu
bisect_tau = _impl.bisect_tau


def penalty_inner(psi_inv, rhs_const, v, b, x, y, inv_rho, target, p0,
                  bisect_tol, max_inner, tol_inner, backend: str | None = None):
    impl = _select(backend)
    if impl is _cy:
        psi_inv, rhs_const, v = (np.ascontiguousarray(a, dtype=complex) for a in (psi_inv, rhs_const, v))
    return impl.penalty_inner(psi_inv, rhs_const, v, b, x, y, float(inv_rho), float(target),
                              float(p0), float(bisect_tol), int(max_inner), float(tol_inner))


def score_candidates(xi, z, m_sum, cands, backend: str | None = None):
    # default is numpy: the BLAS products beat the compiled loop here
    impl = _py if backend is None else _select(backend)
    if impl is _cy:
        xi, m_sum, cands = (np.ascontiguousarray(a, dtype=complex) for a in (xi, m_sum, cands))
        z = np.ascontiguousarray(np.ravel(z), dtype=complex)
    return impl.score_candidates(xi, z, m_sum, cands)


def _select(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _py
    if backend == "cython":
        if _cy is None:
            raise RuntimeError("compiled kernels are not available")
        return _cy
    raise ValueError(f"unknown backend {backend!r}")


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _cy is not None else [])

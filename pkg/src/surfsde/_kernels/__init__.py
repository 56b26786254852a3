"""Stepping-kernel selection.

Two implementations of the same per-step arithmetic: a compiled extension
that loops one trajectory in C (fastest for single paths, where interpreter
overhead dominates) and a NumPy twin vectorized across a whole ensemble
(fastest for large batches). Defaults use each where it wins; an explicit
`force` pins one, and the environment variable SURFSDE_PURE=1 pins the NumPy
implementation everywhere (useful for reproducing runs across machines
without the extension). `active_kernel()` reports the single-path default.
"""

import os

from . import em_numpy

try:
    from . import _em as _compiled
except ImportError:  # extension not built; NumPy twin covers everything
    _compiled = None


def compiled_available():
    return _compiled is not None


def use_compiled():
    if os.environ.get("SURFSDE_PURE", "") not in ("", "0"):
        return False
    return compiled_available()


def active_kernel():
    return "compiled" if use_compiled() else "numpy"


def em_path(tables, x0, dw, force=None):
    """Advance one trajectory; `force` in {None, "compiled", "numpy"}."""
    choice = force or active_kernel()
    if choice == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel requested but not built")
        import numpy as np

        coords, blow = _compiled.em_path_compiled(
            np.ascontiguousarray(tables["seed"]),
            np.ascontiguousarray(tables["irn"]),
            np.ascontiguousarray(tables["me"]),
            np.ascontiguousarray(tables["tmat"]),
            np.ascontiguousarray(tables["at"]),
            np.ascontiguousarray(tables["gammas"]),
            bool(tables["multiplicative"]),
            int(tables["kind"]),
            *[float(p) for p in tables["psi_params"]],
            float(tables["dt"]),
            np.ascontiguousarray(x0),
            np.ascontiguousarray(dw),
        )
        return coords, int(blow)
    return em_numpy.em_path(tables, x0, dw)


# below this many paths the per-path compiled loop beats the batched twin
SMALL_ENSEMBLE = 32


def em_paths(tables, x0, dw, force=None):
    """Advance an ensemble. Unforced, small batches go through the compiled
    per-path loop and large ones through the vectorized NumPy twin."""
    n_paths = x0.shape[0]
    choice = force
    if choice is None:
        choice = "compiled" if (use_compiled() and n_paths <= SMALL_ENSEMBLE) else "numpy"
    if choice == "numpy":
        return em_numpy.em_paths(tables, x0, dw)
    import numpy as np

    coords = np.empty((n_paths, dw.shape[1] + 1, x0.shape[1]))
    blow = np.empty(n_paths, dtype=np.int64)
    for p in range(n_paths):
        coords[p], blow[p] = em_path(tables, x0[p], dw[p], force="compiled")
    return coords, blow

"""Pure-NumPy Euler-Maruyama stepping cores.

Two entry points: `em_path` advances one coordinate trajectory through the
per-node cached tables, `em_paths` advances a whole ensemble at once with the
same per-step arithmetic vectorized over paths. Both treat the diffusion as
diagonal in the seed coordinates (each noise mode drives its own coordinate),
which is exact for the shipped couplings because the noise fields lie in the
Galerkin span.
"""

import numpy as np

BLOWUP_LIMIT = 1e8

KIND_LINEAR = 0
KIND_STEFAN = 1
KIND_POWER = 2
KIND_ZERO = 3


def _psi(kind, p0, p1, p2, s):
    if kind == KIND_LINEAR:
        return s
    if kind == KIND_STEFAN:
        return np.where(s < 0.0, p0 * s, np.where(s > p2, p1 * (s - p2), 0.0))
    if kind == KIND_ZERO:
        return np.zeros_like(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s == 0.0, 0.0, np.abs(s) ** (p2 - 2.0) * s)


def em_path(tables, x0, dw):
    """Single trajectory; returns (coords (M+1, n), blowup_step or -1)."""
    coords, blow = em_paths(tables, x0[None, :], dw[None, :, :])
    return coords[0], int(blow[0])


def em_paths(tables, x0, dw):
    """Ensemble stepping.

    tables: dict with seed (N, n), irn (M, N), me (M, N, n), tmat (M, n, n),
    at (M+1, n, n), gammas (K,), multiplicative flag, psi kind/params, dt.
    x0: (paths, n); dw: (paths, M, K). Paths whose max coordinate magnitude
    exceeds BLOWUP_LIMIT are frozen at their last finite state and reported.
    """
    seed = tables["seed"]
    irn = tables["irn"]
    me = tables["me"]
    tmat = tables["tmat"]
    at = tables["at"]
    gammas = tables["gammas"]
    multiplicative = tables["multiplicative"]
    kind = tables["kind"]
    p0, p1, p2 = tables["psi_params"]
    dt = tables["dt"]

    n_paths, n = x0.shape
    m_steps = dw.shape[1]
    k = len(gammas)
    coords = np.empty((n_paths, m_steps + 1, n))
    coords[:, 0] = x0
    alive = np.ones(n_paths, dtype=bool)
    blow = np.full(n_paths, -1, dtype=np.int64)

    x = x0.copy()
    for m in range(m_steps):
        u = x @ seed.T                      # (paths, N)
        s = u * irn[m][None, :]
        psi = _psi(kind, p0, p1, p2, s)
        pair = -(psi @ me[m])               # (paths, n)
        a = pair @ tmat[m].T                # coefficients in the seed basis
        if multiplicative:
            proj = np.einsum("pi,ik->pk", x, at[m][:, :k])
            coef = gammas[None, :] * proj / np.sqrt(np.diag(at[m])[:k])[None, :]
            noise = coef * dw[:, m, :]
        else:
            noise = gammas[None, :] * dw[:, m, :]
        step = a * dt
        step[:, :k] += noise
        x_new = x + step
        bad = alive & (np.max(np.abs(x_new), axis=1) > BLOWUP_LIMIT)
        blow[bad] = m
        alive &= ~bad
        x = np.where(alive[:, None], x_new, x)
        coords[:, m + 1] = x
    return coords, blow

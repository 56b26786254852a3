"""Discrete pivot space and its family of time-dependent inner products.

The pivot space is the set of zero-mean nodal functions on the reference
curve, normed like the dual of the zero-mean first-order Sobolev space: the
squared norm of f is f' M S(t)+ M f, where M is the (diagonal) mass matrix of
the reference volume measure, S(t) the stiffness matrix of the time-t metric
pulled back to the chart, and S(t)+ the solve constrained to zero reference
mean. All abstract operators (the Riesz solves R_{-t}, the pairing operators
iota*_t, their time derivative Phi(t)) become dense matrices at this scale.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import geometry


class ZeroMeanError(ValueError):
    """Input that must have zero reference mean does not."""


ZERO_MEAN_TOL = 1e-10


@dataclass
class GramPath:
    """Time-indexed tables realizing the moving inner products.

    Holds, per uniform time node, the stiffness matrix, its time derivative,
    and an LU factorization of the mean-constrained (bordered) system used
    for every Riesz solve. Immutable after construction in the sense that no
    method mutates the tables; sharing across threads is safe.
    """

    curve: object
    time_nodes: np.ndarray
    mass_weights: np.ndarray          # diagonal of the reference mass matrix
    stiffness: np.ndarray             # (M+1, N, N)
    dstiffness: np.ndarray            # (M+1, N, N)
    grids: list
    _lu: list

    @classmethod
    def build(cls, curve, n_time_nodes):
        """Assemble tables on n_time_nodes+1 uniform times in [0, horizon]."""
        nodes = np.linspace(0.0, curve.horizon, n_time_nodes + 1)
        grids = [geometry.build_grid(curve, t) for t in nodes]
        n = curve.n_grid
        stiff = np.empty((len(nodes), n, n))
        dstiff = np.empty_like(stiff)
        lus = []
        m0 = geometry.mass_weights(grids[0])
        for i, grid in enumerate(grids):
            stiff[i] = geometry.laplace_beltrami_matrix(grid)
            dstiff[i] = geometry.stiffness_time_derivative(grid=grid)
            lus.append(_factor_bordered(stiff[i], m0))
        return cls(
            curve=curve,
            time_nodes=nodes,
            mass_weights=m0,
            stiffness=stiff,
            dstiffness=dstiff,
            grids=grids,
            _lu=lus,
        )

    # -- bookkeeping ---------------------------------------------------------

    @property
    def n_grid(self):
        return len(self.mass_weights)

    @property
    def n_steps(self):
        return len(self.time_nodes) - 1

    @property
    def dt(self):
        return float(self.time_nodes[1] - self.time_nodes[0])

    @property
    def mass0(self):
        return np.diag(self.mass_weights)

    @property
    def volume(self):
        return float(self.mass_weights.sum())

    @property
    def zero_mean_projector(self):
        n = self.n_grid
        return np.eye(n) - np.outer(np.ones(n), self.mass_weights) / self.volume

    def node_index(self, t):
        idx = int(round((t - self.time_nodes[0]) / self.dt))
        idx = min(max(idx, 0), self.n_steps)
        if abs(self.time_nodes[idx] - t) > 1e-9 * max(1.0, self.curve.horizon):
            raise ValueError(f"t={t} is not a stored time node")
        return idx

    def solve(self, t, rhs):
        """Mean-constrained stiffness solve at time node t; rhs may be a
        vector or a matrix of stacked right-hand-side columns."""
        return self.solve_at(self.node_index(t), rhs)

    def solve_at(self, idx, rhs):
        rhs = np.asarray(rhs, dtype=float)
        vec = rhs.ndim == 1
        if vec:
            rhs = rhs[:, None]
        lu, k = self._lu[idx]
        padded = np.vstack([rhs, np.zeros((k, rhs.shape[1]))])
        sol = scipy.linalg.lu_solve(lu, padded)[: self.n_grid]
        return sol[:, 0] if vec else sol

    def mean(self, f):
        return float(np.dot(self.mass_weights, f)) / self.volume

    def project_zero_mean(self, f):
        return np.asarray(f, dtype=float) - self.mean(f)

    def require_zero_mean(self, f, what="input"):
        f = np.asarray(f, dtype=float)
        scale = max(1.0, float(np.max(np.abs(f))))
        if abs(np.dot(self.mass_weights, f)) > ZERO_MEAN_TOL * scale * self.volume:
            raise ZeroMeanError(f"{what} must have zero reference mean")
        return f

    def project_pivot(self, f):
        """Remove the weighted kernel components (mean and, on even grids,
        the unresolvable Nyquist mode) so f lies in the discrete pivot space."""
        f = np.asarray(f, dtype=float)
        kernel = _stiffness_kernel_basis(self.n_grid)
        for col in kernel.T:
            w = self.mass_weights * col
            f = f - col * (np.dot(w, f) / np.dot(w, col))
        return f


def _stiffness_kernel_basis(n):
    """Null vectors of the spectral stiffness: constants always; on an even
    grid also the Nyquist sawtooth, whose derivative the interpolant cannot
    see. The discrete pivot space is the complement (resolvable, zero-mean
    fields), and every solve is constrained to it."""
    cols = [np.ones(n)]
    if n % 2 == 0:
        saw = np.ones(n)
        saw[1::2] = -1.0
        cols.append(saw)
    return np.column_stack(cols)


def _factor_bordered(s, m0):
    n = len(m0)
    kernel = _stiffness_kernel_basis(n)
    borders = m0[:, None] * kernel
    k = borders.shape[1]
    a = np.zeros((n + k, n + k))
    a[:n, :n] = s
    a[:n, n:] = borders
    a[n:, :n] = borders.T
    return scipy.linalg.lu_factor(a), k


# ---------------------------------------------------------------------------
# Inner products and operators
# ---------------------------------------------------------------------------


def hminus_inner(gram, t, f, g):
    """Inner product of two zero-mean fields in the time-t norm."""
    f = gram.require_zero_mean(f, "f")
    g = gram.require_zero_mean(g, "g")
    u = gram.solve(t, gram.mass_weights * g)
    return float(np.dot(gram.mass_weights * f, u))


def hminus_norm(gram, t, f):
    return np.sqrt(max(hminus_inner(gram, t, f, f), 0.0))


def riesz_solve(gram, t, f):
    """Potential of f at time t: the zero-mean u with S(t) u = M f."""
    f = gram.require_zero_mean(f, "f")
    return gram.solve(t, gram.mass_weights * f)


def iota_star(gram, t, f):
    """Pairing operator: the element representing (f, .)_t against (., .)_0."""
    u = riesz_solve(gram, t, f)
    return (gram.stiffness[0] @ u) / gram.mass_weights


def iota_star_inv(gram, t, f):
    """Inverse of the pairing operator at time t."""
    f = gram.require_zero_mean(f, "f")
    u = gram.solve(0.0, gram.mass_weights * f)
    idx = gram.node_index(t)
    return (gram.stiffness[idx] @ u) / gram.mass_weights


def phi_apply(gram, t, x):
    """Apply the norm-derivative operator Phi(t) to a zero-mean field."""
    idx = gram.node_index(t)
    u = gram.solve_at(idx, gram.mass_weights * np.asarray(x, dtype=float))
    w = gram.dstiffness[idx] @ u
    u2 = gram.solve_at(idx, w)
    return -(gram.stiffness[0] @ u2) / gram.mass_weights


def phi_operator(gram, t):
    """Dense matrix of Phi(t) on zero-mean nodal coordinates.

    Assembled as the quadratic form -(potential)' dS(t) (potential), then
    explicitly symmetrized with respect to the reference inner product.
    """
    idx = gram.node_index(t)
    m0 = gram.mass_weights
    u = gram.solve_at(idx, np.diag(m0))
    b = -(u.T @ gram.dstiffness[idx] @ u)
    b = 0.5 * (b + b.T)
    return (gram.stiffness[0] @ (b / m0[:, None])) / m0[:, None]


def phi_bilinear(gram, t, f, g):
    """(f, Phi(t) g)_0 evaluated directly through the derivative stiffness."""
    idx = gram.node_index(t)
    uf = riesz_solve(gram, t, f)
    ug = riesz_solve(gram, t, g)
    return -float(uf @ gram.dstiffness[idx] @ ug)


def phi_norm(gram, t, n_iter=60, tol=1e-10):
    """Operator norm of Phi(t) on the pivot space, by power iteration.

    Phi(t) is self-adjoint for the reference inner product, so the iteration
    converges to the spectral radius.
    """
    idx = gram.node_index(t)
    rng = np.random.default_rng(12345)
    x = gram.project_zero_mean(rng.standard_normal(gram.n_grid))
    norm0 = lambda v: np.sqrt(max(hminus_inner(gram, 0.0, v, v), 0.0))
    nx = norm0(x)
    if nx == 0.0:
        return 0.0
    x /= nx
    lam = 0.0
    for _ in range(n_iter):
        y = phi_apply(gram, gram.time_nodes[idx], x)
        ny = norm0(y)
        if ny < 1e-300:
            return 0.0
        lam_new = ny
        x = y / ny
        if abs(lam_new - lam) <= tol * max(lam_new, 1.0):
            lam = lam_new
            break
        lam = lam_new
    return float(lam)


def phi_norms(gram):
    return np.array([phi_norm(gram, t) for t in gram.time_nodes])


# ---------------------------------------------------------------------------
# Structural-condition checkers
# ---------------------------------------------------------------------------


def random_zero_mean(gram, rng, n_samples=1, smooth=False, modes=None):
    """Zero-mean sample fields; smooth ones are random low-mode combinations."""
    n = gram.n_grid
    if smooth:
        k_max = modes or max(4, n // 8)
        theta = geometry.theta_grid(n)
        out = np.zeros((n_samples, n))
        for i in range(n_samples):
            amp = np.exp(rng.uniform(np.log(0.1), np.log(10.0)))
            coeff = rng.standard_normal(2 * k_max) / np.arange(1, 2 * k_max + 1)
            f = np.zeros(n)
            for k in range(1, k_max + 1):
                f += coeff[2 * k - 2] * np.cos(k * theta)
                f += coeff[2 * k - 1] * np.sin(k * theta)
            out[i] = amp * f
    else:
        out = rng.standard_normal((n_samples, n))
    for i in range(n_samples):
        out[i] = gram.project_pivot(out[i])
    return out[0] if n_samples == 1 else out


def check_C1(gram, n_samples=200, seed=0):
    """Measured equivalence constant between the moving and reference norms.

    Returns max over samples and time nodes of max(|f|_t/|f|_0, |f|_0/|f|_t).
    """
    rng = np.random.default_rng(seed)
    samples = random_zero_mean(gram, rng, n_samples)
    rhs = (samples * gram.mass_weights).T  # (N, samples)
    c1 = 1.0
    norm0_sq = None
    for idx in range(gram.n_steps + 1):
        u = gram.solve_at(idx, rhs)
        norms_sq = np.einsum("sn,sn->n", rhs, u)
        if idx == 0:
            norm0_sq = norms_sq.copy()
        ratio = np.sqrt(norms_sq / norm0_sq)
        c1 = max(c1, float(np.max(ratio)), float(np.max(1.0 / ratio)))
    return c1


def check_C2(gram, n_samples=10, seed=0):
    """Max defect of the norm-derivative identity, integrated by trapezoid.

    For each sample x the identity states that |x|_t^2 - |x|_0^2 equals the
    time integral of (x, Phi(s) x)_0; the trapezoidal defect decays at second
    order when the number of time nodes doubles.
    """
    rng = np.random.default_rng(seed)
    samples = random_zero_mean(gram, rng, n_samples)
    dt = gram.dt
    worst = 0.0
    for x in np.atleast_2d(samples):
        mx = gram.mass_weights * x
        norms = np.empty(gram.n_steps + 1)
        integrand = np.empty(gram.n_steps + 1)
        for idx in range(gram.n_steps + 1):
            u = gram.solve_at(idx, mx)
            norms[idx] = np.dot(mx, u)
            integrand[idx] = -float(u @ gram.dstiffness[idx] @ u)
        cums = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * dt)])
        defect = np.max(np.abs(norms - norms[0] - cums))
        worst = max(worst, float(defect))
    return worst


def lp_norm(gram, f, p):
    return float(np.dot(gram.mass_weights, np.abs(f) ** p) ** (1.0 / p))


def check_C3_C4(gram, p=2.0, n_samples=40, n_times=9, seed=0):
    """Sampled bounds for the pairing operator on the p-integrable scale.

    Returns (c2, c3, roundtrip): suprema of |iota*_t f|_p / |f|_p and of the
    inverse direction, plus the worst round-trip defect of
    iota*_{-t} o iota*_t relative to the identity.
    """
    if p < 2.0 / 3.0:
        raise ValueError("exponent below the admissible range")
    rng = np.random.default_rng(seed)
    samples = np.atleast_2d(random_zero_mean(gram, rng, n_samples, smooth=True))
    t_idx = np.unique(np.linspace(0, gram.n_steps, n_times).astype(int))
    c2 = c3 = roundtrip = 0.0
    for idx in t_idx:
        t = gram.time_nodes[idx]
        for f in samples:
            nf = lp_norm(gram, f, p)
            fwd = iota_star(gram, t, f)
            inv = iota_star_inv(gram, t, f)
            c2 = max(c2, lp_norm(gram, fwd, p) / nf)
            c3 = max(c3, lp_norm(gram, inv, p) / nf)
            back = iota_star_inv(gram, t, fwd)
            roundtrip = max(
                roundtrip,
                float(np.max(np.abs(back - f))) / max(1.0, float(np.max(np.abs(f)))),
            )
    return c2, c3, roundtrip


def inverse_identity_residual(gram, t, n_samples=10, seed=0):
    """Defect of the integral identity for the inverse pairing operator:
    (inv_t x, y)_0 - (x, y)_0 + int_0^t (inv_s Phi(s) inv_s x, y)_0 ds,
    with trapezoidal time quadrature; decays at second order in the step."""
    idx_t = gram.node_index(t)
    rng = np.random.default_rng(seed)
    xs = np.atleast_2d(random_zero_mean(gram, rng, n_samples))
    ys = np.atleast_2d(random_zero_mean(gram, rng, n_samples))
    dt = gram.dt
    worst = 0.0
    for x, y in zip(xs, ys):
        my = gram.mass_weights * y
        integrand = np.empty(idx_t + 1)
        for idx in range(idx_t + 1):
            s = gram.time_nodes[idx]
            w = iota_star_inv(gram, s, phi_apply(gram, s, iota_star_inv(gram, s, x)))
            integrand[idx] = hminus_inner(gram, 0.0, w, y)
        integral = np.sum(0.5 * (integrand[1:] + integrand[:-1]) * dt) if idx_t else 0.0
        lhs = hminus_inner(gram, 0.0, iota_star_inv(gram, t, x), y)
        base = hminus_inner(gram, 0.0, x, y)
        worst = max(worst, abs(lhs - base + integral))
    return worst


def pairing_expansion_residual(gram, n_samples=50, seed=0):
    """Defect of iota*_t x = x + int_0^t Phi(s) x ds in the reference norm."""
    rng = np.random.default_rng(seed)
    xs = np.atleast_2d(random_zero_mean(gram, rng, n_samples))
    dt = gram.dt
    worst = 0.0
    for x in xs:
        phis = np.empty((gram.n_steps + 1, gram.n_grid))
        for idx in range(gram.n_steps + 1):
            phis[idx] = phi_apply(gram, gram.time_nodes[idx], x)
        cums = np.vstack(
            [np.zeros(gram.n_grid), np.cumsum(0.5 * (phis[1:] + phis[:-1]) * dt, axis=0)]
        )
        for idx in range(gram.n_steps + 1):
            diff = iota_star(gram, gram.time_nodes[idx], x) - x - cums[idx]
            worst = max(worst, hminus_norm(gram, 0.0, gram.project_zero_mean(diff)))
    return worst


def inner_continuity_max_jump(gram, n_samples=20, seed=0):
    """Largest jump of t -> (x, y)_t between adjacent time nodes."""
    rng = np.random.default_rng(seed)
    xs = np.atleast_2d(random_zero_mean(gram, rng, n_samples))
    ys = np.atleast_2d(random_zero_mean(gram, rng, n_samples))
    worst = 0.0
    for x, y in zip(xs, ys):
        vals = np.array(
            [hminus_inner(gram, t, x, y) for t in gram.time_nodes]
        )
        worst = max(worst, float(np.max(np.abs(np.diff(vals)))))
    return worst


def frame_equivalence_residual(gram, t, f_moved):
    """Keystone cross-frame identity for one field living on the moved curve.

    The negative-order norm of f on the time-t curve, computed with that
    curve's own mass weights, must equal the time-t norm of the pulled-back
    density f * sqrt(g_t/g_0) on the reference curve.
    """
    idx = gram.node_index(t)
    grid = gram.grids[idx]
    mt = geometry.mass_weights(grid)
    f_moved = np.asarray(f_moved, dtype=float)
    if abs(np.dot(mt, f_moved)) > ZERO_MEAN_TOL * max(1.0, np.max(np.abs(f_moved))) * mt.sum():
        raise ZeroMeanError("field must have zero mean on the moved curve")
    rhs = mt * f_moved
    u = gram.solve_at(idx, rhs)
    direct = np.sqrt(max(float(np.dot(rhs, u)), 0.0))
    pulled = f_moved * grid.rn_derivative
    reference = hminus_norm(gram, gram.time_nodes[idx], pulled)
    return abs(direct - reference), direct, reference

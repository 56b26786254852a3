"""Time-dependent Galerkin system: moving orthonormal basis, projections,
reduced SDE coefficients, and Euler-Maruyama simulation.

The seed basis is fixed and orthonormal in the reference inner product; at
every time node a Gram-Schmidt pass under the moving inner product produces
the orthonormal family e_i(t). Because Gram-Schmidt is triangular, the
transform lives in coordinate space: e(t) = seed @ T(t) with T upper
triangular, and the leading k-by-k block of T(t) is the transform of the
leading k seeds. Everything the stepping loop needs per node reduces to a
handful of small cached matrices.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels, operators, spaces
from .operators import fourier_seed_basis, gram_schmidt_transform  # re-export


class BlowUpError(RuntimeError):
    """A simulated trajectory left the admissible range."""


@dataclass(frozen=True)
class TimeBasis:
    """Per-node orthonormalized basis and the cached pairing tables.

    e(t_m) = seed @ tmat[m]; at[m] is the seed Gram matrix under the time-t_m
    inner product; me[m] the mass-weighted basis (for drift pairings);
    ie[m] the pairing-operator images iota*_t e_i(t) (for projecting dual
    data); w[m] the moving-inner-product pairing table for grid data; and
    phi_quad[m] realizes (x, Phi(t_m) x)_0 = -x' phi_quad[m] x on seed
    coordinates.
    """

    seed: np.ndarray        # (N, n)
    e: np.ndarray           # (M+1, N, n)
    tmat: np.ndarray        # (M+1, n, n)
    at: np.ndarray          # (M+1, n, n)
    me: np.ndarray          # (M+1, N, n)
    ie: np.ndarray          # (M+1, N, n)
    w: np.ndarray           # (M+1, N, n)
    phi_quad: np.ndarray    # (M+1, n, n)

    @property
    def n(self):
        return self.seed.shape[1]

    @classmethod
    def build(cls, gram, seed_basis=None, n=None):
        if seed_basis is None:
            seed_basis = fourier_seed_basis(gram, n)
        seed_basis = np.asarray(seed_basis, dtype=float)
        n = seed_basis.shape[1]
        m0 = gram.mass_weights
        n_nodes = gram.n_steps + 1
        e = np.empty((n_nodes, gram.n_grid, n))
        tmat = np.empty((n_nodes, n, n))
        at = np.empty((n_nodes, n, n))
        me = np.empty_like(e)
        ie = np.empty_like(e)
        w = np.empty_like(e)
        phi_quad = np.empty((n_nodes, n, n))
        ms = m0[:, None] * seed_basis
        for idx in range(n_nodes):
            pot = gram.solve_at(idx, ms)                     # (N, n)
            a_raw = ms.T @ pot
            at[idx] = 0.5 * (a_raw + a_raw.T)
            q = pot.T @ gram.dstiffness[idx] @ pot
            phi_quad[idx] = 0.5 * (q + q.T)
            tmat[idx] = gram_schmidt_transform(at[idx])
            e[idx] = seed_basis @ tmat[idx]
            me[idx] = m0[:, None] * e[idx]
            pot_e = pot @ tmat[idx]
            ie[idx] = (gram.stiffness[0] @ pot_e) / m0[:, None]
            w[idx] = m0[:, None] * pot_e
        return cls(seed=seed_basis, e=e, tmat=tmat, at=at, me=me, ie=ie, w=w, phi_quad=phi_quad)

    def sub(self, n):
        """View on the leading-n sub-basis (valid by triangularity)."""
        if n > self.n:
            raise ValueError(f"sub-basis dimension {n} exceeds {self.n}")
        return TimeBasis(
            seed=self.seed[:, :n],
            e=self.e[:, :, :n],
            tmat=self.tmat[:, :n, :n],
            at=self.at[:, :n, :n],
            me=self.me[:, :, :n],
            ie=self.ie[:, :, :n],
            w=self.w[:, :, :n],
            phi_quad=self.phi_quad[:, :n, :n],
        )

    def norm_sq(self, idx, x):
        return float(x @ self.at[idx] @ x)


def gram_schmidt(gram, seed_basis, t):
    """Orthonormalize the seed columns under the time-t inner product."""
    seed_basis = np.asarray(seed_basis, dtype=float)
    idx = gram.node_index(t)
    ms = gram.mass_weights[:, None] * seed_basis
    pot = gram.solve_at(idx, ms)
    a = ms.T @ pot
    a = 0.5 * (a + a.T)
    return seed_basis @ gram_schmidt_transform(a)


def projection_Pn(gram, basis, t, u):
    """Project grid data (moving-inner-product orthogonal projection) or a
    dual pairing evaluator onto the time-t Galerkin span."""
    idx = gram.node_index(t)
    if callable(u):
        coeff = np.array([u(self_col) for self_col in basis.ie[idx].T])
    else:
        u = np.asarray(u, dtype=float)
        coeff = basis.w[idx].T @ u
    return basis.e[idx] @ coeff


def sde_coefficients(gram, basis, model, t, x):
    """Drift vector and diffusion matrix of the reduced system at (t, x)."""
    idx = gram.node_index(t)
    x = np.asarray(x, dtype=float)
    u = basis.seed @ x
    inv_rn = 1.0 / gram.grids[idx].rn_derivative
    psi = operators.psi_eval(model, u * inv_rn)
    pair = -(basis.me[idx].T @ psi)
    a = basis.tmat[idx] @ pair
    n = basis.n
    k = model.noise.n_modes
    if k > n:
        raise ValueError("noise truncation exceeds the Galerkin dimension")
    b = np.zeros((n, n))
    gammas = model.noise.gammas
    if model.noise.coupling == operators.ADDITIVE:
        b[np.arange(k), np.arange(k)] = gammas
    else:
        diag_at = np.sqrt(np.diag(basis.at[idx])[:k])
        b[np.arange(k), np.arange(k)] = gammas * (x @ basis.at[idx][:, :k]) / diag_at
    return a, b


def _sim_tables(gram, basis, model):
    if model.noise.n_modes > basis.n:
        raise ValueError("noise truncation exceeds the Galerkin dimension")
    irn = np.ascontiguousarray(
        [1.0 / g.rn_derivative for g in gram.grids[:-1]]
    )
    nonlin = model.nonlinearity
    if nonlin.kind == operators.KIND_STEFAN:
        psi_params = (nonlin.a, nonlin.b, nonlin.rho)
    elif nonlin.kind == operators.KIND_POWER:
        psi_params = (0.0, 0.0, nonlin.p)
    else:
        psi_params = (0.0, 0.0, 0.0)
    return {
        "seed": basis.seed,
        "irn": irn,
        "me": basis.me[:-1],
        "tmat": basis.tmat[:-1],
        "at": basis.at,
        "gammas": model.noise.gammas,
        "multiplicative": model.noise.coupling == operators.MULTIPLICATIVE,
        "kind": nonlin.kind,
        "psi_params": psi_params,
        "dt": gram.dt,
    }


@dataclass(frozen=True)
class PathState:
    """One simulated coordinate trajectory with its driving increments."""

    coords: np.ndarray             # (M+1, n)
    noise_increments: np.ndarray   # (M, K)
    rng_seed: object
    blowup_step: int = -1

    @property
    def blown_up(self):
        return self.blowup_step >= 0

    @property
    def n(self):
        return self.coords.shape[1]


def draw_increments(rng_seed, n_steps, n_modes, dt):
    rng = np.random.default_rng(rng_seed)
    return rng.standard_normal((n_steps, n_modes)) * np.sqrt(dt)


def simulate_path(gram, basis, model, x0, rng_seed=0, increments=None, kernel=None):
    """Explicit Euler-Maruyama trajectory on the Galerkin coordinates.

    Deterministic given rng_seed (or the explicit increments); a state whose
    magnitude passes the blow-up guard freezes the trajectory and records the
    step index rather than raising.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (basis.n,):
        raise ValueError(f"initial state must have shape ({basis.n},)")
    k = model.noise.n_modes
    if increments is None:
        increments = draw_increments(rng_seed, gram.n_steps, k, gram.dt)
    increments = np.asarray(increments, dtype=float)
    if increments.shape != (gram.n_steps, k):
        raise ValueError("increments shape mismatch")
    tables = _sim_tables(gram, basis, model)
    coords, blow = _kernels.em_path(tables, x0, increments, force=kernel)
    if not np.all(np.isfinite(coords)):
        raise BlowUpError("non-finite state escaped the blow-up guard")
    return PathState(coords=coords, noise_increments=increments, rng_seed=rng_seed, blowup_step=blow)


@dataclass(frozen=True)
class Ensemble:
    coords: np.ndarray        # (paths, M+1, n)
    increments: np.ndarray    # (paths, M, K)
    blowup_steps: np.ndarray  # (paths,)
    master_seed: int

    @property
    def n_paths(self):
        return self.coords.shape[0]

    @property
    def alive(self):
        return self.blowup_steps < 0

    @property
    def n_failed(self):
        return int(np.sum(~self.alive))

    def path(self, i):
        return PathState(
            coords=self.coords[i],
            noise_increments=self.increments[i],
            rng_seed=(self.master_seed, i),
            blowup_step=int(self.blowup_steps[i]),
        )


def ensemble_increments(master_seed, n_paths, n_steps, n_modes, dt):
    """Per-path increment arrays from independent spawned substreams."""
    seeds = np.random.SeedSequence(master_seed).spawn(n_paths)
    out = np.empty((n_paths, n_steps, n_modes))
    for i, s in enumerate(seeds):
        out[i] = np.random.default_rng(s).standard_normal((n_steps, n_modes)) * np.sqrt(dt)
    return out


def simulate_ensemble(gram, basis, model, x0, n_paths, master_seed=0, increments=None, kernel=None):
    x0 = np.asarray(x0, dtype=float)
    k = model.noise.n_modes
    if increments is None:
        increments = ensemble_increments(master_seed, n_paths, gram.n_steps, k, gram.dt)
    tables = _sim_tables(gram, basis, model)
    x0s = np.broadcast_to(x0, (n_paths, basis.n)).copy() if x0.ndim == 1 else x0
    coords, blow = _kernels.em_paths(tables, x0s, increments, force=kernel)
    return Ensemble(coords=coords, increments=increments, blowup_steps=blow, master_seed=master_seed)


# ---------------------------------------------------------------------------
# Monte-Carlo checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentEstimate:
    sup_moment: float
    sup_stderr: float
    vint_moment: float
    vint_stderr: float
    n_paths: int
    n_failed: int


def moment_estimate(ensemble, gram, basis, model, p=2.0):
    """Monte-Carlo moments: E[sup_t |X_t|_t^p] and the V-norm time-integral
    moment E[(int |X_t|_V^alpha dt)^(p/2)], with standard errors. Blown-up
    paths are excluded and counted."""
    alive = ensemble.alive
    coords = ensemble.coords[alive]
    if coords.shape[0] == 0:
        raise BlowUpError("every path in the ensemble blew up")
    norms_sq = np.einsum("pmi,mij,pmj->pm", coords, basis.at, coords)
    sup_vals = np.max(np.abs(norms_sq), axis=1) ** (p / 2.0)

    alpha = model.p_growth
    fields = np.einsum("ni,pmi->pmn", basis.seed, coords)
    vnorm_alpha = np.einsum("pmn,n->pm", np.abs(fields) ** alpha, gram.mass_weights)
    integral = np.trapezoid(vnorm_alpha, dx=gram.dt, axis=1)
    vint_vals = integral ** (p / 2.0)

    def mc(vals):
        mean = float(np.mean(vals))
        stderr = float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        return mean, stderr

    sup_mean, sup_se = mc(sup_vals)
    vint_mean, vint_se = mc(vint_vals)
    return MomentEstimate(sup_mean, sup_se, vint_mean, vint_se, int(alive.sum()), ensemble.n_failed)


def zero_mean_drift(ensemble, gram, basis):
    """Largest reference-mean magnitude of the reconstructed field along all
    paths; conservation of the zero average is structural and should hold to
    rounding."""
    fields = np.einsum("ni,pmi->pmn", basis.seed, ensemble.coords)
    means = np.einsum("pmn,n->pm", fields, gram.mass_weights) / gram.volume
    return float(np.max(np.abs(means)))


def default_initial_coords(n, scale=0.5, decay=2.0):
    k = np.arange(1, n + 1)
    return scale * k ** (-decay)


def galerkin_convergence(gram, model, n_list, n_paths=16, master_seed=0, x0_coeffs=None):
    """Coupled-noise Cauchy distances between nested Galerkin levels.

    For each n in n_list, simulates X^n and X^(2n) with the same per-path
    increments (the smaller system consumes the leading coordinates of the
    master stream) and returns d(n) = sqrt(mean over paths of
    sup_m |X^(2n) - X^n|_{t_m}^2).
    """
    n_list = sorted(int(v) for v in n_list)
    n_max = 2 * n_list[-1]
    if model.noise.n_modes < n_max:
        raise ValueError("noise model must provide amplitudes up to 2*max(n_list)")
    basis = TimeBasis.build(gram, n=n_max)
    if x0_coeffs is None:
        x0_coeffs = default_initial_coords(n_max)
    master = ensemble_increments(master_seed, n_paths, gram.n_steps, n_max, gram.dt)

    def run(dim):
        sub = basis.sub(dim)
        sub_noise = operators.NoiseModel(
            mode_amplitudes=model.noise.mode_amplitudes[:dim],
            coupling=model.noise.coupling,
            f_bound=model.noise.f_bound,
        )
        sub_model = operators.StefanModel(nonlinearity=model.nonlinearity, noise=sub_noise)
        return simulate_ensemble(
            gram, sub, sub_model, x0_coeffs[:dim], n_paths,
            master_seed=master_seed, increments=master[:, :, :dim],
        )

    cache = {}
    rows = []
    for n in n_list:
        for dim in (n, 2 * n):
            if dim not in cache:
                cache[dim] = run(dim)
        small, big = cache[n], cache[2 * n]
        pad = np.zeros_like(big.coords)
        pad[:, :, :n] = small.coords
        diff = big.coords - pad
        at = basis.at[:, : 2 * n, : 2 * n]
        gaps = np.einsum("pmi,mij,pmj->pm", diff, at, diff)
        d = float(np.sqrt(np.mean(np.max(np.abs(gaps), axis=1))))
        rows.append({"n": n, "partner": 2 * n, "d": d})
    return rows


@dataclass(frozen=True)
class UniquenessCheck:
    max_deviation: float
    gronwall_bound_ok: bool
    gap_initial: float
    gap_final: float


def pathwise_uniqueness_check(curve, model, x0, y0, rng_seed=0, n_time_nodes=64, n_dim=None):
    """Run two independently assembled pipelines on the same noise.

    With x0 == y0 the trajectories must coincide to rounding. With x0 != y0
    the squared gap must stay below the measured discrete Gronwall envelope
    exp(int f + c1^2 |Phi|) |x0 - y0|_0^2 along the whole path.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    n_dim = n_dim or len(x0)

    def pipeline(z0):
        gram = spaces.GramPath.build(curve, n_time_nodes)
        basis = TimeBasis.build(gram, n=n_dim)
        path = simulate_path(gram, basis, model, z0, rng_seed=rng_seed)
        return gram, basis, path

    gram_x, basis_x, path_x = pipeline(x0)
    gram_y, basis_y, path_y = pipeline(y0)
    diff = path_x.coords - path_y.coords
    gaps = np.einsum("mi,mij,mj->m", diff, basis_x.at, diff)
    max_dev = float(np.max(np.sqrt(np.abs(gaps))))

    if np.allclose(x0, y0):
        return UniquenessCheck(max_dev, True, 0.0, float(gaps[-1]))

    f = model.noise.f_bound
    c1 = spaces.check_C1(gram_x, n_samples=40, seed=1)
    norms = spaces.phi_norms(gram_x)
    rate = f + c1 ** 2 * norms
    envelope = np.concatenate(
        [[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * gram_x.dt)]
    )
    bound_ok = bool(np.all(gaps <= np.exp(envelope) * gaps[0] * (1.0 + 1e-9) + 1e-30))
    return UniquenessCheck(max_dev, bound_ok, float(gaps[0]), float(gaps[-1]))


def ensemble_summary(ensemble, gram, basis, model, p=2.0):
    """Flat JSON-ready record of one ensemble's moment estimates."""
    est = moment_estimate(ensemble, gram, basis, model, p=p)
    return {
        "n": basis.n,
        "steps": gram.n_steps,
        "paths": ensemble.n_paths,
        "failed_paths": ensemble.n_failed,
        "moment_p": p,
        "estimate": est.sup_moment,
        "stderr": est.sup_stderr,
        "vint_estimate": est.vint_moment,
        "vint_stderr": est.vint_stderr,
    }


def dump_trajectory_csv(path_state, gram, basis, file):
    """CSV trajectory dump: step, t, coordinates, moving norm."""
    with open(file, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["step", "t"] + [f"x_{i + 1}" for i in range(path_state.n)] + ["norm_t"]
        )
        for m, t in enumerate(gram.time_nodes):
            x = path_state.coords[m]
            norm = np.sqrt(max(basis.norm_sq(m, x), 0.0))
            writer.writerow([m, f"{t:.12g}"] + [f"{v:.17g}" for v in x] + [f"{norm:.17g}"])

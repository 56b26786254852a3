"""Drift and diffusion models and their structural-condition verifiers.

The drift is the transformed degenerate-diffusion operator on the reference
curve: paired against a test function v it reads
-(integral over the reference curve of) Psi(u * dvol_g/dvol_{g_t}) * v,
where Psi is the model nonlinearity (piecewise-linear enthalpy law, power
law, or the identity) and the volume ratio accounts for the moving metric.
The diffusion is a truncated cylindrical family sigma_k built on the seed
basis, either additive or linearly multiplicative.
"""

from dataclasses import dataclass, field

import numpy as np

from . import geometry, spaces

# kernel tags used by the compiled/NumPy stepping cores
KIND_LINEAR = 0
KIND_STEFAN = 1
KIND_POWER = 2
KIND_ZERO = 3


@dataclass(frozen=True)
class StefanNonlinearity:
    """Piecewise-linear enthalpy-to-temperature law with a flat plateau."""

    a: float = 1.0
    b: float = 1.0
    rho: float = 1.0

    def __post_init__(self):
        if min(self.a, self.b, self.rho) <= 0.0:
            raise ValueError("enthalpy-law parameters must be strictly positive")

    kind = KIND_STEFAN
    p_growth = 2.0

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return np.where(s < 0.0, self.a * s, np.where(s > self.rho, self.b * (s - self.rho), 0.0))


@dataclass(frozen=True)
class PorousMediaNonlinearity:
    """Odd power law |s|^(p-2) s."""

    p: float = 2.0

    def __post_init__(self):
        if self.p < 1.0:
            raise ValueError("power-law exponent must be >= 1")

    kind = KIND_POWER

    @property
    def p_growth(self):
        return self.p

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(s == 0.0, 0.0, np.abs(s) ** (self.p - 2.0) * s)
        return out


@dataclass(frozen=True)
class LinearHeatNonlinearity:
    kind = KIND_LINEAR
    p_growth = 2.0

    def __call__(self, s):
        return np.asarray(s, dtype=float)


@dataclass(frozen=True)
class ZeroDriftNonlinearity:
    """Psi identically zero: a degenerate monotone law that switches the
    drift off entirely. Diagnostic only, for isolating the noise and
    geometry terms in the energy bookkeeping."""

    kind = KIND_ZERO
    p_growth = 2.0

    def __call__(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))


ADDITIVE = "additive"
MULTIPLICATIVE = "linear_multiplicative"


@dataclass(frozen=True)
class NoiseModel:
    """Truncated diffusion family over the seed basis.

    mode_amplitudes gamma_k scale the k-th seed element; coupling is either
    additive (sigma_k = gamma_k phi_k) or linearly multiplicative
    (sigma_k(t, u) = gamma_k (u, phi_k)_t phi_k / |phi_k|_t, Lipschitz in the
    moving norm). f_bound is the constant standing in for the growth/Lipschitz
    envelope f(t); the default 2 * sum gamma_k^2 covers both shipped couplings
    with room to spare on modestly deformed geometries.
    """

    mode_amplitudes: tuple
    coupling: str = ADDITIVE
    f_bound: float = None

    def __post_init__(self):
        amps = tuple(float(g) for g in self.mode_amplitudes)
        if any(g < 0.0 for g in amps):
            raise ValueError("mode amplitudes must be nonnegative")
        if self.coupling not in (ADDITIVE, MULTIPLICATIVE):
            raise ValueError(f"unknown noise coupling {self.coupling!r}")
        object.__setattr__(self, "mode_amplitudes", amps)
        if self.f_bound is None:
            object.__setattr__(self, "f_bound", 2.0 * sum(g * g for g in amps))

    @property
    def n_modes(self):
        return len(self.mode_amplitudes)

    @property
    def gammas(self):
        return np.asarray(self.mode_amplitudes, dtype=float)


def noise_spectrum(gamma0, n_modes, decay=1.5):
    """Square-summable default spectrum gamma_k = gamma0 * k^-decay."""
    return tuple(gamma0 * k ** (-decay) for k in range(1, n_modes + 1))


def no_noise(n_modes=1):
    return NoiseModel(mode_amplitudes=(0.0,) * n_modes, coupling=ADDITIVE, f_bound=0.0)


@dataclass(frozen=True)
class StefanModel:
    """Bundle of nonlinearity, noise family and growth exponent."""

    nonlinearity: object
    noise: NoiseModel
    p_growth: float = None

    def __post_init__(self):
        if self.p_growth is None:
            object.__setattr__(self, "p_growth", float(self.nonlinearity.p_growth))
        elif abs(self.p_growth - self.nonlinearity.p_growth) > 1e-12:
            raise ValueError("growth exponent inconsistent with the nonlinearity")

    def psi(self, s):
        return self.nonlinearity(s)


def beta_eval(params, r):
    """Piecewise-linear enthalpy law; params is (a, b, rho) or a nonlinearity."""
    if isinstance(params, StefanNonlinearity):
        return params(r)
    a, b, rho = params
    return StefanNonlinearity(a, b, rho)(r)


def psi_eval(model, s):
    nonlin = model.nonlinearity if isinstance(model, StefanModel) else model
    return nonlin(s) if callable(nonlin) else np.asarray(s, dtype=float)


# ---------------------------------------------------------------------------
# Drift and diffusion evaluation on the grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriftAction:
    """Transformed drift at one (t, u).

    `pair(v)` evaluates the functional against a test field by quadrature.
    Because the pivot inner product is the negative-order one, the element of
    the pivot space representing this functional is the reference-Laplacian
    image of the integrand (`representative`), and the untransformed drift is
    its image under the inverse pairing operator (`pullback_representative`),
    which works out to the moving weighted Laplacian applied to the same
    integrand.
    """

    tilde_values: np.ndarray       # integrand -Psi(u * inverse volume ratio)
    representative: np.ndarray
    pullback_representative: np.ndarray
    _weights: np.ndarray

    def pair(self, v):
        return float(np.dot(self.tilde_values * self._weights, v))


def drift_A(gram, model, t, u):
    """Evaluate the drift functional and its representatives at time t."""
    u = gram.require_zero_mean(u, "state")
    idx = gram.node_index(t)
    inv_rn = 1.0 / gram.grids[idx].rn_derivative
    tilde = -psi_eval(model, u * inv_rn)
    rep = (gram.stiffness[0] @ tilde) / gram.mass_weights
    pulled = spaces.iota_star_inv(gram, t, rep)
    return DriftAction(
        tilde_values=tilde,
        representative=rep,
        pullback_representative=pulled,
        _weights=gram.mass_weights,
    )


def noise_B(gram, model, t, u, phi=None):
    """The K diffusion fields sigma_k(t, u); all outputs have zero mean."""
    noise = model.noise
    if phi is None:
        phi = fourier_seed_basis(gram, noise.n_modes)
    k = noise.n_modes
    out = np.zeros((k, gram.n_grid))
    if noise.coupling == ADDITIVE:
        for j in range(k):
            out[j] = noise.gammas[j] * phi[:, j]
        return out
    u = gram.require_zero_mean(u, "state")
    for j in range(k):
        pj = phi[:, j]
        norm_t = spaces.hminus_norm(gram, t, pj)
        coef = noise.gammas[j] * spaces.hminus_inner(gram, t, u, pj) / norm_t
        out[j] = coef * pj
    return out


def fourier_seed_basis(gram, n):
    """Default seed basis: mean-free trigonometric modes orthonormalized in
    the reference inner product (classical Gram-Schmidt, one extra pass)."""
    if n > gram.n_grid // 2:
        raise ValueError("seed dimension exceeds the resolvable modes")
    theta = geometry.theta_grid(gram.n_grid)
    raw = np.empty((gram.n_grid, n))
    for i in range(n):
        k = i // 2 + 1
        raw[:, i] = np.cos(k * theta) if i % 2 == 0 else np.sin(k * theta)
        raw[:, i] = gram.project_zero_mean(raw[:, i])
    m0 = gram.mass_weights
    pot = gram.solve_at(0, m0[:, None] * raw)
    a0 = (m0[:, None] * raw).T @ pot
    a0 = 0.5 * (a0 + a0.T)
    t = gram_schmidt_transform(a0)
    return raw @ t


class RankDeficiencyError(RuntimeError):
    """Seed vectors are numerically dependent in the requested inner product."""


def gram_schmidt_transform(a, tol=1e-12):
    """Upper-triangular T with T' A T = I for an SPD Gram matrix A.

    Classical Gram-Schmidt with one reorthogonalization pass, expressed in
    coordinates; column j of T holds the expansion of the j-th orthonormal
    vector in the original ones.
    """
    n = a.shape[0]
    t = np.zeros((n, n))
    lead = np.sqrt(a[0, 0])
    for j in range(n):
        v = np.zeros(n)
        v[j] = 1.0
        for _ in range(2):  # second pass restores orthogonality lost to rounding
            for i in range(j):
                v -= (t[:, i] @ a @ v) * t[:, i]
        norm = np.sqrt(max(v @ a @ v, 0.0))
        if norm < tol * lead:
            raise RankDeficiencyError(f"seed vector {j} is dependent on its predecessors")
        t[:, j] = v / norm
    return t


# ---------------------------------------------------------------------------
# Nonlinearity-condition report
# ---------------------------------------------------------------------------


@dataclass
class PsiReport:
    continuous_jump: float
    monotone: bool
    monotone_witness: tuple
    coercivity_a: float
    coercivity_c4: float
    growth_c5: float
    growth_c6: float
    passed: bool


def check_psi_conditions(model, p=None, n_samples=2000, s_max=1e4):
    """Sampled verification of the four structural conditions on Psi.

    Continuity is probed by the largest jump over a log-spaced grid refined
    once; monotonicity pairwise on the sorted grid; the lower coercivity
    bound s Psi(s) >= a |s|^p - c4 and the growth bound
    |Psi(s)| <= c5 + c6 |s|^(p-1) are fitted in two stages (tight constants
    first, a cushion constant second), since the pair (a, c4) is not jointly
    minimal in any canonical sense.
    """
    nonlin = model.nonlinearity if isinstance(model, StefanModel) else model
    if p is None:
        p = float(getattr(nonlin, "p_growth", 2.0))
    pos = np.logspace(-4, np.log10(s_max), n_samples // 2)
    s = np.unique(np.concatenate([-pos[::-1], [0.0], pos]))
    vals = np.asarray(nonlin(s), dtype=float)

    jumps = []
    for grid in (s, np.unique(np.concatenate([s, 0.5 * (s[1:] + s[:-1])]))):
        v = np.asarray(nonlin(grid), dtype=float)
        jumps.append(float(np.max(np.abs(np.diff(v)))) if len(v) > 1 else 0.0)
    continuous_jump = jumps[-1]

    diffs = np.diff(vals) * np.diff(s)
    monotone = bool(np.all(diffs >= 0.0))
    witness = ()
    if not monotone:
        i = int(np.argmin(diffs))
        witness = (float(s[i]), float(s[i + 1]))

    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(s != 0.0, s * vals / np.abs(s) ** p, np.inf)
    a_fit = float(np.min(ratios))
    if a_fit <= 0.0:
        big = np.abs(s) >= 10.0
        a_fit = float(np.min(ratios[big])) if np.any(big) else 0.0
    c4 = float(np.max(np.maximum(a_fit * np.abs(s) ** p - s * vals, 0.0))) if a_fit > 0 else np.inf

    with np.errstate(divide="ignore", invalid="ignore"):
        gratios = np.where(s != 0.0, np.abs(vals) / np.abs(s) ** (p - 1.0), 0.0)
    c6 = float(np.max(gratios))
    c5 = float(np.max(np.maximum(np.abs(vals) - c6 * np.abs(s) ** (p - 1.0), 0.0)))

    passed = monotone and a_fit > 0.0 and np.isfinite(c4) and np.isfinite(c6)
    return PsiReport(
        continuous_jump=continuous_jump,
        monotone=monotone,
        monotone_witness=witness,
        coercivity_a=a_fit,
        coercivity_c4=c4,
        growth_c5=c5,
        growth_c6=c6,
        passed=passed,
    )


# ---------------------------------------------------------------------------
# Noise-condition and drift-condition verifiers
# ---------------------------------------------------------------------------


def check_noise_lipschitz(gram, model, t_samples=None, n_pairs=200, seed=0):
    """Sampled Lipschitz quotient of the diffusion family in the moving norm.

    Returns the largest ratio of sum_k |sigma_k(t,u) - sigma_k(t,v)|_t^2 to
    |u - v|_t^2; the model passes when it stays below f_bound.
    """
    rng = np.random.default_rng(seed)
    if t_samples is None:
        t_samples = gram.time_nodes[:: max(1, gram.n_steps // 4)]
    phi = fourier_seed_basis(gram, model.noise.n_modes)
    worst = 0.0
    for t in t_samples:
        for _ in range(max(1, n_pairs // max(1, len(t_samples)))):
            u, v = spaces.random_zero_mean(gram, rng, 2, smooth=True)
            su = noise_B(gram, model, t, u, phi=phi)
            sv = noise_B(gram, model, t, v, phi=phi)
            num = sum(spaces.hminus_inner(gram, t, d, d) for d in su - sv)
            den = spaces.hminus_inner(gram, t, u - v, u - v)
            if den > 0.0:
                worst = max(worst, num / den)
    return worst


def check_noise_growth(gram, model, t_samples=None, n_samples=200, seed=0):
    """Sampled growth quotient sum_k |sigma_k(t,u)|_t^2 / (1 + |u|_t^2)."""
    rng = np.random.default_rng(seed)
    if t_samples is None:
        t_samples = gram.time_nodes[:: max(1, gram.n_steps // 4)]
    phi = fourier_seed_basis(gram, model.noise.n_modes)
    worst = 0.0
    for t in t_samples:
        for _ in range(max(1, n_samples // max(1, len(t_samples)))):
            u = spaces.random_zero_mean(gram, rng, smooth=True)
            su = noise_B(gram, model, t, u, phi=phi)
            num = sum(spaces.hminus_inner(gram, t, s, s) for s in su)
            den = 1.0 + spaces.hminus_inner(gram, t, u, u)
            worst = max(worst, num / den)
    return worst


@dataclass
class HReport:
    which: str
    passed: bool
    measured: dict
    witness: dict = field(default_factory=dict)


def _sample_states(gram, rng, n):
    return np.atleast_2d(spaces.random_zero_mean(gram, rng, n, smooth=True))


def verify_H(gram, model, which, n_samples=100, t_samples=None, seed=0):
    """Sampled verification of one of the five well-posedness conditions.

    H1 reports the largest jump of the hemicontinuity map over dyadically
    refined lambda grids (the jump must shrink with refinement); H2 the
    largest monotonicity defect (for the shipped models the drift part must
    be nonpositive outright and the noise part below the Lipschitz envelope);
    H3 the largest coercivity constant compatible with the samples (positive
    means pass); H4 the growth constant of the drift in the dual norm,
    measured against a dictionary lower bound; H5 the noise growth quotient.
    """
    rng = np.random.default_rng(seed)
    if t_samples is None:
        step = max(1, gram.n_steps // 4)
        t_samples = gram.time_nodes[::step]
    phi = fourier_seed_basis(gram, model.noise.n_modes)
    p = model.p_growth
    f_bound = model.noise.f_bound

    if which == "H1":
        jumps = []
        for n_lam in (9, 17, 33):
            lam = np.linspace(-1.0, 1.0, n_lam)
            worst = 0.0
            for _ in range(max(1, n_samples // 10)):
                u, v, x = _sample_states(gram, rng, 3)
                t = float(rng.choice(t_samples))
                vals = np.array(
                    [drift_A(gram, model, t, gram.project_zero_mean(u + l * v)).pair(x) for l in lam]
                )
                scale = max(1.0, float(np.max(np.abs(vals))))
                worst = max(worst, float(np.max(np.abs(np.diff(vals)))) / scale)
            jumps.append(worst)
        passed = jumps[-1] <= 0.55 * jumps[0] + 1e-12 or jumps[-1] <= 1e-9
        return HReport("H1", passed, {"jumps": jumps})

    if which == "H2":
        worst_pairing = -np.inf
        worst_total = -np.inf
        witness = {}
        for t in t_samples:
            idx = gram.node_index(t)
            inv_rn = 1.0 / gram.grids[idx].rn_derivative
            for _ in range(max(1, n_samples // len(t_samples))):
                u, v = _sample_states(gram, rng, 2)
                # direct quadrature keeps the sign exact for monotone laws
                du = psi_eval(model, u * inv_rn) - psi_eval(model, v * inv_rn)
                pairing = -2.0 * float(np.dot(du * (u - v), gram.mass_weights))
                su = noise_B(gram, model, t, u, phi=phi)
                sv = noise_B(gram, model, t, v, phi=phi)
                noise_sq = sum(spaces.hminus_inner(gram, t, d, d) for d in su - sv)
                gap = spaces.hminus_inner(gram, t, u - v, u - v)
                total = pairing + noise_sq - f_bound * gap
                if pairing > worst_pairing:
                    worst_pairing = pairing
                if total > worst_total:
                    worst_total = total
                    if total > 1e-9:
                        witness = {"t": float(t)}
        passed = worst_pairing <= 1e-12 and worst_total <= 1e-9
        return HReport(
            "H2", passed, {"max_pairing": worst_pairing, "max_defect": worst_total}, witness
        )

    if which == "H3":
        c_fit = np.inf
        per_time = {}
        for t in t_samples:
            c_t = np.inf
            for _ in range(max(1, n_samples // len(t_samples))):
                u = _sample_states(gram, rng, 1)[0]
                act = drift_A(gram, model, t, u)
                two_a = 2.0 * act.pair(u)
                su = noise_B(gram, model, t, u, phi=phi)
                qv = sum(spaces.hminus_inner(gram, t, s, s) for s in su)
                hsq = spaces.hminus_inner(gram, t, u, u)
                vnorm = spaces.lp_norm(gram, u, p)
                c_t = min(c_t, (f_bound * (1.0 + hsq) - two_a - qv) / vnorm ** p)
            per_time[float(t)] = c_t
            c_fit = min(c_fit, c_t)
        return HReport("H3", c_fit > 0.0, {"c": c_fit, "per_time": per_time})

    if which == "H4":
        dictionary = _dual_dictionary(gram, p, seed=seed + 1)
        c_fit = 0.0
        for t in t_samples:
            for _ in range(max(1, n_samples // len(t_samples))):
                u = _sample_states(gram, rng, 1)[0]
                act = drift_A(gram, model, t, u)
                dual = max(abs(act.pair(d)) for d in dictionary)
                vnorm = spaces.lp_norm(gram, u, p)
                num = dual ** (p / (p - 1.0)) - f_bound
                c_fit = max(c_fit, num / vnorm ** p)
        return HReport("H4", np.isfinite(c_fit), {"C": c_fit, "dual_norm": "dictionary lower bound"})

    if which == "H5":
        worst = check_noise_growth(gram, model, t_samples=t_samples, n_samples=n_samples, seed=seed)
        return HReport("H5", worst <= f_bound * (1.0 + 1e-9), {"quotient": worst, "f_bound": f_bound})

    raise ValueError(f"unknown condition {which!r}")


def _dual_dictionary(gram, p, size=64, seed=1):
    """Unit-norm test fields for dual-norm lower bounds: trigonometric modes
    plus random smooth fields, normalized in the p-integrable norm."""
    rng = np.random.default_rng(seed)
    theta = geometry.theta_grid(gram.n_grid)
    fields = []
    k = 1
    while len(fields) < size // 2 and k <= gram.n_grid // 4:
        fields.append(np.cos(k * theta))
        fields.append(np.sin(k * theta))
        k += 1
    while len(fields) < size:
        fields.append(spaces.random_zero_mean(gram, rng, smooth=True))
    out = []
    for f in fields:
        f = gram.project_zero_mean(f)
        norm = spaces.lp_norm(gram, f, p)
        if norm > 1e-12:
            out.append(f / norm)
    return out

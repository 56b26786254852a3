"""Identity checkers for the energy bookkeeping of simulated paths.

`ito_residual` replays a simulated trajectory through the moving-norm
identity: the increment of |X|_t^2 must be accounted for by the drift
pairing, the realized quadratic variation of the noise, the norm-derivative
term, and the martingale term, all evaluated from the stored increments. The
quadratic variation is the realized one (not its expectation), so the
residual measures the scheme's self-consistency and decays at first order in
the step pathwise; with the noise off and the state frozen it collapses to
pure trapezoidal quadrature error, second order.

`stochastic_transport_residual` does the same bookkeeping in the moving
frame, where the norm-derivative term becomes the deformation-tensor
integral; the two evaluations must agree step by step.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import geometry, operators, spaces


@dataclass(frozen=True)
class EnergyLedger:
    times: np.ndarray
    lhs: np.ndarray               # |X|_t^2 per node
    drift_term: np.ndarray        # cumulative 2 <drift, pairing-image of X>
    ito_correction: np.ndarray    # cumulative realized quadratic variation
    phi_term: np.ndarray          # cumulative norm-derivative integral
    martingale_term: np.ndarray   # cumulative 2 (X, noise increment)_t
    residual: np.ndarray

    def final_residual(self):
        return float(self.residual[-1])


def _noise_coords(basis, model, coords, increments):
    """Seed-coordinate noise increments b(t_m, x_m) dW_m for every step."""
    m_steps, k = increments.shape
    gammas = model.noise.gammas
    if model.noise.coupling == operators.ADDITIVE:
        coef = np.broadcast_to(gammas, (m_steps, k))
    else:
        at = basis.at[:m_steps]
        proj = np.einsum("mi,mik->mk", coords[:m_steps], at[:, :, :k])
        coef = gammas[None, :] * proj / np.sqrt(np.einsum("mkk->mk", at[:, :k, :k]))
    out = np.zeros((m_steps, basis.n))
    out[:, :k] = coef * increments
    return out


def ito_residual(path, gram, basis, model):
    """Replay the moving-norm identity along one simulated path."""
    coords = path.coords
    m_steps = gram.n_steps
    dt = gram.dt
    times = gram.time_nodes

    lhs = np.einsum("mi,mij,mj->m", coords, basis.at, coords)

    # drift pairing via direct quadrature of the transformed operator
    fields = np.einsum("ni,mi->mn", basis.seed, coords)  # (M+1, N)
    irn = np.array([1.0 / g.rn_derivative for g in gram.grids])
    psi = operators.psi_eval(model, fields * irn)
    drift_rate = -2.0 * np.einsum("mn,mn,n->m", psi, fields, gram.mass_weights)
    drift = np.concatenate([[0.0], np.cumsum(drift_rate[:-1] * dt)])

    noise = _noise_coords(basis, model, coords, path.noise_increments)
    qv_steps = np.einsum("mi,mij,mj->m", noise, basis.at[:m_steps], noise)
    qv = np.concatenate([[0.0], np.cumsum(qv_steps)])

    mart_steps = 2.0 * np.einsum("mi,mij,mj->m", coords[:m_steps], basis.at[:m_steps], noise)
    mart = np.concatenate([[0.0], np.cumsum(mart_steps)])

    phi_rate = -np.einsum("mi,mij,mj->m", coords, basis.phi_quad, coords)
    phi = np.concatenate([[0.0], np.cumsum(0.5 * (phi_rate[1:] + phi_rate[:-1]) * dt)])

    residual = lhs - lhs[0] - drift - qv - phi - mart
    return EnergyLedger(
        times=times,
        lhs=lhs,
        drift_term=drift,
        ito_correction=qv,
        phi_term=phi,
        martingale_term=mart,
        residual=residual,
    )


def gronwall_functional(path_x, path_y, gram, basis, model, c1=None):
    """Discounted squared gap exp(-Lambda(t)) |X_t - Y_t|_t^2 along coupled
    paths, with Lambda built from the measured norm-equivalence constant and
    the operator norms of the norm-derivative family."""
    diff = path_x.coords - path_y.coords
    gaps = np.einsum("mi,mij,mj->m", diff, basis.at, diff)
    if c1 is None:
        c1 = spaces.check_C1(gram, n_samples=40, seed=1)
    rate = model.noise.f_bound + c1 ** 2 * spaces.phi_norms(gram)
    envelope = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * gram.dt)])
    return gram.time_nodes, np.exp(-envelope) * gaps


def deformation_tensor(grid):
    """Per-node symmetric 2x2 tensor (div v) I - 2 D from the velocity field,
    with D the symmetrized tangential velocity gradient."""
    n = grid.n
    grad = np.empty((n, 2, 2))
    for j in range(2):
        grad[:, :, j] = geometry.tangential_gradient(grid, grid.velocity[:, j])
    d = 0.5 * (grad + np.transpose(grad, (0, 2, 1)))
    div = grad[:, 0, 0] + grad[:, 1, 1]
    return div[:, None, None] * np.eye(2)[None, :, :] - 2.0 * d


@dataclass(frozen=True)
class TransportLedger:
    times: np.ndarray
    lhs: np.ndarray                 # squared moving-frame negative norm
    nonlinearity_term: np.ndarray   # cumulative -2 int Psi(X) X
    ito_correction: np.ndarray      # cumulative realized quadratic variation
    martingale_term: np.ndarray
    deformation_term: np.ndarray    # cumulative -int B grad-potential^2
    residual: np.ndarray
    phi_vs_deformation: np.ndarray  # per-node defect of the two evaluations

    def final_residual(self):
        return float(self.residual[-1])


def stochastic_transport_residual(path, gram, basis, model, curve=None):
    """Replay the moving-frame energy identity along one simulated path.

    Every term is evaluated on the moved geometry: the norm directly from the
    moved mass weights, the nonlinearity by moved-frame quadrature, the noise
    terms from the pushforward diffusion fields and the stored increments,
    and the geometric term through the deformation tensor applied to the
    tangential gradient of the inverse-Laplacian potential (computed by
    pulling back to the reference solve). The per-node defect between that
    term and the abstract norm-derivative quadratic form is reported.
    """
    coords = path.coords
    m_steps = gram.n_steps
    dt = gram.dt
    n_nodes = m_steps + 1

    fields = np.einsum("ni,mi->mn", basis.seed, coords)        # reference densities
    noise = _noise_coords(basis, model, coords, path.noise_increments)
    noise_fields = np.einsum("ni,mi->mn", basis.seed, noise)   # (M, N)

    lhs = np.empty(n_nodes)
    nonlin_rate = np.empty(n_nodes)
    defo_rate = np.empty(n_nodes)
    phi_defect = np.empty(n_nodes)
    mart_steps = np.empty(m_steps)
    qv_steps = np.empty(m_steps)

    for m in range(n_nodes):
        grid = gram.grids[m]
        mt = geometry.mass_weights(grid)
        moved = fields[m] / grid.rn_derivative        # field living on the moved curve
        rhs = mt * moved
        pot_moved = gram.solve_at(m, rhs)
        lhs[m] = float(rhs @ pot_moved)
        nonlin_rate[m] = -2.0 * float(
            np.dot(operators.psi_eval(model, moved) * moved, mt)
        )

        pot = gram.solve_at(m, gram.mass_weights * fields[m])  # reference potential
        grad_pot = (geometry.spectral_derivative(pot) / grid.g11)[:, None] * grid.tangent
        btensor = deformation_tensor(grid)
        integrand = np.einsum("nij,ni,nj->n", btensor, grad_pot, grad_pot)
        defo_rate[m] = -float(np.dot(integrand, mt))
        phi_form = -float(pot @ gram.dstiffness[m] @ pot)      # (Phi(t) Y, Y)_0
        phi_defect[m] = abs(phi_form - defo_rate[m])

        if m < m_steps:
            moved_noise = noise_fields[m] / grid.rn_derivative
            rhs_noise = mt * moved_noise
            pot_noise = gram.solve_at(m, rhs_noise)
            mart_steps[m] = 2.0 * float(rhs_noise @ pot_moved)
            qv_steps[m] = float(rhs_noise @ pot_noise)

    nonlin = np.concatenate([[0.0], np.cumsum(nonlin_rate[:-1] * dt)])
    defo = np.concatenate([[0.0], np.cumsum(defo_rate[:-1] * dt)])
    qv = np.concatenate([[0.0], np.cumsum(qv_steps)])
    mart = np.concatenate([[0.0], np.cumsum(mart_steps)])
    residual = lhs - lhs[0] - nonlin - qv - mart - defo
    return TransportLedger(
        times=gram.time_nodes,
        lhs=lhs,
        nonlinearity_term=nonlin,
        ito_correction=qv,
        martingale_term=mart,
        deformation_term=defo,
        residual=residual,
        phi_vs_deformation=phi_defect,
    )


def dump_ledger_csv(ledger, file):
    cols = ["step", "t", "lhs"]
    series = [ledger.lhs]
    if isinstance(ledger, EnergyLedger):
        cols += ["drift_term", "ito_correction", "phi_term", "martingale_term", "residual"]
        series += [
            ledger.drift_term,
            ledger.ito_correction,
            ledger.phi_term,
            ledger.martingale_term,
            ledger.residual,
        ]
    else:
        cols += [
            "nonlinearity_term",
            "ito_correction",
            "martingale_term",
            "deformation_term",
            "residual",
        ]
        series += [
            ledger.nonlinearity_term,
            ledger.ito_correction,
            ledger.martingale_term,
            ledger.deformation_term,
            ledger.residual,
        ]
    with open(file, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for m, t in enumerate(ledger.times):
            writer.writerow([m, f"{t:.12g}"] + [f"{s[m]:.17g}" for s in series])

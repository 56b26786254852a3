"""Heat flow on a moving interval, solved two independent ways.

The fixed-domain solver transforms the problem to the reference interval
(0, 1) through the prescribed diffeomorphism r(t, .) and integrates the
resulting variable-coefficient advection-diffusion equation. The moving
reference solver integrates the untransformed heat equation on a grid that
rides along with r. Pulling the moving solution back to reference
coordinates must reproduce the fixed-domain solution to discretization
accuracy; that comparison is the cross-validation oracle for the whole
transformation calculus.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class DiffeomorphismError(RuntimeError):
    """The forward map lost injectivity (nonpositive Jacobian)."""


class CflError(RuntimeError):
    """Explicit advection step exceeds the stability guard."""


@dataclass(frozen=True)
class DomainMap:
    """Forward map r(t, y) from the reference interval onto the moving one.

    Analytic evaluators for the y- and t-derivatives are required; the
    inverse map and its derivatives are derived from them through the
    inverse-function rules, with a bisection/Newton fallback for evaluating
    the inverse itself.
    """

    r: callable
    dr_dy: callable
    dr_dt: callable
    d2r_dy2: callable
    horizon: float = 1.0
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def rbar(self, t, x):
        """Inverse map by monotone bisection plus Newton polish."""
        x = np.asarray(x, dtype=float)
        lo = np.zeros_like(x)
        hi = np.ones_like(x)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            left = self.r(t, mid) < x
            lo = np.where(left, mid, lo)
            hi = np.where(left, hi, mid)
        y = 0.5 * (lo + hi)
        for _ in range(3):
            y = y - (self.r(t, y) - x) / self.dr_dy(t, y)
        return np.clip(y, 0.0, 1.0)

    def jacobian(self, t, y):
        j = np.asarray(self.dr_dy(t, y), dtype=float)
        if np.any(j <= 0.0):
            raise DiffeomorphismError(f"nonpositive Jacobian at t={t}")
        return j

    def validate(self, n_probe=33, n_times=5):
        y = np.linspace(0.0, 1.0, n_probe)
        if np.max(np.abs(self.r(0.0, y) - y)) > 1e-12:
            raise ValueError("map at t=0 is not the identity")
        for t in np.linspace(0.0, self.horizon, n_times):
            self.jacobian(t, y)
            back = self.rbar(t, self.r(t, y))
            if np.max(np.abs(back - y)) > 1e-10:
                raise ValueError(f"inverse round-trip fails at t={t}")
        return self


def identity_map(horizon=1.0):
    return DomainMap(
        r=lambda t, y: np.asarray(y, dtype=float),
        dr_dy=lambda t, y: np.ones_like(np.asarray(y, dtype=float)),
        dr_dt=lambda t, y: np.zeros_like(np.asarray(y, dtype=float)),
        d2r_dy2=lambda t, y: np.zeros_like(np.asarray(y, dtype=float)),
        horizon=horizon,
        name="identity",
    )


def dilation_map(rate=1.0, horizon=1.0):
    """r(t, y) = (1 + rate t) y, the uniformly stretching interval."""
    return DomainMap(
        r=lambda t, y: (1.0 + rate * t) * np.asarray(y, dtype=float),
        dr_dy=lambda t, y: np.full_like(np.asarray(y, dtype=float), 1.0 + rate * t),
        dr_dt=lambda t, y: rate * np.asarray(y, dtype=float),
        d2r_dy2=lambda t, y: np.zeros_like(np.asarray(y, dtype=float)),
        horizon=horizon,
        name="dilation",
        params={"rate": rate},
    )


def bump_map(amplitude=0.3, horizon=1.0):
    """r(t, y) = y + amplitude t y (1 - y): interior bulge, fixed endpoints."""
    if not 0.0 <= amplitude < 1.0:
        raise ValueError("amplitude must lie in [0, 1) to keep r monotone")
    return DomainMap(
        r=lambda t, y: np.asarray(y, dtype=float)
        + amplitude * t * np.asarray(y, dtype=float) * (1.0 - np.asarray(y, dtype=float)),
        dr_dy=lambda t, y: 1.0 + amplitude * t * (1.0 - 2.0 * np.asarray(y, dtype=float)),
        dr_dt=lambda t, y: amplitude * np.asarray(y, dtype=float) * (1.0 - np.asarray(y, dtype=float)),
        d2r_dy2=lambda t, y: np.full_like(np.asarray(y, dtype=float), -2.0 * amplitude * t),
        horizon=horizon,
        name="bump",
        params={"amplitude": amplitude},
    )


MAP_FAMILIES = {"identity": identity_map, "dilation": dilation_map, "bump": bump_map}


def make_map(family, horizon=1.0, **params):
    if family not in MAP_FAMILIES:
        raise ValueError(f"unknown map family {family!r}")
    return MAP_FAMILIES[family](horizon=horizon, **params)


def transformed_coefficients(dmap, t, y):
    """Coefficients of the pulled-back equation at (t, y).

    a11 is the squared inverse Jacobian, b1 collects the divergence-form
    correction plus the second derivative of the inverse map (both composed
    at x = r(t, y)), b2 the time derivative of the inverse map there. The
    chain-rule identities express all three through derivatives of the
    forward map: with J = dr/dy and Q = d2r/dy2,
      a11 = 1/J^2,  d(a11)/dy = -2 Q / J^3,  (d2 rbar/dx2) o r = -Q / J^3,
      (d rbar/dt) o r = -(dr/dt) / J.
    """
    y = np.asarray(y, dtype=float)
    j = dmap.jacobian(t, y)
    q = np.asarray(dmap.d2r_dy2(t, y), dtype=float)
    a11 = 1.0 / j ** 2
    da11_dy = -2.0 * q / j ** 3
    rbar_xx = -q / j ** 3
    b1 = -da11_dy + rbar_xx
    b2 = -np.asarray(dmap.dr_dt(t, y), dtype=float) / j
    return a11, b1, b2


def interior_mesh(n_cells):
    """Uniform interior nodes of (0, 1) with homogeneous ends; h = 1/n_cells."""
    h = 1.0 / n_cells
    return np.arange(1, n_cells) * h, h


def diffusion_part(dmap, t, y, h):
    """Weak-form diffusion block: second-order flux stencil with midpoint
    coefficients; symmetric by construction."""
    m = len(y)
    mid_left = y - 0.5 * h
    mid_right = y + 0.5 * h
    a_left, _, _ = transformed_coefficients(dmap, t, mid_left)
    a_right, _, _ = transformed_coefficients(dmap, t, mid_right)
    main = -(a_left + a_right) / h ** 2
    mat = np.diag(main)
    off = a_right[:-1] / h ** 2
    mat += np.diag(off, 1) + np.diag(off, -1)
    return mat


def _centered_gradient(m, h):
    d = np.zeros((m, m))
    idx = np.arange(m - 1)
    d[idx, idx + 1] = 0.5 / h
    d[idx + 1, idx] = -0.5 / h
    return d


def assemble_A1_A2(dmap, t, n_cells):
    """Matrices of the transformed operators on the interior mesh.

    A1 is the divergence-form diffusion plus the first-order correction b1;
    A2 the advection induced by the domain motion. Note the sign: with b2
    the composed time derivative of the inverse map, the chain rule puts
    -b2 . grad v into the pulled-back equation (differentiating
    rbar(t, r(t, y)) = y in t gives b2 = -dr/dt / dr/dy), so A2 advects with
    speed -b2. Both stencils are centered, second order.
    """
    y, h = interior_mesh(n_cells)
    m = len(y)
    _, b1, b2 = transformed_coefficients(dmap, t, y)
    grad = _centered_gradient(m, h)
    a1 = diffusion_part(dmap, t, y, h) + b1[:, None] * grad
    a2 = -b2[:, None] * grad
    return a1, a2


def weighted_pairing(dmap, t, y, h, f, g):
    """Discrete duality pairing <det . f, g> with the Jacobian weight."""
    det = dmap.jacobian(t, y)
    return h * float(np.dot(det * f, g))


def _tridiag_solve(mat, rhs):
    ab = np.zeros((3, mat.shape[0]))
    ab[0, 1:] = np.diag(mat, 1)
    ab[1] = np.diag(mat)
    ab[2, :-1] = np.diag(mat, -1)
    return scipy.linalg.solve_banded((1, 1), ab, rhs)


def solve_fixed_domain(dmap, n_cells, dt, v0, horizon=None):
    """Semi-implicit integration of the transformed equation: diffusion and
    first-order correction implicitly, advection explicitly, under the CFL
    guard dt <= h / max |b2|."""
    y, h = interior_mesh(n_cells)
    horizon = dmap.horizon if horizon is None else horizon
    n_steps = int(round(horizon / dt))
    v = np.asarray(v0, dtype=float).copy()
    if v.shape != y.shape:
        raise ValueError("initial data must live on the interior mesh")
    eye = np.eye(len(y))
    traj = np.empty((n_steps + 1, len(y)))
    traj[0] = v
    for step in range(n_steps):
        t0 = step * dt
        t1 = (step + 1) * dt
        _, _, b2 = transformed_coefficients(dmap, t0, y)
        vmax = float(np.max(np.abs(b2)))
        if vmax * dt > h * (1.0 + 1e-12):
            raise CflError(f"dt={dt} exceeds h/max|b2|={h / vmax:.3e} at t={t0:.3e}")
        a1, _ = assemble_A1_A2(dmap, t1, n_cells)
        _, a2 = assemble_A1_A2(dmap, t0, n_cells)
        rhs = v + dt * (a2 @ v)
        v = _tridiag_solve(eye - dt * a1, rhs)
        traj[step + 1] = v
    return y, traj


def _moving_laplacian(dmap, t, yb):
    """3-point second-derivative stencil bands on the moved grid r(t, yb)."""
    xb = dmap.r(t, yb)
    hl = xb[1:-1] - xb[:-2]
    hr = xb[2:] - xb[1:-1]
    lower = 2.0 / (hl * (hl + hr))
    upper = 2.0 / (hr * (hl + hr))
    return lower, -(lower + upper), upper


def solve_moving_reference(dmap, n_cells, dt, u0, horizon=None):
    """Direct heat solve on the physically moving interval.

    The grid nodes are x_i(t) = r(t, y_i); node values follow the material
    points, so du_i/dt = u_xx + xdot_i u_x. The second derivative uses the
    standard 3-point stencil on the (generally nonuniform) moving grid with
    Crank-Nicolson averaging in time; the grid-velocity advection is
    explicit. A deliberately different discretization from the fixed-domain
    solver, so the agreement of the two is a genuine cross-check. Returns
    the nodal trajectory, which is already the pullback to reference
    coordinates.
    """
    y, h = interior_mesh(n_cells)
    horizon = dmap.horizon if horizon is None else horizon
    n_steps = int(round(horizon / dt))
    u = np.asarray(u0, dtype=float).copy()
    m = len(y)
    traj = np.empty((n_steps + 1, m))
    traj[0] = u
    yb = np.concatenate([[0.0], y, [1.0]])
    idx = np.arange(m - 1)
    for step in range(n_steps):
        t0 = step * dt
        t1 = (step + 1) * dt
        xdot = dmap.dr_dt(t0, yb)[1:-1]
        xb0 = dmap.r(t0, yb)

        # explicit ALE advection on the current grid
        hl = xb0[1:-1] - xb0[:-2]
        hr = xb0[2:] - xb0[1:-1]
        ub = np.concatenate([[0.0], u, [0.0]])
        ux = (
            hl ** 2 * ub[2:] - hr ** 2 * ub[:-2] - (hl ** 2 - hr ** 2) * ub[1:-1]
        ) / (hl * hr * (hl + hr))

        # Crank-Nicolson diffusion across the two grid positions
        lo0, mid0, up0 = _moving_laplacian(dmap, t0, yb)
        lap_u = mid0 * u
        lap_u[:-1] += up0[:-1] * u[1:]
        lap_u[1:] += lo0[1:] * u[:-1]
        rhs = u + dt * (xdot * ux + 0.5 * lap_u)

        lo1, mid1, up1 = _moving_laplacian(dmap, t1, yb)
        mat = np.diag(1.0 - 0.5 * dt * mid1)
        mat[idx, idx + 1] = -0.5 * dt * up1[:-1]
        mat[idx + 1, idx] = -0.5 * dt * lo1[1:]
        u = _tridiag_solve(mat, rhs)
        traj[step + 1] = u
    return y, traj


def moving_l2_norms(dmap, n_cells, dt, traj):
    """Trapezoidal L2 norms of the moving-grid trajectory on its own grid."""
    y, _ = interior_mesh(n_cells)
    yb = np.concatenate([[0.0], y, [1.0]])
    out = np.empty(len(traj))
    for step, u in enumerate(traj):
        xb = dmap.r(step * dt, yb)
        ub = np.concatenate([[0.0], u, [0.0]])
        out[step] = np.sqrt(np.trapezoid(ub ** 2, xb))
    return out


def dump_trajectory_csv(dmap, n_cells, dt, traj, file, frame="reference"):
    """CSV dump of a solve: time, then nodal values on the reference mesh
    (frame="reference") or on the moved node positions (frame="physical",
    which interleaves position and value columns)."""
    y, _ = interior_mesh(n_cells)
    with open(file, "w") as fh:
        if frame == "reference":
            fh.write("t," + ",".join(f"y={yi:.6g}" for yi in y) + "\n")
            for step, u in enumerate(traj):
                fh.write(f"{step * dt:.12g}," + ",".join(f"{v:.17g}" for v in u) + "\n")
        else:
            fh.write("t," + ",".join(f"x_{i},u_{i}" for i in range(1, len(y) + 1)) + "\n")
            for step, u in enumerate(traj):
                x = dmap.r(step * dt, y)
                row = ",".join(f"{xi:.12g},{vi:.17g}" for xi, vi in zip(x, u))
                fh.write(f"{step * dt:.12g},{row}\n")


def equivalence_table(dmap, u0_fn, h_list, dt_of_h, horizon=0.1):
    """Sup-norm gap between the two solvers under simultaneous refinement.

    Returns rows {h, dt, sup_error, rate}; the rate column compares
    consecutive rows.
    """
    rows = []
    prev = None
    for n_cells in h_list:
        h = 1.0 / n_cells
        dt = dt_of_h(h)
        y, _ = interior_mesh(n_cells)
        u0 = u0_fn(y)
        _, fixed = solve_fixed_domain(dmap, n_cells, dt, u0, horizon)
        _, moving = solve_moving_reference(dmap, n_cells, dt, u0, horizon)
        err = float(np.max(np.abs(fixed - moving)))
        rate = float(np.log2(prev / err)) if prev else None
        rows.append({"h": h, "dt": dt, "sup_error": err, "rate": rate})
        prev = err
    return rows

"""Surface calculus on an evolving closed curve in the plane.

A curve is described by a fixed periodic reference chart theta -> X(theta),
theta in [0, 2pi), and a prescribed flow G(t, .) carrying it in time. Every
operator here acts on nodal samples over a uniform theta grid. Derivatives in
theta are spectral (FFT), so smooth fields are resolved to near machine
precision and the only discretization error that survives in later modules is
the one introduced by time stepping.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg


class GeometryDegenerateError(RuntimeError):
    """The induced metric dropped below the admissible threshold."""


METRIC_FLOOR = 1e-10

# Step used for fallback time differentiation of user-supplied maps.
DT_GEOM = 1e-5


def theta_grid(n):
    if n < 8:
        raise ValueError(f"need at least 8 grid nodes, got {n}")
    return 2.0 * np.pi * np.arange(n) / n


@lru_cache(maxsize=16)
def fourier_diff_matrix(n):
    """Dense spectral differentiation matrix on n uniform periodic nodes.

    Exact on trigonometric polynomials up to mode n/2 - 1; the Nyquist mode of
    an even grid is differentiated to zero, matching the FFT route below.
    """
    column = np.zeros(n)
    h = 2.0 * np.pi / n
    j = np.arange(1, n)
    if n % 2 == 0:
        column[1:] = 0.5 * (-1.0) ** j / np.tan(0.5 * j * h)
    else:
        column[1:] = 0.5 * (-1.0) ** j / np.sin(0.5 * j * h)
    # circulant: D[i, j] = column[(i - j) mod n]
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return column[idx]


def spectral_derivative(values, order=1, axis=-1):
    """FFT derivative along a periodic axis sampled on the uniform grid."""
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    k = np.fft.rfftfreq(n, d=1.0 / n)
    mult = (1j * k) ** order
    if n % 2 == 0 and order % 2 == 1:
        mult[-1] = 0.0
    coeffs = np.fft.rfft(values, axis=axis)
    shape = [1] * values.ndim
    shape[axis] = len(k)
    return np.fft.irfft(coeffs * mult.reshape(shape), n=n, axis=axis)


@dataclass(frozen=True)
class MovingCurve:
    """Closed curve in R^2 carried by a prescribed flow.

    Evaluators are vectorized over theta arrays. ``flow(t, theta)`` returns
    the moved positions G(t, X(theta)); at t = 0 it must reproduce the chart.
    Analytic derivative evaluators are preferred; ``dflow_dtheta`` may be None,
    in which case theta-derivatives fall back to spectral differentiation of
    the sampled positions, and a missing ``dflow_dt`` falls back to central
    differencing with step DT_GEOM.
    """

    chart: callable
    dchart: callable
    flow: callable
    horizon: float
    n_grid: int
    d2chart: callable = None
    dflow_dt: callable = None
    dflow_dtheta: callable = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def velocity(self, t, theta):
        if self.dflow_dt is not None:
            return self.dflow_dt(t, theta)
        h = min(DT_GEOM, max(t, DT_GEOM), max(self.horizon - t, DT_GEOM))
        lo, hi = max(t - h, 0.0), min(t + h, self.horizon)
        return (self.flow(hi, theta) - self.flow(lo, theta)) / (hi - lo)

    def tangent(self, t, theta):
        if self.dflow_dtheta is not None:
            return self.dflow_dtheta(t, theta)
        return spectral_derivative(self.flow(t, theta), axis=0)

    def validate(self, n_times=5):
        """Check the flow axioms on the grid; raise on violation."""
        theta = theta_grid(self.n_grid)
        ref = self.chart(theta)
        if np.max(np.abs(self.flow(0.0, theta) - ref)) > 1e-12:
            raise ValueError("flow at t=0 does not reproduce the reference chart")
        closure = np.array([0.0, 2.0 * np.pi])
        for t in np.linspace(0.0, self.horizon, n_times):
            pos = self.flow(t, closure)
            if np.max(np.abs(pos[0] - pos[1])) > 1e-10:
                raise ValueError(f"flow is not periodic in theta at t={t}")
            tan = self.tangent(t, theta)
            g11 = np.einsum("ij,ij->i", tan, tan)
            if g11.min() <= METRIC_FLOOR:
                raise GeometryDegenerateError(
                    f"immersion fails at t={t}, node {int(g11.argmin())}"
                )
        dtan = self.tangent(0.0, closure)
        if np.max(np.abs(dtan[0] - dtan[1])) > 1e-10:
            raise ValueError("chart derivative is not periodic")
        return self


@dataclass(frozen=True)
class SurfaceGrid:
    """Nodal geometry tables of one time slice of the moving curve."""

    t: float
    theta_nodes: np.ndarray
    g11: np.ndarray
    sqrt_g: np.ndarray
    rn_derivative: np.ndarray
    velocity: np.ndarray
    position: np.ndarray
    tangent: np.ndarray

    @property
    def n(self):
        return len(self.theta_nodes)


def build_grid(curve, t):
    """Evaluate metric, volume weight, volume ratio and velocity at time t."""
    if not (0.0 <= t <= curve.horizon + 1e-12):
        raise ValueError(f"t={t} outside [0, {curve.horizon}]")
    theta = theta_grid(curve.n_grid)
    pos = curve.flow(t, theta)
    tan = curve.tangent(t, theta)
    g11 = np.einsum("ij,ij->i", tan, tan)
    if g11.min() <= METRIC_FLOOR:
        raise GeometryDegenerateError(
            f"degenerate metric at t={t}, node {int(g11.argmin())}"
        )
    tan0 = curve.dchart(theta) if curve.dchart is not None else curve.tangent(0.0, theta)
    g0 = np.einsum("ij,ij->i", tan0, tan0)
    return SurfaceGrid(
        t=t,
        theta_nodes=theta,
        g11=g11,
        sqrt_g=np.sqrt(g11),
        rn_derivative=np.sqrt(g11 / g0),
        velocity=curve.velocity(t, theta),
        position=pos,
        tangent=tan,
    )


def mass_weights(grid):
    """Quadrature weights of the volume measure at the grid's time."""
    return (2.0 * np.pi / grid.n) * grid.sqrt_g


def surface_integral(grid, f):
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} nodal values, got shape {f.shape}")
    return float(np.dot(f, mass_weights(grid)))


def tangential_gradient(grid, f):
    """Gradient of a scalar field along the curve, as an ambient R^2 field."""
    df = spectral_derivative(np.asarray(f, dtype=float))
    return (df / grid.g11)[:, None] * grid.tangent


def tangential_divergence(grid, w):
    """Divergence of an ambient vector field restricted to the curve."""
    w = np.asarray(w, dtype=float)
    div = np.zeros(grid.n)
    for i in range(w.shape[1]):
        div += tangential_gradient(grid, w[:, i])[:, i]
    return div


def laplace_beltrami_matrix(grid):
    """Weak-form stiffness matrix of the surface Laplacian at the grid time.

    Rows and columns index the nodal (trigonometric cardinal) basis. The
    matrix is symmetric positive semidefinite and annihilates constants.
    """
    d = fourier_diff_matrix(grid.n)
    coeff = (2.0 * np.pi / grid.n) / grid.sqrt_g
    s = d.T @ (coeff[:, None] * d)
    return 0.5 * (s + s.T)


def stiffness_time_derivative(*, curve=None, t=None, grid=None):
    """Time derivative of the stiffness matrix at time t (pass a grid, or a
    curve and a time).

    The derivative of the weight 1/sqrt(g) is assembled from the mixed
    derivative of the flow, obtained spectrally from the sampled velocity.
    """
    if grid is None:
        grid = build_grid(curve, t)
    dtan_dt = spectral_derivative(grid.velocity, axis=0)
    dg_dt = 2.0 * np.einsum("ij,ij->i", grid.tangent, dtan_dt)
    dcoeff = (2.0 * np.pi / grid.n) * (-0.5) * dg_dt / grid.g11 ** 1.5
    d = fourier_diff_matrix(grid.n)
    s = d.T @ (dcoeff[:, None] * d)
    return 0.5 * (s + s.T)


def poincare_constant(grid):
    """Sharp constant c(t) with ||f - mean|| <= c(t) ||grad f|| at this time.

    Computed as 1/sqrt(lambda_1) from the smallest nonzero generalized
    eigenvalue of the stiffness/mass pair.
    """
    s = laplace_beltrami_matrix(grid)
    m = np.diag(mass_weights(grid))
    try:
        vals = scipy.linalg.eigh(s, m, eigvals_only=True)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover
        raise RuntimeError("generalized eigenvalue solve failed") from exc
    # deflate the stiffness kernel (constants, plus the Nyquist mode on even
    # grids) before reading off the spectral gap
    nonzero = vals[vals > 1e-12 * vals[-1]]
    if len(nonzero) == 0:
        raise RuntimeError("stiffness spectrum collapsed")
    return 1.0 / np.sqrt(nonzero[0])


def material_derivative(curve, f, t, dfdt=None, step=DT_GEOM):
    """Time derivative following the flow, evaluated on the theta grid.

    The field evaluator f(t, theta) is given in flow coordinates, so the
    derivative following the material points is the plain t-derivative at
    fixed theta. If an analytic ``dfdt`` evaluator is supplied it is used;
    otherwise a central difference (one-sided of second order at the ends of
    [0, horizon]) with the given step is taken.
    """
    theta = theta_grid(curve.n_grid)
    if dfdt is not None:
        return np.asarray(dfdt(t, theta), dtype=float)
    h = min(step, curve.horizon / 4.0)
    if t - h >= 0.0 and t + h <= curve.horizon:
        return (np.asarray(f(t + h, theta)) - np.asarray(f(t - h, theta))) / (2.0 * h)
    sgn = 1.0 if t - h < 0.0 else -1.0
    f0 = np.asarray(f(t, theta), dtype=float)
    f1 = np.asarray(f(t + sgn * h, theta), dtype=float)
    f2 = np.asarray(f(t + 2.0 * sgn * h, theta), dtype=float)
    return sgn * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)


@dataclass(frozen=True)
class TransportCheck:
    residual: float
    lhs: float
    rhs: float
    boundary_limited: bool


def transport_residual(curve, f, t, dt_fd=1e-4, dfdt=None):
    """Defect of the moving-surface differentiation rule at time t.

    Compares d/dt of the surface integral of f (central finite difference in
    t with step dt_fd) against the integral of the material derivative plus
    f times the tangential divergence of the velocity. When t is within dt_fd
    of 0 or the horizon the step is shrunk (or made one-sided at the exact
    endpoint) and the result is flagged.
    """
    theta = theta_grid(curve.n_grid)

    def integral(s):
        grid_s = build_grid(curve, s)
        return surface_integral(grid_s, np.asarray(f(s, theta), dtype=float))

    h = min(dt_fd, t, curve.horizon - t)
    limited = h < dt_fd * (1.0 - 1e-12)
    if h > 1e-12:
        lhs = (integral(t + h) - integral(t - h)) / (2.0 * h)
    else:
        limited = True
        h = dt_fd
        sgn = 1.0 if t < curve.horizon / 2.0 else -1.0
        lhs = sgn * (
            -3.0 * integral(t) + 4.0 * integral(t + sgn * h) - integral(t + 2.0 * sgn * h)
        ) / (2.0 * h)

    grid = build_grid(curve, t)
    fvals = np.asarray(f(t, theta), dtype=float)
    dot_f = material_derivative(curve, f, t, dfdt=dfdt)
    div_v = tangential_divergence(grid, grid.velocity)
    rhs = surface_integral(grid, dot_f + fvals * div_v)
    return TransportCheck(abs(lhs - rhs), lhs, rhs, limited)


def leibniz_residual(curve, phi, psi, t, dt_fd=1e-4, dphidt=None, dpsidt=None):
    """Defect of the product rule for two fields on the moving curve."""
    theta = theta_grid(curve.n_grid)

    def integral(s):
        grid_s = build_grid(curve, s)
        vals = np.asarray(phi(s, theta)) * np.asarray(psi(s, theta))
        return surface_integral(grid_s, vals)

    h = min(dt_fd, t, curve.horizon - t)
    if h <= 1e-12:
        raise ValueError("t must be interior for the product-rule check")
    lhs = (integral(t + h) - integral(t - h)) / (2.0 * h)
    grid = build_grid(curve, t)
    pv = np.asarray(phi(t, theta), dtype=float)
    qv = np.asarray(psi(t, theta), dtype=float)
    dot_p = material_derivative(curve, phi, t, dfdt=dphidt)
    dot_q = material_derivative(curve, psi, t, dfdt=dpsidt)
    div_v = tangential_divergence(grid, grid.velocity)
    rhs = surface_integral(grid, pv * dot_q + qv * dot_p + pv * qv * div_v)
    return abs(lhs - rhs)


def dump_grid_csv(grid, path):
    header = "theta,g11,sqrt_g,rn_derivative,vx,vy"
    data = np.column_stack(
        [grid.theta_nodes, grid.g11, grid.sqrt_g, grid.rn_derivative, grid.velocity]
    )
    np.savetxt(path, data, delimiter=",", header=header, comments="")


# ---------------------------------------------------------------------------
# Curve families
# ---------------------------------------------------------------------------


def _circle_chart(radius):
    def chart(theta):
        return radius * np.column_stack([np.cos(theta), np.sin(theta)])

    def dchart(theta):
        return radius * np.column_stack([-np.sin(theta), np.cos(theta)])

    def d2chart(theta):
        return -radius * np.column_stack([np.cos(theta), np.sin(theta)])

    return chart, dchart, d2chart


def dilating_circle(radius=1.0, rate=0.5, law="linear", horizon=1.0, n_grid=128):
    """Circle of radius R(t), uniformly dilated by the flow.

    law="linear": R(t) = radius * (1 + rate * t); law="exp": R(t) =
    radius * exp(rate * t). The exponential law is the one to use when a
    check needs a genuinely curved time dependence (a linear law makes many
    time integrands polynomial of degree <= 1, which trapezoidal quadrature
    integrates exactly).
    """
    chart, dchart, d2chart = _circle_chart(radius)
    if law == "linear":
        scale = lambda t: 1.0 + rate * t
        dscale = lambda t: rate
    elif law == "exp":
        scale = lambda t: np.exp(rate * t)
        dscale = lambda t: rate * np.exp(rate * t)
    else:
        raise ValueError(f"unknown dilation law {law!r}")
    return MovingCurve(
        chart=chart,
        dchart=dchart,
        d2chart=d2chart,
        flow=lambda t, th: scale(t) * chart(th),
        dflow_dt=lambda t, th: dscale(t) * chart(th),
        dflow_dtheta=lambda t, th: scale(t) * dchart(th),
        horizon=horizon,
        n_grid=n_grid,
        name="dilating_circle",
        params={"R0": radius, "rate": rate, "law": law},
    )


def static_circle(radius=1.0, horizon=1.0, n_grid=128):
    curve = dilating_circle(radius=radius, rate=0.0, horizon=horizon, n_grid=n_grid)
    return MovingCurve(
        chart=curve.chart,
        dchart=curve.dchart,
        d2chart=curve.d2chart,
        flow=curve.flow,
        dflow_dt=curve.dflow_dt,
        dflow_dtheta=curve.dflow_dtheta,
        horizon=horizon,
        n_grid=n_grid,
        name="static_circle",
        params={"R0": radius},
    )


def oscillating_ellipse(a0=1.0, b0=0.7, amplitude=0.1, frequency=1.0, horizon=1.0, n_grid=128):
    """Ellipse whose semi-axes breathe in opposition at the given frequency."""
    omega = 2.0 * np.pi * frequency

    def axes(t):
        osc = amplitude * np.sin(omega * t)
        return 1.0 + osc, 1.0 - osc

    def daxes(t):
        dosc = amplitude * omega * np.cos(omega * t)
        return dosc, -dosc

    def chart(theta):
        return np.column_stack([a0 * np.cos(theta), b0 * np.sin(theta)])

    def dchart(theta):
        return np.column_stack([-a0 * np.sin(theta), b0 * np.cos(theta)])

    def d2chart(theta):
        return np.column_stack([-a0 * np.cos(theta), -b0 * np.sin(theta)])

    def flow(t, theta):
        fa, fb = axes(t)
        return np.column_stack([fa * a0 * np.cos(theta), fb * b0 * np.sin(theta)])

    def dflow_dt(t, theta):
        da, db = daxes(t)
        return np.column_stack([da * a0 * np.cos(theta), db * b0 * np.sin(theta)])

    def dflow_dtheta(t, theta):
        fa, fb = axes(t)
        return np.column_stack([-fa * a0 * np.sin(theta), fb * b0 * np.cos(theta)])

    if amplitude >= 1.0:
        raise ValueError("amplitude must be < 1 to keep the flow immersed")
    return MovingCurve(
        chart=chart,
        dchart=dchart,
        d2chart=d2chart,
        flow=flow,
        dflow_dt=dflow_dt,
        dflow_dtheta=dflow_dtheta,
        horizon=horizon,
        n_grid=n_grid,
        name="oscillating_ellipse",
        params={"a0": a0, "b0": b0, "amplitude": amplitude, "frequency": frequency},
    )


def custom_fourier(chart_cos, chart_sin, disp_cos=None, disp_sin=None, horizon=1.0, n_grid=128):
    """Curve from Fourier tables: chart coefficients plus an optional
    displacement field applied linearly in time, G(t, X) = X + t * D.

    chart_cos/chart_sin: arrays of shape (modes, 2); row k holds the
    coefficients of cos(k*theta)/sin(k*theta) per component (k starting at 0
    for cos, 1 for sin).
    """
    chart_cos = np.atleast_2d(np.asarray(chart_cos, dtype=float))
    chart_sin = np.atleast_2d(np.asarray(chart_sin, dtype=float))
    disp_cos = None if disp_cos is None else np.atleast_2d(np.asarray(disp_cos, dtype=float))
    disp_sin = None if disp_sin is None else np.atleast_2d(np.asarray(disp_sin, dtype=float))

    def _series(theta, cos_tab, sin_tab, d=0):
        out = np.zeros((len(theta), 2))
        if cos_tab is not None:
            for k, row in enumerate(cos_tab):
                basis = {0: np.cos, 1: lambda x: -np.sin(x), 2: lambda x: -np.cos(x)}[d](k * theta)
                out += np.outer(basis * k ** d if d else basis, row)
        if sin_tab is not None:
            for k1, row in enumerate(sin_tab, start=1):
                basis = {0: np.sin, 1: np.cos, 2: lambda x: -np.sin(x)}[d](k1 * theta)
                out += np.outer(basis * k1 ** d if d else basis, row)
        return out

    def chart(theta):
        return _series(theta, chart_cos, chart_sin)

    def dchart(theta):
        return _series(theta, chart_cos, chart_sin, d=1)

    def d2chart(theta):
        return _series(theta, chart_cos, chart_sin, d=2)

    def disp(theta, d=0):
        if disp_cos is None and disp_sin is None:
            return np.zeros((len(theta), 2))
        return _series(theta, disp_cos, disp_sin, d=d)

    return MovingCurve(
        chart=chart,
        dchart=dchart,
        d2chart=d2chart,
        flow=lambda t, th: chart(th) + t * disp(th),
        dflow_dt=lambda t, th: disp(th),
        dflow_dtheta=lambda t, th: dchart(th) + t * disp(th, d=1),
        horizon=horizon,
        n_grid=n_grid,
        name="custom_fourier",
        params={},
    )


CURVE_FAMILIES = {
    "dilating_circle": dilating_circle,
    "static_circle": static_circle,
    "oscillating_ellipse": oscillating_ellipse,
    "custom_fourier": custom_fourier,
}


def make_curve(family, horizon, n_grid, **params):
    if family not in CURVE_FAMILIES:
        raise ValueError(f"unknown curve family {family!r}")
    return CURVE_FAMILIES[family](horizon=horizon, n_grid=n_grid, **params)

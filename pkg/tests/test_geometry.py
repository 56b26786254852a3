import numpy as np
import pytest

from surfsde import geometry
from surfsde.geometry import (
    GeometryDegenerateError,
    build_grid,
    dilating_circle,
    laplace_beltrami_matrix,
    leibniz_residual,
    mass_weights,
    material_derivative,
    oscillating_ellipse,
    poincare_constant,
    spectral_derivative,
    static_circle,
    surface_integral,
    tangential_divergence,
    tangential_gradient,
    theta_grid,
    transport_residual,
)


class TestBuildGrid:
    def test_circle_radius_two_metric(self):
        curve = static_circle(2.0, n_grid=64)
        grid = build_grid(curve, 0.3)
        assert np.allclose(grid.g11, 4.0, atol=1e-12)
        assert np.allclose(grid.sqrt_g, 2.0, atol=1e-12)

    def test_growing_circle_volume_ratio(self):
        curve = dilating_circle(1.0, 1.0, "linear", 1.0, 64)
        grid = build_grid(curve, 1.0)
        assert np.allclose(grid.rn_derivative, 2.0, atol=1e-12)

    def test_volume_ratio_is_one_at_t0(self):
        for curve in (
            dilating_circle(1.3, 0.7, "exp", 1.0, 64),
            oscillating_ellipse(1.0, 0.6, 0.2, 1.5, 1.0, 64),
        ):
            grid = build_grid(curve, 0.0)
            assert np.array_equal(grid.rn_derivative, np.ones(64))

    def test_velocity_matches_flow_derivative(self):
        curve = dilating_circle(1.0, 0.5, "exp", 1.0, 64)
        grid = build_grid(curve, 0.4)
        rate_scale = 0.5 * np.exp(0.5 * 0.4)
        assert np.allclose(grid.velocity, rate_scale * curve.chart(grid.theta_nodes), atol=1e-12)

    def test_degenerate_metric_names_node(self):
        # pinched flow: the chart derivative vanishes at theta=0
        curve = geometry.MovingCurve(
            chart=lambda th: np.column_stack([np.cos(th), np.sin(th)]),
            dchart=lambda th: np.column_stack([-np.sin(th), np.cos(th)]),
            flow=lambda t, th: (1 - t) * np.column_stack([np.cos(th), np.sin(th)]),
            dflow_dt=lambda t, th: -np.column_stack([np.cos(th), np.sin(th)]),
            dflow_dtheta=lambda t, th: (1 - t) * np.column_stack([-np.sin(th), np.cos(th)]),
            horizon=1.0,
            n_grid=16,
        )
        with pytest.raises(GeometryDegenerateError, match="node"):
            build_grid(curve, 1.0)

    def test_fallback_derivatives_match_analytic_family(self):
        # a curve supplied without derivative evaluators falls back to
        # spectral theta-differentiation and central time differencing
        rich = dilating_circle(1.0, 0.6, "exp", 1.0, 64)
        bare = geometry.MovingCurve(
            chart=rich.chart,
            dchart=rich.dchart,
            flow=rich.flow,
            horizon=1.0,
            n_grid=64,
        )
        g_rich = build_grid(rich, 0.5)
        g_bare = build_grid(bare, 0.5)
        assert np.max(np.abs(g_rich.tangent - g_bare.tangent)) <= 1e-10
        assert np.max(np.abs(g_rich.velocity - g_bare.velocity)) <= 1e-7

    def test_flow_time_zero_must_match_chart(self):
        bad = geometry.MovingCurve(
            chart=lambda th: np.column_stack([np.cos(th), np.sin(th)]),
            dchart=lambda th: np.column_stack([-np.sin(th), np.cos(th)]),
            flow=lambda t, th: (1.1 + t) * np.column_stack([np.cos(th), np.sin(th)]),
            dflow_dt=lambda t, th: np.column_stack([np.cos(th), np.sin(th)]),
            horizon=1.0,
            n_grid=16,
        )
        with pytest.raises(ValueError, match="t=0"):
            bad.validate()


class TestSurfaceIntegral:
    def test_unit_circle_circumference(self, unit_circle):
        grid = build_grid(unit_circle, 0.0)
        assert surface_integral(grid, np.ones(64)) == pytest.approx(2 * np.pi, abs=1e-12)

    def test_zero_field(self, unit_circle):
        grid = build_grid(unit_circle, 0.0)
        assert surface_integral(grid, np.zeros(64)) == 0.0

    def test_odd_mode_vanishes(self, unit_circle):
        grid = build_grid(unit_circle, 0.0)
        assert abs(surface_integral(grid, np.cos(grid.theta_nodes))) < 1e-12

    def test_length_mismatch_rejected(self, unit_circle):
        grid = build_grid(unit_circle, 0.0)
        with pytest.raises(ValueError, match="nodal values"):
            surface_integral(grid, np.ones(63))

    def test_spectral_quadrature_accuracy(self):
        # periodic trapezoid rule on a smooth non-circular integrand: a
        # coarse grid already agrees with a fine one to near roundoff
        vals = {}
        for n in (64, 256):
            curve = oscillating_ellipse(1.0, 0.6, 0.2, 1.0, 1.0, n)
            grid = build_grid(curve, 0.4)
            th = grid.theta_nodes
            vals[n] = surface_integral(grid, np.exp(np.cos(th)) + 0.3 * np.sin(2 * th))
        assert abs(vals[64] - vals[256]) <= 1e-12 * abs(vals[256])


class TestSpectralDerivative:
    def test_exact_on_resolvable_modes(self):
        n = 64
        th = theta_grid(n)
        d = geometry.fourier_diff_matrix(n)
        for k in (1, 5, n // 2 - 1):
            err_fft = np.max(np.abs(spectral_derivative(np.sin(k * th)) - k * np.cos(k * th)))
            err_mat = np.max(np.abs(d @ np.sin(k * th) - k * np.cos(k * th)))
            assert err_fft <= 1e-10
            assert err_mat <= 1e-10


class TestTangentialCalculus:
    def test_gradient_of_constant(self, unit_circle):
        grid = build_grid(unit_circle, 0.0)
        assert np.max(np.abs(tangential_gradient(grid, np.full(64, 3.7)))) < 1e-12

    def test_gradient_magnitude_mode_one(self):
        curve = static_circle(1.0, n_grid=128)
        grid = build_grid(curve, 0.0)
        th = grid.theta_nodes
        grad = tangential_gradient(grid, np.sin(th))
        assert np.max(np.abs(np.linalg.norm(grad, axis=1) - np.abs(np.cos(th)))) < 1e-8

    def test_gradient_of_first_coordinate(self, unit_circle):
        grid = build_grid(unit_circle, 0.0)
        th = grid.theta_nodes
        grad = tangential_gradient(grid, np.cos(th))  # x1 restricted to the circle
        expected = np.column_stack([np.sin(th) ** 2, -np.sin(th) * np.cos(th)])
        assert np.max(np.abs(grad - expected)) < 1e-10

    def test_divergence_of_zero(self, unit_circle):
        grid = build_grid(unit_circle, 0.0)
        assert np.max(np.abs(tangential_divergence(grid, np.zeros((64, 2))))) == 0.0

    def test_divergence_of_position_field(self, unit_circle):
        grid = build_grid(unit_circle, 0.0)
        div = tangential_divergence(grid, grid.position)
        assert np.max(np.abs(div - 1.0)) < 1e-10

    def test_divergence_of_constant_field(self, unit_circle):
        grid = build_grid(unit_circle, 0.0)
        w = np.tile([1.0, 0.0], (64, 1))
        assert np.max(np.abs(tangential_divergence(grid, w))) < 1e-12

    def test_divergence_of_projected_field(self, unit_circle):
        # tangential part of e1 has divergence -(e1 . normal) * curvature
        grid = build_grid(unit_circle, 0.0)
        th = grid.theta_nodes
        w = np.column_stack([np.sin(th) ** 2, -np.sin(th) * np.cos(th)])
        assert np.max(np.abs(tangential_divergence(grid, w) + np.cos(th))) < 1e-10


class TestLaplaceBeltrami:
    def test_fourier_eigenfunctions(self):
        curve = static_circle(1.0, n_grid=256)
        grid = build_grid(curve, 0.0)
        s = laplace_beltrami_matrix(grid)
        m = mass_weights(grid)
        th = grid.theta_nodes
        for k in range(1, 5):
            f = np.cos(k * th)
            assert np.max(np.abs(s @ f - k ** 2 * (m * f))) < 1e-8

    def test_radius_two_eigenvalue(self):
        grid = build_grid(static_circle(2.0, n_grid=128), 0.0)
        s = laplace_beltrami_matrix(grid)
        m = mass_weights(grid)
        f = np.cos(grid.theta_nodes)
        assert np.max(np.abs(s @ f - 0.25 * (m * f))) < 1e-10

    def test_symmetry_and_kernel(self, ellipse_gram):
        for idx in (0, 8, 16):
            s = ellipse_gram.stiffness[idx]
            assert np.max(np.abs(s - s.T)) <= 1e-12
            assert np.max(np.abs(s @ np.ones(ellipse_gram.n_grid))) <= 1e-10

    def test_weak_form_matches_strong_local_formula(self):
        # independent oracle: the pointwise divergence-form expression
        # (1/sqrt(g)) d/dtheta(g^{-1} sqrt(g) df/dtheta), evaluated
        # spectrally on a non-circular geometry
        curve = oscillating_ellipse(1.0, 0.6, 0.2, 1.0, 1.0, 128)
        grid = build_grid(curve, 0.4)
        th = grid.theta_nodes
        f = np.cos(2 * th) + 0.5 * np.sin(3 * th)
        s = laplace_beltrami_matrix(grid)
        weak = (s @ f) / mass_weights(grid)
        flux = (grid.sqrt_g / grid.g11) * spectral_derivative(f)
        strong = -spectral_derivative(flux) / grid.sqrt_g
        assert np.max(np.abs(weak - strong)) <= 1e-9 * max(1.0, np.max(np.abs(strong)))


class TestPoincare:
    def test_unit_circle(self):
        grid = build_grid(static_circle(1.0, n_grid=128), 0.0)
        assert poincare_constant(grid) == pytest.approx(1.0, abs=1e-6)

    def test_radius_scaling(self):
        grid = build_grid(static_circle(3.0, n_grid=128), 0.0)
        assert poincare_constant(grid) == pytest.approx(3.0, abs=3e-6)

    def test_growing_circle_monotone(self):
        curve = dilating_circle(1.0, 1.0, "linear", 1.0, 96)
        consts = [poincare_constant(build_grid(curve, t)) for t in (0.0, 0.5, 1.0)]
        for c, t in zip(consts, (0.0, 0.5, 1.0)):
            assert c == pytest.approx(1.0 + t, rel=1e-6)
        assert consts[0] < consts[1] < consts[2]

    def test_sharpness_on_random_fields(self, rng):
        grid = build_grid(static_circle(1.0, n_grid=64), 0.0)
        s = laplace_beltrami_matrix(grid)
        m = mass_weights(grid)
        c = poincare_constant(grid)
        from surfsde.spaces import _stiffness_kernel_basis

        kernel = _stiffness_kernel_basis(64)
        for _ in range(100):
            f = rng.standard_normal(64)
            for col in kernel.T:
                w = m * col
                f = f - col * (np.dot(w, f) / np.dot(w, col))
            l2 = np.dot(m, f ** 2)
            h1 = float(f @ s @ f)
            assert np.sqrt(l2) <= c * np.sqrt(h1) + 1e-9


class TestMaterialDerivative:
    def test_static_time_independent(self, unit_circle):
        out = material_derivative(unit_circle, lambda t, th: np.sin(th), 0.5)
        assert np.max(np.abs(out)) < 1e-9

    def test_plain_time_ramp(self, unit_circle):
        out = material_derivative(unit_circle, lambda t, th: np.full_like(th, t), 0.5)
        assert np.max(np.abs(out - 1.0)) < 1e-9

    def test_squared_radius_on_growing_circle(self):
        curve = dilating_circle(1.0, 1.0, "linear", 1.0, 64)

        def f(t, th):  # |x|^2 along the flow
            pos = curve.flow(t, th)
            return np.einsum("ij,ij->i", pos, pos)

        for t in (0.25, 0.5):
            out = material_derivative(curve, f, t)
            assert np.max(np.abs(out - 2 * (1 + t))) < 1e-8

    def test_analytic_derivative_is_used(self, unit_circle):
        out = material_derivative(
            unit_circle, lambda t, th: np.sin(th) * t, 0.5, dfdt=lambda t, th: np.sin(th)
        )
        assert np.array_equal(out, np.sin(theta_grid(64)))


class TestTransportFormula:
    def test_dilating_circle_constant_field(self):
        curve = dilating_circle(1.0, 0.5, "linear", 1.0, 256)
        check = transport_residual(curve, lambda t, th: np.ones_like(th), 0.5, dt_fd=1e-4)
        assert check.lhs == pytest.approx(np.pi, rel=1e-9)
        assert check.rhs == pytest.approx(np.pi, rel=1e-9)
        assert check.residual < 1e-6
        assert not check.boundary_limited

    def test_static_curve_any_field(self, unit_circle):
        check = transport_residual(unit_circle, lambda t, th: np.cos(3 * th) + 2.0, 0.5)
        assert check.residual < 1e-10

    def test_rate_in_step_two_families(self):
        families = [
            dilating_circle(1.0, 0.5, "linear", 1.0, 128),
            oscillating_ellipse(1.0, 0.7, 0.15, 1.0, 1.0, 128),
        ]
        fields = [
            lambda t, th: (1.0 + t) ** 2 * (1.0 + 0.5 * np.cos(th)),
            lambda t, th: np.exp(-t) * np.sin(th) ** 2 + t * np.cos(2 * th),
            lambda t, th: (1.0 + np.sin(t)) * (1.0 + 0.3 * np.cos(2 * th)),
        ]
        for curve in families:
            for f in fields:
                res = [
                    transport_residual(curve, f, 0.5, dt_fd=dt).residual
                    for dt in (1e-2, 5e-3, 2.5e-3)
                ]
                rates = np.log2(np.array(res[:-1]) / np.array(res[1:]))
                assert min(rates) >= 1.0

    def test_boundary_fallback_flag(self):
        curve = dilating_circle(1.0, 0.5, "linear", 1.0, 64)
        check = transport_residual(curve, lambda t, th: np.ones_like(th), 0.0, dt_fd=1e-4)
        assert check.boundary_limited
        assert check.residual < 1e-4

    def test_leibniz_product_rule(self):
        curve = dilating_circle(1.0, 0.5, "linear", 1.0, 128)
        res = leibniz_residual(
            curve,
            lambda t, th: np.cos(th) + 0.2 * t,
            lambda t, th: np.sin(th) * (1.0 + 0.1 * t),
            0.5,
            dt_fd=2e-3,
        )
        assert res < 1e-5


class TestCustomFourier:
    def test_circle_from_tables(self):
        curve = geometry.custom_fourier(
            chart_cos=[[0.0, 0.0], [1.0, 0.0]],  # k=0 offset row, then cos -> x
            chart_sin=[[0.0, 1.0]],              # sin -> y
            horizon=1.0,
            n_grid=64,
        ).validate()
        grid = build_grid(curve, 0.7)
        assert np.allclose(grid.g11, 1.0, atol=1e-12)
        assert np.allclose(grid.rn_derivative, 1.0, atol=1e-12)

    def test_displacement_flow_transport(self):
        curve = geometry.custom_fourier(
            chart_cos=[[0.0, 0.0], [1.0, 0.0]],
            chart_sin=[[0.0, 1.0]],
            disp_cos=[[0.0, 0.0], [0.3, 0.0], [0.05, 0.02]],
            disp_sin=[[0.0, 0.25]],
            horizon=1.0,
            n_grid=128,
        ).validate()
        res = [
            transport_residual(curve, lambda t, th: 1.0 + 0.2 * np.cos(th), 0.5, dt_fd=dt).residual
            for dt in (1e-2, 5e-3)
        ]
        assert np.log2(res[0] / res[1]) >= 1.0

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError, match="family"):
            geometry.make_curve("klein_bottle", horizon=1.0, n_grid=32)


def test_grid_csv_dump(tmp_path, unit_circle):
    grid = build_grid(unit_circle, 0.0)
    path = tmp_path / "grid.csv"
    geometry.dump_grid_csv(grid, path)
    header = path.read_text().splitlines()[0]
    assert header == "theta,g11,sqrt_g,rn_derivative,vx,vy"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (64, 6)
    assert np.allclose(data[:, 1], 1.0)

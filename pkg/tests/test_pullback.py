import numpy as np
import pytest

from surfsde.pullback import (
    CflError,
    DiffeomorphismError,
    DomainMap,
    assemble_A1_A2,
    bump_map,
    diffusion_part,
    dilation_map,
    equivalence_table,
    identity_map,
    interior_mesh,
    moving_l2_norms,
    solve_fixed_domain,
    solve_moving_reference,
    transformed_coefficients,
    weighted_pairing,
)


class TestDomainMap:
    def test_families_validate(self):
        for dmap in (identity_map(), dilation_map(1.0), bump_map(0.3)):
            dmap.validate()

    def test_inverse_roundtrip(self):
        dmap = bump_map(0.3)
        y = np.linspace(0.05, 0.95, 19)
        x = dmap.r(0.7, y)
        assert np.max(np.abs(dmap.rbar(0.7, x) - y)) < 1e-10

    def test_degenerate_jacobian_rejected(self):
        bad = DomainMap(
            r=lambda t, y: (1.0 - 2.0 * t) * np.asarray(y, dtype=float),
            dr_dy=lambda t, y: np.full_like(np.asarray(y, dtype=float), 1.0 - 2.0 * t),
            dr_dt=lambda t, y: -2.0 * np.asarray(y, dtype=float),
            d2r_dy2=lambda t, y: np.zeros_like(np.asarray(y, dtype=float)),
            horizon=1.0,
        )
        with pytest.raises(DiffeomorphismError):
            bad.jacobian(0.5, np.array([0.5]))

    def test_bump_amplitude_guard(self):
        with pytest.raises(ValueError):
            bump_map(1.5)


class TestTransformedCoefficients:
    def test_identity(self):
        a, b1, b2 = transformed_coefficients(identity_map(), 0.3, np.array([0.2, 0.8]))
        assert np.array_equal(a, np.ones(2))
        assert np.max(np.abs(b1)) == 0.0
        assert np.max(np.abs(b2)) == 0.0

    def test_dilation_closed_form(self):
        dmap = dilation_map(1.0)
        t = 0.5
        y = np.array([0.25, 0.5, 0.75])
        a, b1, b2 = transformed_coefficients(dmap, t, y)
        assert np.allclose(a, 1.0 / (1.0 + t) ** 2, atol=1e-15)
        assert np.max(np.abs(b1)) == 0.0
        assert np.allclose(b2, -y / (1.0 + t), atol=1e-15)

    def test_bump_against_finite_difference_oracle(self):
        # differentiate the defining compositions of the inverse map directly
        dmap = bump_map(0.3)
        t = 0.4
        y = np.array([0.3, 0.6])
        x = dmap.r(t, y)
        h = 1e-4  # second differences of the numerically inverted map need a
        # step large enough to dominate the inversion noise
        a11_fn = lambda yy: transformed_coefficients(dmap, t, yy)[0]
        drbar = (dmap.rbar(t, x + h) - dmap.rbar(t, x - h)) / (2 * h)
        d2rbar = (dmap.rbar(t, x + h) - 2 * dmap.rbar(t, x) + dmap.rbar(t, x - h)) / h ** 2
        da11 = (a11_fn(y + h) - a11_fn(y - h)) / (2 * h)
        rbar_t = (dmap.rbar(t + h, x) - dmap.rbar(t - h, x)) / (2 * h)
        a, b1, b2 = transformed_coefficients(dmap, t, y)
        assert np.max(np.abs(a - drbar ** 2)) < 1e-7
        assert np.max(np.abs(b1 - (-da11 + d2rbar))) < 1e-7
        assert np.max(np.abs(b2 - rbar_t)) < 1e-7


class TestAssembly:
    def test_identity_map_standard_stencil(self):
        a1, a2 = assemble_A1_A2(identity_map(), 0.0, 8)
        h = 1.0 / 8
        lap = (np.diag(np.full(7, -2.0)) + np.diag(np.ones(6), 1) + np.diag(np.ones(6), -1)) / h ** 2
        assert np.max(np.abs(a1 - lap)) < 1e-12
        assert np.max(np.abs(a2)) == 0.0

    def test_diffusion_block_symmetric(self):
        y, h = interior_mesh(32)
        k = diffusion_part(bump_map(0.3), 0.5, y, h)
        assert np.max(np.abs(k - k.T)) <= 1e-12

    def test_weighted_duality_nonpositive(self, rng):
        # the Jacobian-weighted quadratic form of the diffusion operator
        # keeps the dissipativity of the moving-domain Laplacian
        for dmap in (identity_map(), dilation_map(1.0)):
            y, h = interior_mesh(32)
            a1, _ = assemble_A1_A2(dmap, 0.5, 32)
            for _ in range(100):
                v = rng.standard_normal(31)
                assert weighted_pairing(dmap, 0.5, y, h, a1 @ v, v) <= 1e-10

    def test_weighted_duality_bump_refines_to_nonpositive(self, rng):
        # with a non-affine map the centered first-order term breaks the sign
        # only at the discretization level; the positive part shrinks with h
        worst = []
        for n_cells in (32, 64, 128):
            y, h = interior_mesh(n_cells)
            a1, _ = assemble_A1_A2(bump_map(0.3), 0.5, n_cells)
            biggest = 0.0
            for _ in range(50):
                v = rng.standard_normal(n_cells - 1)
                v /= np.sqrt(h * np.dot(v, v))
                biggest = max(biggest, weighted_pairing(bump_map(0.3), 0.5, y, h, a1 @ v, v))
            worst.append(biggest)
        assert worst[2] <= max(worst[0], 1e-8)


class TestFixedDomainSolver:
    def test_heat_kernel_eigenmode(self):
        y, _ = interior_mesh(128)
        _, traj = solve_fixed_domain(identity_map(), 128, 1e-4, np.sin(np.pi * y), horizon=0.1)
        exact = np.exp(-np.pi ** 2 * 0.1) * np.sin(np.pi * y)
        assert np.max(np.abs(traj[-1] - exact)) <= 1e-3

    def test_zero_initial_data(self):
        y, _ = interior_mesh(32)
        _, traj = solve_fixed_domain(dilation_map(1.0), 32, 1e-3, np.zeros(31), horizon=0.05)
        assert np.max(np.abs(traj)) == 0.0

    def test_discrete_maximum_principle(self):
        y, h = interior_mesh(64)
        v0 = np.maximum(0.0, 1.0 - 8.0 * np.abs(y - 0.5))
        dt = 1e-4
        _, traj = solve_fixed_domain(dilation_map(1.0), 64, dt, v0, horizon=0.05)
        assert traj.min() >= -(h ** 2 + dt)

    def test_cfl_guard(self):
        with pytest.raises(CflError):
            solve_fixed_domain(dilation_map(5.0), 16, 0.05, np.zeros(15), horizon=0.2)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            solve_fixed_domain(identity_map(), 16, 1e-3, np.zeros(10), horizon=0.01)


class TestMovingReferenceSolver:
    def test_identity_map_agrees_with_fixed(self):
        y, _ = interior_mesh(64)
        v0 = np.sin(np.pi * y)
        _, fixed = solve_fixed_domain(identity_map(), 64, 1e-4, v0, horizon=0.05)
        _, moving = solve_moving_reference(identity_map(), 64, 1e-4, v0, horizon=0.05)
        assert np.max(np.abs(fixed - moving)) <= 5e-4  # scheme difference only

    def test_dilation_equivalence_rate(self):
        dmap = dilation_map(1.0, horizon=0.1)
        rows = equivalence_table(
            dmap, lambda y: np.sin(np.pi * y), [32, 64, 128], lambda h: 0.25 * h * h, 0.1
        )
        rates = [r["rate"] for r in rows if r["rate"] is not None]
        assert min(rates) >= 1.8

    def test_bump_equivalence_rate(self):
        dmap = bump_map(0.3, horizon=0.1)
        rows = equivalence_table(
            dmap,
            lambda y: np.sin(np.pi * y) + 0.3 * np.sin(2 * np.pi * y),
            [32, 64, 128],
            lambda h: 0.25 * h * h,
            0.1,
        )
        rates = [r["rate"] for r in rows if r["rate"] is not None]
        assert min(rates) >= 1.8

    def test_energy_decay_on_growing_domain(self):
        dmap = dilation_map(1.0, horizon=0.1)
        y, _ = interior_mesh(64)
        _, traj = solve_moving_reference(dmap, 64, 1e-4, np.sin(np.pi * y), horizon=0.1)
        norms = moving_l2_norms(dmap, 64, 1e-4, traj)
        assert np.all(np.diff(norms) <= 1e-12)

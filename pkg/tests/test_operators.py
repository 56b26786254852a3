import numpy as np
import pytest

from surfsde import geometry, spaces
from surfsde.operators import (
    ADDITIVE,
    MULTIPLICATIVE,
    DriftAction,
    LinearHeatNonlinearity,
    NoiseModel,
    PorousMediaNonlinearity,
    StefanModel,
    StefanNonlinearity,
    ZeroDriftNonlinearity,
    beta_eval,
    check_noise_growth,
    check_noise_lipschitz,
    check_psi_conditions,
    drift_A,
    fourier_seed_basis,
    no_noise,
    noise_B,
    noise_spectrum,
    psi_eval,
    verify_H,
)


class TestBeta:
    def test_plateau(self):
        assert beta_eval((1.0, 1.0, 1.0), 0.5) == 0.0

    def test_outer_branches(self):
        assert beta_eval((2.0, 3.0, 1.0), -2.0) == -4.0
        assert beta_eval((2.0, 3.0, 1.0), 3.0) == 6.0

    def test_zero_at_origin(self):
        for params in ((1.0, 1.0, 1.0), (2.0, 3.0, 0.5), (0.3, 7.0, 2.0)):
            assert beta_eval(params, 0.0) == 0.0

    def test_monotone_exactly(self, rng):
        beta = StefanNonlinearity(1.3, 0.7, 0.9)
        r = np.sort(rng.uniform(-50, 50, size=500))
        vals = beta(r)
        assert np.all((vals[1:] - vals[:-1]) * (r[1:] - r[:-1]) >= 0.0)

    def test_rejects_nonpositive_params(self):
        with pytest.raises(ValueError):
            StefanNonlinearity(a=0.0)
        with pytest.raises(ValueError):
            StefanNonlinearity(rho=-1.0)


class TestPsiEval:
    def test_power_law(self):
        assert psi_eval(PorousMediaNonlinearity(3.0), 2.0) == pytest.approx(4.0)

    def test_power_two_is_identity(self):
        assert psi_eval(PorousMediaNonlinearity(2.0), -5.0) == -5.0

    def test_zero_for_all_models(self):
        for nonlin in (
            StefanNonlinearity(1, 1, 1),
            PorousMediaNonlinearity(4.0),
            LinearHeatNonlinearity(),
            ZeroDriftNonlinearity(),
        ):
            assert psi_eval(nonlin, 0.0) == 0.0

    def test_rejects_exponent_below_one(self):
        with pytest.raises(ValueError):
            PorousMediaNonlinearity(0.5)


class TestPsiConditions:
    def test_stefan_plateau(self):
        rep = check_psi_conditions(StefanNonlinearity(1, 1, 1), p=2.0)
        assert rep.monotone
        assert rep.coercivity_a > 0.0
        assert rep.coercivity_c4 > 0.0  # the plateau forces a cushion
        assert rep.passed

    def test_porous_media_tight_constants(self):
        rep = check_psi_conditions(PorousMediaNonlinearity(4.0), p=4.0)
        assert rep.coercivity_a == pytest.approx(1.0, abs=1e-9)
        assert rep.coercivity_c4 <= 1e-6
        assert rep.growth_c6 == pytest.approx(1.0, abs=1e-9)
        assert rep.growth_c5 <= 1e-6

    def test_decreasing_law_fails_with_witness(self):
        class Decreasing:
            p_growth = 2.0

            def __call__(self, s):
                return -np.asarray(s, dtype=float)

        rep = check_psi_conditions(Decreasing(), p=2.0)
        assert not rep.monotone
        assert not rep.passed
        lo, hi = rep.monotone_witness
        assert lo < hi


class TestDriftA:
    def test_zero_state_zero_functional(self, ellipse_gram, rng):
        model = StefanModel(StefanNonlinearity(1, 1, 1), no_noise(1))
        act = drift_A(ellipse_gram, model, ellipse_gram.time_nodes[4], np.zeros(64))
        v = spaces.random_zero_mean(ellipse_gram, rng)
        assert act.pair(v) == 0.0
        assert np.max(np.abs(act.representative)) <= 1e-12

    def test_static_linear_heat_is_negative_mass_pairing(self, unit_circle_gram, rng):
        model = StefanModel(LinearHeatNonlinearity(), no_noise(1))
        u = spaces.random_zero_mean(unit_circle_gram, rng, smooth=True)
        v = spaces.random_zero_mean(unit_circle_gram, rng, smooth=True)
        act = drift_A(unit_circle_gram, model, 0.0, u)
        l2 = float(np.dot(unit_circle_gram.mass_weights * u, v))
        assert act.pair(v) == pytest.approx(-l2, rel=1e-12)

    def test_pairing_reproduces_negative_mass_matrix(self, unit_circle_gram):
        model = StefanModel(LinearHeatNonlinearity(), no_noise(1))
        basis = fourier_seed_basis(unit_circle_gram, 4)
        mat = np.empty((4, 4))
        for j in range(4):
            act = drift_A(unit_circle_gram, model, 0.0, basis[:, j])
            for i in range(4):
                mat[i, j] = act.pair(basis[:, i])
        m0 = unit_circle_gram.mass_weights
        expected = -(basis * m0[:, None]).T @ basis
        assert np.max(np.abs(mat - expected.T)) <= 1e-12

    def test_representative_realizes_functional(self, ellipse_gram, rng):
        model = StefanModel(StefanNonlinearity(1, 1, 1), no_noise(1))
        t = ellipse_gram.time_nodes[9]
        u = spaces.random_zero_mean(ellipse_gram, rng, smooth=True)
        act = drift_A(ellipse_gram, model, t, u)
        rep = ellipse_gram.project_pivot(act.representative)
        for _ in range(5):
            v = spaces.random_zero_mean(ellipse_gram, rng, smooth=True)
            assert spaces.hminus_inner(ellipse_gram, 0.0, rep, v) == pytest.approx(
                act.pair(v), rel=1e-9, abs=1e-12
            )

    def test_pullback_roundtrip(self, ellipse_gram, rng):
        # pushing the untransformed representative back through the pairing
        # operator must reproduce the transformed functional
        model = StefanModel(StefanNonlinearity(1, 1, 1), no_noise(1))
        t = ellipse_gram.time_nodes[12]
        u = spaces.random_zero_mean(ellipse_gram, rng, smooth=True)
        act = drift_A(ellipse_gram, model, t, u)
        fwd = spaces.iota_star(ellipse_gram, t, act.pullback_representative)
        for _ in range(5):
            v = spaces.random_zero_mean(ellipse_gram, rng, smooth=True)
            lhs = spaces.hminus_inner(ellipse_gram, 0.0, ellipse_gram.project_pivot(fwd), v)
            assert lhs == pytest.approx(act.pair(v), rel=1e-9, abs=1e-12)

    def test_representatives_zero_mean(self, ellipse_gram, rng):
        model = StefanModel(PorousMediaNonlinearity(3.0), no_noise(1))
        u = spaces.random_zero_mean(ellipse_gram, rng, smooth=True)
        act = drift_A(ellipse_gram, model, ellipse_gram.time_nodes[7], u)
        vol = ellipse_gram.volume
        for rep in (act.representative, act.pullback_representative):
            mean = abs(np.dot(ellipse_gram.mass_weights, rep)) / vol
            assert mean <= 1e-10 * max(1.0, np.max(np.abs(rep)))

    def test_change_of_measure_identity(self, ellipse_gram, rng):
        # pairing the increment against (u - v) on the reference equals the
        # moved-measure integral against the scaled difference
        model = StefanModel(StefanNonlinearity(1, 1, 1), no_noise(1))
        idx = 10
        t = ellipse_gram.time_nodes[idx]
        grid = ellipse_gram.grids[idx]
        irn = 1.0 / grid.rn_derivative
        u, v = spaces.random_zero_mean(ellipse_gram, rng, 2, smooth=True)
        du = model.psi(u * irn) - model.psi(v * irn)
        route_a = float(np.dot(du * (u - v), ellipse_gram.mass_weights))
        mt = geometry.mass_weights(grid)
        route_b = float(np.dot(du * (u * irn - v * irn), mt))
        assert route_a == pytest.approx(route_b, rel=1e-10, abs=1e-14)


class TestNoiseB:
    def test_additive_single_mode(self, unit_circle_gram):
        model = StefanModel(
            StefanNonlinearity(1, 1, 1),
            NoiseModel((1.0, 0.0, 0.0), coupling=ADDITIVE),
        )
        phi = fourier_seed_basis(unit_circle_gram, 3)
        out = noise_B(unit_circle_gram, model, 0.0, np.zeros(64), phi=phi)
        assert np.array_equal(out[0], phi[:, 0])
        assert np.max(np.abs(out[1:])) == 0.0

    def test_multiplicative_vanishes_at_zero(self, ellipse_gram):
        model = StefanModel(
            StefanNonlinearity(1, 1, 1),
            NoiseModel(noise_spectrum(0.5, 4), coupling=MULTIPLICATIVE),
        )
        out = noise_B(ellipse_gram, model, ellipse_gram.time_nodes[3], np.zeros(64))
        assert np.max(np.abs(out)) == 0.0

    def test_outputs_zero_mean(self, ellipse_gram, rng):
        model = StefanModel(
            StefanNonlinearity(1, 1, 1),
            NoiseModel(noise_spectrum(0.5, 4), coupling=MULTIPLICATIVE),
        )
        u = spaces.random_zero_mean(ellipse_gram, rng, smooth=True)
        out = noise_B(ellipse_gram, model, ellipse_gram.time_nodes[6], u)
        for sigma in out:
            mean = abs(np.dot(ellipse_gram.mass_weights, sigma)) / ellipse_gram.volume
            assert mean <= 1e-10 * max(1.0, np.max(np.abs(sigma)))

    def test_lipschitz_quotient_below_bound(self, ellipse_gram):
        model = StefanModel(
            StefanNonlinearity(1, 1, 1),
            NoiseModel(noise_spectrum(0.5, 4), coupling=MULTIPLICATIVE),
        )
        worst = check_noise_lipschitz(ellipse_gram, model, n_pairs=60, seed=3)
        assert worst <= model.noise.f_bound

    def test_growth_quotient_below_bound(self, ellipse_gram):
        model = StefanModel(
            StefanNonlinearity(1, 1, 1),
            NoiseModel(noise_spectrum(0.5, 4), coupling=ADDITIVE),
        )
        worst = check_noise_growth(ellipse_gram, model, n_samples=60, seed=3)
        assert worst <= model.noise.f_bound

    def test_rejects_unknown_coupling(self):
        with pytest.raises(ValueError):
            NoiseModel((0.1,), coupling="nemytskii")

    def test_growth_exponent_consistency(self):
        with pytest.raises(ValueError):
            StefanModel(PorousMediaNonlinearity(4.0), no_noise(1), p_growth=2.0)


@pytest.fixture(scope="module")
def model():
    return StefanModel(
        StefanNonlinearity(1, 1, 1),
        NoiseModel(noise_spectrum(0.3, 4), coupling=MULTIPLICATIVE),
    )


class TestVerifyH:
    def test_h1_jumps_shrink(self, ellipse_gram, model):
        rep = verify_H(ellipse_gram, model, "H1", n_samples=30, seed=5)
        jumps = rep.measured["jumps"]
        assert rep.passed
        assert jumps[-1] <= 0.55 * jumps[0] + 1e-12

    def test_h2_monotone_pairing_nonpositive(self, ellipse_gram, model):
        rep = verify_H(ellipse_gram, model, "H2", n_samples=100, seed=5)
        assert rep.passed
        assert rep.measured["max_pairing"] <= 1e-12

    def test_h2_equal_arguments_vanish(self, ellipse_gram, model, rng):
        u = spaces.random_zero_mean(ellipse_gram, rng, smooth=True)
        idx = 5
        irn = 1.0 / ellipse_gram.grids[idx].rn_derivative
        du = model.psi(u * irn) - model.psi(u * irn)
        assert np.max(np.abs(du)) == 0.0

    def test_h3_positive_constant(self, ellipse_gram, model):
        rep = verify_H(ellipse_gram, model, "H3", n_samples=40, seed=5)
        assert rep.passed
        assert rep.measured["c"] > 0.0

    def test_h3_linear_heat_rayleigh_oracle(self, unit_circle_gram, rng):
        # for the linear law on the static circle the drift coercivity in the
        # pivot norm is twice the spectral gap of the stiffness/mass pencil
        model = StefanModel(LinearHeatNonlinearity(), no_noise(1))
        lam1 = 1.0 / geometry.poincare_constant(unit_circle_gram.grids[0]) ** 2
        th = geometry.theta_grid(64)
        samples = [np.cos(th), np.sin(th), np.cos(2 * th), np.cos(3 * th) + 0.5 * np.sin(th)]
        measured = np.inf
        for u in samples:
            u = unit_circle_gram.project_pivot(u)
            act = drift_A(unit_circle_gram, model, 0.0, u)
            hsq = spaces.hminus_inner(unit_circle_gram, 0.0, u, u)
            measured = min(measured, -2.0 * act.pair(u) / hsq)
        assert measured == pytest.approx(2.0 * lam1, rel=0.1)

    def test_h4_growth_constant_finite(self, ellipse_gram, model):
        rep = verify_H(ellipse_gram, model, "H4", n_samples=30, seed=5)
        assert rep.passed
        assert np.isfinite(rep.measured["C"])

    def test_h5_noise_growth(self, ellipse_gram, model):
        rep = verify_H(ellipse_gram, model, "H5", n_samples=40, seed=5)
        assert rep.passed

    def test_unknown_condition_rejected(self, ellipse_gram, model):
        with pytest.raises(ValueError):
            verify_H(ellipse_gram, model, "H9", n_samples=5)

    def test_porous_media_h2_h3(self, ellipse_gram):
        for p in (2.0, 3.0, 4.0):
            model = StefanModel(
                PorousMediaNonlinearity(p),
                NoiseModel(noise_spectrum(0.3, 4), coupling=ADDITIVE),
            )
            rep2 = verify_H(ellipse_gram, model, "H2", n_samples=40, seed=7)
            rep3 = verify_H(ellipse_gram, model, "H3", n_samples=40, seed=7)
            assert rep2.passed and rep2.measured["max_pairing"] <= 1e-12
            assert rep3.passed and rep3.measured["c"] > 0.0

import numpy as np
import pytest

from swlme.diagnostics import (
    FreeSample,
    check_skew_forms,
    check_total_energy_identity,
    convergence_study,
    energy_report,
    energy_residual,
    gradient_check_entropy,
    residual_C_M_ui,
    stoker_dam_break,
    stoker_intermediate,
)
from swlme.model import ModelParams
from swlme.solver import Grid1D, Scenario, run


def zero_sample(n, size=4, h=1.0):
    z = np.zeros(size)
    zu = np.zeros((size, n))
    return FreeSample(h=np.full(size, h), um=z, u=zu, b=z, dt_h=z, dx_h=z,
                      dt_um=z, dx_um=z, dt_u=zu, dx_u=zu, dx_b=z)


def independent_residuals(s, g):
    """Second expansion of the balance equations, grouped by slot coefficient."""
    w = 1.0 / (2.0 * np.arange(1, s.n_moments + 1) + 1.0)
    T = (s.u**2 * w).sum(axis=-1)
    r_c = 1.0 * s.dt_h + s.um * s.dx_h + s.h * s.dx_um
    r_m = (
        s.um * s.dt_h + s.h * s.dt_um
        + (s.um**2 + T + g * s.h) * s.dx_h
        + 2.0 * s.h * s.um * s.dx_um
        + (2.0 * s.h[:, None] * s.u * w * s.dx_u).sum(axis=-1)
        + g * s.h * s.dx_b
    )
    r_u = (
        s.u * s.dt_h[:, None] + s.h[:, None] * s.dt_u
        + (s.um[:, None] * s.u) * s.dx_h[:, None]
        + (2.0 * s.h[:, None] * s.u) * s.dx_um[:, None]
        + (s.h * s.um)[:, None] * s.dx_u
    )
    return r_c, r_m, r_u


class TestResiduals:
    def test_zero_slots(self):
        R = residual_C_M_ui(zero_sample(2), 9.81)
        assert np.all(R == 0.0)

    def test_constructed_continuity_solution(self):
        # pick dt_h so the mass balance holds; the others stay generic
        rng = np.random.default_rng(20)
        s = FreeSample.random(rng, 50, 1)
        s.dt_h = -(s.dx_h * s.um + s.h * s.dx_um)
        R = residual_C_M_ui(s, 9.81)
        assert np.abs(R[:, 0]).max() <= 1e-14
        assert np.abs(R[:, 1]).min() > 1e-6
        assert np.abs(R[:, 2]).min() > 1e-8

    @pytest.mark.parametrize("n", [0, 1, 3])
    def test_against_independent_expansion(self, n):
        rng = np.random.default_rng(21)
        s = FreeSample.random(rng, 500, n)
        R = residual_C_M_ui(s, 9.81)
        r_c, r_m, r_u = independent_residuals(s, 9.81)
        np.testing.assert_allclose(R[:, 0], r_c, atol=1e-13)
        np.testing.assert_allclose(R[:, 1], r_m, atol=1e-13)
        if n:
            np.testing.assert_allclose(R[:, 2:], r_u, atol=1e-13)


class TestTotalEnergyIdentity:
    def test_zero_slots(self):
        assert check_total_energy_identity(zero_sample(3), 9.81) == 0.0

    @pytest.mark.parametrize("n", [0, 1, 2, 3, 5])
    def test_random_samples(self, n):
        rng = np.random.default_rng(22)
        s = FreeSample.random(rng, 20000, n)
        for g in (1.0, 9.81):
            assert check_total_energy_identity(s, g) <= 1e-12

    def test_plain_shallow_water_reduction(self):
        # independently coded SWE energy residual must agree with N = 0
        rng = np.random.default_rng(23)
        s = FreeSample.random(rng, 500, 0)
        g = 9.81
        dt_e = (
            0.5 * s.dt_h * s.um**2 + s.h * s.um * s.dt_um
            + g * (s.h + s.b) * s.dt_h
        )
        dx_f = (
            0.5 * s.dx_h * s.um**3 + 1.5 * s.h * s.um**2 * s.dx_um
            + g * (s.dx_h * s.um + s.h * s.dx_um) * (s.h + s.b)
            + g * s.h * s.um * (s.dx_h + s.dx_b)
        )
        np.testing.assert_allclose(energy_residual(s, g), dt_e + dx_f, atol=1e-12)

    def test_corruption_is_detected(self):
        rng = np.random.default_rng(24)
        s = FreeSample.random(rng, 1000, 2)
        assert check_total_energy_identity(s, 9.81, flux_scale=1.0 + 1e-6) > 1e-9


class TestSkewForms:
    def test_zero_slots(self):
        forms = check_skew_forms(zero_sample(2), 9.81)
        assert set(forms) >= {"potential_energy", "momentum_skew_average",
                              "moment_skew_average", "total_energy_sum"}
        assert all(v == 0.0 for v in forms.values())

    @pytest.mark.parametrize("n", [0, 1, 2, 3, 5])
    def test_random_samples(self, n):
        rng = np.random.default_rng(25)
        s = FreeSample.random(rng, 20000, n)
        for g in (1.0, 9.81):
            forms = check_skew_forms(s, g)
            worst = max(forms.values())
            assert worst <= 1e-12, max(forms, key=forms.get)

    def test_pressure_split_agreement(self):
        # g h dx(h+b) against g dx(h^2)/2 + g h dx b is pure product rule
        rng = np.random.default_rng(26)
        s = FreeSample.random(rng, 5000, 1)
        assert check_skew_forms(s, 9.81)["momentum_rewrite"] <= 1e-15


class TestGradientCheck:
    def test_rest_state(self):
        W = np.array([[1.0, 0.0, 0.0]])
        assert gradient_check_entropy(W, np.array([0.0]), 10.0) <= 1e-9

    def test_random_states(self):
        rng = np.random.default_rng(27)
        for n in (0, 2, 5):
            W = np.empty((1000, n + 2))
            W[:, 0] = rng.uniform(0.1, 10.0, 1000)
            W[:, 1:] = rng.uniform(-3.0, 3.0, (1000, n + 1))
            b = rng.uniform(0.0, 1.0, 1000)
            for g in (1.0, 9.81):
                assert gradient_check_entropy(W, b, g) <= 1e-6

    def test_step_halving_order(self):
        # truncation-dominated regime: halving the step quarters the error
        rng = np.random.default_rng(28)
        W = np.empty((200, 4))
        W[:, 0] = rng.uniform(0.1, 0.5, 200)
        W[:, 1:] = rng.uniform(1.0, 3.0, (200, 3))
        b = rng.uniform(0.0, 1.0, 200)
        d_coarse = gradient_check_entropy(W, b, 9.81, rel_step=1e-4)
        d_half = gradient_check_entropy(W, b, 9.81, rel_step=5e-5)
        order = np.log2(d_coarse / d_half)
        assert 1.5 <= order <= 2.5
        assert gradient_check_entropy(W, b, 9.81, rel_step=1e-6) < d_coarse


class TestStoker:
    def test_far_field(self):
        W = stoker_dam_break(1.0, 0.1, 9.81, np.array([-100.0, 100.0]), 1.0)
        np.testing.assert_array_equal(W[0], [1.0, 0.0])
        np.testing.assert_array_equal(W[1], [0.1, 0.0])

    def test_intermediate_state_relations(self):
        g = 9.81
        for ratio in (1.1, 2.0, 10.0, 100.0):
            h_r = 1.0 / ratio
            h_m, u_mid, bore = stoker_intermediate(1.0, h_r, g)
            assert h_r < h_m < 1.0
            # depth relation residual
            res = 2.0 * (np.sqrt(g) - np.sqrt(g * h_m)) - (h_m - h_r) * np.sqrt(
                0.5 * g * (h_m + h_r) / (h_m * h_r)
            )
            assert abs(res) <= 1e-13
            # jump conditions across the bore into still water
            mass = h_m * (u_mid - bore) - h_r * (0.0 - bore)
            mom = (h_m * u_mid * (u_mid - bore) + 0.5 * g * h_m**2) - 0.5 * g * h_r**2
            assert abs(mass) <= 1e-12 and abs(mom) <= 1e-12

    def test_profile_is_continuous_across_the_fan(self):
        h_m, u_mid, bore = stoker_intermediate(1.0, 0.25, 9.81)
        c_l, c_m = np.sqrt(9.81), np.sqrt(9.81 * h_m)
        eps = 1e-9
        edges = np.array([-c_l - eps, -c_l + eps, u_mid - c_m - eps, u_mid - c_m + eps])
        W = stoker_dam_break(1.0, 0.25, 9.81, edges, 1.0)
        np.testing.assert_allclose(W[0], W[1], atol=1e-7)
        np.testing.assert_allclose(W[2], W[3], atol=1e-7)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            stoker_intermediate(0.5, 1.0, 9.81)
        with pytest.raises(ValueError):
            stoker_dam_break(1.0, 0.1, 9.81, np.array([0.0]), 0.0)


class TestEnergyReport:
    def test_lake_at_rest_constant_energy(self):
        sc = Scenario(params=ModelParams(g=9.812, N=1), grid=Grid1D(-5.0, 5.0, 100),
                      ic_name="lake_at_rest", ic_params={"surface": 1.0},
                      topo_name="gaussian", topo_params={"height": 0.2},
                      boundary="outflow", t_end=0.5, output_snapshots=5)
        traj = run(sc)
        rep = energy_report(traj, sc.topography, sc.params.g)
        E = rep.total_energy
        assert np.abs(E - E[0]).max() / E[0] <= 1e-12
        assert rep.dissipation_rate.size == E.size - 1

    def test_single_snapshot(self):
        sc = Scenario(params=ModelParams(g=10.0, N=0), grid=Grid1D(0.0, 1.0, 10),
                      ic_name="constant", ic_params={"h": 1.0}, boundary="periodic",
                      t_end=0.0)
        traj = run(sc)
        rep = energy_report(traj, sc.topography, sc.params.g)
        assert rep.times.size == 1 and rep.dissipation_rate.size == 0
        # e = g h^2 / 2 = 5 per unit length
        assert rep.total_energy[0] == pytest.approx(5.0, rel=1e-14)
        assert rep.mass[0] == pytest.approx(1.0, rel=1e-14)


class TestConvergence:
    def base_dam_break(self):
        return Scenario(params=ModelParams(g=9.81, N=0), grid=Grid1D(-5.0, 5.0, 100),
                        ic_name="dam_break", ic_params={"h_l": 1.0, "h_r": 0.1},
                        boundary="outflow", t_end=1.0)

    def test_exact_reference_orders(self):
        rows = convergence_study(self.base_dam_break(), [100, 200])
        assert len(rows) == 2
        assert rows[0][2] is None
        assert 0.4 <= rows[1][2] <= 1.2
        assert rows[1][1] < rows[0][1]

    def test_single_mesh_exact_mode(self):
        rows = convergence_study(self.base_dam_break(), [150])
        assert len(rows) == 1 and rows[0][2] is None

    def test_self_reference_zero_error_row(self):
        sc = Scenario(params=ModelParams(g=9.812, N=1), grid=Grid1D(0.0, 1.0, 32),
                      ic_name="smooth_periodic",
                      ic_params={"h0": 1.0, "h_amp": 0.1, "um_amp": 0.2},
                      boundary="periodic", t_end=0.1)
        rows = convergence_study(sc, [32, 32])
        assert len(rows) == 1
        assert rows[0][1] == 0.0 and rows[0][2] is None

    def test_self_reference_requires_dyadic_meshes(self):
        sc = Scenario(params=ModelParams(g=9.812, N=1), grid=Grid1D(0.0, 1.0, 32),
                      ic_name="smooth_periodic",
                      ic_params={"h0": 1.0, "h_amp": 0.1, "um_amp": 0.2},
                      boundary="periodic", t_end=0.1)
        with pytest.raises(ValueError, match="dyadic"):
            convergence_study(sc, [30, 45])

    def test_self_reference_smooth_order(self):
        sc = Scenario(params=ModelParams(g=9.812, N=1), grid=Grid1D(0.0, 1.0, 32),
                      ic_name="smooth_periodic",
                      ic_params={"h0": 1.0, "h_amp": 0.1, "um_amp": 0.2, "u_amp": 0.05},
                      boundary="periodic", t_end=0.2)
        rows = convergence_study(sc, [64, 128, 256])
        assert len(rows) == 2
        assert rows[1][2] >= 0.9

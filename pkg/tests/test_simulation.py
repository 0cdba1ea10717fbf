"""Closed-loop runner, disturbance admissibility, cost bookkeeping, and the
run-time certificate diagnostics (decrease checks and set Monte-Carlo)."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from it2mpc.lmis import DecisionVars, FixedParams
from it2mpc.plant import LargeScaleSystem, Rule, Subsystem
from it2mpc.simulation import (
    DisturbanceModel,
    InitialInfeasible,
    RecursiveFeasibilityViolation,
    SimulationTrace,
    iss_check,
    lyapunov_value,
    rpi_monte_carlo,
    run_online_loop,
    sample_in_set,
    stage_cost,
    total_cost,
)
from it2mpc.synthesis import SynthesisConfig, build_z

from conftest import (
    build_example1_system,
    build_example2_system,
    controller_mf_family,
    example1_reference_gains,
    example1_reference_params,
    example1_synthesis_params,
    example2_stabilizing_gains,
    model_mf_family,
)


class TestDisturbanceModel:
    def test_every_sample_is_admissible(self):
        system = build_example1_system()
        for kind in ("uniform_ball", "worst_case_boundary", "sinusoidal"):
            for seed in (0, 7, 42):
                seq = DisturbanceModel(kind=kind, seed=seed).realize(system, 60)
                for step in seq:
                    for i, d in enumerate(step):
                        eta = system.subsystems[i].eta
                        assert float(d @ d) <= eta ** 2 + 1e-18

    def test_zero_kind_emits_zeros(self):
        system = build_example1_system()
        seq = DisturbanceModel(kind="zero").realize(system, 5)
        for step in seq:
            for d in step:
                assert np.array_equal(d, np.zeros(1))

    def test_boundary_kind_sits_on_the_sphere(self):
        system = build_example1_system()
        seq = DisturbanceModel(kind="worst_case_boundary", seed=3).realize(
            system, 20)
        for step in seq:
            for i, d in enumerate(step):
                assert float(np.linalg.norm(d)) == pytest.approx(
                    system.subsystems[i].eta, rel=1e-12)

    def test_deterministic_given_seed(self):
        system = build_example1_system()
        a = DisturbanceModel(kind="uniform_ball", seed=9).realize(system, 30)
        b = DisturbanceModel(kind="uniform_ball", seed=9).realize(system, 30)
        for sa, sb in zip(a, b):
            for da, db in zip(sa, sb):
                assert np.array_equal(da, db)

    def test_radii_override(self):
        system = build_example1_system()
        seq = DisturbanceModel(kind="worst_case_boundary", seed=1,
                               radii=(0.5, 0.1, 0.0)).realize(system, 10)
        for step in seq:
            assert float(np.linalg.norm(step[0])) == pytest.approx(0.5)
            assert float(np.linalg.norm(step[1])) == pytest.approx(0.1)
            assert np.array_equal(step[2], np.zeros(1))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="kind"):
            DisturbanceModel(kind="gaussian")


class TestCosts:
    def test_all_zero_is_zero(self):
        z = [np.zeros(2)] * 2
        zu = [np.zeros(1)] * 2
        zd = [np.zeros(1)] * 2
        assert stage_cost(z, zu, zd, np.eye(2), np.eye(1), [1.0, 1.0]) == 0.0

    def test_unit_state_identity_weight(self):
        cost = stage_cost([np.array([1.0, 0.0])], [np.zeros(1)], [np.zeros(1)],
                          np.eye(2), np.eye(1), [1.0])
        assert cost == pytest.approx(1.0)

    def test_matches_scalar_expansion(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            x_all = [rng.standard_normal(2) for _ in range(3)]
            u_all = [rng.standard_normal(1) for _ in range(3)]
            d_all = [rng.standard_normal(1) for _ in range(3)]
            q = np.diag(rng.uniform(0.1, 2.0, size=2))
            r = np.array([[float(rng.uniform(0.1, 2.0))]])
            tau = [float(rng.uniform(0.5, 3.0)) for _ in range(3)]
            want = 0.0
            for i in range(3):
                want += sum(x_all[i][a] * q[a, b] * x_all[i][b]
                            for a in range(2) for b in range(2))
                want += r[0, 0] * u_all[i][0] ** 2
                want -= tau[i] * d_all[i][0] ** 2
            got = stage_cost(x_all, u_all, d_all, q, r, tau)
            assert got == pytest.approx(want, abs=1e-12)

    def test_lyapunov_values(self):
        assert lyapunov_value(np.zeros(3), np.eye(3)) == 0.0
        assert lyapunov_value(np.array([3.0, 4.0]), np.eye(2)) == pytest.approx(25.0)

    def test_total_cost_terminal_only_at_zero_horizon(self):
        system = build_example1_system()
        params = example1_reference_params()
        x0 = [np.array([1.0, -1.0])] * 3
        trace = run_online_loop(system, params, x0, 12, resynth="once",
                                gains=example1_reference_gains())
        assert total_cost(trace, params, T=0) == pytest.approx(sum(trace.V[0]))
        full = total_cost(trace, params, T=10)
        assert full == pytest.approx(sum(trace.psi[:10]) + sum(trace.V[10]))
        with pytest.raises(ValueError, match="horizon"):
            total_cost(trace, params, T=13)


class TestRunOnlineLoop:
    def test_zero_start_zero_disturbance_stays_zero(self):
        system = build_example1_system()
        trace = run_online_loop(system, example1_reference_params(),
                                [np.zeros(2)] * 3, 8, resynth="once",
                                gains=example1_reference_gains())
        for k in range(len(trace.x)):
            for x in trace.x[k]:
                assert np.array_equal(x, np.zeros(2))
        assert all(p == 0.0 for p in trace.psi)
        assert total_cost(trace, example1_reference_params(), T=8) == 0.0

    def test_reference_gains_drive_states_to_zero(self):
        system = build_example1_system()
        trace = run_online_loop(system, example1_reference_params(),
                                [np.array([1.0, -1.0])] * 3, 70,
                                resynth="once",
                                gains=example1_reference_gains())
        norms = [max(float(np.linalg.norm(x)) for x in trace.x[k])
                 for k in range(len(trace.x))]
        assert norms[60] < 1e-2
        assert norms[-1] < norms[0]

    def test_input_bounds_respected_along_run(self):
        system = build_example1_system()
        trace = run_online_loop(system, example1_reference_params(),
                                [np.array([1.0, -1.0])] * 3, 50,
                                dist=DisturbanceModel(kind="uniform_ball", seed=4),
                                resynth="once",
                                gains=example1_reference_gains())
        for step in trace.u:
            for i, u in enumerate(step):
                assert np.all(np.abs(u) <= system.subsystems[i].u_max + 1e-12)

    def test_trace_is_deterministic(self):
        system = build_example1_system()

        def run():
            return run_online_loop(system, example1_reference_params(),
                                   [np.array([1.0, -1.0])] * 3, 25,
                                   dist=DisturbanceModel(kind="uniform_ball",
                                                         seed=42),
                                   resynth="once",
                                   gains=example1_reference_gains())

        a, b = run(), run()
        for k in range(a.n_steps):
            for i in range(3):
                assert np.array_equal(a.x[k][i], b.x[k][i])
                assert np.array_equal(a.u[k][i], b.u[k][i])
                assert np.array_equal(a.d[k][i], b.d[k][i])
        assert a.psi == b.psi
        assert a.worst_margin == b.worst_margin

    def test_trace_shapes_and_times(self):
        system = build_example1_system()
        trace = run_online_loop(system, example1_reference_params(),
                                [np.array([1.0, -1.0])] * 3, 15,
                                resynth="once",
                                gains=example1_reference_gains(), Ts=0.2)
        trace.validate()
        assert trace.n_steps == 15
        assert len(trace.x) == 16 and len(trace.V) == 16
        assert_allclose(trace.times(), 0.2 * np.arange(16))
        assert trace.meta["supplied_gains"] is True
        assert trace.solves == 0
        # recorded memberships are normalized
        for k in range(trace.n_steps):
            for i in range(3):
                assert trace.w[k][i].sum() == pytest.approx(1.0, abs=1e-12)
                assert trace.h[k][i].sum() == pytest.approx(1.0, abs=1e-12)

    def test_unknown_resynth_mode_rejected(self):
        system = build_example1_system()
        with pytest.raises(ValueError, match="resynth"):
            run_online_loop(system, example1_reference_params(),
                            [np.zeros(2)] * 3, 3, resynth="sometimes",
                            gains=example1_reference_gains())

    def test_infeasible_constants_raise_at_step_zero(self):
        # coupling loads far above the shape scale make synthesis hopeless
        system = build_example1_system()
        for sub in system.subsystems:
            for j in sub.couplings:
                sub.couplings[j] = 10.0 * np.eye(2)
        params = example1_synthesis_params()
        cfg = SynthesisConfig(n_starts=1, max_iters=8, rescue_evals=40,
                              xi_growth_iters=2)
        with pytest.raises(InitialInfeasible):
            run_online_loop(system, params, [np.array([1.0, -1.0])] * 3, 3,
                            syn_cfg=cfg)

    def test_every_step_reuses_warm_certificate(self, ex1_synthesized):
        system, params, x0, res, _ = ex1_synthesized
        trace = run_online_loop(system, params, x0, 6,
                                dist=DisturbanceModel(kind="uniform_ball",
                                                      seed=1),
                                resynth="every_step", warm=res.dv)
        assert all(trace.resynthesized)
        assert all(trace.feasible)
        assert max(trace.worst_margin) <= 0.0
        # set sizes never need to grow along the run
        assert max(v[0] for v in trace.xi) <= res.dv.xi[0] * (1.0 + 1e-6)


class TestIssCheck:
    def test_zero_trajectory_trivially_clean(self):
        system = build_example1_system()
        params = example1_reference_params()
        trace = run_online_loop(system, params, [np.zeros(2)] * 3, 5,
                                resynth="once",
                                gains=example1_reference_gains())
        report = iss_check(trace, params)
        assert report["n_checked"] == 0
        assert report["ok"]

    def test_certified_run_has_no_violations(self, ex1_synthesized):
        system, params, x0, res, _ = ex1_synthesized
        trace = run_online_loop(system, params, x0, 40,
                                dist=DisturbanceModel(kind="uniform_ball",
                                                      seed=2),
                                resynth="every_step", warm=res.dv)
        report = iss_check(trace, params)
        assert report["n_checked"] == 40
        assert report["violations"] == []
        assert report["sandwich_violations"] == []
        assert report["worst_slack"] < 0.0

    def test_destabilizing_gains_are_reported(self):
        system = build_example1_system()
        params = example1_reference_params()
        bad = [[np.array([[3.0, 3.0]]), np.array([[3.0, 3.0]])]
               for _ in range(3)]
        trace = run_online_loop(system, params, [np.array([1.0, -1.0])] * 3,
                                20, resynth="once", gains=bad)
        report = iss_check(trace, params)
        assert report["violations"]
        assert not report["ok"]


def contractive_single_subsystem():
    """One decoupled subsystem with x+ = 0.5 x + E d and zero gains."""
    a = 0.5 * np.eye(2)
    rules = tuple(Rule(A=a.copy(), B=np.eye(2), E=np.array([[0.1], [0.0]]))
                  for _ in range(2))
    sub = Subsystem(rules=rules, couplings={}, model_mfs=model_mf_family(),
                    controller_mfs=controller_mf_family(),
                    u_max=np.array([1.0, 1.0]), eta=1e-6)
    system = LargeScaleSystem(subsystems=(sub,))
    system.validate()
    gains = [[np.zeros((2, 2)), np.zeros((2, 2))]]
    params = FixedParams(X=[np.eye(2)], lam=[0.5], N_const=[1e12],
                         M=[np.eye(2)], tau=[1.0], Q=np.eye(2), R=np.eye(2),
                         alpha=2.0)
    dv = DecisionVars(gains=gains, Z=[build_z(gains[0], 2, 1e-6)], xi=[1.0])
    return system, params, dv


class TestRpiMonteCarlo:
    def test_sample_in_set_respects_the_set(self):
        rng = np.random.default_rng(0)
        x_mat = np.array([[2.0, 0.3], [0.3, 1.0]])
        for _ in range(200):
            x = sample_in_set(rng, x_mat, 3.0)
            assert float(x @ x_mat @ x) <= 9.0 * (1.0 + 1e-12)
        on_edge = sample_in_set(rng, x_mat, 3.0, boundary=True)
        assert float(on_edge @ x_mat @ on_edge) == pytest.approx(9.0, rel=1e-9)

    def test_contractive_decoupled_system_never_exits(self):
        system, params, dv = contractive_single_subsystem()
        report = rpi_monte_carlo(system, params, dv, n_samples=400, seed=5)
        assert report["ok"]
        assert report["scalar_violations"] == 0
        assert report["exit_events"] == 0

    def test_benchmark_certificate_clean_and_interior(self, ex1_synthesized):
        system, params, _, res, _ = ex1_synthesized
        report = rpi_monte_carlo(system, params, res.dv, n_samples=1500,
                                 seed=0)
        assert report["ok"]
        assert report["worst_scalar"] <= 1e-9
        # strict margins leave even boundary starts strictly interior
        assert report["worst_exit_margin"] < 0.0

    def test_report_deterministic_given_seed(self):
        system, params, dv = contractive_single_subsystem()
        a = rpi_monte_carlo(system, params, dv, n_samples=200, seed=3)
        b = rpi_monte_carlo(system, params, dv, n_samples=200, seed=3)
        assert a == b

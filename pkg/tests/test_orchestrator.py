"""Solution procedures: one-pass BCD, the consensus ADMM loop, heuristics."""

import numpy as np
import pytest

from msfedl.errors import InfeasibilityError, MsFedlError
from msfedl.orchestrator import (AdmmParams, AdmmState, consensus_dual_step,
                                 heuristic_equal, heuristic_proportional,
                                 optimal_etas, solve_centralized,
                                 solve_decentralized)
from msfedl.scenario import GHZ, generate_scenario
from msfedl.subproblems import F_SCALE

from conftest import make_scenario


def check_outcome_feasible(sc, outcome, rel=1e-3):
    alloc = outcome.allocation
    col = alloc.cpu.sum(axis=0)
    assert np.all(np.abs(col - sc.cpu_totals()) <= rel * sc.cpu_totals())
    assert abs(alloc.bandwidth.sum() - 1.0) <= 1e-9
    assert np.all(alloc.bandwidth >= sc.bandwidth_min * (1 - 1e-9))
    cpu_min = np.array([svc.cpu_min for svc in sc.services])
    assert np.all(alloc.cpu >= cpu_min[:, None] * (1 - 1e-6))


class TestConsensusDualStep:
    def _state(self, sc, f, w, duals=None):
        s, n = sc.n_services, sc.n_ues
        return AdmmState(f=f, w_per_service=w, z=np.full(n, 1.0 / n),
                         y=np.zeros(n),
                         bandwidth_dual=duals if duals is not None
                         else np.zeros((s, n)),
                         r1=np.zeros(n), r2=np.zeros((s, n)))

    def test_single_service_average_is_identity(self):
        sc = make_scenario(n_ues=3, n_services=1)
        w = np.array([[0.5, 0.3, 0.2]])
        state = self._state(sc, sc.cpu_totals()[None, :] / F_SCALE, w)
        out = consensus_dual_step(state, sc, AdmmParams())
        np.testing.assert_allclose(out.z, w[0])

    def test_exact_budget_keeps_dual(self):
        sc = make_scenario(n_ues=2, n_services=2)
        f = np.tile(sc.cpu_totals() / F_SCALE / 2, (2, 1))
        w = np.full((2, 2), 0.5)
        state = self._state(sc, f, w)
        out = consensus_dual_step(state, sc, AdmmParams())
        np.testing.assert_allclose(out.r1, 0.0, atol=1e-12)
        np.testing.assert_allclose(out.y, 0.0, atol=1e-12)

    def test_plain_average_with_zero_duals(self):
        sc = make_scenario(n_ues=1, n_services=3)
        f = np.tile(sc.cpu_totals() / F_SCALE / 3, (3, 1))
        w = np.array([[0.02], [0.03], [0.01]])
        out = consensus_dual_step(self._state(sc, f, w), sc, AdmmParams())
        assert out.z[0] == pytest.approx(0.02, abs=1e-15)

    def test_dual_ascent_step(self):
        sc = make_scenario(n_ues=1, n_services=1)
        f = np.array([[sc.cpu_totals()[0] / F_SCALE + 0.1]])
        w = np.array([[1.0]])
        params = AdmmParams(rho1=100.0)
        out = consensus_dual_step(self._state(sc, f, w), sc, params)
        assert out.r1[0] == pytest.approx(0.1, abs=1e-12)
        assert out.y[0] == pytest.approx(params.relax_alpha * 100.0 * 0.1,
                                         abs=1e-9)
        assert out.iter == 1


class TestCentralized:
    def test_symmetric_equal_split(self, symmetric_scenario):
        sc = symmetric_scenario
        out = solve_centralized(sc)
        s, n = sc.n_services, sc.n_ues
        np.testing.assert_allclose(out.allocation.cpu,
                                   np.tile(sc.cpu_totals() / s, (s, 1)),
                                   rtol=1e-6)
        np.testing.assert_allclose(out.allocation.bandwidth,
                                   np.full(n, 1.0 / n), rtol=1e-6)
        check_outcome_feasible(sc, out, rel=1e-9)

    def test_smallest_update_service_dominates(self, medium_scenario):
        # the service with the smallest update payload wins the biggest CPU
        # share; the rate eta* depends only on the accuracy target, so the
        # tightest-accuracy service carries the largest eta*
        out = solve_centralized(medium_scenario)
        shares = out.allocation.cpu.sum(axis=1)
        assert shares[0] == max(shares)
        eta = out.allocation.eta
        assert list(eta) == sorted(eta)
        assert eta[-1] == max(eta)

    def test_single_pass_is_fixed_point(self, small_scenario):
        one = solve_centralized(small_scenario, passes=1)
        three = solve_centralized(small_scenario, passes=3)
        np.testing.assert_allclose(three.allocation.cpu, one.allocation.cpu,
                                   rtol=1e-9)
        np.testing.assert_allclose(three.allocation.bandwidth,
                                   one.allocation.bandwidth, rtol=1e-9)

    def test_beats_heuristics(self, medium_scenario):
        c = solve_centralized(medium_scenario).cost.total
        assert c < heuristic_equal(medium_scenario).cost.total
        assert c < heuristic_proportional(medium_scenario).cost.total

    def test_outcome_document(self, small_scenario):
        out = solve_centralized(small_scenario)
        doc = out.to_document(small_scenario)
        assert doc.startswith("msfedl-outcome v1\n")
        assert "mode: centralized" in doc
        assert "np.float64" not in doc


class TestDecentralized:
    def test_single_service_converges_fast(self):
        # with one service the bandwidth consensus is trivial; the remaining
        # iterations come from dual ascent on the (penalty-enforced) shared
        # CPU budget, which still takes a short geometric tail
        sc = make_scenario(n_ues=4, n_services=1)
        central = solve_centralized(sc)
        out = solve_decentralized(sc, mode="jacobi")
        assert out.status == "converged"
        assert out.iterations <= 30
        assert out.cost.total == pytest.approx(central.cost.total, rel=1e-4)
        gs = solve_decentralized(sc, mode="gauss-seidel")
        assert gs.iterations <= 15   # no proximal damping: faster tail

    def test_mode_rejected(self, small_scenario):
        with pytest.raises(MsFedlError):
            solve_decentralized(small_scenario, mode="bogus")

    def test_close_to_centralized(self, small_scenario):
        central = solve_centralized(small_scenario)
        out = solve_decentralized(small_scenario, mode="jacobi")
        assert out.status == "converged"
        assert abs(out.cost.total / central.cost.total - 1) < 1e-3
        check_outcome_feasible(small_scenario, out)

    def test_trace_matches_iterations(self, small_scenario):
        out = solve_decentralized(small_scenario, mode="jacobi")
        assert len(out.trace.records) == out.iterations
        csv = out.trace.to_csv(out.mode)
        lines = csv.strip().split("\n")
        assert lines[0] == \
            "iter,objective,r1_norm,r2_norm_max,f_delta_frobenius,z_delta,mode"
        assert len(lines) == out.iterations + 1
        assert lines[1].endswith(",jp-admm")

    def test_consensus_at_termination(self, small_scenario):
        params = AdmmParams()
        out = solve_decentralized(small_scenario, params, mode="jacobi")
        last = out.trace.records[-1]
        assert last.r2_norm_max <= 10 * params.eps2 * \
            np.sqrt(small_scenario.n_ues)

    def test_early_stop_uses_fewer_iterations(self, small_scenario):
        plain = solve_decentralized(small_scenario, mode="jacobi")
        early = solve_decentralized(small_scenario, mode="jacobi-early-stop")
        assert early.iterations <= plain.iterations
        assert early.mode == "jp-admm-es"
        central = solve_centralized(small_scenario).cost.total
        assert abs(early.cost.total / central - 1) < 5e-3

    def test_gauss_seidel_agrees(self, small_scenario):
        gs = solve_decentralized(small_scenario, mode="gauss-seidel")
        central = solve_centralized(small_scenario).cost.total
        assert gs.mode == "gs-miadmm"
        assert abs(gs.cost.total / central - 1) < 1e-3

    def test_deterministic_and_worker_invariant(self, small_scenario):
        a = solve_decentralized(small_scenario, mode="jacobi", workers=1)
        b = solve_decentralized(small_scenario, mode="jacobi", workers=3)
        assert a.iterations == b.iterations
        np.testing.assert_array_equal(a.allocation.cpu, b.allocation.cpu)
        assert a.trace.to_csv(a.mode) == b.trace.to_csv(b.mode)

    def test_max_outer_reported(self, small_scenario):
        out = solve_decentralized(small_scenario,
                                  AdmmParams(max_outer=3), mode="jacobi")
        assert out.status == "max-iter"
        assert out.iterations == 3


class TestHeuristics:
    def test_equal_split_values(self):
        sc = make_scenario(n_ues=4, n_services=2, cpu_totals=[1 * GHZ] * 4)
        out = heuristic_equal(sc)
        np.testing.assert_allclose(out.allocation.cpu, 0.5 * GHZ)
        np.testing.assert_allclose(out.allocation.bandwidth, 0.25)
        assert out.mode == "heuristic-1"

    def test_equal_split_feasible_whenever_scenario_is(self):
        # scenario construction already requires S * cpu_min <= min cpu
        # total and N * w_min <= 1, which is exactly what the equal split
        # needs: the infeasibility branch is unreachable for valid inputs
        sc = make_scenario(n_ues=2, n_services=2, cpu_totals=[0.5 * GHZ] * 2,
                           cpu_min=0.24 * GHZ)
        out = heuristic_equal(sc)
        np.testing.assert_allclose(out.allocation.cpu, 0.25 * GHZ)

    def test_proportional_equal_data_reduces_to_equal_split(self):
        sc = make_scenario(n_ues=3, n_services=2)
        out = heuristic_proportional(sc)
        np.testing.assert_allclose(out.allocation.cpu,
                                   np.tile(sc.cpu_totals() / 2, (2, 1)),
                                   rtol=1e-12)
        assert out.mode == "heuristic-2"

    def test_identical_radios_split_bandwidth(self):
        sc = make_scenario(n_ues=2, n_services=1, gains=[1e-8, 1e-8])
        out = heuristic_proportional(sc)
        np.testing.assert_allclose(out.allocation.bandwidth, 0.5, rtol=1e-12)

    def test_data_proportional_cpu(self):
        sc = make_scenario(n_ues=1, n_services=2,
                           data_sizes=[[30e6], [10e6]])
        out = heuristic_proportional(sc)
        total = sc.cpu_totals()[0]
        assert out.allocation.cpu[0, 0] == pytest.approx(0.75 * total,
                                                         rel=1e-12)

    def test_equal_time_rule(self):
        sc = make_scenario(n_ues=2, n_services=1, gains=[1e-7, 1e-9])
        cap = heuristic_proportional(sc, bandwidth_rule="capacity")
        eqt = heuristic_proportional(sc, bandwidth_rule="equal-time")
        # capacity rule favours the strong link, equal-time the weak one
        assert cap.allocation.bandwidth[0] > cap.allocation.bandwidth[1]
        assert eqt.allocation.bandwidth[0] < eqt.allocation.bandwidth[1]

    def test_eta_matches_closed_form(self, small_scenario):
        out = heuristic_equal(small_scenario)
        np.testing.assert_allclose(out.allocation.eta,
                                   optimal_etas(small_scenario), rtol=1e-12)


class TestGeneratedScenarios:
    def test_feasibility_all_modes(self):
        sc = generate_scenario(4, 6)
        for out in (solve_centralized(sc), heuristic_equal(sc),
                    heuristic_proportional(sc),
                    solve_decentralized(sc, mode="jacobi-early-stop")):
            check_outcome_feasible(sc, out)

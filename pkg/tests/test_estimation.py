"""Tests for the amplitude/phase estimation engine."""

import math

import numpy as np
import pytest

from fidest.circuits import (
    Circuit,
    OracleOp,
    QubitCapExceeded,
    RegisterLayout,
    build_flagged_encoding,
    circuit_unitary,
)
from fidest.estimation import (
    AmplitudeProblem,
    amplitude_estimate,
    flag_probability,
    grover_operator,
    phase_estimate,
    qpe_distribution,
    qpe_grid_distribution,
    sqrt_amplitude_estimate,
)
from fidest.linalg import unitarity_error
from fidest.oracles import PreparationOracle, complete_to_unitary

from conftest import mixed_instance, pure_instance

# sqrt of the flagged probability of the (k=1, rank 2, seeds 42/43) instance,
# computed with the dense reference sqrt(tr(rho |psi><psi|))
INSTANCE_SQRT_P = 0.5965038883615562


def flag_problem(p):
    """One-qubit amplitude problem with flagged probability exactly p."""
    col = np.array([math.sqrt(p), math.sqrt(1.0 - p)], dtype=complex)
    oracle = PreparationOracle(complete_to_unitary(col), 1, 0, "U")
    prep = Circuit(RegisterLayout(("C",), (1,)), (OracleOp(oracle, "plain", ("C",)),))
    return AmplitudeProblem(prep, "C")


def instance_problem(seed_u=42, seed_v=43):
    _, u = mixed_instance(1, 2, seed_u)
    _, v = pure_instance(1, seed_v)
    return AmplitudeProblem(build_flagged_encoding(u, v), "C")


class TestAmplitudeProblem:
    def test_rejects_missing_flag_register(self):
        prep = Circuit(RegisterLayout(("A",), (1,)), ())
        with pytest.raises(ValueError, match="flag register"):
            AmplitudeProblem(prep, "C")

    def test_rejects_wide_flag_register(self):
        prep = Circuit(RegisterLayout(("C",), (2,)), ())
        with pytest.raises(ValueError, match="one qubit"):
            AmplitudeProblem(prep, "C")

    def test_flag_probability(self):
        assert abs(flag_probability(flag_problem(0.3)) - 0.3) <= 1e-12


class TestGroverOperator:
    def test_p_zero_fixes_prepared_state(self):
        problem = flag_problem(0.0)
        q = grover_operator(problem)
        init = circuit_unitary(problem.preparer)[:, 0]
        assert np.max(np.abs(q @ init - init)) <= 1e-10

    def test_p_one_gives_phase_pi(self):
        problem = flag_problem(1.0)
        q = grover_operator(problem)
        init = circuit_unitary(problem.preparer)[:, 0]
        assert np.max(np.abs(q @ init + init)) <= 1e-10

    @pytest.mark.parametrize("seed", range(4))
    def test_eigenphases_on_invariant_plane(self, seed):
        # oracle: dense eigendecomposition of Q projected onto the plane
        # spanned by the prepared state and its flagged component
        problem = instance_problem(2000 + seed, 2100 + seed)
        p = flag_probability(problem)
        theta = math.asin(math.sqrt(p))
        q = grover_operator(problem)
        assert unitarity_error(q) <= 1e-10
        layout = problem.preparer.layout
        n = layout.total_qubits
        state = circuit_unitary(problem.preparer)[:, 0]
        fq = layout.qubits("C")[0]
        mask = ((np.arange(1 << n) >> (n - 1 - fq)) & 1) == 0
        good = state * mask
        good /= np.linalg.norm(good)
        bad = state - (good.conj() @ state) * good
        bad /= np.linalg.norm(bad)
        basis = np.stack([good, bad], axis=1)
        phases = np.sort(np.angle(np.linalg.eigvals(basis.conj().T @ q @ basis)))
        assert np.max(np.abs(phases - [-2 * theta, 2 * theta])) <= 1e-8

    def test_qubit_cap(self):
        problem = instance_problem()
        with pytest.raises(QubitCapExceeded):
            grover_operator(problem, max_qubits=3)


class TestPhaseEstimate:
    def test_exactly_representable_phase(self):
        q = np.diag([1.0, np.exp(2j * np.pi * 3 / 8)])
        init = np.array([0.0, 1.0], dtype=complex)
        probs = qpe_distribution(q, init, 3)
        assert abs(probs[3] - 1.0) <= 1e-12
        assert phase_estimate(q, init, 3, seed=0) == 3

    def test_identity_operator(self):
        assert phase_estimate(np.eye(2), np.array([1.0, 0.0]), 4, seed=1) == 0

    def test_third_phase_concentration(self):
        # standard QPE bound: mass within one grid unit of the phase >= 8/pi^2
        q = np.diag([np.exp(2j * np.pi / 3), 1.0])
        init = np.array([1.0, 0.0], dtype=complex)
        probs = qpe_distribution(q, init, 6)
        target = 64 / 3
        near = [y for y in range(64) if min(abs(y - target), 64 - abs(y - target)) <= 1.0]
        assert sum(probs[y] for y in near) >= 8 / np.pi**2

    def test_m_cap(self):
        with pytest.raises(QubitCapExceeded):
            phase_estimate(np.eye(2), np.array([1.0, 0.0]), 15, seed=0)

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError, match="unitary"):
            phase_estimate(np.ones((2, 2)), np.array([1.0, 0.0]), 3, seed=0)

    def test_grid_distribution_normalized_mixture(self):
        probs = qpe_grid_distribution([0.2, 0.8], [0.5, 0.5], 7)
        assert abs(probs.sum() - 1.0) <= 1e-12
        assert np.all(probs >= 0.0)

    def test_analytic_matches_dense_distribution(self):
        # dual route: closed-form two-phase mixture vs Schur-decomposed
        # Grover operator fed through the generic QPE distribution
        problem = instance_problem()
        p = flag_probability(problem)
        omega = math.asin(math.sqrt(p)) / math.pi
        analytic = qpe_grid_distribution([omega, 1.0 - omega], [0.5, 0.5], 6)
        q = grover_operator(problem)
        init = circuit_unitary(problem.preparer)[:, 0]
        dense = qpe_distribution(q, init, 6)
        assert np.max(np.abs(analytic - dense)) <= 1e-10

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_brute_force_controlled_power_simulation(self, seed):
        # oracle: simulate the readout register explicitly (Hadamards,
        # controlled powers Q^t, inverse Fourier transform) and marginalize
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        q, _ = np.linalg.qr(g)
        init = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        init /= np.linalg.norm(init)
        m = 5
        M = 1 << m
        state = np.repeat(init[np.newaxis, :], M, axis=0) / math.sqrt(M)
        power = np.eye(8, dtype=complex)
        for t in range(M):
            state[t] = power @ state[t]
            power = q @ power
        grid = np.arange(M)
        inv_fourier = np.exp(-2j * np.pi * np.outer(grid, grid) / M) / math.sqrt(M)
        brute = np.sum(np.abs(inv_fourier @ state) ** 2, axis=1)
        assert np.max(np.abs(qpe_distribution(q, init, m) - brute)) <= 1e-10


class TestAmplitudeEstimate:
    def test_p_zero(self):
        result = amplitude_estimate(flag_problem(0.0), 0.1, seed=0)
        assert result.estimate == 0.0

    def test_p_one(self):
        result = amplitude_estimate(flag_problem(1.0), 0.1, seed=0)
        assert result.estimate == 1.0

    @pytest.mark.parametrize("seed", [0, 7, 123])
    def test_grid_aligned_phase_recovers_exactly(self, seed):
        p = math.sin(math.pi * 5 / 32) ** 2
        result = amplitude_estimate(flag_problem(p), 0.05, seed=seed)
        assert result.m >= 5
        assert abs(result.estimate - p) <= 1e-12

    def test_delta_out_of_range(self):
        with pytest.raises(ValueError, match="delta"):
            amplitude_estimate(flag_problem(0.5), 1.5, seed=0)

    def test_m_formula(self):
        result = amplitude_estimate(flag_problem(0.5), 0.05, seed=0)
        assert result.m == math.ceil(math.log2(math.pi / 0.05)) + 2


class TestSqrtAmplitudeEstimate:
    def test_half_is_exact(self):
        result = sqrt_amplitude_estimate(flag_problem(0.5), 0.05, seed=0)
        assert abs(result.estimate - math.sqrt(0.5)) <= 1e-12

    def test_p_zero(self):
        result = sqrt_amplitude_estimate(flag_problem(0.0), 0.1, seed=0)
        assert result.estimate == 0.0

    def test_seeded_instance_success_rate(self):
        # truth frozen from the dense oracle; per-seed success should be
        # well above the nominal 2/3
        problem = instance_problem()
        hits = 0
        for seed in range(200):
            result = sqrt_amplitude_estimate(problem, 0.02, seed=seed)
            hits += abs(result.estimate - INSTANCE_SQRT_P) <= 0.02
        assert hits >= 120

    def test_agrees_with_amplitude_estimate(self):
        problem = instance_problem()
        delta = 0.05
        sq = sqrt_amplitude_estimate(problem, delta, seed=11)
        am = amplitude_estimate(problem, delta, seed=11)
        assert abs(sq.estimate**2 - am.estimate) <= 2 * delta

    def test_deterministic(self):
        problem = instance_problem()
        a = sqrt_amplitude_estimate(problem, 0.03, seed=5)
        b = sqrt_amplitude_estimate(problem, 0.03, seed=5)
        assert a.estimate == b.estimate
        assert a.queries == b.queries

    def test_estimate_in_unit_interval(self):
        for seed in range(10):
            result = sqrt_amplitude_estimate(instance_problem(), 0.2, seed=seed)
            assert 0.0 <= result.estimate <= 1.0


class TestQueryAccounting:
    def test_closed_form_counts(self):
        problem = instance_problem()
        reps = 15
        result = sqrt_amplitude_estimate(problem, 0.1, seed=0, repetitions=reps)
        grover = (1 << result.m) - 1
        u = result.queries["U"]
        v = result.queries["V"]
        assert u == {
            "plain": reps,
            "inverse": 0,
            "controlled": reps * grover,
            "controlled_inverse": reps * grover,
        }
        # the encoding circuit costs two second-oracle queries per application
        assert sum(v.values()) == 2 * sum(u.values())
        assert result.grover_applications == reps * grover

    def test_oracle_counters_accumulate(self):
        _, u = mixed_instance(1, 2, 42)
        _, v = pure_instance(1, 43)
        problem = AmplitudeProblem(build_flagged_encoding(u, v), "C")
        u.reset_queries()
        v.reset_queries()
        result = sqrt_amplitude_estimate(problem, 0.1, seed=0)
        assert u.query_snapshot() == result.queries["U"]
        assert v.query_snapshot() == result.queries["V"]

    def test_query_count_scaling_law(self):
        # log-log slope of Grover applications vs 1/delta is 1.0 +- 0.1
        problem = flag_problem(0.37)
        deltas = [2.0**-t for t in range(3, 9)]
        counts = [
            sqrt_amplitude_estimate(problem, d, seed=0).grover_applications for d in deltas
        ]
        slope = np.polyfit(np.log(1.0 / np.array(deltas)), np.log(counts), 1)[0]
        assert abs(slope - 1.0) <= 0.1


class TestEstimationResult:
    def test_json_schema_and_determinism(self):
        problem = instance_problem()
        result = sqrt_amplitude_estimate(problem, 0.1, seed=3)
        import json

        payload = json.loads(result.to_json())
        assert set(payload) == {
            "estimate", "delta", "m", "reps", "seed", "queries", "grover_applications",
        }
        assert set(payload["queries"]) == {"U", "V"}
        assert set(payload["queries"]["U"]) == {
            "plain", "inverse", "controlled", "controlled_inverse",
        }
        again = sqrt_amplitude_estimate(instance_problem(), 0.1, seed=3)
        assert result.to_json() == again.to_json()

"""Amplitude estimation via phase estimation on exact outcome distributions.

Phase estimation with m readout qubits on a unitary Q applied to a state
with weight w_l on the eigenphase fraction omega_l (Q|v_l> = e^{2 pi i
omega_l}|v_l>) yields outcome y in [0, 2^m) with probability

    Pr[y] = sum_l w_l * sin^2(pi(M omega_l - y)) / (M^2 sin^2(pi(omega_l - y/M))),

the squared Dirichlet kernel with M = 2^m.  For the Grover operator of a
state preparer whose flagged probability is p = sin^2(theta), the prepared
state splits with weight exactly 1/2 onto each of the two eigenphases
+-theta/pi, so its outcome distribution is an equal kernel mixture; the
estimators below sample that distribution exactly with a seeded PRNG, read
out sin^2(pi y / M) (for p) or sin(pi y / M) (for sqrt(p)), and take the
lower median of 15 repetitions.  With M >= 4 pi / delta (respectively
2 pi / delta) a single repetition lands within delta with probability at
least 8/pi^2, and the median amplifies that well past 2/3.

Query accounting is closed-form: each repetition costs one plain preparer
application plus 2^m - 1 controlled Grover steps, and each Grover step
applies the preparer once forward and once inverted.  Tallies are recorded
on the underlying oracles and returned per run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .circuits import (
    Circuit,
    OracleOp,
    QubitCapExceeded,
    analyze_flagged,
    circuit_unitary,
    execute,
)
from .linalg import require_unitary
from .oracles import QUERY_KINDS, controlled_kind, invert_kind

#: Repetitions whose lower median is reported.
DEFAULT_REPETITIONS = 15

#: Qubit cap for materializing a dense Grover operator.
GROVER_MAX_QUBITS = 12

#: Readout-register cap for the public phase_estimate op.
PHASE_ESTIMATE_MAX_M = 14

#: Readout-register cap for the amplitude estimators (2^22 outcome grid).
ESTIMATOR_MAX_M = 22


@dataclass(frozen=True, eq=False)
class AmplitudeProblem:
    """A state preparer whose flag register carries the amplitude of interest.

    The good subspace is flag = |0>: the preparer maps |0...0> to
    sqrt(p)|0>_flag|phi0> + sqrt(1-p)|1>_flag|phi1>.
    """

    preparer: Circuit
    flag_register: str

    def __post_init__(self):
        if self.flag_register not in self.preparer.layout.names:
            raise ValueError(f"flag register {self.flag_register!r} not in layout")
        if self.preparer.layout.size(self.flag_register) != 1:
            raise ValueError(f"flag register {self.flag_register!r} must be one qubit")

    @property
    def total_qubits(self) -> int:
        return self.preparer.layout.total_qubits


@dataclass(eq=False)
class EstimationResult:
    """One estimator run: the estimate plus everything needed to reproduce it."""

    estimate: float
    delta: float
    m: int
    repetitions: int
    seed: int
    queries: dict
    grover_applications: int

    def total_queries(self, label: str) -> int:
        return sum(self.queries.get(label, {}).values())

    def to_json(self) -> str:
        payload = {
            "estimate": self.estimate,
            "delta": self.delta,
            "m": self.m,
            "reps": self.repetitions,
            "seed": self.seed,
            "queries": {
                label: {kind: self.queries[label][kind] for kind in QUERY_KINDS}
                for label in sorted(self.queries)
            },
            "grover_applications": self.grover_applications,
        }
        return json.dumps(payload)


def flag_probability(problem: AmplitudeProblem) -> float:
    """Exact probability of flag = 0 after the preparer (no queries counted)."""
    state = execute(problem.preparer, count_queries=False)
    amp = analyze_flagged(state, problem.preparer.layout, (problem.flag_register,))
    return min(max(amp.flagged_amplitude**2, 0.0), 1.0)


def grover_operator(problem: AmplitudeProblem, max_qubits: int = GROVER_MAX_QUBITS) -> np.ndarray:
    """Dense Grover operator A S0 A^dag S_good of an amplitude problem.

    S0 = 2|0><0| - I reflects about the all-zeros input, S_good = I - 2 Pi
    about the flag = 0 subspace; with that sign convention the eigenphases
    on the prepared-state plane are exactly +-2 arcsin(sqrt(p)).
    """
    n = problem.total_qubits
    if n > max_qubits:
        raise QubitCapExceeded(f"Grover operator needs {n} qubits, cap is {max_qubits}")
    ua = circuit_unitary(problem.preparer, cap=max_qubits)
    dim = ua.shape[0]
    s0 = -np.eye(dim, dtype=complex)
    s0[0, 0] = 1.0
    flag_qubit = problem.preparer.layout.qubits(problem.flag_register)[0]
    flag_bit = (np.arange(dim) >> (n - 1 - flag_qubit)) & 1
    s_good = np.where(flag_bit == 0, -1.0, 1.0)
    return (ua @ s0 @ ua.conj().T) * s_good[np.newaxis, :]


def qpe_grid_distribution(phases, weights, m: int) -> np.ndarray:
    """Exact QPE outcome distribution for a weighted mixture of eigenphases.

    ``phases`` are eigenphase fractions in [0, 1); ``weights`` their
    (non-negative) probabilities.  Returns the length-2^m probability
    vector of the readout register.
    """
    M = 1 << m
    y = np.arange(M, dtype=float)
    probs = np.zeros(M, dtype=float)
    for omega, w in zip(np.atleast_1d(phases), np.atleast_1d(weights)):
        t = (float(omega) - y / M) % 1.0
        t[t >= 1.0] = 0.0
        # sin(pi M t) evaluated as sin(pi ((M t) mod 2)): M t is exact for
        # power-of-two M, so the reduction avoids large-argument error.
        num = np.sin(np.pi * np.mod(M * t, 2.0))
        den = M * np.sin(np.pi * t)
        on_grid = t == 0.0
        den[on_grid] = 1.0
        kern = (num / den) ** 2
        kern[on_grid] = 1.0
        probs += float(w) * kern
    total = probs.sum()
    if not total > 0.0:
        raise ValueError("QPE distribution has zero mass; check phases/weights")
    return probs / total


def qpe_distribution(q: np.ndarray, initial: np.ndarray, m: int) -> np.ndarray:
    """Exact QPE outcome distribution for a dense unitary and initial state.

    The unitary is spectrally decomposed (Schur form; exact for normal
    matrices up to roundoff) and the initial state's weights on each
    eigenvector feed the kernel mixture.
    """
    q = np.asarray(q, dtype=complex)
    require_unitary(q, what="phase-estimation unitary")
    initial = np.asarray(initial, dtype=complex).ravel()
    if initial.size != q.shape[0]:
        raise ValueError(f"initial state length {initial.size} != matrix dim {q.shape[0]}")
    t, z = scipy.linalg.schur(q, output="complex")
    offdiag = float(np.max(np.abs(t - np.diag(np.diag(t))))) if t.shape[0] > 1 else 0.0
    if offdiag > 1e-8:
        raise ValueError(f"matrix is not normal (Schur off-diagonal {offdiag:.3e})")
    omega = (np.angle(np.diag(t)) / (2.0 * np.pi)) % 1.0
    weights = np.abs(z.conj().T @ initial) ** 2
    keep = weights > 1e-15
    return qpe_grid_distribution(omega[keep], weights[keep], m)


def _sample_outcome(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    return int(np.searchsorted(cdf, rng.random(), side="right"))


def phase_estimate(
    q: np.ndarray, initial: np.ndarray, m: int, seed: int, max_m: int = PHASE_ESTIMATE_MAX_M
) -> int:
    """Sample one QPE outcome y in [0, 2^m) from the exact distribution."""
    if not 1 <= m <= max_m:
        raise QubitCapExceeded(f"m = {m} outside [1, {max_m}]")
    probs = qpe_distribution(q, initial, m)
    return _sample_outcome(probs, np.random.default_rng(seed))


def _m_for_delta(delta: float, extra_qubits: int, max_m: int) -> int:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    m = math.ceil(math.log2(math.pi / delta)) + extra_qubits
    if m > max_m:
        raise QubitCapExceeded(f"delta = {delta} needs m = {m} readout qubits, cap is {max_m}")
    return m


def _record_queries(problem: AmplitudeProblem, m: int, repetitions: int) -> dict:
    """Closed-form per-oracle tallies for one estimator run, recorded and returned."""
    grover_steps = ((1 << m) - 1) * repetitions
    tally: dict = {}
    for op in problem.preparer.ops:
        if not isinstance(op, OracleOp):
            continue
        per_oracle = tally.setdefault(op.oracle.label, {k: 0 for k in QUERY_KINDS})
        for kind, count in (
            (op.kind, repetitions),  # initial state preparations
            (controlled_kind(op.kind), grover_steps),  # forward pass of each Grover step
            (controlled_kind(invert_kind(op.kind)), grover_steps),  # inverse pass
        ):
            per_oracle[kind] += count
            op.oracle.record(kind, count)
    return tally


def _estimate(problem, delta, seed, m, repetitions, square):
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    p = flag_probability(problem)
    omega = math.asin(math.sqrt(p)) / math.pi
    probs = qpe_grid_distribution([omega, (1.0 - omega) % 1.0], [0.5, 0.5], m)
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    M = 1 << m
    values = []
    for rep in range(repetitions):
        rng = np.random.default_rng([seed, rep])
        y = int(np.searchsorted(cdf, rng.random(), side="right"))
        amp = math.sin(math.pi * y / M)
        values.append(amp * amp if square else amp)
    estimate = sorted(values)[(repetitions - 1) // 2]
    queries = _record_queries(problem, m, repetitions)
    return EstimationResult(
        estimate=float(estimate),
        delta=float(delta),
        m=m,
        repetitions=repetitions,
        seed=seed,
        queries=queries,
        grover_applications=((1 << m) - 1) * repetitions,
    )


def amplitude_estimate(
    problem: AmplitudeProblem,
    delta: float,
    seed: int,
    repetitions: int = DEFAULT_REPETITIONS,
    max_m: int = ESTIMATOR_MAX_M,
) -> EstimationResult:
    """Estimate the flagged probability p to within delta (prob >= 2/3).

    Uses m = ceil(log2(pi/delta)) + 2 readout qubits and O(1/delta) preparer
    queries; deterministic given (problem, delta, seed).
    """
    m = _m_for_delta(delta, 2, max_m)
    return _estimate(problem, delta, seed, m, repetitions, square=True)


def sqrt_amplitude_estimate(
    problem: AmplitudeProblem,
    delta: float,
    seed: int,
    repetitions: int = DEFAULT_REPETITIONS,
    max_m: int = ESTIMATOR_MAX_M,
) -> EstimationResult:
    """Estimate the flagged amplitude sqrt(p) to within delta (prob >= 2/3).

    Same machinery as amplitude_estimate with a sin readout and
    m = ceil(log2(pi/delta)) + 1: since |sin(pi y/M) - sin(pi omega)| <=
    pi |y/M - omega|, the QPE grid guarantee transfers to sqrt(p) directly.
    """
    m = _m_for_delta(delta, 1, max_m)
    return _estimate(problem, delta, seed, m, repetitions, square=False)

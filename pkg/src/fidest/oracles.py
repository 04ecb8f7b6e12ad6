"""Preparation oracles: unitaries that load a target state from |0...0>.

A mixed state is served through a unitary on a system register plus an
ancilla register; applied to the all-zeros input it yields a pure state
whose reduced system matrix is the target.  Invocations come in four kinds
(plain, inverse, controlled, controlled_inverse) and every application made
through the circuit executor is tallied per kind on the oracle, which is
how query-complexity claims get checked empirically.

An oracle instance is confined to one executor at a time; counters use
plain increments under that contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    ATOL_STRUCT,
    DensityMatrix,
    herm_eig,
    matrix_from_json,
    matrix_to_json,
    require_unitary,
)

QUERY_KINDS = ("plain", "inverse", "controlled", "controlled_inverse")

INSTANCE_KINDS = ("haar_pure", "ginibre_mixed", "fixed_spectrum")

_INVERT = {
    "plain": "inverse",
    "inverse": "plain",
    "controlled": "controlled_inverse",
    "controlled_inverse": "controlled",
}

_CONTROL = {
    "plain": "controlled",
    "inverse": "controlled_inverse",
    "controlled": "controlled",
    "controlled_inverse": "controlled_inverse",
}


def invert_kind(kind: str) -> str:
    """Invocation kind of the inverse of a ``kind`` invocation."""
    return _INVERT[kind]


def controlled_kind(kind: str) -> str:
    """Invocation kind of a ``kind`` invocation under an added control."""
    return _CONTROL[kind]


@dataclass(frozen=True, eq=False)
class Purification:
    """Pure bipartite state whose reduced system matrix is a given mixed state."""

    system_qubits: int
    ancilla_qubits: int
    vector: np.ndarray

    def __post_init__(self):
        vec = np.array(self.vector, dtype=complex).ravel()
        expected = 1 << (self.system_qubits + self.ancilla_qubits)
        if vec.size != expected:
            raise ValueError(
                f"purification vector length {vec.size} != 2^({self.system_qubits}"
                f"+{self.ancilla_qubits})"
            )
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > ATOL_STRUCT:
            raise ValueError(f"purification vector norm {norm} is not 1")
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)

    def reduced_system_state(self) -> DensityMatrix:
        m = self.vector.reshape(1 << self.system_qubits, 1 << self.ancilla_qubits)
        rho = m @ m.conj().T
        return DensityMatrix(0.5 * (rho + rho.conj().T))


@dataclass(eq=False)
class PreparationOracle:
    """Unitary state-preparation oracle with a per-kind query tally.

    ``unitary`` acts on system (most significant) then ancilla qubits; its
    first column is the state prepared from |0...0>.
    """

    unitary: np.ndarray
    system_qubits: int
    ancilla_qubits: int
    label: str
    queries: dict = field(default_factory=lambda: {k: 0 for k in QUERY_KINDS})

    def __post_init__(self):
        mat = np.array(self.unitary, dtype=complex)
        dim = 1 << (self.system_qubits + self.ancilla_qubits)
        if mat.shape != (dim, dim):
            raise ValueError(
                f"oracle unitary shape {mat.shape} != {dim}x{dim} for "
                f"{self.system_qubits}+{self.ancilla_qubits} qubits"
            )
        require_unitary(mat, what=f"oracle {self.label!r}")
        mat.flags.writeable = False
        self.unitary = mat

    @property
    def num_qubits(self) -> int:
        return self.system_qubits + self.ancilla_qubits

    @property
    def prepared_state(self) -> np.ndarray:
        return self.unitary[:, 0].copy()

    def reduced_state(self) -> DensityMatrix:
        """Density matrix of the system register of the prepared state."""
        m = self.prepared_state.reshape(1 << self.system_qubits, 1 << self.ancilla_qubits)
        rho = m @ m.conj().T
        return DensityMatrix(0.5 * (rho + rho.conj().T))

    def record(self, kind: str, count: int = 1) -> None:
        if kind not in QUERY_KINDS:
            raise ValueError(f"unknown query kind {kind!r}")
        self.queries[kind] += count

    def total_queries(self) -> int:
        return sum(self.queries.values())

    def query_snapshot(self) -> dict:
        return dict(self.queries)

    def reset_queries(self) -> None:
        for k in QUERY_KINDS:
            self.queries[k] = 0


def purify(rho: DensityMatrix, ancilla_qubits: int | None = None) -> Purification:
    """Canonical purification of ``rho``, ancilla size equal to the system.

    Eigenvectors are paired with ancilla basis states in descending
    eigenvalue order, so pure inputs purify to |psi>|0>.  Passing
    ``ancilla_qubits`` overrides the register size; it must still cover the
    state's rank (so minimal, rank-sized ancillas are allowed).
    """
    w, v = herm_eig(rho.matrix)
    w = np.clip(w[::-1], 0.0, None)
    v = v[:, ::-1]
    if ancilla_qubits is None:
        ancilla_qubits = rho.num_qubits
    if ancilla_qubits < 0:
        raise ValueError(f"ancilla_qubits must be non-negative, got {ancilla_qubits}")
    da = 1 << ancilla_qubits
    if da < rho.dim:
        tail = float(np.sum(w[da:]))
        if tail > 1e-12:
            raise ValueError(
                f"{ancilla_qubits} ancilla qubits cannot purify a state with "
                f"weight {tail:.3e} beyond rank {da}"
            )
        w = w[:da]
        v = v[:, :da]
    m = v * np.sqrt(w)
    if da > rho.dim:
        m = np.concatenate([m, np.zeros((rho.dim, da - rho.dim), dtype=complex)], axis=1)
    return Purification(rho.num_qubits, ancilla_qubits, m.ravel())


def complete_to_unitary(column: np.ndarray) -> np.ndarray:
    """Deterministic unitary completion of a unit column: U|0...0> = column.

    Uses a single Householder reflection after rotating the column's
    largest-magnitude entry real-positive (a well-conditioned phase
    choice), plus diagonal phase fixups so the first column matches the
    input exactly.  Same input bits always produce the same matrix.
    """
    col = np.asarray(column, dtype=complex).ravel()
    n = col.size
    norm = float(np.linalg.norm(col))
    if abs(norm - 1.0) > ATOL_STRUCT:
        raise ValueError(f"column norm {norm} is not 1")

    j = int(np.argmax(np.abs(col)))
    phase = col[j] / abs(col[j])
    y = col / phase

    y0 = y[0]
    c = y0 / abs(y0) if abs(y0) > 0.0 else 1.0 + 0.0j
    v = y.copy()
    v[0] -= c
    vnorm2 = float(np.real(np.vdot(v, v)))
    if vnorm2 < 1e-24:
        base = np.eye(n, dtype=complex)
    else:
        base = np.eye(n, dtype=complex) - (2.0 / vnorm2) * np.outer(v, v.conj())
    base[:, 0] *= c
    return phase * base


def preparation_oracle(
    rho: DensityMatrix, label: str = "U", ancilla_qubits: int | None = None
) -> PreparationOracle:
    """Synthesize a preparation oracle for ``rho`` (ancilla = system size)."""
    pur = purify(rho, ancilla_qubits)
    return PreparationOracle(
        complete_to_unitary(pur.vector), pur.system_qubits, pur.ancilla_qubits, label
    )


def controlled(oracle: PreparationOracle) -> np.ndarray:
    """Block matrix I (+) U; the control is the most significant added qubit."""
    u = oracle.unitary
    d = u.shape[0]
    out = np.eye(2 * d, dtype=complex)
    out[d:, d:] = u
    return out


def inverse(oracle: PreparationOracle) -> np.ndarray:
    """The adjoint of the oracle unitary."""
    return oracle.unitary.conj().T.copy()


def invocation_unitary(oracle: PreparationOracle, kind: str, pad_qubits: int = 0) -> np.ndarray:
    """Dense matrix of one oracle invocation, optionally identity-padded.

    Padding appends ``pad_qubits`` untouched qubits after the ancilla (how
    a smaller ancilla register is widened to match a partner oracle); for
    controlled kinds the control qubit is prepended after padding.
    """
    if kind not in QUERY_KINDS:
        raise ValueError(f"unknown query kind {kind!r}")
    mat = oracle.unitary
    if kind in ("inverse", "controlled_inverse"):
        mat = mat.conj().T
    if pad_qubits:
        mat = np.kron(mat, np.eye(1 << pad_qubits, dtype=complex))
    if kind in ("controlled", "controlled_inverse"):
        d = mat.shape[0]
        out = np.eye(2 * d, dtype=complex)
        out[d:, d:] = mat
        mat = out
    return mat


def purified_channel_oracle(
    channel_unitary: np.ndarray, system_qubits: int, label: str = "U"
) -> PreparationOracle:
    """Wrap a purified channel unitary as a preparation oracle.

    The unitary acts on system plus environment; run on |0>|0> it prepares
    a purification of the channel's output on the all-zeros input, so it
    serves as purified access to that state.
    """
    u = np.asarray(channel_unitary, dtype=complex)
    require_unitary(u, what="channel unitary")
    dim = u.shape[0]
    n = dim.bit_length() - 1
    if dim < 2 or dim & (dim - 1):
        raise ValueError(f"channel unitary dimension {dim} is not a power of two")
    if system_qubits < 1 or system_qubits > n:
        raise ValueError(f"system_qubits {system_qubits} invalid for a {n}-qubit unitary")
    return PreparationOracle(u.copy(), system_qubits, n - system_qubits, label)


@dataclass(frozen=True)
class RandomInstanceSpec:
    """Seed-deterministic recipe for a random state instance."""

    k: int
    rank: int
    seed: int
    kind: str
    spectrum: tuple | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 1 <= self.rank <= (1 << self.k):
            raise ValueError(f"rank {self.rank} out of range [1, {1 << self.k}]")
        if not 0 <= self.seed < (1 << 64):
            raise ValueError(f"seed {self.seed} is not a 64-bit unsigned integer")
        if self.kind not in INSTANCE_KINDS:
            raise ValueError(f"kind {self.kind!r} not in {INSTANCE_KINDS}")
        if self.kind == "haar_pure" and self.rank != 1:
            raise ValueError("haar_pure instances must have rank 1")
        if self.kind == "fixed_spectrum":
            if self.spectrum is None:
                raise ValueError("fixed_spectrum instances need a spectrum")
            spec = tuple(float(x) for x in self.spectrum)
            if len(spec) != self.rank:
                raise ValueError(f"spectrum length {len(spec)} != rank {self.rank}")
            if any(x < 0 for x in spec):
                raise ValueError("spectrum entries must be non-negative")
            if abs(sum(spec) - 1.0) > 1e-9:
                raise ValueError(f"spectrum sums to {sum(spec)}, expected 1")
            object.__setattr__(self, "spectrum", spec)
        elif self.spectrum is not None:
            raise ValueError(f"{self.kind} instances take no spectrum")


def _haar_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _haar_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    return q * (d / np.abs(d))


def sample_instance(spec: RandomInstanceSpec, label: str = "U"):
    """Draw ``(DensityMatrix, PreparationOracle)`` deterministically from a spec.

    haar_pure normalizes a complex-Gaussian vector; ginibre_mixed traces an
    ancilla of dimension ``rank`` out of a Haar-random bipartite pure state;
    fixed_spectrum places the supplied spectrum in a Haar-random basis.
    """
    rng = np.random.default_rng(spec.seed)
    d = 1 << spec.k
    if spec.kind == "haar_pure":
        psi = _haar_vector(rng, d)
        rho = np.outer(psi, psi.conj())
    elif spec.kind == "ginibre_mixed":
        g = _haar_vector(rng, d * spec.rank).reshape(d, spec.rank)
        rho = g @ g.conj().T
    else:
        basis = _haar_unitary(rng, d)[:, : spec.rank]
        lam = np.asarray(spec.spectrum, dtype=float)
        rho = (basis * lam) @ basis.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    dm = DensityMatrix(rho)
    return dm, preparation_oracle(dm, label)


def instance_to_json(spec: RandomInstanceSpec, rho: DensityMatrix) -> dict:
    """Instance file record: {"k", "rank", "seed", "kind", "rho": matrix-JSON}."""
    obj = {
        "k": spec.k,
        "rank": spec.rank,
        "seed": spec.seed,
        "kind": spec.kind,
        "rho": matrix_to_json(rho.matrix),
    }
    if spec.spectrum is not None:
        obj["spectrum"] = list(spec.spectrum)
    return obj


def instance_from_json(obj: dict):
    """Parse an instance record back to ``(RandomInstanceSpec, DensityMatrix)``."""
    try:
        spec = RandomInstanceSpec(
            k=int(obj["k"]),
            rank=int(obj["rank"]),
            seed=int(obj["seed"]),
            kind=str(obj["kind"]),
            spectrum=tuple(obj["spectrum"]) if "spectrum" in obj else None,
        )
        rho = DensityMatrix(matrix_from_json(obj["rho"]))
    except KeyError as exc:
        raise ValueError(f"malformed instance JSON: missing {exc}") from exc
    return spec, rho

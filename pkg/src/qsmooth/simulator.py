"""Dense statevector simulation of qubit circuits.

Conventions
-----------
* Qubit 0 is the most significant bit of a basis index (big-endian), so
  applying X to qubit 0 of ``|000>`` sets index 4.
* Every gate is a single-qubit unitary applied to one or more target qubits,
  optionally conditioned on control qubits. A control with polarity 1 fires on
  ``|1>``, polarity 0 on ``|0>``. Multi-controlled gates are one gate.
* ``Rot(a, b, c) = RZ(c) @ RY(b) @ RZ(a)``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import backend

_SQRT1_2 = 1.0 / np.sqrt(2.0)

_SELF_INVERSE = {"X", "H", "Z"}
_PARAMETRIC = {"RY": 1, "RZ": 1, "ROT": 3}
_DIAGONAL = {"Z", "RZ"}


def _ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def base_matrix(kind, params=()):
    """2x2 unitary of a gate kind, ignoring controls."""
    if kind == "X":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if kind == "H":
        return np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT1_2
    if kind == "Z":
        return np.diag([1.0, -1.0]).astype(complex)
    if kind == "RY":
        return _ry(params[0])
    if kind == "RZ":
        return _rz(params[0])
    if kind == "ROT":
        a, b, c = params
        return _rz(c) @ _ry(b) @ _rz(a)
    raise ValueError(f"unknown gate kind {kind!r}")


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple
    controls: tuple = ()
    polarity: tuple = ()
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "controls", tuple(int(c) for c in self.controls))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        pol = tuple(int(p) for p in self.polarity) if self.polarity else (1,) * len(self.controls)
        object.__setattr__(self, "polarity", pol)
        if self.kind not in _SELF_INVERSE and self.kind not in _PARAMETRIC:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.params) != _PARAMETRIC.get(self.kind, 0):
            raise ValueError(f"{self.kind} takes {_PARAMETRIC.get(self.kind, 0)} parameters")
        if not self.targets:
            raise ValueError("gate needs at least one target")
        if len(pol) != len(self.controls) or any(p not in (0, 1) for p in pol):
            raise ValueError("control polarity must give one 0/1 entry per control")
        qubits = self.targets + self.controls
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"targets {self.targets} and controls {self.controls} overlap")
        if min(qubits) < 0:
            raise ValueError("qubit indices must be non-negative")

    @property
    def qubits(self):
        return self.targets + self.controls

    @property
    def name(self):
        """Conventional name, e.g. CNOT, MultiControlledZ, ControlledRY."""
        nc = len(self.controls)
        if nc == 0:
            return {"ROT": "Rot"}.get(self.kind, self.kind)
        if nc == 1 and self.kind == "X":
            return "CNOT"
        if nc == 1 and self.kind == "Z":
            return "CZ"
        prefix = "Controlled" if nc == 1 else "MultiControlled"
        return prefix + {"ROT": "Rot"}.get(self.kind, self.kind)

    def matrix(self):
        return base_matrix(self.kind, self.params)

    def adjoint(self):
        if self.kind in _SELF_INVERSE:
            return self
        if self.kind == "ROT":
            a, b, c = self.params
            params = (-c, -b, -a)
        else:
            params = tuple(-p for p in self.params)
        return Gate(self.kind, self.targets, self.controls, self.polarity, params)

    def with_control(self, control, polarity=1):
        if control in self.qubits:
            raise ValueError(f"control qubit {control} already used by {self.name}")
        return Gate(self.kind, self.targets, self.controls + (control,),
                    self.polarity + (polarity,), self.params)


# -- gate constructors -------------------------------------------------------

def x(q):
    return Gate("X", (q,))


def h(q):
    return Gate("H", (q,))


def z(q):
    return Gate("Z", (q,))


def ry(theta, q):
    return Gate("RY", (q,), params=(theta,))


def rz(theta, q):
    return Gate("RZ", (q,), params=(theta,))


def rot(alpha, beta, gamma, q):
    return Gate("ROT", (q,), params=(alpha, beta, gamma))


def cnot(control, target):
    return Gate("X", (target,), (control,))


def cz(control, target):
    return Gate("Z", (target,), (control,))


def ch(control, target):
    return Gate("H", (target,), (control,))


def cry(theta, control, target):
    return Gate("RY", (target,), (control,), params=(theta,))


def mcx(controls, target, polarity=()):
    targets = tuple(target) if isinstance(target, (tuple, list)) else (target,)
    return Gate("X", targets, tuple(controls), tuple(polarity))


def mcz(controls, target, polarity=()):
    return Gate("Z", (target,), tuple(controls), tuple(polarity))


# -- circuits ----------------------------------------------------------------

@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.num_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        for g in self.gates:
            if max(g.qubits) >= self.num_qubits:
                raise ValueError(f"{g.name} on qubits {g.qubits} exceeds {self.num_qubits} qubits")

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def __add__(self, other):
        return Circuit(max(self.num_qubits, other.num_qubits), self.gates + other.gates)

    @property
    def gate_count(self):
        return len(self.gates)

    def widened(self, num_qubits):
        """Same gates on a larger register (new qubits appended at the end)."""
        if num_qubits < self.num_qubits:
            raise ValueError("cannot shrink a circuit")
        return Circuit(num_qubits, self.gates)

    def inverse(self):
        return inverse_circuit(self)

    def controlled(self, control, polarity=1):
        return controlled_wrap(self, control, polarity)

    def depth(self):
        """ASAP layer count; gates on disjoint qubits share a layer."""
        level = [0] * self.num_qubits
        for g in self.gates:
            layer = 1 + max(level[q] for q in g.qubits)
            for q in g.qubits:
                level[q] = layer
        return max(level, default=0)

    def count_ops(self):
        return Counter(g.name for g in self.gates)

    @cached_property
    def _ops(self):
        return tuple(_compile(g, self.num_qubits) for g in self.gates)

    def unitary(self):
        """Dense matrix of the circuit; for tests on small registers."""
        dim = 2 ** self.num_qubits
        cols = np.eye(dim, dtype=complex)
        apply_ops(cols, self)
        return cols.T


def _compile(gate, num_qubits):
    cmask = cval = 0
    for c, p in zip(gate.controls, gate.polarity):
        bit = 1 << (num_qubits - 1 - c)
        cmask |= bit
        if p:
            cval |= bit
    u = gate.matrix()
    if gate.kind in _DIAGONAL:
        return (True, gate.targets, cmask, cval, (complex(u[0, 0]), complex(u[1, 1])))
    return (False, gate.targets, cmask, cval,
            (complex(u[0, 0]), complex(u[0, 1]), complex(u[1, 0]), complex(u[1, 1])))


def apply_ops(psi, circuit, kernels=None, threads=None):
    """Run ``circuit`` in place on a C-contiguous ``(rows, 2**n)`` complex array."""
    k = kernels if kernels is not None else backend.kernels
    n = circuit.num_qubits
    if psi.ndim != 2 or psi.shape[1] != 2 ** n:
        raise ValueError(f"state batch of shape {psi.shape} does not fit {n} qubits")
    if threads is None:
        threads = backend.num_threads() if psi.shape[1] >= 1 << 16 else 1
    for diag, targets, cmask, cval, u in circuit._ops:
        for t in targets:
            if diag:
                k.apply_diag(psi, n, t, cmask, cval, u[0], u[1], threads)
            else:
                k.apply_1q(psi, n, t, cmask, cval, u[0], u[1], u[2], u[3], threads)
    return psi


# -- statevectors --------------------------------------------------------------

class StateVector:
    """``2**num_qubits`` complex amplitudes; qubit 0 is the most significant bit."""

    def __init__(self, num_qubits, amplitudes=None):
        if num_qubits < 1:
            raise ValueError("num_qubits must be positive")
        self.num_qubits = int(num_qubits)
        dim = 2 ** self.num_qubits
        if amplitudes is None:
            amps = np.zeros(dim, dtype=complex)
            amps[0] = 1.0
        else:
            amps = np.ascontiguousarray(amplitudes, dtype=complex).reshape(-1)
            if amps.shape[0] != dim:
                raise ValueError(f"expected {dim} amplitudes, got {amps.shape[0]}")
        self.amplitudes = amps

    @classmethod
    def basis(cls, bits):
        bits = tuple(int(b) for b in bits)
        state = cls(len(bits), np.zeros(2 ** len(bits), dtype=complex))
        state.amplitudes[bits_to_index(bits)] = 1.0
        return state

    def copy(self):
        return StateVector(self.num_qubits, self.amplitudes.copy())

    def norm(self):
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2

    def tensor(self, other):
        """``self`` on the leading qubits, ``other`` on the trailing ones."""
        return StateVector(self.num_qubits + other.num_qubits,
                           np.kron(self.amplitudes, other.amplitudes))

    def fidelity(self, other):
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits})"


def bits_to_index(bits):
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    return idx


def index_to_bits(index, n):
    return tuple((index >> (n - 1 - q)) & 1 for q in range(n))


def _check_qubits(qubits, num_qubits):
    qubits = tuple(int(q) for q in qubits)
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"repeated qubit in {qubits}")
    for q in qubits:
        if not 0 <= q < num_qubits:
            raise ValueError(f"qubit {q} out of range for {num_qubits} qubits")
    return qubits


def apply_gate(state, gate, inplace=False):
    _check_qubits(gate.qubits, state.num_qubits)
    out = state if inplace else state.copy()
    apply_ops(out.amplitudes.reshape(1, -1), Circuit(state.num_qubits, (gate,)))
    return out


def run_circuit(initial, circuit, inplace=False):
    if initial.num_qubits != circuit.num_qubits:
        raise ValueError(f"circuit on {circuit.num_qubits} qubits applied to "
                         f"a {initial.num_qubits}-qubit state")
    out = initial if inplace else initial.copy()
    apply_ops(out.amplitudes.reshape(1, -1), circuit)
    return out


def marginal_probabilities(state, subset):
    """Outcome law of measuring ``subset`` (in the given order), indexed big-endian."""
    subset = _check_qubits(subset, state.num_qubits)
    n = state.num_qubits
    probs = state.probabilities().reshape((2,) * n)
    others = tuple(q for q in range(n) if q not in subset)
    marg = probs.sum(axis=others) if others else probs
    # remaining axes are in ascending qubit order; reorder to match subset
    order = np.argsort(np.argsort(subset))
    marg = np.transpose(marg, axes=tuple(order)) if len(subset) > 1 else marg
    return np.ascontiguousarray(marg).reshape(-1)


def reduced_density_matrix(state, subset):
    """Density matrix of ``subset`` (in the given order) with the rest traced out."""
    subset = _check_qubits(subset, state.num_qubits)
    n = state.num_qubits
    others = tuple(q for q in range(n) if q not in subset)
    amps = state.amplitudes.reshape((2,) * n).transpose(subset + others)
    m = amps.reshape(2 ** len(subset), -1)
    return m @ m.conj().T


def sample_bitstrings(state, subset, shots, seed):
    """Seeded measurement counts over ``subset``, keyed by bitstring."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    probs = marginal_probabilities(state, subset)
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(int(shots), probs)
    width = len(tuple(subset))
    return {format(i, f"0{width}b"): int(c) for i, c in enumerate(counts) if c}


def expectation_z(state, qubit):
    (qubit,) = _check_qubits((qubit,), state.num_qubits)
    p = marginal_probabilities(state, (qubit,))
    return float(p[0] - p[1])


def inverse_circuit(circuit):
    return Circuit(circuit.num_qubits, tuple(g.adjoint() for g in reversed(circuit.gates)))


def controlled_wrap(circuit, control, polarity=1):
    """Condition every gate of ``circuit`` on ``control`` (which must be idle in it)."""
    for g in circuit.gates:
        if control in g.qubits:
            raise ValueError(f"control qubit {control} is acted on by {g.name}")
    n = max(circuit.num_qubits, control + 1)
    return Circuit(n, tuple(g.with_control(control, polarity) for g in circuit.gates))

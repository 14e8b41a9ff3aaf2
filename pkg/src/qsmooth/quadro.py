"""Amplitude estimation of a smoothed class probability.

The state preparation ``A`` runs the noise preparation, then the classifier,
then copies the classifier's output qubit onto a fresh flag qubit (the last
qubit of the working register). The Grover operator reflects about the
flagged subspace and about ``A|0...0>``; its eigenphases ``+-2 theta`` encode
``a = sin^2(theta) = P(flag = 1)``. A single-ancilla iterative phase estimation
reads the phase one bit per round, least significant first.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .simulator import Circuit, Gate, apply_ops, cnot, controlled_wrap, mcz
from .smoothing import SmoothedEstimate


@dataclass(frozen=True)
class QaeConfig:
    m: int
    shots_per_bit: int = 1
    repetitions: int = 1
    alpha: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"need at least one phase bit, got m={self.m}")
        if self.shots_per_bit < 1:
            raise ValueError("shots_per_bit must be positive")
        if self.repetitions < 1 or self.repetitions % 2 == 0:
            raise ValueError(f"repetitions must be odd and positive, got {self.repetitions}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class PhaseEstimate:
    phi_hat: float
    bits: tuple
    a_hat: float
    a_lower: float
    oracle_calls: int
    trace: tuple = field(default=(), repr=False, compare=False)

    @property
    def classifier_calls(self):
        """Each Grover step runs the classifier forward and backward."""
        return 2 * self.oracle_calls


def fold_phase(phi):
    """Map ``phi`` and ``1 - phi`` to the same point of ``[0, 1/2]``."""
    phi = float(phi) % 1.0
    return min(phi, 1.0 - phi)


def amplitude_from_phase(phi_hat):
    if not 0.0 <= phi_hat < 1.0:
        raise ValueError(f"phase {phi_hat} outside [0, 1)")
    return float(np.sin(np.pi * phi_hat) ** 2)


def phase_lower_bound(phi_hat, m, cls=1):
    """Lower bound on ``P(class cls)`` after backing the folded phase off by one grid step."""
    phi = fold_phase(phi_hat)
    step = 2.0 ** -m
    if cls == 1:
        return float(np.sin(np.pi * max(0.0, phi - step)) ** 2)
    if cls == 0:
        return float(1.0 - np.sin(np.pi * min(0.5, phi + step)) ** 2)
    raise ValueError(f"class must be 0 or 1, got {cls}")


def oracle_call_budget(config_or_m, shots_per_bit=None):
    """``(M, actual)``: the quoted budget ``2^(m+1) - 1`` and the IQPE count.

    ``actual`` is ``shots_per_bit * (2^m - 1)`` Grover applications for one run.
    """
    if isinstance(config_or_m, QaeConfig):
        m, shots = config_or_m.m, config_or_m.shots_per_bit
    else:
        m, shots = int(config_or_m), 1 if shots_per_bit is None else int(shots_per_bit)
    if m < 1:
        raise ValueError(f"need at least one phase bit, got m={m}")
    return 2 ** (m + 1) - 1, shots * (2 ** m - 1)


# -- circuits -------------------------------------------------------------------

def build_state_preparation(prep, classifier, output_qubit):
    """``A``: prep, classifier, then CNOT from ``output_qubit`` onto a new flag qubit."""
    width = max(prep.num_qubits, classifier.num_qubits)
    if not 0 <= output_qubit < classifier.num_qubits:
        raise ValueError(f"output qubit {output_qubit} is outside the classifier's "
                         f"{classifier.num_qubits} qubits")
    flag = width
    body = prep.widened(width + 1).gates + classifier.widened(width + 1).gates
    return Circuit(width + 1, body + (cnot(output_qubit, flag),))


def zero_reflection(num_qubits):
    """``I - 2|0...0><0...0|`` as X layer, multi-controlled Z, X layer."""
    every = tuple(range(num_qubits))
    flip = Gate("X", every)
    if num_qubits == 1:
        core = (Gate("Z", (0,)),)
    else:
        core = (mcz(every[:-1], every[-1]),)
    return Circuit(num_qubits, (flip,) + core + (flip,))


def grover_from_preparation(A):
    """``Q = A S0 A^dag S_chi`` with the flag as the good-subspace marker.

    ``S_chi`` is X Z X on the flag, which is ``-(I - 2 P_good)``. Folding the
    minus sign into the oracle reflection keeps the eigenphases at ``+-2 theta``
    once Q is controlled, where a dropped global sign would become a relative
    phase of pi and turn the estimate into ``1 - a``.
    """
    n = A.num_qubits
    flag = n - 1
    s_chi = (Gate("X", (flag,)), Gate("Z", (flag,)), Gate("X", (flag,)))
    gates = s_chi + A.inverse().gates + zero_reflection(n).gates + A.gates
    return Circuit(n, gates)


def build_grover_operator(prep, classifier, output_qubit):
    return grover_from_preparation(build_state_preparation(prep, classifier, output_qubit))


# -- iterative phase estimation ---------------------------------------------------

def _one_probability(psi, ancilla_bit):
    idx = np.arange(psi.shape[1])
    return float(np.sum(np.abs(psi[0, (idx & ancilla_bit) != 0]) ** 2))


def iqpe_phase(Q, A, m, shots_per_bit=1, seed=0):
    """Single-ancilla phase estimation of ``Q`` on the state ``A|0...0>``.

    Rounds run from the least significant bit: round ``k`` (``k = m..1``)
    applies controlled-``Q^(2^(k-1))``, removes the already-known lower bits
    with an RZ on the ancilla, and measures in the X basis. ``shots_per_bit``
    seeded outcomes are drawn from the exact ancilla law and the majority bit
    (ties go to the first shot) is kept. The working register is then projected
    onto that outcome and carried into the next round, so the branches of the
    two eigenphases ``+-phi`` separate exactly as in one-shot textbook QPE.
    """
    if m < 1:
        raise ValueError(f"need at least one phase bit, got m={m}")
    if shots_per_bit < 1:
        raise ValueError("shots_per_bit must be positive")
    if A.num_qubits != Q.num_qubits:
        raise ValueError(f"A acts on {A.num_qubits} qubits but Q on {Q.num_qubits}")
    n = Q.num_qubits
    anc = n
    anc_bit = 1  # ancilla is the least significant qubit
    rng = np.random.default_rng(seed)

    cq = controlled_wrap(Q, anc)
    psi = np.zeros((1, 2 ** (n + 1)), dtype=complex)
    psi[0, 0] = 1.0
    apply_ops(psi, A.widened(n + 1))

    bits = [0] * (m + 1)  # bits[l] is b_l of 0.b_1...b_m
    rows = []
    for k in range(m, 0, -1):
        omega = sum(bits[l] * 2.0 ** -(l - k + 1) for l in range(k + 1, m + 1))
        apply_ops(psi, Circuit(n + 1, (Gate("H", (anc,)),)))
        for _ in range(2 ** (k - 1)):
            apply_ops(psi, cq)
        tail = (Gate("RZ", (anc,), params=(-2 * np.pi * omega,)), Gate("H", (anc,)))
        apply_ops(psi, Circuit(n + 1, tail))

        p_one = min(1.0, max(0.0, _one_probability(psi, anc_bit)))
        shots = rng.random(shots_per_bit) < p_one
        ones = int(shots.sum())
        zeros = shots_per_bit - ones
        if ones != zeros:
            bit = int(ones > zeros)
        else:
            bit = int(shots[0])
        bits[k] = bit

        idx = np.arange(psi.shape[1])
        keep = ((idx & anc_bit) != 0) == bool(bit)
        psi[0, ~keep] = 0.0
        psi /= np.linalg.norm(psi)
        if bit:
            apply_ops(psi, Circuit(n + 1, (Gate("X", (anc,)),)))
        rows.append({"round": m - k, "bit_index": k, "power": 2 ** (k - 1),
                     "p_one": p_one, "ones": ones, "zeros": zeros, "majority": bit})

    phi = sum(bits[l] * 2.0 ** -l for l in range(1, m + 1))
    _, calls = oracle_call_budget(m, shots_per_bit)
    return PhaseEstimate(phi_hat=phi, bits=tuple(bits[1:]),
                         a_hat=amplitude_from_phase(phi),
                         a_lower=phase_lower_bound(phi, m, 1),
                         oracle_calls=calls, trace=tuple(rows))


def write_trace(path, estimates):
    """One JSON line per IQPE round, tagged with its repetition index."""
    with open(path, "w", encoding="utf-8") as fh:
        for rep, est in enumerate(estimates):
            for row in est.trace:
                fh.write(json.dumps({"repetition": rep, **row}) + "\n")


# -- median boosting ----------------------------------------------------------------

def repetition_seeds(seed, repetitions):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(repetitions)]


def run_repetitions(Q, A, config, workers=1):
    seeds = repetition_seeds(config.seed, config.repetitions)
    job = lambda s: iqpe_phase(Q, A, config.m, config.shots_per_bit, s)  # noqa: E731
    if workers > 1 and config.repetitions > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, seeds))
    return [job(s) for s in seeds]


def median_phase(estimates):
    """Median of the folded phases (the run whose amplitude is the median)."""
    return float(np.median([fold_phase(e.phi_hat) for e in estimates]))


def quadro_estimate(prep, classifier, output_qubit, config, workers=1, estimates_out=None):
    """Median-of-runs amplitude estimate of ``P(output_qubit = 1)`` as a :class:`SmoothedEstimate`.

    ``p_lower`` backs the folded median phase off by one grid step. When
    ``estimates_out`` is a list, the per-run :class:`PhaseEstimate` objects are
    appended to it.
    """
    A = build_state_preparation(prep, classifier, output_qubit)
    Q = grover_from_preparation(A)
    estimates = run_repetitions(Q, A, config, workers)
    if estimates_out is not None:
        estimates_out.extend(estimates)
    phi = median_phase(estimates)
    return SmoothedEstimate(
        p_hat=amplitude_from_phase(phi),
        p_lower=phase_lower_bound(phi, config.m, 1),
        alpha=config.alpha,
        trials=config.repetitions * config.shots_per_bit * config.m,
        oracle_calls=sum(e.oracle_calls for e in estimates),
    )

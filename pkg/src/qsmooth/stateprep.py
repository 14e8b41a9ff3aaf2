"""k-Hamming noise law and the circuits that load it.

Three preparations are provided:

* :func:`mottonen_circuit` loads the exact law into amplitudes with a cascade of
  uniformly controlled RY rotations (exponential gate count).
* :func:`hamming_prep_circuit` uses one ancilla per input bit and constant depth.
  Each data bit is flipped independently with probability
  ``sin(sigma*pi/2)**2 / 2``, so the law is centred on ``x``, symmetric under bit
  permutations and decreasing in Hamming distance, but it is not the exact law.
* :func:`uniform_prep_circuit` uses a single ancilla and mixes ``|x>`` with a
  uniform superposition.

Register layout: data qubits first (``0..n-1``), ancillas after them.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .simulator import (
    Circuit,
    StateVector,
    bits_to_index,
    ch,
    cnot,
    cry,
    h,
    marginal_probabilities,
    mcx,
    run_circuit,
    ry,
    x as xgate,
)

MAX_ENUM_BITS = 20


def parse_bits(bits):
    """Accept "011", (0, 1, 1) or a numpy array and return a tuple of ints."""
    if isinstance(bits, str):
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"not a bitstring: {bits!r}")
        return tuple(int(c) for c in bits)
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise ValueError(f"not a bitstring: {bits!r}")
    return out


def format_bits(bits):
    return "".join(str(int(b)) for b in bits)


@dataclass(frozen=True)
class HammingNoiseSpec:
    """Smoothing law parameters: bit-length ``n``, maximum distance ``k``, temperature ``sigma``.

    For the circuit preparations ``sigma`` is the rotation angle as a fraction
    of pi and must lie in ``[0, 1]``; the closed-form law needs ``sigma > 0``.
    """

    n: int
    k: int
    sigma: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0 <= self.k <= self.n:
            raise ValueError(f"k={self.k} must satisfy 0 <= k <= n={self.n}")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be a non-negative finite number, got {self.sigma}")


def hamming_weights(spec):
    """Normalised weight of each distance 0..k: ``w(i) ∝ exp(-i/sigma)``."""
    if spec.sigma <= 0:
        raise ValueError("sigma must be positive for the closed-form weights")
    logits = -np.arange(spec.k + 1) / spec.sigma
    w = np.exp(logits - logits.max())
    return w / w.sum()


def hamming_point_probability(spec, distance):
    """Probability of one particular bitstring at Hamming distance ``distance``."""
    if not 0 <= distance <= spec.k:
        raise ValueError(f"distance {distance} outside 0..{spec.k}")
    return float(hamming_weights(spec)[distance] / math.comb(spec.n, distance))


def popcount(a):
    return np.bitwise_count(np.asarray(a, dtype=np.uint64)).astype(np.int64)


def distances_from(x):
    """Hamming distance of every basis index (big-endian) from ``x``."""
    x = parse_bits(x)
    return popcount(np.arange(2 ** len(x), dtype=np.uint64) ^ np.uint64(bits_to_index(x)))


class DiscreteDistribution:
    """Dense probability table over all ``2**n`` bitstrings (big-endian index)."""

    def __init__(self, n, probs, atol=1e-10):
        if n > MAX_ENUM_BITS:
            raise ValueError(f"n={n} exceeds the enumeration cap of {MAX_ENUM_BITS} bits")
        probs = np.asarray(probs, dtype=float).reshape(-1)
        if probs.shape[0] != 2 ** n:
            raise ValueError(f"expected {2 ** n} probabilities, got {probs.shape[0]}")
        if (probs < -atol).any():
            raise ValueError("negative probability")
        if abs(probs.sum() - 1.0) > atol:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        self.n = n
        self.probs = np.clip(probs, 0.0, None)

    def __getitem__(self, bits):
        return float(self.probs[bits_to_index(parse_bits(bits))])

    def items(self):
        """(bitstring, probability) for nonzero entries, sorted by bitstring."""
        for idx in np.flatnonzero(self.probs):
            yield format(int(idx), f"0{self.n}b"), float(self.probs[idx])

    def by_distance(self, x):
        """Probabilities grouped by distance from ``x``: {d: sorted array}."""
        d = distances_from(x)
        return {int(i): np.sort(self.probs[d == i]) for i in np.unique(d)}

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["bitstring", "probability"])
            for bits, p in self.items():
                w.writerow([bits, repr(p)])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no rows")
        n = len(rows[0]["bitstring"])
        probs = np.zeros(2 ** n)
        for row in rows:
            probs[bits_to_index(parse_bits(row["bitstring"]))] = float(row["probability"])
        return cls(n, probs)


def target_distribution(spec, x):
    """Exact k-Hamming law centred on ``x``."""
    x = parse_bits(x)
    if len(x) != spec.n:
        raise ValueError(f"x has {len(x)} bits, spec expects {spec.n}")
    if spec.n > MAX_ENUM_BITS:
        raise ValueError(f"n={spec.n} exceeds the enumeration cap of {MAX_ENUM_BITS} bits")
    w = hamming_weights(spec)
    per_state = np.array([w[i] / math.comb(spec.n, i) for i in range(spec.k + 1)])
    d = distances_from(x)
    probs = np.where(d <= spec.k, per_state[np.minimum(d, spec.k)], 0.0)
    return DiscreteDistribution(spec.n, probs)


def uniform_mixture_distribution(n, sigma, x):
    """Classical law of the uniform preparation: ``x`` w.p. cos², else uniform."""
    x = parse_bits(x)
    if len(x) != n:
        raise ValueError(f"x has {len(x)} bits, expected {n}")
    stay = math.cos(sigma * math.pi / 2) ** 2
    probs = np.full(2 ** n, (1.0 - stay) / 2 ** n)
    probs[bits_to_index(x)] += stay
    return DiscreteDistribution(n, probs)


# -- circuits ----------------------------------------------------------------

def _ucry(angles, controls, target):
    """Uniformly controlled RY as alternating RY / CNOT (Gray-code ordering)."""
    k = len(controls)
    if k == 0:
        return [ry(angles[0], target)]
    size = 2 ** k
    gray = np.arange(size) ^ (np.arange(size) >> 1)
    # sign[j, i] = (-1)^(popcount(j & gray_i))
    sign = 1 - 2 * (popcount(np.arange(size)[:, None] & gray[None, :]) & 1)
    thetas = sign.T @ np.asarray(angles) / size
    gates = []
    for i in range(size):
        gates.append(ry(float(thetas[i]), target))
        changed = int(gray[i] ^ gray[(i + 1) % size])
        bit = changed.bit_length() - 1
        gates.append(cnot(controls[k - 1 - bit], target))
    return gates


def mottonen_angles(probs, n):
    """Per-stage RY angles: stage q holds one angle per value of qubits 0..q-1."""
    probs = np.asarray(probs, dtype=float)
    stages = []
    for q in range(n):
        mass = probs.reshape(2 ** q, 2, 2 ** (n - q - 1)).sum(axis=2)
        stages.append(2 * np.arctan2(np.sqrt(mass[:, 1]), np.sqrt(mass[:, 0])))
    return stages


def mottonen_circuit(target):
    """Prepare ``sum_b sqrt(p(b)) |b>`` from ``|0...0>`` on ``target.n`` qubits."""
    n = target.n
    if abs(target.probs.sum() - 1.0) > 1e-10:
        raise ValueError("target distribution is not normalised")
    gates = []
    for q, angles in enumerate(mottonen_angles(target.probs, n)):
        gates.extend(_ucry(angles, tuple(range(q)), q))
    return Circuit(n, gates)


def purified_mottonen_circuit(target):
    """Möttönen load followed by a CNOT copy of every data qubit into its own ancilla.

    The copies decohere the data register, which then holds the classical
    mixture ``sum_b p(b) |b><b|`` rather than a coherent superposition.
    """
    n = target.n
    load = mottonen_circuit(target)
    return Circuit(2 * n, load.gates + tuple(cnot(i, n + i) for i in range(n)))


def _check_sigma(sigma):
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma={sigma} must lie in [0, 1] for circuit preparation")


def hamming_prep_circuit(spec, x, controlled_embedding=False):
    """Constant-depth preparation on ``2n`` qubits (data, then one ancilla per bit).

    Layers: basis-embed ``x``; H on every ancilla; RY(sigma*pi) from ancilla
    ``i`` onto data ``i``; X on every ancilla. ``controlled_embedding=True``
    appends a multi-controlled X (all ancillas as controls) onto the set bits of
    ``x``; it moves the no-flip branch off ``x`` and is kept only for comparison.
    """
    x = parse_bits(x)
    n = spec.n
    if len(x) != n:
        raise ValueError(f"x has {len(x)} bits, spec expects {n}")
    _check_sigma(spec.sigma)
    anc = range(n, 2 * n)
    gates = [xgate(i) for i in range(n) if x[i]]
    gates += [h(a) for a in anc]
    gates += [cry(spec.sigma * math.pi, n + i, i) for i in range(n)]
    gates += [xgate(a) for a in anc]
    ones = tuple(i for i in range(n) if x[i])
    if controlled_embedding and ones:
        gates.append(mcx(tuple(anc), ones))
    return Circuit(2 * n, gates)


def uniform_prep_circuit(n, sigma, x):
    """Single-ancilla preparation on ``n + 1`` qubits: ``x`` mixed with a uniform spread."""
    x = parse_bits(x)
    if len(x) != n:
        raise ValueError(f"x has {len(x)} bits, expected {n}")
    _check_sigma(sigma)
    gates = [xgate(i) for i in range(n) if x[i]]
    gates.append(ry(sigma * math.pi, n))
    gates += [ch(n, i) for i in range(n)]
    return Circuit(n + 1, gates)


def induced_distribution(circuit, data_qubits):
    """Measurement law of ``data_qubits`` after running ``circuit`` from ``|0...0>``."""
    state = run_circuit(StateVector(circuit.num_qubits), circuit)
    data_qubits = tuple(data_qubits)
    return DiscreteDistribution(len(data_qubits), marginal_probabilities(state, data_qubits))

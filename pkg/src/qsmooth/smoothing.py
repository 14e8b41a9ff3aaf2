"""Classical side of l0 randomized smoothing.

Perturbation sampling, Clopper-Pearson lower bounds, the slack ``delta(r)``
between smoothing laws whose centres differ in ``r`` bits, certified radii and
an exact-enumeration oracle for smoothed probabilities.

``delta(r)`` is the total-variation distance between the two laws, which bounds
the change of any bounded expectation. For laws realised by a quantum
preparation the data register can carry coherences that a quantum classifier
sees; the matching bound there is the trace distance between the reduced data
states (``metric="trace"``), which reduces to total variation for diagonal
states.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from .simulator import StateVector, reduced_density_matrix, run_circuit
from .stateprep import (
    DiscreteDistribution,
    HammingNoiseSpec,
    MAX_ENUM_BITS,
    hamming_prep_circuit,
    hamming_weights,
    induced_distribution,
    parse_bits,
    target_distribution,
    uniform_mixture_distribution,
    uniform_prep_circuit,
)

ABSTAIN = -1

SOURCES = ("target", "uniform", "hamming-circuit", "uniform-circuit")
METRICS = ("tv", "trace")


@dataclass(frozen=True)
class SmoothedEstimate:
    p_hat: float
    p_lower: float
    alpha: float
    trials: int
    oracle_calls: int

    def __post_init__(self):
        if not 0.0 <= self.p_lower <= self.p_hat + 1e-12 <= 1.0 + 1e-12:
            raise ValueError(f"need 0 <= p_lower <= p_hat <= 1, got {self.p_lower}, {self.p_hat}")
        if self.oracle_calls < self.trials:
            raise ValueError("oracle_calls must be at least trials")


# -- sampling ------------------------------------------------------------------

def sample_perturbations(spec, x, size, seed):
    """``size`` draws from the k-Hamming law around ``x`` as a ``(size, n)`` uint8 array.

    A distance ``i`` is drawn with probability ``w(i)``, then a uniformly random
    ``i``-subset of positions is flipped.
    """
    x = np.array(parse_bits(x), dtype=np.uint8)
    if x.shape[0] != spec.n:
        raise ValueError(f"x has {x.shape[0]} bits, spec expects {spec.n}")
    rng = np.random.default_rng(seed)
    out = np.broadcast_to(x, (size, spec.n)).copy()
    if spec.k == 0:
        return out
    dist = rng.choice(spec.k + 1, size=size, p=hamming_weights(spec))
    ranks = np.argsort(np.argsort(rng.random((size, spec.n)), axis=1), axis=1)
    out ^= (ranks < dist[:, None]).astype(np.uint8)
    return out


def sample_perturbation(spec, x, seed):
    return tuple(int(b) for b in sample_perturbations(spec, x, 1, seed)[0])


def sample_from_distribution(dist, size, seed):
    """``size`` bitstrings drawn from a :class:`DiscreteDistribution`."""
    rng = np.random.default_rng(seed)
    idx = rng.choice(2 ** dist.n, size=size, p=dist.probs / dist.probs.sum())
    shifts = np.arange(dist.n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


# -- confidence bounds --------------------------------------------------------

def _check_counts(successes, trials, alpha):
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError(f"invalid counts: {successes} successes in {trials} trials")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def clopper_pearson_lower(successes, trials, alpha):
    """One-sided exact binomial lower bound at level ``1 - alpha``."""
    _check_counts(successes, trials, alpha)
    if successes == 0:
        return 0.0
    return float(stats.beta.ppf(alpha, successes, trials - successes + 1))


def clopper_pearson_upper(successes, trials, alpha):
    _check_counts(successes, trials, alpha)
    if successes == trials:
        return 1.0
    return float(stats.beta.ppf(1 - alpha, successes + 1, trials - successes))


# -- distances between smoothing laws -------------------------------------------

def tv_distance(p, q):
    p = p.probs if isinstance(p, DiscreteDistribution) else np.asarray(p)
    q = q.probs if isinstance(q, DiscreteDistribution) else np.asarray(q)
    return 0.5 * float(np.abs(p - q).sum())


def trace_distance(rho, sigma):
    return 0.5 * float(np.abs(np.linalg.eigvalsh(rho - sigma)).sum())


def _flip(x, positions):
    x = list(x)
    for p in positions:
        x[p] ^= 1
    return tuple(x)


def smoothing_law(spec, x, source):
    """Classical law of ``source`` centred on ``x``."""
    if source == "target":
        return target_distribution(spec, x)
    if source == "uniform":
        return uniform_mixture_distribution(spec.n, spec.sigma, x)
    if source == "hamming-circuit":
        return induced_distribution(hamming_prep_circuit(spec, x), range(spec.n))
    if source == "uniform-circuit":
        return induced_distribution(uniform_prep_circuit(spec.n, spec.sigma, x), range(spec.n))
    raise ValueError(f"unknown distribution source {source!r}; expected one of {SOURCES}")


def prepared_data_state(spec, x, source):
    """Reduced density matrix of the data register after a circuit preparation."""
    if source == "hamming-circuit":
        circuit = hamming_prep_circuit(spec, x)
    elif source == "uniform-circuit":
        circuit = uniform_prep_circuit(spec.n, spec.sigma, x)
    else:
        return np.diag(smoothing_law(spec, x, source).probs).astype(complex)
    state = run_circuit(StateVector(circuit.num_qubits), circuit)
    return reduced_density_matrix(state, range(spec.n))


@lru_cache(maxsize=4096)
def _delta(n, k, sigma, r, source, metric, x, positions):
    spec = HammingNoiseSpec(n, k, sigma)
    moved = _flip(x, positions)
    if metric == "trace" and source.endswith("-circuit"):
        return trace_distance(prepared_data_state(spec, x, source),
                              prepared_data_state(spec, moved, source))
    return tv_distance(smoothing_law(spec, x, source), smoothing_law(spec, moved, source))


def delta_at_radius(spec, r, source="target", metric="tv", x=None, positions=None):
    """Distance between the smoothing laws centred at ``x`` and at ``x`` with ``r`` bits flipped.

    By permutation symmetry the value does not depend on ``x`` or on which
    positions are flipped; both default to the canonical choice (all-zero
    centre, first ``r`` positions).
    """
    if source not in SOURCES:
        raise ValueError(f"unknown distribution source {source!r}; expected one of {SOURCES}")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if not 0 <= r <= spec.n:
        raise ValueError(f"radius {r} outside 0..{spec.n}")
    if spec.n > MAX_ENUM_BITS:
        raise ValueError(f"n={spec.n} exceeds the enumeration cap of {MAX_ENUM_BITS} bits")
    if r == 0:
        return 0.0
    x = (0,) * spec.n if x is None else parse_bits(x)
    positions = tuple(range(r)) if positions is None else tuple(sorted(positions))
    if len(positions) != r or len(set(positions)) != r:
        raise ValueError(f"need {r} distinct flip positions, got {positions}")
    return _delta(spec.n, spec.k, float(spec.sigma), r, source, metric, x, positions)


def delta_within_radius(spec, r, source="target", metric="tv"):
    """Worst-case slack over every shift of at most ``r`` bits.

    Exact-distance values need not be monotone in ``r`` (the exact law with
    ``n=3, k=3, sigma=1`` has ``delta(1) > delta(2)``), so a certificate for the
    whole ball uses the running maximum.
    """
    return max(delta_at_radius(spec, i, source, metric) for i in range(r + 1))


def delta_profile(spec, source="target", metric="tv", max_radius=None):
    """``[slack(0), ..., slack(max_radius)]`` with ``slack = delta_within_radius``."""
    top = spec.n if max_radius is None else min(max_radius, spec.n)
    exact = [delta_at_radius(spec, r, source, metric) for r in range(top + 1)]
    return list(np.maximum.accumulate(exact))


def radius_from_deltas(p_lower, deltas):
    """Largest ``r`` with ``p_lower - deltas[r] > 1/2``; ``ABSTAIN`` if ``p_lower <= 1/2``.

    ``deltas[r]`` must bound the shift for every distance up to ``r``
    (non-decreasing); ``deltas[0]`` is ignored and taken as 0.
    """
    if not 0.0 <= p_lower <= 1.0:
        raise ValueError(f"p_lower={p_lower} outside [0, 1]")
    if p_lower <= 0.5:
        return ABSTAIN
    radius = 0
    for r in range(1, len(deltas)):
        if p_lower - deltas[r] > 0.5:
            radius = r
        else:
            break
    return radius


def certified_radius(p_lower, spec, source="target", metric="tv"):
    """Largest radius certified by ``p_lower`` against the ``source`` smoothing law."""
    if not 0.0 <= p_lower <= 1.0:
        raise ValueError(f"p_lower={p_lower} outside [0, 1]")
    if p_lower <= 0.5:
        return ABSTAIN
    return radius_from_deltas(p_lower, delta_profile(spec, source, metric))


# -- exact oracle -----------------------------------------------------------------

def exact_smoothed_value(distribution, soft_classifier, batched=False):
    """``sum_b p(b) * soft_classifier(b)`` by enumeration of the support.

    With ``batched=True`` the classifier receives a ``(m, n)`` uint8 array and
    returns ``m`` values; otherwise it is called once per bitstring tuple.
    """
    if distribution.n > MAX_ENUM_BITS:
        raise ValueError(f"n={distribution.n} exceeds the enumeration cap")
    support = np.flatnonzero(distribution.probs)
    shifts = np.arange(distribution.n - 1, -1, -1, dtype=np.int64)
    bits = ((support[:, None] >> shifts) & 1).astype(np.uint8)
    if batched:
        values = np.asarray(soft_classifier(bits), dtype=float)
    else:
        values = np.array([soft_classifier(tuple(int(b) for b in row)) for row in bits])
    return float(np.dot(distribution.probs[support], values))


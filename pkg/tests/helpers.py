"""Random instances shared by several test modules."""
import numpy as np


def random_circuit(n, length, seed):
    """Mixed random circuit over every gate kind, with random controls and polarities."""
    from qsmooth.simulator import Circuit, Gate

    rng = np.random.default_rng(seed)
    kinds = ["X", "H", "Z", "RY", "RZ", "ROT"]
    nparams = {"RY": 1, "RZ": 1, "ROT": 3}
    gates = []
    for _ in range(length):
        kind = kinds[rng.integers(len(kinds))]
        qubits = rng.permutation(n)
        nt = 1 + int(rng.integers(min(2, n)))
        nc = int(rng.integers(0, min(3, n - nt) + 1))
        targets = tuple(int(q) for q in qubits[:nt])
        controls = tuple(int(q) for q in qubits[nt:nt + nc])
        polarity = tuple(int(p) for p in rng.integers(0, 2, nc))
        params = tuple(rng.uniform(-np.pi, np.pi, nparams.get(kind, 0)))
        gates.append(Gate(kind, targets, controls, polarity, params))
    return Circuit(n, gates)


def random_state(n, seed):
    from qsmooth.simulator import StateVector

    rng = np.random.default_rng(seed)
    amps = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return StateVector(n, amps / np.linalg.norm(amps))

"""Strongly-entangling-layer classifier over basis-embedded bitstrings.

Each layer applies ``Rot(a, b, c)`` to every qubit and then a ring of CNOTs
``q -> (q + range) mod Q``. The soft output is ``P(output qubit = 1)``; the
hard prediction is ``1[soft > 0.5]``. Training is full-expectation gradient
descent on the mean squared error.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .simulator import Circuit, Gate, StateVector, _compile, apply_ops, cnot, rot, x as xgate
from .stateprep import format_bits, parse_bits
from . import backend


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class ClassifierParams:
    angles: np.ndarray
    output_qubit: int = 0
    entangling_range: int = 1

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        if self.angles.ndim != 3 or self.angles.shape[2] != 3:
            raise ValueError(f"angles must have shape (layers, qubits, 3), got {self.angles.shape}")
        if not np.isfinite(self.angles).all():
            raise ValueError("angles must be finite")
        if not 0 <= self.output_qubit < self.num_qubits:
            raise ValueError(f"output qubit {self.output_qubit} outside 0..{self.num_qubits - 1}")
        if self.entangling_range < 1 or (self.num_qubits > 1 and self.entangling_range % self.num_qubits == 0):
            raise ValueError(f"entangling range {self.entangling_range} invalid for {self.num_qubits} qubits")

    @property
    def num_layers(self):
        return self.angles.shape[0]

    @property
    def num_qubits(self):
        return self.angles.shape[1]

    @classmethod
    def zeros(cls, num_qubits, num_layers, **kw):
        return cls(np.zeros((num_layers, num_qubits, 3)), **kw)

    @classmethod
    def random(cls, num_qubits, num_layers, seed, scale=0.1, **kw):
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(-scale, scale, size=(num_layers, num_qubits, 3)), **kw)

    def with_angles(self, angles):
        return ClassifierParams(angles, self.output_qubit, self.entangling_range)

    def save(self, path):
        """Write ``layer,qubit,axis,angle`` rows plus a ``.header.json`` companion."""
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["layer", "qubit", "axis", "angle"])
            for (layer, qubit, axis), angle in np.ndenumerate(self.angles):
                w.writerow([layer, qubit, axis, repr(float(angle))])
        header = {"qubits": self.num_qubits, "layers": self.num_layers,
                  "output_qubit": self.output_qubit, "range": self.entangling_range}
        header_path(path).write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        path = Path(path)
        header = json.loads(header_path(path).read_text(encoding="utf-8"))
        angles = np.full((header["layers"], header["qubits"], 3), np.nan)
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                angles[int(row["layer"]), int(row["qubit"]), int(row["axis"])] = float(row["angle"])
        if np.isnan(angles).any():
            raise ValueError(f"{path}: missing angles for the declared shape")
        return cls(angles, header["output_qubit"], header["range"])


def header_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".header.json")


@dataclass
class LabeledDataset:
    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.uint8))
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError(f"{self.inputs.shape[0]} inputs but {self.labels.shape[0]} labels")
        if not np.isin(self.labels, (0, 1)).all() or not np.isin(self.inputs, (0, 1)).all():
            raise ValueError("inputs and labels must be binary")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def num_bits(self):
        return self.inputs.shape[1]

    def subset(self, idx):
        return LabeledDataset(self.inputs[idx], self.labels[idx])

    def flipped(self):
        return LabeledDataset(self.inputs, 1 - self.labels)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["bits", "label"])
            for bits, label in zip(self.inputs, self.labels):
                w.writerow([format_bits(bits), int(label)])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no rows")
        return cls([parse_bits(r["bits"]) for r in rows], [int(r["label"]) for r in rows])


# -- circuits and forward pass ------------------------------------------------------

def classifier_circuit(params):
    q, r = params.num_qubits, params.entangling_range
    gates = []
    for layer in params.angles:
        gates += [rot(*layer[i], i) for i in range(q)]
        if q > 1:
            gates += [cnot(i, (i + r) % q) for i in range(q)]
    return Circuit(q, gates)


def embedding_circuit(bits):
    bits = parse_bits(bits)
    return Circuit(len(bits), [xgate(i) for i, b in enumerate(bits) if b])


def _basis_batch(inputs, num_qubits):
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.int64))
    if inputs.shape[1] != num_qubits:
        raise ValueError(f"inputs have {inputs.shape[1]} bits, classifier has {num_qubits} qubits")
    shifts = np.arange(num_qubits - 1, -1, -1)
    idx = (inputs << shifts).sum(axis=1)
    psi = np.zeros((inputs.shape[0], 2 ** num_qubits), dtype=complex)
    psi[np.arange(inputs.shape[0]), idx] = 1.0
    return psi


def _one_mask(num_qubits, qubit):
    return ((np.arange(2 ** num_qubits) >> (num_qubits - 1 - qubit)) & 1).astype(bool)


def predict_soft_batch(params, inputs):
    """Soft outputs for every row of ``inputs``."""
    psi = _basis_batch(inputs, params.num_qubits)
    apply_ops(psi, classifier_circuit(params))
    mask = _one_mask(params.num_qubits, params.output_qubit)
    return (np.abs(psi[:, mask]) ** 2).sum(axis=1)


def predict_soft(params, bits):
    bits = parse_bits(bits)
    if len(bits) != params.num_qubits:
        raise ValueError(f"input has {len(bits)} bits, classifier has {params.num_qubits} qubits")
    return float(predict_soft_batch(params, [bits])[0])


def predict(params, bits):
    return int(predict_soft(params, bits) > 0.5)


def output_state(params, bits):
    """Full statevector after embedding ``bits`` and running the classifier."""
    circuit = embedding_circuit(bits) + classifier_circuit(params)
    state = StateVector(params.num_qubits)
    apply_ops(state.amplitudes.reshape(1, -1), circuit)
    return state


def evaluate_accuracy(params, dataset):
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    y = predict_soft_batch(params, dataset.inputs)
    return float(np.mean((y > 0.5).astype(int) == dataset.labels))


def mse_loss(params, dataset):
    y = predict_soft_batch(params, dataset.inputs)
    return float(np.mean((y - dataset.labels) ** 2))


# -- gradients -------------------------------------------------------------------

def parameter_shift_gradient(params, dataset):
    """d(MSE)/d(angles) with the two-point shift rule on every rotation angle."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    y = predict_soft_batch(params, dataset.inputs)
    residual = 2.0 * (y - dataset.labels) / len(dataset)
    grad = np.zeros_like(params.angles)
    for idx in np.ndindex(params.angles.shape):
        shifted = params.angles.copy()
        shifted[idx] += math.pi / 2
        plus = predict_soft_batch(params.with_angles(shifted), dataset.inputs)
        shifted[idx] -= math.pi
        minus = predict_soft_batch(params.with_angles(shifted), dataset.inputs)
        grad[idx] = residual @ ((plus - minus) / 2)
    return grad


def _expanded_ops(params):
    """Flat gate list with Rot split into RZ, RY, RZ; parametric entries carry their angle index."""
    q, r, n = params.num_qubits, params.entangling_range, params.num_qubits
    ops = []
    for layer in range(params.num_layers):
        for i in range(q):
            a, b, c = params.angles[layer, i]
            for axis, kind, theta in ((0, "RZ", a), (1, "RY", b), (2, "RZ", c)):
                ops.append((Gate(kind, (i,), params=(theta,)), (layer, i, axis)))
        if q > 1:
            for i in range(q):
                ops.append((cnot(i, (i + r) % q), None))
    return [(g, _compile(g, n), _compile(g.adjoint(), n), idx) for g, idx in ops]


def _derivative(gate):
    theta = gate.params[0]
    if gate.kind == "RY":
        c, s = math.cos(theta / 2) / 2, math.sin(theta / 2) / 2
        return False, (-s, -c, c, -s)
    return True, (-0.5j * np.exp(-0.5j * theta), 0.5j * np.exp(0.5j * theta))


def _apply_compiled(psi, op, n, k):
    diag, targets, cmask, cval, u = op
    for t in targets:
        if diag:
            k.apply_diag(psi, n, t, cmask, cval, u[0], u[1], 1)
        else:
            k.apply_1q(psi, n, t, cmask, cval, u[0], u[1], u[2], u[3], 1)


def adjoint_gradient(params, dataset):
    """Same quantity as :func:`parameter_shift_gradient` from one forward and one backward sweep."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    n = params.num_qubits
    k = backend.kernels
    ops = _expanded_ops(params)
    psi = _basis_batch(dataset.inputs, n)
    for _, fwd, _, _ in ops:
        _apply_compiled(psi, fwd, n, k)
    mask = _one_mask(n, params.output_qubit)
    y = (np.abs(psi[:, mask]) ** 2).sum(axis=1)
    residual = 2.0 * (y - dataset.labels) / len(dataset)
    lam = psi * mask
    grad = np.zeros_like(params.angles)
    for gate, _, inv, idx in reversed(ops):
        _apply_compiled(psi, inv, n, k)
        if idx is not None:
            diag, u = _derivative(gate)
            mu = psi.copy()
            op = (diag, gate.targets, 0, 0, u)
            _apply_compiled(mu, op, n, k)
            dy = 2.0 * np.einsum("bi,bi->b", lam.conj(), mu).real
            grad[idx] = residual @ dy
        _apply_compiled(lam, inv, n, k)
    return grad


# -- training ----------------------------------------------------------------------

@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int | None = None
    seed: int = 0
    init_scale: float = 0.1
    gradient: str = "adjoint"


@dataclass
class TrainResult:
    params: ClassifierParams
    losses: list = field(default_factory=list)


def train(config, dataset, num_qubits=None, num_layers=2, output_qubit=0, entangling_range=1,
          initial=None):
    """Plain gradient descent from seeded small random angles; deterministic per seed."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    num_qubits = dataset.num_bits if num_qubits is None else num_qubits
    grad_fn = {"adjoint": adjoint_gradient, "shift": parameter_shift_gradient}[config.gradient]
    rng = np.random.default_rng(config.seed)
    if initial is None:
        angles = rng.uniform(-config.init_scale, config.init_scale, size=(num_layers, num_qubits, 3))
        params = ClassifierParams(angles, output_qubit, entangling_range)
    else:
        params = initial
    batch = len(dataset) if not config.batch_size else min(config.batch_size, len(dataset))
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset)) if batch < len(dataset) else np.arange(len(dataset))
        for start in range(0, len(dataset), batch):
            part = dataset.subset(np.sort(order[start:start + batch]))
            angles = params.angles - config.learning_rate * grad_fn(params, part)
            if not np.isfinite(angles).all():
                raise TrainingDiverged(f"non-finite angles at epoch {epoch}")
            params = params.with_angles(angles)
        loss = mse_loss(params, dataset)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
        losses.append(loss)
    return TrainResult(params, losses)

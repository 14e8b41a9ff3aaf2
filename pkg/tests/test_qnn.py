import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bitstrings, dense_circuit
from qsmooth.preprocess import load_iris
from qsmooth.qnn import (
    ClassifierParams,
    LabeledDataset,
    TrainConfig,
    TrainingDiverged,
    adjoint_gradient,
    classifier_circuit,
    evaluate_accuracy,
    header_path,
    mse_loss,
    output_state,
    parameter_shift_gradient,
    predict,
    predict_soft,
    predict_soft_batch,
    train,
)
from qsmooth.simulator import sample_bitstrings


def finite_difference(params, dataset, step=1e-4):
    grad = np.zeros_like(params.angles)
    for idx in np.ndindex(params.angles.shape):
        a = params.angles.copy()
        a[idx] += step
        up = mse_loss(params.with_angles(a), dataset)
        a[idx] -= 2 * step
        down = mse_loss(params.with_angles(a), dataset)
        grad[idx] = (up - down) / (2 * step)
    return grad


def random_dataset(n, size, seed):
    rng = np.random.default_rng(seed)
    return LabeledDataset(rng.integers(0, 2, (size, n)), rng.integers(0, 2, size))


# -- circuit construction ----------------------------------------------------------

def ring_output(x, layers, r=1):
    """Classical trace of a zero-angle classifier: CNOT rings permute basis states."""
    bits = list(x)
    q = len(bits)
    for _ in range(layers):
        for i in range(q):
            bits[(i + r) % q] ^= bits[i]
    return bits[0]


def test_zero_angles_are_cnot_rings():
    params = ClassifierParams.zeros(4, 3)
    state = output_state(params, "0000")
    assert abs(state.amplitudes[0]) == pytest.approx(1.0)
    for x in bitstrings(4):
        assert predict_soft(params, x) == float(ring_output(x, 3))
    # the closing CNOT feeds parity back into qubit 0, so this is not x[0]
    assert predict_soft(params, "1000") == 0.0


def test_zero_angles_single_qubit_pass_through():
    params = ClassifierParams.zeros(1, 2)
    assert predict_soft(params, "0") == 0.0 and predict_soft(params, "1") == 1.0


def test_single_qubit_layer_has_no_entanglers():
    circ = classifier_circuit(ClassifierParams.zeros(1, 1))
    assert [g.kind for g in circ.gates] == ["ROT"]


@pytest.mark.parametrize("q,layers", [(2, 1), (3, 2), (5, 4), (10, 3)])
def test_gate_count_two_per_qubit_per_layer(q, layers):
    assert len(classifier_circuit(ClassifierParams.zeros(q, layers)).gates) == layers * q * 2


def test_ring_respects_entangling_range():
    circ = classifier_circuit(ClassifierParams.zeros(5, 1, entangling_range=2))
    pairs = [(g.controls[0], g.targets[0]) for g in circ.gates if g.controls]
    assert pairs == [(q, (q + 2) % 5) for q in range(5)]


def test_classifier_matches_dense_oracle():
    params = ClassifierParams.random(3, 2, seed=4, scale=math.pi)
    u = dense_circuit(classifier_circuit(params))
    for x in bitstrings(3):
        col = u[:, int("".join(map(str, x)), 2)]
        p1 = float(np.sum(np.abs(col[4:]) ** 2))
        assert predict_soft(params, x) == pytest.approx(p1, abs=1e-12)


def test_rot_pi_flips_output():
    params = ClassifierParams(np.array([[[0.0, math.pi, 0.0]]]))
    assert predict_soft(params, "0") == pytest.approx(1.0)
    # on a ring the flip propagates around and the closing CNOT undoes it
    ring = np.zeros((1, 3, 3))
    ring[0, 0] = (0, math.pi, 0)
    assert predict_soft(ClassifierParams(ring), "000") == pytest.approx(0.0)


@pytest.mark.parametrize("bad", [
    dict(angles=np.zeros((2, 3))),
    dict(angles=np.full((1, 2, 3), np.nan)),
    dict(angles=np.zeros((1, 2, 3)), output_qubit=2),
    dict(angles=np.zeros((1, 4, 3)), entangling_range=4),
])
def test_params_validation(bad):
    with pytest.raises(ValueError):
        ClassifierParams(**bad)


def test_predict_rejects_length_mismatch():
    with pytest.raises(ValueError):
        predict_soft(ClassifierParams.zeros(3, 1), "01")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 4), st.integers(1, 3))
def test_soft_output_is_probability(seed, q, layers):
    params = ClassifierParams.random(q, layers, seed=seed, scale=math.pi)
    y = predict_soft_batch(params, list(bitstrings(q)))
    assert ((y >= -1e-12) & (y <= 1 + 1e-12)).all()


def test_soft_output_matches_shot_sampling():
    params = ClassifierParams.random(3, 2, seed=11, scale=2.0)
    y = predict_soft(params, "101")
    state = output_state(params, "101")
    shots = 10 ** 6
    ones = sample_bitstrings(state, [0], shots, seed=5).get("1", 0)
    se = math.sqrt(y * (1 - y) / shots)
    assert abs(ones / shots - y) <= 4 * se


# -- gradients ---------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(20))
def test_parameter_shift_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    q = int(rng.integers(1, 4))
    params = ClassifierParams.random(q, int(rng.integers(1, 3)), seed=seed, scale=math.pi,
                                     output_qubit=int(rng.integers(0, q)))
    data = random_dataset(q, 6, seed)
    shift = parameter_shift_gradient(params, data)
    np.testing.assert_allclose(shift, finite_difference(params, data), atol=1e-5)


@pytest.mark.parametrize("seed", range(8))
def test_adjoint_equals_parameter_shift(seed):
    params = ClassifierParams.random(4, 3, seed=seed, scale=math.pi, output_qubit=seed % 4)
    data = random_dataset(4, 10, seed + 100)
    np.testing.assert_allclose(adjoint_gradient(params, data), parameter_shift_gradient(params, data),
                               atol=1e-12)


def test_gradient_vanishes_at_minimum():
    params = ClassifierParams.zeros(3, 2)
    xs = list(bitstrings(3))
    data = LabeledDataset(xs, [ring_output(x, 2) for x in xs])
    assert mse_loss(params, data) == 0.0
    assert np.abs(parameter_shift_gradient(params, data)).max() < 1e-10


def test_gradient_zero_outside_causal_cone():
    # range 2 on 4 qubits pairs {0, 2} and {1, 3}; nothing reaches qubit 0 from 1 or 3
    params = ClassifierParams.random(4, 2, seed=3, scale=math.pi, entangling_range=2)
    data = random_dataset(4, 8, 9)
    grad = parameter_shift_gradient(params, data)
    assert np.abs(grad[:, [1, 3]]).max() < 1e-12
    assert np.abs(grad[:, [0, 2]]).max() > 1e-3


def test_gradients_reject_empty_dataset():
    empty = LabeledDataset(np.zeros((0, 2)), [])
    for fn in (parameter_shift_gradient, adjoint_gradient):
        with pytest.raises(ValueError):
            fn(ClassifierParams.zeros(2, 1), empty)


# -- training ----------------------------------------------------------------------

def test_single_sample_descent_is_monotone():
    data = LabeledDataset([[1, 0, 1]], [0])
    result = train(TrainConfig(learning_rate=0.05, epochs=10, seed=2, init_scale=1.0), data)
    assert all(b < a for a, b in zip(result.losses, result.losses[1:]))


def test_training_is_deterministic_per_seed():
    data = random_dataset(3, 12, 1)
    cfg = TrainConfig(epochs=15, seed=7, batch_size=5)
    a, b = train(cfg, data), train(cfg, data)
    assert np.array_equal(a.params.angles, b.params.angles)
    c = train(TrainConfig(epochs=15, seed=8, batch_size=5), data)
    assert not np.array_equal(a.params.angles, c.params.angles)


def test_shift_and_adjoint_training_agree():
    data = random_dataset(2, 6, 4)
    a = train(TrainConfig(epochs=5, seed=1, gradient="adjoint"), data)
    b = train(TrainConfig(epochs=5, seed=1, gradient="shift"), data)
    np.testing.assert_allclose(a.params.angles, b.params.angles, atol=1e-10)


def test_divergence_is_reported():
    with pytest.raises(TrainingDiverged):
        train(TrainConfig(learning_rate=float("inf"), epochs=2, init_scale=1.0), random_dataset(2, 4, 0))


def test_iris_reaches_perfect_test_accuracy():
    train_set, test_set = load_iris(seed=0)
    result = train(TrainConfig(seed=0), train_set, num_layers=2)
    assert result.params.num_qubits == 3
    assert evaluate_accuracy(result.params, test_set) == 1.0
    assert result.losses[-1] < result.losses[0]


# -- accuracy -------------------------------------------------------------------------

def test_accuracy_hand_count():
    params = ClassifierParams.zeros(2, 1)   # predicts x[0]
    data = LabeledDataset([[0, 0], [1, 0], [1, 1], [0, 1], [1, 1]], [0, 1, 0, 1, 1])
    assert evaluate_accuracy(params, data) == pytest.approx(3 / 5)


def test_constant_classifier_on_balanced_labels():
    params = ClassifierParams.zeros(2, 1)
    data = LabeledDataset([[0, 0], [0, 1], [0, 0], [0, 1]], [0, 1, 1, 0])
    assert evaluate_accuracy(params, data) == 0.5


@pytest.mark.parametrize("seed", range(5))
def test_flipped_labels_mirror_accuracy(seed):
    params = ClassifierParams.random(3, 2, seed=seed, scale=math.pi)
    data = random_dataset(3, 20, seed)
    y = predict_soft_batch(params, data.inputs)
    if np.any(np.isclose(y, 0.5)):
        pytest.skip("tie at the decision threshold")
    assert evaluate_accuracy(params, data) + evaluate_accuracy(params, data.flipped()) == pytest.approx(1.0)


def test_predict_thresholds_soft_output():
    params = ClassifierParams.random(2, 2, seed=1, scale=math.pi)
    for x in bitstrings(2):
        assert predict(params, x) == int(predict_soft(params, x) > 0.5)


# -- persistence -------------------------------------------------------------------------

def test_params_round_trip(tmp_path):
    params = ClassifierParams.random(3, 4, seed=2, scale=math.pi, output_qubit=1, entangling_range=2)
    path = tmp_path / "params.csv"
    params.save(path)
    assert header_path(path).exists()
    back = ClassifierParams.load(path)
    assert np.array_equal(back.angles, params.angles)
    assert (back.output_qubit, back.entangling_range) == (1, 2)
    assert path.read_text().splitlines()[0] == "layer,qubit,axis,angle"


def test_load_rejects_missing_rows(tmp_path):
    path = tmp_path / "p.csv"
    ClassifierParams.zeros(2, 1).save(path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ValueError):
        ClassifierParams.load(path)


def test_dataset_csv_round_trip(tmp_path):
    data = random_dataset(4, 7, 3)
    data.to_csv(tmp_path / "d.csv")
    back = LabeledDataset.from_csv(tmp_path / "d.csv")
    assert np.array_equal(back.inputs, data.inputs) and np.array_equal(back.labels, data.labels)


def test_dataset_validation():
    with pytest.raises(ValueError):
        LabeledDataset([[0, 1]], [0, 1])
    with pytest.raises(ValueError):
        LabeledDataset([[0, 2]], [0])
    with pytest.raises(ValueError):
        LabeledDataset([[0, 1]], [3])

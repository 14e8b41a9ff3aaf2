"""Per-sample certification along the sampling (RS) and amplitude-estimation paths."""
from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .qnn import classifier_circuit, predict_soft_batch
from .quadro import QaeConfig, median_phase, phase_lower_bound, quadro_estimate
from .smoothing import (
    ABSTAIN,
    certified_radius,
    clopper_pearson_lower,
    sample_perturbations,
)
from .stateprep import (
    HammingNoiseSpec,
    hamming_prep_circuit,
    parse_bits,
    purified_mottonen_circuit,
    target_distribution,
    uniform_prep_circuit,
)

PATHS = ("rs", "quadro")
DISTRIBUTIONS = ("hamming", "uniform", "exact")

# simulator ceiling for the amplitude-estimation register (working + flag + phase ancilla)
MAX_QUADRO_QUBITS = 26


@dataclass(frozen=True)
class CertificationRecord:
    index: int
    label: int
    predicted: int
    p_hat: float
    p_lower: float
    radius: int
    oracle_calls: int
    path: str
    distribution: str
    sigma: float
    seed: int

    def __post_init__(self):
        if self.radius < ABSTAIN:
            raise ValueError(f"radius {self.radius} below the abstain marker")
        if not 0.0 <= self.p_lower <= 1.0:
            raise ValueError(f"p_lower={self.p_lower} outside [0, 1]")
        if self.path not in PATHS:
            raise ValueError(f"unknown path {self.path!r}")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}")

    @property
    def certified_correct(self):
        return self.predicted == self.label and self.radius >= 0


def _check_distribution(distribution, allowed=DISTRIBUTIONS):
    if distribution not in allowed:
        raise ValueError(f"unknown distribution {distribution!r}; expected one of {allowed}")


def draw_uniform_mixture(n, sigma, x, size, seed):
    """Keep ``x`` with probability ``cos^2(sigma*pi/2)``, otherwise draw a uniform string."""
    rng = np.random.default_rng(seed)
    x = np.array(parse_bits(x), dtype=np.uint8)
    keep = rng.random(size) < np.cos(sigma * np.pi / 2) ** 2
    out = rng.integers(0, 2, size=(size, n), dtype=np.uint8)
    out[keep] = x
    return out


def rs_certify_sample(x, label, spec, params, shots, alpha, seed, distribution="hamming", index=0):
    """Monte-Carlo certificate from ``shots`` noisy inputs, one output measurement each.

    The reported class is the majority of the measured outcomes and its count
    feeds the Clopper-Pearson bound.
    """
    _check_distribution(distribution, ("hamming", "uniform"))
    if shots < 1:
        raise ValueError("shots must be at least 1")
    x = parse_bits(x)
    draw_seed, shot_seed = np.random.SeedSequence(seed).spawn(2)
    if distribution == "hamming":
        noisy = sample_perturbations(spec, x, shots, draw_seed)
        source = "target"
    else:
        noisy = draw_uniform_mixture(spec.n, spec.sigma, x, shots, draw_seed)
        source = "uniform"
    # evaluate each distinct perturbation once
    uniq, inverse = np.unique(noisy, axis=0, return_inverse=True)
    soft = predict_soft_batch(params, uniq)[inverse.reshape(-1)]
    ones = int((np.random.default_rng(shot_seed).random(shots) < soft).sum())
    predicted = int(ones > shots - ones)
    hits = ones if predicted == 1 else shots - ones
    p_lower = clopper_pearson_lower(hits, shots, alpha)
    return CertificationRecord(
        index=index, label=int(label), predicted=predicted, p_hat=hits / shots, p_lower=p_lower,
        radius=certified_radius(p_lower, spec, source, "tv"), oracle_calls=shots,
        path="rs", distribution=distribution, sigma=float(spec.sigma), seed=int(seed))


def quadro_prep(spec, x, distribution):
    """Noise preparation circuit and the matching slack source and metric."""
    if distribution == "hamming":
        return hamming_prep_circuit(spec, x), "hamming-circuit", "trace"
    if distribution == "uniform":
        return uniform_prep_circuit(spec.n, spec.sigma, x), "uniform-circuit", "trace"
    # the purified load leaves the data register in the classical target mixture
    return purified_mottonen_circuit(target_distribution(spec, x)), "target", "tv"


def quadro_register_size(n, distribution):
    ancillas = {"hamming": n, "uniform": 1, "exact": n}[distribution]
    return n + ancillas + 2


def quadro_certify_sample(x, label, spec, params, config, distribution="hamming", index=0,
                          workers=1):
    _check_distribution(distribution)
    size = quadro_register_size(spec.n, distribution)
    if size > MAX_QUADRO_QUBITS:
        raise ValueError(f"{size}-qubit register exceeds the simulator limit of {MAX_QUADRO_QUBITS}")
    if params.num_qubits != spec.n:
        raise ValueError(f"classifier has {params.num_qubits} qubits, inputs have {spec.n} bits")
    prep, source, metric = quadro_prep(spec, x, distribution)
    runs = []
    est = quadro_estimate(prep, classifier_circuit(params), params.output_qubit, config,
                          workers=workers, estimates_out=runs)
    phi = median_phase(runs)
    predicted = int(est.p_hat >= 0.5)
    if predicted:
        p_hat, p_lower = est.p_hat, est.p_lower
    else:
        p_hat, p_lower = 1.0 - est.p_hat, phase_lower_bound(phi, config.m, 0)
    return CertificationRecord(
        index=index, label=int(label), predicted=predicted, p_hat=p_hat, p_lower=p_lower,
        radius=certified_radius(p_lower, spec, source, metric), oracle_calls=est.oracle_calls,
        path="quadro", distribution=distribution, sigma=float(spec.sigma), seed=int(config.seed))


def certified_accuracy_curve(records, radii):
    """Fraction of records that are correct and certified at radius at least ``r``, per ``r``."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    return {int(r): sum(rec.predicted == rec.label and rec.radius >= r for rec in records) / len(records)
            for r in radii}


# -- dataset runs -----------------------------------------------------------------

def sample_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


@dataclass(frozen=True)
class CertifyJob:
    path: str
    distribution: str
    sigma: float
    k: int
    alpha: float = 0.1
    shots: int = 100
    m: int = 3
    shots_per_bit: int = 1
    repetitions: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.path not in PATHS:
            raise ValueError(f"unknown path {self.path!r}; expected one of {PATHS}")
        allowed = DISTRIBUTIONS if self.path == "quadro" else ("hamming", "uniform")
        _check_distribution(self.distribution, allowed)

    def run_one(self, params, index, bits, label):
        spec = HammingNoiseSpec(len(bits), self.k, self.sigma)
        seed = sample_seed(self.seed, index)
        if self.path == "rs":
            return rs_certify_sample(bits, label, spec, params, self.shots, self.alpha, seed,
                                     self.distribution, index)
        config = QaeConfig(self.m, self.shots_per_bit, self.repetitions, self.alpha, seed)
        return quadro_certify_sample(bits, label, spec, params, config, self.distribution, index)


def _worker_init():
    # one process per core already; keep the kernels single-threaded inside workers
    os.environ["QSMOOTH_NUM_THREADS"] = "1"


def _run_task(task):
    job, params, index, bits, label = task
    return job.run_one(params, index, bits, label)


def certify_dataset(job, params, dataset, indices=None, workers=1):
    """Certify ``dataset`` rows (all, or ``indices``); records come back in index order."""
    indices = range(len(dataset)) if indices is None else indices
    tasks = [(job, params, int(i), tuple(int(b) for b in dataset.inputs[i]), int(dataset.labels[i]))
             for i in indices]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init) as pool:
            records = list(pool.map(_run_task, tasks))
    else:
        records = [_run_task(t) for t in tasks]
    return sorted(records, key=lambda r: r.index)


RECORD_FIELDS = [f.name for f in fields(CertificationRecord)]


def write_records(path, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=RECORD_FIELDS)
        w.writeheader()
        for rec in records:
            row = asdict(rec)
            row["p_hat"] = repr(rec.p_hat)
            row["p_lower"] = repr(rec.p_lower)
            w.writerow(row)


def read_records(path):
    casts = {f.name: f.type for f in fields(CertificationRecord)}
    convert = {"int": int, "float": float, "str": str}
    with open(path, newline="", encoding="utf-8") as fh:
        return [CertificationRecord(**{k: convert[casts[k]](v) for k, v in row.items()})
                for row in csv.DictReader(fh)]


def write_curve(path, curve, path_name, shots):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["radius", "certified_accuracy", "path", "shots"])
        for r, acc in sorted(curve.items()):
            w.writerow([r, repr(acc), path_name, shots])


def describe(record):
    """One-line human summary of a record."""
    state = "abstain" if record.radius == ABSTAIN else f"radius {record.radius}"
    return (f"#{record.index} {record.path}/{record.distribution}: label {record.label}, "
            f"predicted {record.predicted}, p_lower {record.p_lower:.4f}, {state}, "
            f"{record.oracle_calls} calls")


"""Command-line batch runner: ``qsmooth {train,certify,distribution,bow,replay}``.

Every run writes a JSON manifest holding the fully resolved argument list,
seeds, input hashes and the package version. ``qsmooth replay MANIFEST``
re-executes it, optionally redirecting outputs into another directory.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__, backend
from .certify import CertifyJob, certified_accuracy_curve, certify_dataset, write_curve, write_records
from .preprocess import BowConfig, DataError, bow_dataset, data_path, load_gunpoint, load_iris, load_ucr
from .qnn import ClassifierParams, TrainConfig, TrainingDiverged, evaluate_accuracy, train
from .stateprep import (
    HammingNoiseSpec,
    format_bits,
    hamming_prep_circuit,
    induced_distribution,
    mottonen_circuit,
    parse_bits,
    target_distribution,
    uniform_prep_circuit,
)

log = logging.getLogger("qsmooth")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

# (qubits, layers) per dataset
DATASET_DEFAULTS = {"iris": (3, 2), "gunpoint": (10, 50)}


class ConfigError(ValueError):
    pass


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def dataset_files(name):
    if name == "iris":
        return [data_path("iris.csv")]
    return [data_path("GunPoint_TRAIN.tsv"), data_path("GunPoint_TEST.tsv")]


def load_dataset(name, seed):
    """``(train, test)`` for a bundled dataset; ``seed`` only affects the Iris split."""
    if name == "iris":
        return load_iris(seed)
    return load_gunpoint("train"), load_gunpoint("test")


# -- argument parsing ---------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="qsmooth", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qsmooth {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a classifier on a bundled dataset")
    p.add_argument("--dataset", choices=sorted(DATASET_DEFAULTS), required=True)
    p.add_argument("--qubits", type=int, help="classifier width (default: input bit length)")
    p.add_argument("--layers", type=int, help="number of entangling layers (iris 2, gunpoint 50)")
    p.add_argument("--seed", type=int, default=0, help="initialisation and Iris split seed")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.1, help="gradient-descent step size")
    p.add_argument("--batch-size", type=int, default=None, help="minibatch size (default: full batch)")
    p.add_argument("--init-scale", type=float, default=0.1, help="half-width of the uniform angle init")
    p.add_argument("--out", required=True, help="parameter CSV; a .header.json is written beside it")

    p = sub.add_parser("certify", help="certify the test split of a bundled dataset")
    p.add_argument("--dataset", choices=sorted(DATASET_DEFAULTS), required=True)
    p.add_argument("--params", required=True, help="parameter CSV written by 'train'")
    p.add_argument("--path", choices=["rs", "quadro"], required=True)
    p.add_argument("--dist", choices=["hamming", "uniform", "exact"], default="hamming",
                   help="noise law; 'exact' (quadro only) loads the target law with a Möttönen circuit")
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--k", type=int, default=1, help="maximum Hamming distance of the target law")
    p.add_argument("--shots", type=int, default=100, help="RS: perturbations per sample")
    p.add_argument("--m", type=int, default=3, help="quadro: phase bits")
    p.add_argument("--reps", type=int, default=1, help="quadro: odd number of median repetitions")
    p.add_argument("--shots-per-bit", type=int, default=1, help="quadro: majority-vote shots per phase bit")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0, help="run seed; also the Iris split seed")
    p.add_argument("--limit", type=int, default=None, help="certify only the first N test samples")
    p.add_argument("--max-radius", type=int, default=None, help="largest radius in curve.csv (default n)")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: available cores)")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("distribution", help="write a noise law as bitstring,probability CSV")
    p.add_argument("--method", choices=["target", "hamming-circuit", "uniform-circuit", "mottonen"],
                   required=True)
    p.add_argument("--x", required=True, help="centre bitstring, e.g. 011")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--k", type=int, default=None, help="maximum distance (default: len(x))")
    p.add_argument("--out", required=True)

    p = sub.add_parser("bow", help="binary Bag-of-Words encoding of a UCR file")
    p.add_argument("--in", dest="input", required=True, help="UCR file (label first, tab or comma)")
    p.add_argument("--window", type=int, default=15)
    p.add_argument("--word", type=int, default=2)
    p.add_argument("--bins", type=int, default=2)
    p.add_argument("--full-series", action="store_true", help="do not truncate to the first half")
    p.add_argument("--out", required=True)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("manifest")
    p.add_argument("--out-dir", default=None, help="write outputs here instead of the recorded paths")
    return parser


def resolved_argv(args):
    """Explicit argument list reproducing ``args`` (every flag spelled out)."""
    argv = [args.command]
    for key, value in sorted(vars(args).items()):
        if key in ("command", "verbose") or value is None:
            continue
        if key == "manifest":
            argv.append(str(value))
            continue
        flag = "--in" if key == "input" else "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        else:
            argv += [flag, str(value)]
    return argv


def write_manifest(path, args, inputs=(), extra=None):
    manifest = {
        "tool": "qsmooth",
        "version": __version__,
        "kernel_backend": backend.NAME,
        "command": args.command,
        "argv": resolved_argv(args),
        "args": {k: v for k, v in vars(args).items() if k != "verbose"},
        "inputs": {str(p): sha256(p) for p in inputs},
    }
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


# -- subcommands -------------------------------------------------------------------

def cmd_train(args):
    train_set, test_set = load_dataset(args.dataset, args.seed)
    qubits = args.qubits if args.qubits is not None else train_set.num_bits
    layers = args.layers if args.layers is not None else DATASET_DEFAULTS[args.dataset][1]
    if qubits != train_set.num_bits:
        raise ConfigError(f"{args.dataset} inputs have {train_set.num_bits} bits; --qubits {qubits} "
                          "cannot basis-embed them")
    if layers < 1 or args.epochs < 1:
        raise ConfigError("--layers and --epochs must be positive")
    args.qubits, args.layers = qubits, layers
    config = TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                         seed=args.seed, init_scale=args.init_scale)
    result = train(config, train_set, num_qubits=qubits, num_layers=layers)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    result.params.save(out)
    metrics = {"train_accuracy": evaluate_accuracy(result.params, train_set),
               "test_accuracy": evaluate_accuracy(result.params, test_set),
               "final_loss": result.losses[-1]}
    write_manifest(out.with_suffix(".manifest.json"), args, dataset_files(args.dataset),
                   {"metrics": metrics})
    print(f"train accuracy {metrics['train_accuracy']:.4f}  test accuracy {metrics['test_accuracy']:.4f}")
    return EXIT_OK


def cmd_certify(args):
    if args.path == "rs" and args.dist == "exact":
        raise ConfigError("--dist exact is only available on the quadro path")
    params = ClassifierParams.load(args.params)
    _, test_set = load_dataset(args.dataset, args.seed)
    if params.num_qubits != test_set.num_bits:
        raise ConfigError(f"classifier has {params.num_qubits} qubits, {args.dataset} inputs have "
                          f"{test_set.num_bits} bits")
    job = CertifyJob(path=args.path, distribution=args.dist, sigma=args.sigma, k=args.k,
                     alpha=args.alpha, shots=args.shots, m=args.m, shots_per_bit=args.shots_per_bit,
                     repetitions=args.reps, seed=args.seed)
    HammingNoiseSpec(test_set.num_bits, args.k, args.sigma)  # validates k and sigma early
    count = len(test_set) if args.limit is None else min(args.limit, len(test_set))
    workers = args.workers if args.workers is not None else backend.num_threads()
    records = certify_dataset(job, params, test_set, range(count), workers=workers)
    top = test_set.num_bits if args.max_radius is None else args.max_radius
    curve = certified_accuracy_curve(records, range(top + 1))

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records(out / "records.csv", records)
    budget = args.shots if args.path == "rs" else records[0].oracle_calls
    write_curve(out / "curve.csv", curve, args.path, budget)
    write_manifest(out / "manifest.json", args, dataset_files(args.dataset) + [Path(args.params)])
    for r, acc in curve.items():
        print(f"radius {r}: certified accuracy {acc:.4f}")
    return EXIT_OK


def cmd_distribution(args):
    x = parse_bits(args.x)
    k = len(x) if args.k is None else args.k
    spec = HammingNoiseSpec(len(x), k, args.sigma)
    if args.method == "target":
        dist = target_distribution(spec, x)
    elif args.method == "mottonen":
        dist = induced_distribution(mottonen_circuit(target_distribution(spec, x)), range(spec.n))
    elif args.method == "hamming-circuit":
        dist = induced_distribution(hamming_prep_circuit(spec, x), range(spec.n))
    else:
        dist = induced_distribution(uniform_prep_circuit(spec.n, spec.sigma, x), range(spec.n))
    args.k = k
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dist.to_csv(out)
    write_manifest(out.with_suffix(".manifest.json"), args)
    for d, probs in dist.by_distance(x).items():
        print(f"distance {d}: per string {probs.max():.6f}, total {probs.sum():.6f}")
    return EXIT_OK


def cmd_bow(args):
    config = BowConfig(window_size=args.window, word_size=args.word, n_bins=args.bins,
                       truncate_to_first_half=not args.full_series)
    dataset = bow_dataset(load_ucr(args.input), config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.to_csv(out)
    write_manifest(out.with_suffix(".manifest.json"), args, [Path(args.input)])
    print(f"{len(dataset)} rows of {dataset.num_bits} bits, e.g. {format_bits(dataset.inputs[0])}")
    return EXIT_OK


def replay_argv(manifest, out_dir=None):
    args = dict(manifest["args"])
    if out_dir is not None:
        out_dir = Path(out_dir)
        if "out_dir" in args:
            args["out_dir"] = str(out_dir)
        if "out" in args:
            args["out"] = str(out_dir / Path(args["out"]).name)
    return resolved_argv(argparse.Namespace(**args))


def cmd_replay(args):
    try:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {args.manifest}: {exc}") from None
    if manifest.get("tool") != "qsmooth" or "args" not in manifest:
        raise DataError(f"{args.manifest} is not a qsmooth manifest")
    if manifest["version"] != __version__:
        log.warning("manifest written by qsmooth %s, running %s", manifest["version"], __version__)
    for path, digest in manifest.get("inputs", {}).items():
        if not Path(path).exists() or sha256(path) != digest:
            raise DataError(f"input {path} is missing or differs from the recorded hash")
    return main(replay_argv(manifest, args.out_dir))


COMMANDS = {"train": cmd_train, "certify": cmd_certify, "distribution": cmd_distribution,
            "bow": cmd_bow, "replay": cmd_replay}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DataError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"qsmooth: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValueError, TrainingDiverged) as exc:
        print(f"qsmooth: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

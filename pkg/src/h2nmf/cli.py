"""Command-line interface.

Subcommands: ``cluster`` (hierarchical or flat clustering), ``endmembers``
(signature extraction plus optional scoring against a reference),
``synth-bench`` (the synthetic accuracy benchmark) and ``serve`` (the
interactive session service).

Exit codes: 0 success, 2 usage errors, 3 unreadable or malformed input
files, 4 domain errors (bad r, unsplittable input, ...).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io as hio
from .endmembers import extract_pure_pixels, match_and_score
from .hierarchy import run_h2nmf
from .splitter import flat_kmeans
from .synth import SynthConfig, generate, run_benchmark

EXIT_OK = 0
EXIT_INPUT = 3
EXIT_DOMAIN = 4

METHOD_TO_SPLITTER = {
    "h2nmf": "rank2nmf",
    "hkm": "kmeans",
    "hspkm": "spherical_kmeans",
}

OBJECTIVES = {"eq3": "default", "alt": "alt"}


def _load_input(path: str) -> hio.DataMatrix:
    p = Path(path)
    with open(p, "rb") as fh:
        head = fh.read(len(hio.CUBE_MAGIC))
    if head == hio.CUBE_MAGIC:
        return hio.load_cube(p)
    return hio.load_matrix_csv(p)


def _write_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "w") as fh:
        for v in labels:
            fh.write(f"{int(v)}\n")


def _epsilon_list(text: str) -> list[float]:
    if ":" in text:
        start, step, end = (float(v) for v in text.split(":"))
        if step <= 0:
            raise ValueError("epsilon step must be positive")
        count = int(round((end - start) / step)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(v) for v in text.split(",") if v.strip()]


def _cmd_cluster(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    dm = _load_input(args.input)
    t_load = time.perf_counter() - t0

    t0 = time.perf_counter()
    tree = None
    if args.method in METHOD_TO_SPLITTER:
        tree = run_h2nmf(
            dm.data,
            args.r,
            splitter=METHOD_TO_SPLITTER[args.method],
            delta_hat=args.delta_hat,
            objective=OBJECTIVES[args.objective],
            seed=args.seed,
        )
        labels = tree.flatten()
    else:
        mode = "euclidean" if args.method == "km" else "spherical"
        labels = flat_kmeans(dm.data, args.r, mode=mode, seed=args.seed)
    t_cluster = time.perf_counter() - t0

    t0 = time.perf_counter()
    _write_labels(out / "labels.csv", labels)
    if tree is not None:
        with open(out / "tree.json", "w") as fh:
            json.dump(tree.to_document(), fh, indent=1)
    if dm.geometry is not None:
        hio.cluster_map_image(labels, dm.geometry, out / "cluster_map.ppm")
        for k in range(1, int(labels.max()) + 1):
            hio.abundance_image(
                (labels == k).astype(float), dm.geometry, out / f"cluster_{k}.pgm"
            )
    t_write = time.perf_counter() - t0
    with open(out / "timing.txt", "w") as fh:
        fh.write(f"load_seconds {t_load:.6f}\n")
        fh.write(f"cluster_seconds {t_cluster:.6f}\n")
        fh.write(f"write_seconds {t_write:.6f}\n")
    return EXIT_OK


def _cmd_endmembers(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dm = _load_input(args.input)
    tree = run_h2nmf(
        dm.data,
        args.r,
        splitter=METHOD_TO_SPLITTER[args.method],
        delta_hat=args.delta_hat,
        seed=args.seed,
    )
    ends = extract_pure_pixels(dm.data, tree)
    hio.write_endmembers_csv(out / "endmembers.csv", ends)
    if dm.geometry is not None:
        for i in range(ends.abundances.shape[0]):
            hio.abundance_image(
                ends.abundances[i], dm.geometry, out / f"abundance_{i + 1}.pgm"
            )
    if args.truth:
        truth = hio.load_matrix_csv(args.truth).data
        if truth.shape[1] != ends.signatures.shape[1]:
            raise ValueError("reference endmember count does not match r")
        perm, per, avg = match_and_score(ends.signatures, truth)
        with open(out / "mrsa.csv", "w") as fh:
            fh.write("endmember,matched_column,mrsa_percent\n")
            for k, value in enumerate(per):
                fh.write(f"{k + 1},{int(perm[k]) + 1},{100.0 * value:.4f}\n")
            fh.write(f"average,,{100.0 * avg:.4f}\n")
        print("MRSA (percent):")
        for k, value in enumerate(per):
            print(f"  endmember {k + 1}: {100.0 * value:.2f}")
        print(f"  average: {100.0 * avg:.2f}")
    return EXIT_OK


def _cmd_synth_bench(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    epsilons = _epsilon_list(args.epsilons)
    algos = [a.strip().lower() for a in args.algos.split(",") if a.strip()]
    rows = run_benchmark(
        epsilons,
        args.s,
        args.b,
        args.trials,
        algorithms=algos,
        seed=args.seed,
        csv_path=out / "bench.csv",
    )
    if args.curves:
        for algo in algos:
            with open(out / f"curve_{algo}.csv", "w") as fh:
                fh.write("epsilon,mean_accuracy\n")
                for row in rows:
                    if row["algorithm"] == algo:
                        fh.write(f"{row['epsilon']:.6g},{row['mean_accuracy']:.6f}\n")
    for row in rows:
        print(
            f"epsilon={row['epsilon']:.3f} {row['algorithm']:>6}: "
            f"accuracy={row['mean_accuracy']:.4f} "
            f"seconds={row['mean_seconds']:.3f}"
        )
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    dm = _load_input(args.input)
    app = create_app(initial=dm, seed=args.seed)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _cmd_synth(args) -> int:
    # generate a synthetic cube, mainly for demos and smoke tests
    inst = generate(
        SynthConfig(epsilon=args.epsilon, s=args.s, b=args.b, seed=args.seed)
    )
    n = inst.M.shape[1]
    # squarest divisor pair so the exported maps look like images
    height = max(d for d in range(1, int(n**0.5) + 1) if n % d == 0)
    width = n // height
    hio.save_cube(args.out, inst.M, (width, height))
    if args.labels:
        _write_labels(Path(args.labels), inst.true_labels)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="h2nmf",
        description="Hierarchical rank-two NMF clustering toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="cluster the columns of a cube or CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument(
        "--method",
        default="h2nmf",
        choices=["h2nmf", "hkm", "hspkm", "km", "spkm"],
    )
    p.add_argument("--out", required=True)
    p.add_argument("--delta-hat", type=float, default=0.05, dest="delta_hat")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objective", default="eq3", choices=["eq3", "alt"])
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("endmembers", help="extract endmember signatures")
    p.add_argument("--input", required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", default="h2nmf", choices=["h2nmf", "hkm", "hspkm"])
    p.add_argument("--truth", default=None)
    p.add_argument("--delta-hat", type=float, default=0.05, dest="delta_hat")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_endmembers)

    p = sub.add_parser("synth-bench", help="synthetic clustering benchmark")
    p.add_argument("--epsilons", default="0:0.05:0.5")
    p.add_argument("--s", type=int, default=0, choices=[0, 1])
    p.add_argument("--b", type=int, default=0, choices=[0, 1])
    p.add_argument("--trials", type=int, default=25)
    p.add_argument("--algos", default="h2nmf,hkm,hspkm,spkm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--curves", action="store_true")
    p.set_defaults(func=_cmd_synth_bench)

    p = sub.add_parser("synth", help="write a synthetic cube")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--s", type=int, default=0, choices=[0, 1])
    p.add_argument("--b", type=int, default=0, choices=[0, 1])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--labels", default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("serve", help="run the interactive session service")
    p.add_argument("--input", required=True)
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except hio.FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())

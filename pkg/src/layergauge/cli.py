"""``layergauge`` command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from layergauge import __version__, dataset, experiment
from layergauge.architecture import ARCHITECTURES, ModelVariant, VariantTag, assemble_variant, \
    forward_to_representation, get_architecture
from layergauge.errors import ConfigurationError, LayerGaugeError
from layergauge.weights_io import Provenance, load_weights, random_bundle, save_weights, write_container

logger = logging.getLogger("layergauge")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _arch_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--arch", default="alexnet", choices=sorted(ARCHITECTURES))
    p.add_argument("--input-size", type=_positive_int, help="input raster side (default: architecture's own)")
    p.add_argument("--blocks", type=_positive_int, help="keep only the first BLOCKS representation blocks")


def _arch_from(args, parser):
    opts = {}
    if args.input_size:
        opts["input_size"] = args.input_size
    if args.blocks:
        if args.arch == "alexnet":
            parser.error("--blocks is only supported for scaled architectures")
        opts["blocks"] = args.blocks
    try:
        return get_architecture(args.arch, **opts)
    except ConfigurationError as exc:
        parser.error(str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="layergauge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-random", help="write a seeded random N(0, 0.01^2) weight container")
    _arch_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("extract", help="extract off-the-shelf features for one variant")
    _arch_args(p)
    p.add_argument("--weights", required=True, help="pretrained weight container")
    p.add_argument("--manifest", required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--variant", default="pretrained", choices=[t.value for t in VariantTag])
    p.add_argument("--seed", type=int, default=0, help="seed of the random net (random/hybrid variants)")
    p.add_argument("--split", action="store_true", help="write OUT.train / OUT.test for a 7:3 split")
    p.add_argument("--ratio", type=float, default=dataset.DEFAULT_RATIO)
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="run the full three-variant experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--repeats", type=_positive_int)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--out", default="layergauge-out")
    p.add_argument("--keep-going", action="store_true", help="record failed trials instead of aborting")
    p.add_argument("--jobs", type=_positive_int, help="worker processes (default: CPU count)")

    p = sub.add_parser("report", help="re-render plot data from a saved report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    return parser


def cmd_gen_random(args, parser) -> int:
    arch = _arch_from(args, parser)
    bundle = random_bundle(arch, args.seed)
    save_weights(bundle, args.out, arch)
    print(f"wrote random {arch.name} weights (seed {bundle.provenance.seed}) to {args.out}")
    return 0


def _split_paths(out: str) -> tuple[str, str]:
    stem, ext = os.path.splitext(out)
    return f"{stem}.train{ext}", f"{stem}.test{ext}"


def write_features(path, features: np.ndarray, labels, label: str) -> None:
    tensors = [("features", features), ("labels", np.asarray(labels, dtype=np.float32))]
    write_container(path, tensors, Provenance("pretrained", 0, label))


def cmd_extract(args, parser) -> int:
    arch = _arch_from(args, parser)
    if args.n > arch.N:
        parser.error(f"--n {args.n} outside [1, {arch.N}] for {arch.name}")
    variant = ModelVariant(VariantTag(args.variant), args.n)
    manifest = dataset.load_manifest(args.manifest)
    pretrained = load_weights(args.weights, arch)
    random = random_bundle(arch, args.seed, upto=args.n)
    weights = assemble_variant(arch, pretrained, random, variant)
    store = dataset.ImageStore(manifest, tuple(arch.input_shape[:2]))

    if args.split:
        plan = dataset.stratified_split(manifest, args.ratio, args.seed)
        parts = dict(zip(_split_paths(args.out), (plan.train_ids, plan.test_ids)))
        mean_ids = plan.train_ids
    else:
        parts = {args.out: tuple(manifest.ids)}
        mean_ids = manifest.ids
    mean = dataset.channel_mean(store.many(mean_ids))
    label = f"features {variant} arch={arch.name} mean={mean.tolist()}"
    for path, ids in parts.items():
        images = store.many(ids)
        feats = np.stack([
            forward_to_representation(arch, weights, dataset.preprocess(im, arch.input_shape, mean), args.n)
            for im in images
        ])
        write_features(path, feats, [im.label for im in images], label)
        print(f"wrote {feats.shape[0]} x {feats.shape[1]} features to {path}")
    return 0


def cmd_run(args, parser) -> int:
    config = experiment.load_config(args.config)
    overrides = {"keep_going": args.keep_going or config.keep_going,
                 "jobs": args.jobs or config.jobs or os.cpu_count() or 1}
    if args.repeats is not None:
        overrides["repeats"] = args.repeats
    if args.base_seed is not None:
        overrides["base_seed"] = args.base_seed
    config = dataclasses.replace(config, **overrides)
    os.makedirs(args.out, exist_ok=True)

    def progress(group):
        for t in group:
            state = f"acc={t.acc:.4f} C={t.chosen_c:g}" if t.ok else f"FAILED {t.error}"
            logger.info("%s trial %d: %s", t.variant, t.trial_index, state)

    report = experiment.run_experiment(config, progress)
    report_path = os.path.join(args.out, "report.json")
    experiment.save_report(report, report_path)
    failed = report.failed()
    try:
        acc_csv, gain_csv = experiment.emit_plot_data(report, args.out)
    except LayerGaugeError as exc:
        print(f"plot data not written: {exc}", file=sys.stderr)
        acc_csv = gain_csv = None
    print(f"{len(report.trials)} trials ({len(failed)} failed); report: {report_path}")
    if acc_csv:
        print(f"plot data: {acc_csv}, {gain_csv}")
    for n, g in sorted(report.total_gain().items()):
        lg = report.layer_gain().get(n)
        print(f"n={n}: totalGain={g:+.4f}" + (f" layerGain={lg:+.4f}" if lg is not None else ""))
    return 1 if failed else 0


def cmd_report(args, parser) -> int:
    report = experiment.load_report(args.report)
    acc_csv, gain_csv = experiment.emit_plot_data(report, args.out)
    print(f"plot data: {acc_csv}, {gain_csv}")
    return 0


COMMANDS = {"gen-random": cmd_gen_random, "extract": cmd_extract, "run": cmd_run, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args, parser)
    except (LayerGaugeError, OSError) as exc:
        print(f"layergauge {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

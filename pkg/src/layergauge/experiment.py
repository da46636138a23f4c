"""Trial orchestration for the three-variant, per-layer accuracy comparison.

One *trial index* fixes the data path: the 7:3 split, the augmentation
stream, the random net R and the SVM fold assignment are all derived from
``(base_seed, trial_index)`` and shared by every variant and every ``n``.
Only the weights differ between paired variants, so the gain estimates are
paired differences.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from layergauge import _accel, dataset, svm
from layergauge.architecture import (
    ALL_TAGS,
    ArchitectureSpec,
    ModelVariant,
    VariantTag,
    assemble_variant,
    forward_block,
    forward_to_representation,
    get_architecture,
)
from layergauge.errors import ConfigurationError, LayerGaugeError, ValidationError, WeightError
from layergauge.rng import RNG_IDENTITY, derive_seed
from layergauge.weights_io import WeightBundle, atomic_write_bytes, load_weights, random_layer

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = "paired-resplit-v1"
CACHE_ENV = "LAYERGAUGE_CACHE_DIR"


@dataclass(frozen=True)
class ExperimentConfig:
    pretrained_weights: str
    manifest: str
    arch_name: str = "alexnet"
    arch_options: dict = field(default_factory=dict)
    n_range: tuple[int, ...] = tuple(range(1, 9))
    variants: tuple[VariantTag, ...] = ALL_TAGS
    repeats: int = 50
    base_seed: int = 0
    ratio: float = dataset.DEFAULT_RATIO
    copies_per_image: int = dataset.DEFAULT_COPIES
    resize_on_load: bool = True
    augment: bool = True
    svm: svm.SvmConfig = svm.SvmConfig()
    cache_dir: str | None = None
    jobs: int = 1
    keep_going: bool = False

    def __post_init__(self):
        object.__setattr__(self, "n_range", tuple(sorted(set(int(n) for n in self.n_range))))
        object.__setattr__(self, "variants", tuple(t for t in ALL_TAGS if t in {VariantTag(v) for v in self.variants}))
        if self.repeats < 1:
            raise ConfigurationError(f"repeats must be at least 1, got {self.repeats}")
        if not self.n_range or not self.variants:
            raise ConfigurationError("n_range and variants must be non-empty")
        if self.copies_per_image < 1:
            raise ConfigurationError("copies_per_image must be at least 1")
        arch = self.arch
        for n in self.n_range:
            arch.check_n(n)

    @property
    def arch(self) -> ArchitectureSpec:
        return get_architecture(self.arch_name, **self.arch_options)

    def variant_list(self) -> list[ModelVariant]:
        return [ModelVariant(t, n) for t in self.variants for n in self.n_range]

    def resolved_cache_dir(self) -> str | None:
        return os.environ.get(CACHE_ENV) or self.cache_dir

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variants"] = [t.value for t in self.variants]
        d["n_range"] = list(self.n_range)
        d["svm"]["c_grid"] = list(self.svm.c_grid)
        return d


# --------------------------------------------------------------------------
# config files


def _parse_ints(text: str) -> tuple[int, ...]:
    out = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out += range(int(lo), int(hi) + 1)
        else:
            out.append(int(part))
    return tuple(out)


def config_from_mapping(sections: dict, base_dir: str = ".") -> ExperimentConfig:
    """Build a config from ``{section: {key: str}}`` (INI semantics)."""
    exp = dict(sections.get("experiment", {}))
    ds = dict(sections.get("dataset", {}))
    sv = dict(sections.get("svm", {}))
    arch_opts = {k: int(v) for k, v in sections.get("architecture", {}).items()}

    def path(value):
        if value is None:
            return None
        return value if os.path.isabs(value) else os.path.normpath(os.path.join(base_dir, value))

    def flag(value):
        return str(value).strip().lower() in ("1", "true", "yes", "on")

    try:
        svm_cfg = svm.SvmConfig(
            c_grid=tuple(float(c) for c in sv.get("c_grid", ",".join(map(str, svm.DEFAULT_C_GRID))).split(",")),
            folds=int(sv.get("folds", 5)),
            epochs=int(sv.get("epochs", 100)),
            tolerance=float(sv.get("tolerance", 1e-3)),
        )
        return ExperimentConfig(
            pretrained_weights=path(exp["weights"]),
            manifest=path(exp["manifest"]),
            arch_name=exp.get("arch", "alexnet"),
            arch_options=arch_opts,
            n_range=_parse_ints(exp.get("n_range", "1-8")),
            variants=tuple(v.strip() for v in exp.get("variants", "pretrained,hybrid,random").split(",")),
            repeats=int(exp.get("repeats", 50)),
            base_seed=int(exp.get("base_seed", 0)),
            ratio=float(ds.get("ratio", dataset.DEFAULT_RATIO)),
            copies_per_image=int(ds.get("copies_per_image", dataset.DEFAULT_COPIES)),
            resize_on_load=flag(ds.get("resize_on_load", "true")),
            augment=flag(ds.get("augment", "true")),
            svm=svm_cfg,
            cache_dir=path(exp.get("cache_dir")),
            jobs=int(exp.get("jobs", 0)),  # 0: let the caller pick
            keep_going=flag(exp.get("keep_going", "false")),
        )
    except KeyError as exc:
        raise ConfigurationError(f"config is missing required key {exc}") from None
    except ValueError as exc:
        if isinstance(exc, LayerGaugeError):
            raise
        raise ConfigurationError(f"bad config value: {exc}") from None


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config {path}: {exc}") from exc
    sections = {s: dict(parser[s]) for s in parser.sections()}
    return config_from_mapping(sections, os.path.dirname(os.path.abspath(path)))


# --------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class TrialResult:
    variant: ModelVariant
    trial_index: int
    seed: int
    acc: float | None
    chosen_c: float | None
    timing: float
    n_train: int = 0
    n_test: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.tag.value,
            "n": self.variant.n,
            "trial_index": self.trial_index,
            "seed": self.seed,
            "acc": self.acc,
            "chosen_c": self.chosen_c,
            "timing": self.timing,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialResult":
        return cls(ModelVariant(VariantTag(d["variant"]), int(d["n"])), d["trial_index"], d["seed"], d["acc"],
                   d["chosen_c"], d["timing"], d.get("n_train", 0), d.get("n_test", 0), d.get("error"))


def _sort_key(v: ModelVariant):
    return ALL_TAGS.index(v.tag), v.n


def trial_seed(base_seed: int, variant: ModelVariant, trial_index: int) -> int:
    return derive_seed(base_seed, "trial", variant.tag.value, variant.n, trial_index)


def data_seed(base_seed: int, trial_index: int) -> int:
    return derive_seed(base_seed, "data", trial_index)


def weight_seed(base_seed: int, trial_index: int) -> int:
    return derive_seed(base_seed, "random-weights", trial_index)


@dataclass
class KnowledgeGainReport:
    config: dict
    trials: list[TrialResult]
    rng: str = RNG_IDENTITY
    backend: str = _accel.BACKEND
    protocol: str = PROTOCOL_VERSION
    notes: list[str] = field(default_factory=list)

    def accs(self, tag: VariantTag, n: int) -> list[float]:
        return [t.acc for t in self.trials if t.ok and t.variant == ModelVariant(tag, n)]

    def n_values(self) -> list[int]:
        return sorted({t.variant.n for t in self.trials})

    def tags(self) -> list[VariantTag]:
        present = {t.variant.tag for t in self.trials}
        return [t for t in ALL_TAGS if t in present]

    def aggregates(self) -> dict[tuple[VariantTag, int], tuple[float, float, int]]:
        out = {}
        for tag in self.tags():
            for n in self.n_values():
                accs = self.accs(tag, n)
                if accs:
                    out[(tag, n)] = (mean_acc(accs), std_acc(accs), len(accs))
        return out

    def mean(self, tag: VariantTag, n: int) -> float:
        return self.aggregates()[(VariantTag(tag), n)][0]

    def layer_gain(self) -> dict[int, float]:
        agg = self.aggregates()
        return {
            n: agg[(VariantTag.PRETRAINED_PREFIX, n)][0] - agg[(VariantTag.HYBRID, n)][0]
            for n in self.n_values()
            if (VariantTag.PRETRAINED_PREFIX, n) in agg and (VariantTag.HYBRID, n) in agg
        }

    def total_gain(self) -> dict[int, float]:
        agg = self.aggregates()
        return {
            n: agg[(VariantTag.PRETRAINED_PREFIX, n)][0] - agg[(VariantTag.RANDOM_BASELINE, n)][0]
            for n in self.n_values()
            if (VariantTag.PRETRAINED_PREFIX, n) in agg and (VariantTag.RANDOM_BASELINE, n) in agg
        }

    def failed(self) -> list[TrialResult]:
        return [t for t in self.trials if not t.ok]

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "rng": self.rng,
            "backend": self.backend,
            "config": self.config,
            "notes": self.notes,
            "aggregates": [
                {"variant": tag.value, "symbol": tag.symbol, "n": n, "mean_acc": m, "std_acc": s, "count": c}
                for (tag, n), (m, s, c) in self.aggregates().items()
            ],
            "layer_gain": {str(n): v for n, v in self.layer_gain().items()},
            "total_gain": {str(n): v for n, v in self.total_gain().items()},
            "trials": [t.to_dict() for t in self.trials],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KnowledgeGainReport":
        return cls(d["config"], [TrialResult.from_dict(t) for t in d["trials"]], d.get("rng", RNG_IDENTITY),
                   d.get("backend", "?"), d.get("protocol", PROTOCOL_VERSION), d.get("notes", []))


def mean_acc(accs) -> float:
    return math.fsum(accs) / len(accs)


def std_acc(accs) -> float:
    """Sample standard deviation; 0.0 for a single trial."""
    if len(accs) < 2:
        return 0.0
    m = mean_acc(accs)
    return math.sqrt(math.fsum((a - m) ** 2 for a in accs) / (len(accs) - 1))


def gain_standard_error(report: KnowledgeGainReport, n: int, baseline: VariantTag) -> float:
    """Pooled standard error of ``mean(A_{1,n}) - mean(baseline)``."""
    a = report.accs(VariantTag.PRETRAINED_PREFIX, n)
    b = report.accs(baseline, n)
    return math.sqrt(std_acc(a) ** 2 / len(a) + std_acc(b) ** 2 / len(b))


def save_report(report: KnowledgeGainReport, path) -> None:
    atomic_write_bytes(path, json.dumps(report.to_dict(), indent=2).encode("utf-8"))


def load_report(path) -> KnowledgeGainReport:
    with open(path, encoding="utf-8") as fh:
        return KnowledgeGainReport.from_dict(json.load(fh))


# --------------------------------------------------------------------------
# plot data


ACCURACY_CSV = "plot_accuracy.csv"
GAIN_CSV = "plot_gains.csv"


def emit_plot_data(report: KnowledgeGainReport, out_dir, variants=None, n_values=None) -> tuple[str, str]:
    """Write ``series,n,mean_acc,std_acc`` and ``gain_type,n,value`` CSV files.

    Floats are written with ``repr`` so a parse reproduces them exactly.
    """
    variants = [VariantTag(v) for v in (variants or report.config.get("variants") or report.tags())]
    n_values = list(n_values or report.config.get("n_range") or report.n_values())
    agg = report.aggregates()
    acc_lines = ["series,n,mean_acc,std_acc"]
    for tag in variants:
        for n in n_values:
            if (tag, n) not in agg:
                raise ValidationError(f"report has no successful trials for series {tag.value} at n={n}")
            m, s, _ = agg[(tag, n)]
            acc_lines.append(f"{tag.value},{n},{m!r},{s!r}")
    gain_lines = ["gain_type,n,value"]
    for name, gains in (("layer", report.layer_gain()), ("total", report.total_gain())):
        for n in n_values:
            if n in gains:
                gain_lines.append(f"{name},{n},{gains[n]!r}")
    os.makedirs(out_dir, exist_ok=True)
    acc_path = os.path.join(out_dir, ACCURACY_CSV)
    gain_path = os.path.join(out_dir, GAIN_CSV)
    atomic_write_bytes(acc_path, ("\n".join(acc_lines) + "\n").encode())
    atomic_write_bytes(gain_path, ("\n".join(gain_lines) + "\n").encode())
    return acc_path, gain_path


def read_plot_data(acc_path, gain_path):
    """Inverse of :func:`emit_plot_data`: ``({(series, n): (mean, std)}, {(gain_type, n): value})``."""
    import csv

    with open(acc_path, newline="") as fh:
        accs = {(r["series"], int(r["n"])): (float(r["mean_acc"]), float(r["std_acc"])) for r in csv.DictReader(fh)}
    with open(gain_path, newline="") as fh:
        gains = {(r["gain_type"], int(r["n"])): float(r["value"]) for r in csv.DictReader(fh)}
    return accs, gains


# --------------------------------------------------------------------------
# feature cache


class FeatureCache:
    """On-disk cache of pretrained-prefix activations, keyed by content hash.

    Layout: ``<root>/<key[:2]>/<key>.npy`` where ``key`` is the SHA-256 of the
    architecture fingerprint, the pretrained weights of layers ``1..n``, ``n``,
    the kernel backend and the exact input batch bytes.
    """

    def __init__(self, root):
        self.root = root

    def key(self, arch: ArchitectureSpec, bundle: WeightBundle, n: int, inputs_digest: str, backend: str) -> str:
        h = hashlib.sha256()
        for part in (arch.fingerprint, bundle.digest(upto=n), str(n), backend, inputs_digest):
            h.update(part.encode())
            h.update(b"\0")
        return h.hexdigest()

    def path(self, key: str) -> str:
        return os.path.join(self.root, key[:2], f"{key}.npy")

    def get(self, key: str):
        p = self.path(key)
        if not os.path.exists(p):
            return None
        try:
            return np.load(p, allow_pickle=False)
        except (OSError, ValueError):
            logger.warning("ignoring unreadable cache entry %s", p)
            return None

    def put(self, key: str, array: np.ndarray) -> None:
        p = self.path(key)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        import io

        buf = io.BytesIO()
        np.save(buf, array, allow_pickle=False)
        atomic_write_bytes(p, buf.getvalue())


def _digest_array(arr: np.ndarray) -> str:
    h = hashlib.sha256(str(arr.shape).encode())
    h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


# --------------------------------------------------------------------------
# trials


@dataclass
class TrialData:
    """Everything a trial index fixes: split, augmented inputs, seeds."""

    trial_index: int
    data_seed: int
    weight_seed: int
    split: dataset.SplitPlan
    mean: np.ndarray
    train_inputs: np.ndarray  # rows x H x W x 3
    train_labels: np.ndarray
    train_groups: np.ndarray
    test_inputs: np.ndarray
    test_labels: np.ndarray


_STORES: dict[tuple, dataset.ImageStore] = {}
_BUNDLES: dict[tuple, WeightBundle] = {}


def _image_store(config: ExperimentConfig, arch: ArchitectureSpec) -> dataset.ImageStore:
    key = (os.path.abspath(config.manifest), config.resize_on_load, tuple(arch.input_shape))
    if key not in _STORES:
        manifest = dataset.load_manifest(config.manifest)
        _STORES[key] = dataset.ImageStore(manifest, tuple(arch.input_shape[:2]) if config.resize_on_load else None)
    return _STORES[key]


def _pretrained(config: ExperimentConfig, arch: ArchitectureSpec) -> WeightBundle:
    key = (os.path.abspath(config.pretrained_weights), arch.fingerprint)
    if key not in _BUNDLES:
        bundle = load_weights(config.pretrained_weights, arch)
        need = max(config.n_range)
        if len(bundle.ordinals) < need:
            raise WeightError(f"pretrained bundle covers layers 1..{len(bundle.ordinals)}, experiment needs 1..{need}")
        _BUNDLES[key] = bundle
    return _BUNDLES[key]


def prepare_trial(config: ExperimentConfig, trial_index: int, arch: ArchitectureSpec | None = None) -> TrialData:
    arch = arch or config.arch
    store = _image_store(config, arch)
    manifest = store.manifest
    dseed = data_seed(config.base_seed, trial_index)
    split = dataset.stratified_split(manifest, config.ratio, dseed)
    train_images = store.many(split.train_ids)
    test_images = store.many(split.test_ids)

    shape = arch.input_shape
    resized = [dataset.preprocess(im, shape) for im in train_images]
    mean = dataset.channel_mean(resized)

    inputs, labels, groups = [], [], []
    for gid, im in enumerate(train_images):
        copies = dataset.augment(im, dseed, config.copies_per_image) if config.augment else [im]
        for cp in copies:
            inputs.append(dataset.preprocess(cp, shape, mean))
            labels.append(im.label)
            groups.append(gid)
    test_inputs = [dataset.preprocess(im, shape, mean) for im in test_images]
    return TrialData(
        trial_index, dseed, weight_seed(config.base_seed, trial_index), split, mean,
        np.stack(inputs), np.array(labels), np.array(groups),
        np.stack(test_inputs), np.array([im.label for im in test_images]),
    )


def _random_bundle_for(arch, seed, upto) -> WeightBundle:
    from layergauge.weights_io import Provenance, RANDOM

    return WeightBundle(Provenance(RANDOM, seed, "random N(0, 0.01^2)"),
                        {k: random_layer(arch, seed, k) for k in range(1, upto + 1)})


def _block_batch(arch, n, batch, lw, backend=None) -> np.ndarray:
    return np.stack([forward_block(arch, n, x, lw, backend) for x in batch])


def _fit_and_score(config, data: TrialData, train_feats, test_feats, n_classes):
    cfg = replace(config.svm, seed=derive_seed(data.data_seed, "svm"))
    fm = svm.FeatureMatrix(train_feats.reshape(len(train_feats), -1), data.train_labels, data.train_groups)
    model = svm.train(fm, cfg, n_classes)
    pred = svm.predict_batch(model, test_feats.reshape(len(test_feats), -1))
    return svm.accuracy(pred, data.test_labels), model.C


def run_trial(config: ExperimentConfig, variant: ModelVariant, trial_index: int,
              data: TrialData | None = None) -> TrialResult:
    """One trial via the straightforward path: assemble the variant's weights,
    forward every image to cut ``n``, train, score."""
    arch = config.arch
    arch.check_n(variant.n)
    start = time.perf_counter()
    tseed = trial_seed(config.base_seed, variant, trial_index)
    try:
        data = data or prepare_trial(config, trial_index, arch)
        pretrained = _pretrained(config, arch)
        random = _random_bundle_for(arch, data.weight_seed, variant.n)
        weights = assemble_variant(arch, pretrained, random, variant)
        train = np.stack([forward_to_representation(arch, weights, x, variant.n) for x in data.train_inputs])
        test = np.stack([forward_to_representation(arch, weights, x, variant.n) for x in data.test_inputs])
        n_classes = len(_image_store(config, arch).manifest.class_names)
        acc, c = _fit_and_score(config, data, train, test, n_classes)
    except LayerGaugeError as exc:
        raise type(exc)(f"trial {variant}#{trial_index}: {exc}") from exc
    return TrialResult(variant, trial_index, tseed, acc, c, time.perf_counter() - start,
                       len(data.train_labels), len(data.test_labels))


def run_trial_group(config: ExperimentConfig, trial_index: int) -> list[TrialResult]:
    """All requested (variant, n) trials of one trial index.

    Activations advance block by block: ``A`` and ``R`` chains are extended
    once per ``n`` and the hybrid reuses the ``A`` activation at cut ``n-1``,
    so each image passes through each block at most three times.
    """
    arch = config.arch
    variants = config.variant_list()
    start = time.perf_counter()
    try:
        data = prepare_trial(config, trial_index, arch)
        pretrained = _pretrained(config, arch)
    except LayerGaugeError as exc:
        if not config.keep_going:
            raise type(exc)(f"trial #{trial_index}: {exc}") from exc
        return [_failed(config, v, trial_index, exc, start) for v in variants]

    tags = set(config.variants)
    need_a = bool(tags & {VariantTag.PRETRAINED_PREFIX, VariantTag.HYBRID})
    need_r = VariantTag.RANDOM_BASELINE in tags
    cache_root = config.resolved_cache_dir()
    cache = FeatureCache(cache_root) if cache_root else None
    backend = _accel.BACKEND
    n_classes = len(_image_store(config, arch).manifest.class_names)
    inputs = {"train": data.train_inputs, "test": data.test_inputs}
    digests = {k: _digest_array(v) for k, v in inputs.items()} if cache else {}

    a_prev = dict(inputs)
    r_prev = dict(inputs)
    results = []
    for n in range(1, max(config.n_range) + 1):
        t0 = time.perf_counter()
        rand_n = random_layer(arch, data.weight_seed, n)
        feats = {}
        a_cur = r_cur = None
        if need_a:
            a_cur = {}
            for part, batch in a_prev.items():
                key = cache.key(arch, pretrained, n, digests[part], backend) if cache else None
                hit = cache.get(key) if cache else None
                if hit is None:
                    hit = _block_batch(arch, n, batch, pretrained.tensors[n], backend)
                    if cache:
                        cache.put(key, hit)
                a_cur[part] = hit
        if need_r:
            r_cur = {part: _block_batch(arch, n, batch, rand_n, backend) for part, batch in r_prev.items()}
        if n in config.n_range:
            if VariantTag.PRETRAINED_PREFIX in tags:
                feats[VariantTag.PRETRAINED_PREFIX] = a_cur
            if VariantTag.HYBRID in tags:
                feats[VariantTag.HYBRID] = {p: _block_batch(arch, n, b, rand_n, backend) for p, b in a_prev.items()}
            if need_r:
                feats[VariantTag.RANDOM_BASELINE] = r_cur
        extract_time = time.perf_counter() - t0
        for tag in config.variants:
            if tag not in feats:
                continue
            variant = ModelVariant(tag, n)
            t1 = time.perf_counter()
            try:
                acc, c = _fit_and_score(config, data, feats[tag]["train"], feats[tag]["test"], n_classes)
            except LayerGaugeError as exc:
                if not config.keep_going:
                    raise type(exc)(f"trial {variant}#{trial_index}: {exc}") from exc
                results.append(_failed(config, variant, trial_index, exc, t1))
                continue
            elapsed = time.perf_counter() - t1 + extract_time
            results.append(TrialResult(variant, trial_index, trial_seed(config.base_seed, variant, trial_index),
                                       acc, c, elapsed, len(data.train_labels), len(data.test_labels)))
        a_prev, r_prev = a_cur, r_cur
    logger.info("trial #%d done in %.1fs", trial_index, time.perf_counter() - start)
    return results


def _failed(config, variant, trial_index, exc, start) -> TrialResult:
    return TrialResult(variant, trial_index, trial_seed(config.base_seed, variant, trial_index), None, None,
                       time.perf_counter() - start, error=f"{type(exc).__name__}: {exc}")


def run_experiment(config: ExperimentConfig, progress=None) -> KnowledgeGainReport:
    """Run ``repeats`` trial indices over all requested variants and layers."""
    indices = range(config.repeats)
    trials: list[TrialResult] = []
    if config.jobs > 1 and config.repeats > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            for group in pool.map(run_trial_group, [config] * config.repeats, indices):
                trials += group
                if progress:
                    progress(group)
    else:
        for i in indices:
            group = run_trial_group(config, i)
            trials += group
            if progress:
                progress(group)
    trials.sort(key=lambda t: (_sort_key(t.variant), t.trial_index))
    notes = [
        ("SVMs are trained on augmented training features" if config.augment
         else "Training images are not augmented") + "; test images are never augmented.",
        f"Reported ACC is measured on the held-out {1 - config.ratio:.0%} test partition.",
        "Each repeat redraws the split, the augmentation stream and the random net R.",
    ]
    return KnowledgeGainReport(config.to_dict(), trials, notes=notes)

"""Labeled image datasets: manifest ingestion, 7:3 stratified splits,
rotation/reflection augmentation and network-input preprocessing."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image
from scipy import ndimage

from layergauge.errors import ContainerIOError, ValidationError
from layergauge.rng import derive_seed, make_rng

DEFAULT_RATIO = 0.7
DEFAULT_COPIES = 8
INTERPOLATION = "bilinear"
PADDING = "reflect"  # whole-sample mirror, same as numpy.pad(mode="reflect")

_HEADER_PATH = {"relativepath", "path", "file", "filename", "image"}
_HEADER_CLASS = {"classname", "class", "label"}


@dataclass(frozen=True)
class LabeledImage:
    id: str
    pixels: np.ndarray  # H x W x 3 float32 in [0, 1]
    label: int
    class_name: str

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValidationError(f"{self.id}: expected H x W x 3 pixels, got {px.shape}")


@dataclass(frozen=True)
class DatasetManifest:
    root_dir: str
    entries: tuple[tuple[str, str], ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.class_names) < 2:
            raise ValidationError(f"manifest needs at least 2 classes, found {list(self.class_names)}")
        if len(set(self.class_names)) != len(self.class_names):
            raise ValidationError("class names must be unique")
        known = set(self.class_names)
        seen = set()
        for path, cls in self.entries:
            if cls not in known:
                raise ValidationError(f"{path}: class {cls!r} not in class list")
            if path in seen:
                raise ValidationError(f"duplicate manifest path {path!r}")
            seen.add(path)

    @property
    def ids(self) -> list[str]:
        return [p for p, _ in self.entries]

    def labels(self) -> dict[str, int]:
        index = {c: i for i, c in enumerate(self.class_names)}
        return {p: index[c] for p, c in self.entries}

    def class_counts(self) -> dict[str, int]:
        counts = {c: 0 for c in self.class_names}
        for _, c in self.entries:
            counts[c] += 1
        return counts

    def path_of(self, image_id: str) -> str:
        return os.path.join(self.root_dir, image_id)


def _is_header(row) -> bool:
    return (
        len(row) == 2
        and row[0].strip().lower() in _HEADER_PATH
        and row[1].strip().lower() in _HEADER_CLASS
    )


def parse_manifest(text: str, root_dir: str = ".") -> DatasetManifest:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(f.strip() for f in r)]
    if rows and _is_header(rows[0]):
        rows = rows[1:]
    entries, classes = [], []
    for lineno, row in enumerate(rows, 1):
        if len(row) != 2:
            raise ValidationError(f"manifest row {lineno}: expected 'relativePath,className', got {row}")
        path, cls = row[0].strip(), row[1].strip()
        if not path or not cls:
            raise ValidationError(f"manifest row {lineno}: empty field")
        entries.append((path, cls))
        if cls not in classes:
            classes.append(cls)
    return DatasetManifest(root_dir, tuple(entries), tuple(classes))


def load_manifest(path) -> DatasetManifest:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ContainerIOError(f"cannot read manifest {path}: {exc}") from exc
    return parse_manifest(text, os.path.dirname(os.path.abspath(path)))


def write_manifest(path, entries) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["relativePath", "className"])
        writer.writerows(entries)


# --------------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class SplitPlan:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    ratio: float
    seed: int


def stratified_split(manifest: DatasetManifest, ratio: float = DEFAULT_RATIO, seed: int = 0) -> SplitPlan:
    """Per class: shuffle with ``seed``, first ``floor(ratio * count)`` go to train."""
    if not 0.0 < ratio < 1.0:
        raise ValidationError(f"train ratio must lie strictly between 0 and 1, got {ratio}")
    order = {p: i for i, p in enumerate(manifest.ids)}
    train, test = [], []
    for ci, cls in enumerate(manifest.class_names):
        members = [p for p, c in manifest.entries if c == cls]
        if len(members) < 2:
            raise ValidationError(f"class {cls!r} has {len(members)} image(s); need at least 2 to split")
        # round() guards against 0.7 * 140 landing a hair under 98
        n_train = math.floor(round(ratio * len(members), 9))
        if n_train < 1 or n_train >= len(members):
            raise ValidationError(f"class {cls!r}: ratio {ratio} leaves an empty partition")
        perm = make_rng(seed, ci).permutation(len(members))
        shuffled = [members[i] for i in perm]
        train += shuffled[:n_train]
        test += shuffled[n_train:]
    train.sort(key=order.__getitem__)
    test.sort(key=order.__getitem__)
    return SplitPlan(tuple(train), tuple(test), ratio, int(seed))


# --------------------------------------------------------------------------
# decoding and pixel transforms


def decode_image(path) -> np.ndarray:
    """Decode any Pillow-readable raster to H x W x 3 float32 in [0, 1]."""
    try:
        with Image.open(path) as im:
            rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise ContainerIOError(f"cannot decode image {path}: {exc}") from exc
    return rgb.astype(np.float32) / np.float32(255.0)


def resize_bilinear(pixels: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize with half-pixel centres and edge clamping."""
    pixels = np.asarray(pixels, dtype=np.float32)
    h, w = pixels.shape[:2]
    if (h, w) == (height, width):
        return pixels.copy()

    def axis(n_in, n_out):
        src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1)
        lo = np.floor(src).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = axis(h, height)
    x0, x1, fx = axis(w, width)
    p = pixels.astype(np.float64)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = p[y0][:, x0] * (1 - fx) + p[y0][:, x1] * fx
    bottom = p[y1][:, x0] * (1 - fx) + p[y1][:, x1] * fx
    return (top * (1 - fy) + bottom * fy).astype(np.float32)


def _rotation_terms(angle: float) -> tuple[float, float]:
    q, r = divmod(angle, 90.0)
    if r == 0.0:
        return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[int(q) % 4]
    rad = math.radians(angle)
    return math.cos(rad), math.sin(rad)


def rotate(pixels: np.ndarray, angle: float) -> np.ndarray:
    """Rotate counter-clockwise by ``angle`` degrees about the raster centre.

    Keeps the raster size; samples are bilinear with mirror padding outside
    the source. Right angles use exact trig so they are pure permutations on
    square rasters.
    """
    pixels = np.asarray(pixels, dtype=np.float32)
    h, w = pixels.shape[:2]
    cos, sin = _rotation_terms(float(angle))
    if (cos, sin) == (1.0, 0.0):
        return pixels.copy()
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    dy, dx = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    src_r = cy + dx * sin + dy * cos
    src_c = cx + dx * cos - dy * sin
    out = np.empty_like(pixels)
    for c in range(pixels.shape[2]):
        out[:, :, c] = ndimage.map_coordinates(pixels[:, :, c], [src_r, src_c], order=1, mode="mirror")
    return out


def vertical_reflection(pixels: np.ndarray) -> np.ndarray:
    return pixels[::-1, :, :].copy()


def horizontal_flip(pixels: np.ndarray) -> np.ndarray:
    return pixels[:, ::-1, :].copy()


def transform(pixels, angle: float, vflip: bool, hflip: bool) -> np.ndarray:
    out = rotate(pixels, angle)
    if vflip:
        out = vertical_reflection(out)
    if hflip:
        out = horizontal_flip(out)
    return out


def draw_transform(rng: np.random.Generator) -> tuple[float, bool, bool]:
    angle = float(rng.uniform(0.0, 360.0))
    vflip = bool(rng.random() < 0.5)
    hflip = bool(rng.random() < 0.5)
    return angle, vflip, hflip


def augment(image: LabeledImage, seed: int, copies: int = DEFAULT_COPIES) -> list[LabeledImage]:
    """``copies`` randomly rotated / reflected variants of ``image``.

    Copy ``k`` draws from its own stream ``derive_seed(seed, image.id, k)``.
    """
    out = []
    for k in range(copies):
        params = draw_transform(make_rng(derive_seed(seed, image.id, k)))
        pixels = np.clip(transform(image.pixels, *params), 0.0, 1.0)
        out.append(replace(image, id=f"{image.id}#aug{k}", pixels=pixels))
    return out


def channel_mean(images) -> np.ndarray:
    total = np.zeros(3, dtype=np.float64)
    count = 0
    for im in images:
        px = im.pixels if isinstance(im, LabeledImage) else im
        total += px.reshape(-1, 3).sum(axis=0, dtype=np.float64)
        count += px.shape[0] * px.shape[1]
    if count == 0:
        raise ValidationError("cannot compute a channel mean over zero images")
    return (total / count).astype(np.float32)


def preprocess(image: LabeledImage | np.ndarray, input_shape, mean=None) -> np.ndarray:
    """Resize to the network input raster and subtract the per-channel mean."""
    px = image.pixels if isinstance(image, LabeledImage) else np.asarray(image, dtype=np.float32)
    out = resize_bilinear(px, input_shape[0], input_shape[1])
    if mean is not None:
        out -= np.asarray(mean, dtype=np.float32).reshape(1, 1, 3)
    return out


@dataclass
class ImageStore:
    """Decodes manifest images once and keeps them in memory.

    With ``resize_to`` set, images are resized to that (height, width) at
    decode time so later augmentation runs at network resolution.
    """

    manifest: DatasetManifest
    resize_to: tuple[int, int] | None = None
    _cache: dict[str, LabeledImage] = field(default_factory=dict, repr=False)
    _labels: dict[str, int] = field(default_factory=dict, repr=False)

    def get(self, image_id: str) -> LabeledImage:
        if image_id not in self._cache:
            px = decode_image(self.manifest.path_of(image_id))
            if self.resize_to is not None:
                px = resize_bilinear(px, *self.resize_to)
            if not self._labels:
                self._labels = self.manifest.labels()
            label = self._labels[image_id]
            self._cache[image_id] = LabeledImage(image_id, px, label, self.manifest.class_names[label])
        return self._cache[image_id]

    def many(self, ids) -> list[LabeledImage]:
        return [self.get(i) for i in ids]

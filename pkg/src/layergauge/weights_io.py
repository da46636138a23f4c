"""Weight bundles and the ``OTSW`` tensor container.

Container layout, little-endian throughout::

    b"OTSW"  u32 version=1  u32 tensor_count
    tensor_count x ( u16 name_len, utf-8 name, u8 rank, rank x u64 dims, prod(dims) x f32 )
    u8 provenance (0 pretrained, 1 random)  u64 seed  u16 label_len, utf-8 label

Weight tensors are named ``convK.weight`` / ``convK.bias`` / ``fcK.weight`` /
``fcK.bias`` with ``K`` the learned-layer ordinal.
"""

from __future__ import annotations

import hashlib
import os
import re
import struct
import tempfile
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from layergauge.architecture import ArchitectureSpec, LayerKind
from layergauge.errors import ContainerIOError, FormatError, WeightError
from layergauge.rng import make_rng

MAGIC = b"OTSW"
VERSION = 1
RANDOM_STD = 0.01

PRETRAINED = "pretrained"
RANDOM = "random"
_PROVENANCE_CODES = {PRETRAINED: 0, RANDOM: 1}

_NAME_RE = re.compile(r"^(conv|fc)(\d+)\.(weight|bias)$")


class LayerWeights(NamedTuple):
    weight: np.ndarray
    bias: np.ndarray


@dataclass(frozen=True)
class Provenance:
    kind: str = PRETRAINED
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        if self.kind not in _PROVENANCE_CODES:
            raise FormatError(f"unknown provenance {self.kind!r}")
        if not 0 <= self.seed < 2**64:
            raise FormatError(f"seed {self.seed} does not fit in u64")


@dataclass(frozen=True, eq=False)
class WeightBundle:
    provenance: Provenance
    tensors: dict[int, LayerWeights] = field(default_factory=dict)

    @property
    def ordinals(self) -> list[int]:
        return sorted(self.tensors)

    def validate(self, arch: ArchitectureSpec) -> "WeightBundle":
        ords = self.ordinals
        if ords != list(range(1, len(ords) + 1)):
            raise WeightError(f"bundle must cover a contiguous ordinal range from 1, got {ords}")
        if len(ords) > arch.N:
            raise WeightError(f"bundle has {len(ords)} learned layers, {arch.name} has {arch.N}")
        for k in ords:
            name = arch.learned_layers[k].weight_name
            w_shape, b_shape = arch.weight_shapes[k]
            lw = self.tensors[k]
            if tuple(lw.weight.shape) != w_shape:
                raise WeightError(_shape_message(arch, k, f"{name}.weight", w_shape, lw.weight.shape))
            if tuple(lw.bias.shape) != b_shape:
                raise WeightError(f"{name}.bias: expected shape {b_shape}, got {tuple(lw.bias.shape)}")
        return self

    def digest(self, upto: int | None = None) -> str:
        """Content hash of layers ``1..upto`` (all layers by default)."""
        h = hashlib.sha256()
        for k in self.ordinals:
            if upto is not None and k > upto:
                break
            for arr in self.tensors[k]:
                h.update(str(arr.shape).encode())
                h.update(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        return h.hexdigest()

    def equals(self, other: "WeightBundle") -> bool:
        if self.provenance != other.provenance or self.ordinals != other.ordinals:
            return False
        return all(
            np.array_equal(a, b, equal_nan=True)
            for k in self.ordinals
            for a, b in zip(self.tensors[k], other.tensors[k])
        )


def _shape_message(arch, k, name, expected, got):
    msg = f"{name}: expected shape {tuple(expected)}, got {tuple(got)}"
    if arch.learned_layers[k].kind is LayerKind.CONVOLUTION and tuple(got[:3]) == tuple(expected[:3]):
        msg += f" (expected inChannels {expected[3] * arch.learned_layers[k].groups})"
    return msg


# --------------------------------------------------------------------------
# raw container


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write via a sibling temp file + rename so readers never see partial data."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    except OSError as exc:
        raise ContainerIOError(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise ContainerIOError(f"cannot write {path}: {exc}") from exc


def encode_container(tensors, provenance: Provenance) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors:
        arr = np.ascontiguousarray(arr, dtype="<f4")
        raw_name = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw_name)) + raw_name)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    label = provenance.label.encode("utf-8")
    parts.append(struct.pack("<BQH", _PROVENANCE_CODES[provenance.kind], provenance.seed, len(label)) + label)
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf, self.pos, self.path = buf, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ContainerIOError(f"{self.path}: truncated container (needed {n} bytes at offset {self.pos})")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_container(path) -> tuple[dict[str, np.ndarray], Provenance]:
    """Parse a container into ``{name: array}`` (file order) and its provenance."""
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise ContainerIOError(f"cannot read {path}: {exc}") from exc
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic (not an OTSW container)")
    r = _Reader(buf, path)
    r.take(4)
    version, count = r.unpack("<II")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported container version {version}")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        try:
            name = r.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: tensor name is not UTF-8") from exc
        (rank,) = r.unpack("<B")
        if not 1 <= rank <= 4:
            raise FormatError(f"{path}: tensor {name!r} has unsupported rank {rank}")
        dims = r.unpack(f"<{rank}Q")
        count_values = int(np.prod(dims, dtype=np.uint64))
        data = np.frombuffer(r.take(4 * count_values), dtype="<f4").astype(np.float32)
        if name in tensors:
            raise FormatError(f"{path}: duplicate tensor name {name!r}")
        tensors[name] = data.reshape(dims)
    code, seed, label_len = r.unpack("<BQH")
    try:
        label = r.take(label_len).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: provenance label is not UTF-8") from exc
    kinds = {v: k for k, v in _PROVENANCE_CODES.items()}
    if code not in kinds:
        raise FormatError(f"{path}: unknown provenance tag {code}")
    if r.pos != len(buf):
        raise FormatError(f"{path}: {len(buf) - r.pos} trailing bytes after provenance")
    return tensors, Provenance(kinds[code], seed, label)


def write_container(path, tensors, provenance: Provenance) -> None:
    atomic_write_bytes(path, encode_container(list(tensors), provenance))


# --------------------------------------------------------------------------
# weight bundles


def bundle_tensors(bundle: WeightBundle, arch: ArchitectureSpec | None = None):
    for k in bundle.ordinals:
        if arch is not None:
            prefix = arch.learned_layers[k].weight_name
        else:
            prefix = f"{'conv' if bundle.tensors[k].weight.ndim == 4 else 'fc'}{k}"
        yield f"{prefix}.weight", bundle.tensors[k].weight
        yield f"{prefix}.bias", bundle.tensors[k].bias


def save_weights(bundle: WeightBundle, path, arch: ArchitectureSpec | None = None) -> None:
    write_container(path, bundle_tensors(bundle, arch), bundle.provenance)


def load_weights(path, arch: ArchitectureSpec) -> WeightBundle:
    raw, provenance = read_container(path)
    layers: dict[int, dict[str, np.ndarray]] = {}
    for name, arr in raw.items():
        m = _NAME_RE.match(name)
        if not m:
            raise FormatError(f"{path}: unexpected tensor name {name!r}")
        prefix, k, part = m.group(1), int(m.group(2)), m.group(3)
        if k not in arch.learned_layers:
            raise WeightError(f"{name}: {arch.name} has no learned layer {k}")
        expected_prefix = arch.learned_layers[k].weight_name
        if f"{prefix}{k}" != expected_prefix:
            raise WeightError(f"{name}: learned layer {k} of {arch.name} is {expected_prefix}")
        layers.setdefault(k, {})[part] = arr
    tensors = {}
    for k, parts in sorted(layers.items()):
        name = arch.learned_layers[k].weight_name
        for part in ("weight", "bias"):
            if part not in parts:
                raise WeightError(f"{name}.{part}: missing from {path} (expected shape "
                                  f"{arch.weight_shapes[k][0 if part == 'weight' else 1]})")
        tensors[k] = LayerWeights(parts["weight"], parts["bias"])
    return WeightBundle(provenance, tensors).validate(arch)


def random_layer(arch: ArchitectureSpec, seed: int, ordinal: int) -> LayerWeights:
    """Layer ``ordinal`` of the seeded random net: weights ~ N(0, 0.01^2), zero bias.

    Each layer draws from its own sub-stream, so a layer's values do not depend
    on how many other layers are generated.
    """
    w_shape, b_shape = arch.weight_shapes[ordinal]
    rng = make_rng(seed, ordinal)
    w = rng.standard_normal(w_shape, dtype=np.float32)
    w *= np.float32(RANDOM_STD)
    return LayerWeights(w, np.zeros(b_shape, dtype=np.float32))


def random_bundle(arch: ArchitectureSpec, seed: int, upto: int | None = None) -> WeightBundle:
    upto = arch.N if upto is None else arch.check_n(upto)
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    tensors = {k: random_layer(arch, seed, k) for k in range(1, upto + 1)}
    return WeightBundle(Provenance(RANDOM, seed, "random N(0, 0.01^2)"), tensors)

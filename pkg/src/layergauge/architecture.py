"""AlexNet-style layer sequences, representation cuts and the three model variants.

An :class:`ArchitectureSpec` is an ordered list of layers in which every
convolution / fully-connected layer opens a *representation block*.  Block
``n`` runs up to (and including) its ``representation_cuts[n]`` layer, which
is where off-the-shelf features for ``n`` are read out.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Mapping

import numpy as np

from layergauge import nn_core
from layergauge.errors import ConfigurationError, DimensionError, WeightError
from layergauge.nn_core import ConvParams, LrnParams

if TYPE_CHECKING:
    from layergauge.weights_io import LayerWeights, WeightBundle


class LayerKind(str, enum.Enum):
    INPUT = "input"
    CONVOLUTION = "convolution"
    RELU = "relu"
    NORMALIZATION = "normalization"
    MAX_POOLING = "maxPooling"
    FULLY_CONNECTED = "fullyConnected"
    DROPOUT = "dropout"
    SOFTMAX = "softmax"
    OUTPUT = "output"


LEARNED_KINDS = (LayerKind.CONVOLUTION, LayerKind.FULLY_CONNECTED)
_TERMINAL_KINDS = (LayerKind.SOFTMAX, LayerKind.OUTPUT)


@dataclass(frozen=True)
class LayerSpec:
    index: int
    kind: LayerKind
    units: int | None = None  # filter count (conv) or output width (fc)
    kernel: int | None = None  # conv kernel side or pooling window
    stride: int = 1
    padding: int = 0
    groups: int = 1
    lrn: LrnParams | None = None
    ordinal: int | None = None

    @property
    def learned(self) -> bool:
        return self.kind in LEARNED_KINDS

    @property
    def weight_name(self) -> str:
        prefix = "conv" if self.kind is LayerKind.CONVOLUTION else "fc"
        return f"{prefix}{self.ordinal}"


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]
    representation_cuts: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        ordinals = [l.ordinal for l in self.layers if l.learned]
        if ordinals != list(range(1, len(ordinals) + 1)):
            raise ConfigurationError(f"learned layers must be numbered 1..N in order, got {ordinals}")
        for l in self.layers:
            if (l.ordinal is not None) != l.learned:
                raise ConfigurationError(f"layer {l.index}: ordinal present iff convolution/fullyConnected")
        if [l.index for l in self.layers] != list(range(len(self.layers))):
            raise ConfigurationError("layer indices must be 0..len-1 in order")
        if not self.representation_cuts:
            object.__setattr__(self, "representation_cuts", _derive_cuts(self.layers))
        cuts = [self.representation_cuts[n] for n in range(1, self.N + 1)]
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ConfigurationError(f"representation cuts must strictly increase: {cuts}")
        self.activation_shapes  # noqa: B018 - validates the shape arithmetic eagerly

    @property
    def N(self) -> int:
        return sum(1 for l in self.layers if l.learned)

    @cached_property
    def learned_layers(self) -> dict[int, LayerSpec]:
        return {l.ordinal: l for l in self.layers if l.learned}

    @cached_property
    def activation_shapes(self) -> tuple[tuple[int, ...], ...]:
        """Output shape of every layer, index-aligned with ``layers``."""
        shapes = []
        shape: tuple[int, ...] = tuple(self.input_shape)
        for layer in self.layers:
            shape = _infer_shape(layer, shape)
            shapes.append(shape)
        return tuple(shapes)

    @cached_property
    def weight_shapes(self) -> dict[int, tuple[tuple[int, ...], tuple[int, ...]]]:
        """``ordinal -> (weight shape, bias shape)``."""
        out = {}
        for layer in self.layers:
            if not layer.learned:
                continue
            in_shape = self.activation_shapes[layer.index - 1]
            if layer.kind is LayerKind.CONVOLUTION:
                w = (layer.units, layer.kernel, layer.kernel, in_shape[2] // layer.groups)
            else:
                w = (layer.units, int(np.prod(in_shape)))
            out[layer.ordinal] = (w, (layer.units,))
        return out

    def check_n(self, n: int) -> int:
        if not isinstance(n, (int, np.integer)) or not 1 <= n <= self.N:
            raise ConfigurationError(f"representation layer n={n} outside [1, {self.N}] for {self.name}")
        return int(n)

    def block_span(self, n: int) -> tuple[int, int]:
        """First and last layer index (inclusive) executed for block ``n``."""
        self.check_n(n)
        start = 1 if n == 1 else self.representation_cuts[n - 1] + 1
        return start, self.representation_cuts[n]

    def feature_dim(self, n: int) -> int:
        self.check_n(n)
        return int(np.prod(self.activation_shapes[self.representation_cuts[n]]))

    def cut_shape(self, n: int) -> tuple[int, ...]:
        self.check_n(n)
        return self.activation_shapes[self.representation_cuts[n]]

    def describe(self) -> dict:
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "layers": [_layer_dict(l) for l in self.layers],
            "representation_cuts": {str(k): v for k, v in sorted(self.representation_cuts.items())},
        }

    @cached_property
    def fingerprint(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _layer_dict(layer: LayerSpec) -> dict:
    d = asdict(layer)
    d["kind"] = layer.kind.value
    return {k: v for k, v in d.items() if v is not None}


def _derive_cuts(layers) -> dict[int, int]:
    cuts = {}
    learned = [l for l in layers if l.learned]
    for pos, layer in enumerate(learned):
        if pos + 1 < len(learned):
            end = learned[pos + 1].index - 1
        else:
            term = [l.index for l in layers if l.kind in _TERMINAL_KINDS and l.index > layer.index]
            end = (term[0] if term else len(layers)) - 1
        while layers[end].kind is LayerKind.DROPOUT:
            end -= 1
        cuts[layer.ordinal] = end
    return cuts


def _infer_shape(layer: LayerSpec, shape):
    kind = layer.kind
    if kind is LayerKind.INPUT:
        return tuple(shape)
    if kind is LayerKind.CONVOLUTION:
        if len(shape) != 3:
            raise ConfigurationError(f"layer {layer.index}: convolution needs a rank-3 input, got {shape}")
        h, w, c = shape
        if c % layer.groups or layer.units % layer.groups:
            raise ConfigurationError(f"layer {layer.index}: channels/filters not divisible by groups {layer.groups}")
        oh = nn_core.conv_output_size(h, layer.kernel, layer.stride, layer.padding)
        ow = nn_core.conv_output_size(w, layer.kernel, layer.stride, layer.padding)
        return (oh, ow, layer.units)
    if kind is LayerKind.MAX_POOLING:
        h, w, c = shape
        return (
            nn_core.pool_output_size(h, layer.kernel, layer.stride),
            nn_core.pool_output_size(w, layer.kernel, layer.stride),
            c,
        )
    if kind is LayerKind.FULLY_CONNECTED:
        return (layer.units,)
    return tuple(shape)


# --------------------------------------------------------------------------
# builders


def _alexnet_layers(convs, fcs, pool, lrn):
    """Layer ordering: conv/relu/norm/pool x2, conv/relu x2, conv/relu/pool,
    (fc/relu/dropout) x2, fc, softmax, output."""
    specs = [(LayerKind.INPUT, {})]
    conv_tail = [
        (LayerKind.RELU, LayerKind.NORMALIZATION, LayerKind.MAX_POOLING),
        (LayerKind.RELU, LayerKind.NORMALIZATION, LayerKind.MAX_POOLING),
        (LayerKind.RELU,),
        (LayerKind.RELU,),
        (LayerKind.RELU, LayerKind.MAX_POOLING),
    ]
    for conv, tail in zip(convs, conv_tail):
        specs.append((LayerKind.CONVOLUTION, conv))
        for kind in tail:
            if kind is LayerKind.NORMALIZATION:
                specs.append((kind, {"lrn": lrn}))
            elif kind is LayerKind.MAX_POOLING:
                specs.append((kind, {"kernel": pool[0], "stride": pool[1]}))
            else:
                specs.append((kind, {}))
    for i, units in enumerate(fcs):
        specs.append((LayerKind.FULLY_CONNECTED, {"units": units}))
        if i < len(fcs) - 1:
            specs += [(LayerKind.RELU, {}), (LayerKind.DROPOUT, {})]
    specs += [(LayerKind.SOFTMAX, {}), (LayerKind.OUTPUT, {})]

    layers, ordinal = [], 0
    for index, (kind, kw) in enumerate(specs):
        if kind in LEARNED_KINDS:
            ordinal += 1
            kw = dict(kw, ordinal=ordinal)
        layers.append(LayerSpec(index=index, kind=kind, **kw))
    return tuple(layers)


def _truncate(name, input_shape, layers, blocks):
    full = ArchitectureSpec(name, input_shape, layers)
    if blocks is None or blocks == full.N:
        return full
    if not 1 <= blocks <= full.N:
        raise ConfigurationError(f"blocks={blocks} outside [1, {full.N}]")
    end = full.representation_cuts[blocks]
    cuts = {n: full.representation_cuts[n] for n in range(1, blocks + 1)}
    return ArchitectureSpec(f"{name}-{blocks}block", input_shape, layers[: end + 1], cuts)


def build_alexnet(lrn: LrnParams = LrnParams(), grouped: bool = True, input_size: int = 227) -> ArchitectureSpec:
    """The 25-layer AlexNet (input 227x227x3, dual-stream groups)."""
    g = 2 if grouped else 1
    convs = [
        {"units": 96, "kernel": 11, "stride": 4},
        {"units": 256, "kernel": 5, "padding": 2, "groups": g},
        {"units": 384, "kernel": 3, "padding": 1},
        {"units": 384, "kernel": 3, "padding": 1, "groups": g},
        {"units": 256, "kernel": 3, "padding": 1, "groups": g},
    ]
    layers = _alexnet_layers(convs, (4096, 4096, 1000), (3, 2), lrn)
    return ArchitectureSpec("alexnet", (input_size, input_size, 3), layers)


def build_scaled_alexnet(
    input_size: int = 32,
    widths=(16, 32, 48, 48, 32),
    fc_widths=(64, 64, 10),
    blocks: int | None = None,
    lrn: LrnParams = LrnParams(),
    grouped: bool = True,
) -> ArchitectureSpec:
    """Same 25-layer kind sequence as AlexNet at desk-test size.

    ``blocks`` keeps only the first representation blocks (N = blocks).
    """
    g = 2 if grouped else 1
    convs = [
        {"units": widths[0], "kernel": 5},
        {"units": widths[1], "kernel": 3, "padding": 1, "groups": g},
        {"units": widths[2], "kernel": 3, "padding": 1},
        {"units": widths[3], "kernel": 3, "padding": 1, "groups": g},
        {"units": widths[4], "kernel": 3, "padding": 1, "groups": g},
    ]
    layers = _alexnet_layers(convs, tuple(fc_widths), (3, 2), lrn)
    return _truncate("alexnet-scaled", (input_size, input_size, 3), layers, blocks)


ARCHITECTURES = {
    "alexnet": build_alexnet,
    "alexnet-scaled": build_scaled_alexnet,
}


def get_architecture(name: str, **options) -> ArchitectureSpec:
    try:
        builder = ARCHITECTURES[name]
    except KeyError:
        raise ConfigurationError(f"unknown architecture {name!r}; choose from {sorted(ARCHITECTURES)}") from None
    return builder(**options)


# --------------------------------------------------------------------------
# model variants


class VariantTag(str, enum.Enum):
    PRETRAINED_PREFIX = "pretrained"  # A_{1,n}
    RANDOM_BASELINE = "random"  # R_{1,n}
    HYBRID = "hybrid"  # A_{1,n-1} R_n

    @property
    def symbol(self) -> str:
        return {"pretrained": "A_{1,n}", "random": "R_{1,n}", "hybrid": "A_{1,n-1}R_n"}[self.value]


ALL_TAGS = (VariantTag.PRETRAINED_PREFIX, VariantTag.HYBRID, VariantTag.RANDOM_BASELINE)


@dataclass(frozen=True, order=True)
class ModelVariant:
    tag: VariantTag
    n: int

    def __post_init__(self):
        object.__setattr__(self, "tag", VariantTag(self.tag))
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ConfigurationError(f"variant n must be a positive integer, got {self.n!r}")

    def sources(self) -> dict[int, str]:
        """Which base net supplies each learned layer 1..n."""
        if self.tag is VariantTag.PRETRAINED_PREFIX:
            return {k: "pretrained" for k in range(1, self.n + 1)}
        if self.tag is VariantTag.RANDOM_BASELINE:
            return {k: "random" for k in range(1, self.n + 1)}
        out = {k: "pretrained" for k in range(1, self.n)}
        out[self.n] = "random"
        return out

    def __str__(self):
        return f"{self.tag.value}@{self.n}"


@dataclass(frozen=True)
class ModelWeights:
    """Learned-layer tensors for one variant, tagged with their source net."""

    layers: Mapping[int, "LayerWeights"]
    sources: Mapping[int, str]


def assemble_variant(
    arch: ArchitectureSpec, pretrained: "WeightBundle", random: "WeightBundle", variant: ModelVariant
) -> ModelWeights:
    arch.check_n(variant.n)
    bundles = {"pretrained": pretrained, "random": random}
    layers, sources = {}, {}
    for ordinal, source in variant.sources().items():
        tensors = bundles[source].tensors
        if ordinal not in tensors:
            w_shape, _ = arch.weight_shapes[ordinal]
            raise WeightError(
                f"{arch.learned_layers[ordinal].weight_name}: missing from {source} bundle (expected weight shape {w_shape})"
            )
        _check_layer(arch, ordinal, tensors[ordinal])
        layers[ordinal] = tensors[ordinal]
        sources[ordinal] = source
    return ModelWeights(layers, sources)


def _check_layer(arch, ordinal, lw):
    w_shape, b_shape = arch.weight_shapes[ordinal]
    name = arch.learned_layers[ordinal].weight_name
    if tuple(lw.weight.shape) != w_shape:
        raise WeightError(f"{name}.weight: expected shape {w_shape}, got {tuple(lw.weight.shape)}")
    if tuple(lw.bias.shape) != b_shape:
        raise WeightError(f"{name}.bias: expected shape {b_shape}, got {tuple(lw.bias.shape)}")


# --------------------------------------------------------------------------
# forward passes


def apply_layer(layer: LayerSpec, x: np.ndarray, lw: "LayerWeights | None" = None, backend=None) -> np.ndarray:
    kind = layer.kind
    if kind is LayerKind.CONVOLUTION:
        return nn_core.conv2d(x, lw.weight, lw.bias, ConvParams(layer.stride, layer.padding, layer.groups), backend)
    if kind is LayerKind.FULLY_CONNECTED:
        return nn_core.fully_connected(x, lw.weight, lw.bias)
    if kind is LayerKind.RELU:
        return nn_core.relu(x)
    if kind is LayerKind.NORMALIZATION:
        return nn_core.lrn(x, layer.lrn or LrnParams(), backend)
    if kind is LayerKind.MAX_POOLING:
        return nn_core.maxpool(x, layer.kernel, layer.stride, backend)
    if kind is LayerKind.DROPOUT:
        return nn_core.dropout_inference(x)
    if kind is LayerKind.INPUT:
        return x
    raise ConfigurationError(f"layer {layer.index} ({kind.value}) is past the last representation cut")


def forward_block(arch: ArchitectureSpec, n: int, activation: np.ndarray, lw: "LayerWeights", backend=None) -> np.ndarray:
    """Advance an activation at cut ``n-1`` (or the input image) to cut ``n``
    using ``lw`` for learned layer ``n``."""
    start, stop = arch.block_span(n)
    expected = arch.activation_shapes[start - 1]
    if tuple(activation.shape) != tuple(expected):
        raise DimensionError(f"block {n} expects an input activation of shape {expected}, got {activation.shape}")
    x = activation
    for layer in arch.layers[start : stop + 1]:
        x = apply_layer(layer, x, lw if layer.learned else None, backend)
    return x


def forward_to_representation(
    arch: ArchitectureSpec, weights: ModelWeights, image: np.ndarray, n: int, backend=None
) -> np.ndarray:
    """Flattened activation after representation block ``n``."""
    arch.check_n(n)
    image = np.ascontiguousarray(image, dtype=np.float32)
    if tuple(image.shape) != tuple(arch.input_shape):
        raise DimensionError(f"image shape {image.shape} != architecture input {tuple(arch.input_shape)}")
    x = image
    for k in range(1, n + 1):
        if k not in weights.layers:
            raise WeightError(f"{arch.learned_layers[k].weight_name}: weights missing for forward pass to n={n}")
        x = forward_block(arch, k, x, weights.layers[k], backend)
    return x.reshape(-1)

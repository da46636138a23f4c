"""Synthetic datasets and analytic weight bundles for desk-scale checks."""

from __future__ import annotations

import math
import os

import numpy as np
from PIL import Image

from layergauge.architecture import ArchitectureSpec, LayerKind
from layergauge.dataset import write_manifest
from layergauge.rng import derive_seed, make_rng
from layergauge.weights_io import PRETRAINED, LayerWeights, Provenance, WeightBundle, random_layer


def grating(size: int, angle_deg: float, period: float, phase: float, contrast: float = 0.4) -> np.ndarray:
    """Sinusoidal grating whose stripes run along ``angle_deg``; values in [0, 1]."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    theta = math.radians(angle_deg)
    # the intensity varies along the stripe normal
    u = -xx * math.sin(theta) + yy * math.cos(theta)
    g = 0.5 + 0.5 * contrast * np.sin(2 * math.pi * u / period + phase)
    return np.repeat(g[:, :, None], 3, axis=2)


def orientation_image(rng: np.random.Generator, size: int, angle_deg: float, noise: float = 0.15,
                      contrast: float = 0.4) -> np.ndarray:
    period = rng.uniform(4.0, 7.0)
    phase = rng.uniform(0.0, 2 * math.pi)
    jitter = rng.normal(0.0, 4.0)
    img = grating(size, angle_deg + jitter, period, phase, contrast)
    img = img + rng.normal(0.0, noise, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def _save_png(path: str, pixels: np.ndarray) -> None:
    Image.fromarray(np.round(pixels * 255).astype(np.uint8), "RGB").save(path)


def write_orientation_dataset(root, per_class: int = 10, size: int = 32, angles=(0.0, 45.0, 90.0, 135.0),
                              seed: int = 0, noise: float = 0.15, contrast: float = 0.4) -> str:
    """Grating textures, one class per stripe orientation. Returns the manifest path."""
    os.makedirs(root, exist_ok=True)
    entries = []
    for ci, angle in enumerate(angles):
        name = f"orient{int(angle):03d}"
        for k in range(per_class):
            rng = make_rng(derive_seed(seed, name, k))
            rel = f"{name}_{k:03d}.png"
            _save_png(os.path.join(root, rel), orientation_image(rng, size, angle, noise, contrast))
            entries.append((rel, name))
    path = os.path.join(root, "manifest.csv")
    write_manifest(path, entries)
    return path


def write_intensity_dataset(root, per_class: int = 10, size: int = 32, levels=(0.25, 0.75), seed: int = 0,
                            noise: float = 0.05) -> str:
    """Classes that differ only in mean intensity."""
    os.makedirs(root, exist_ok=True)
    entries = []
    for ci, level in enumerate(levels):
        name = f"level{ci}"
        for k in range(per_class):
            rng = make_rng(derive_seed(seed, name, k))
            img = np.clip(level + rng.normal(0.0, noise, (size, size, 3)), 0.0, 1.0)
            rel = f"{name}_{k:03d}.png"
            _save_png(os.path.join(root, rel), img)
            entries.append((rel, name))
    path = os.path.join(root, "manifest.csv")
    write_manifest(path, entries)
    return path


def oriented_edge_filters(count: int, kernel: int, channels: int) -> np.ndarray:
    """Odd/even oriented derivative-of-Gaussian pairs at evenly spaced angles.

    Filters come in (odd, even) pairs per orientation, zero mean, unit L2 norm,
    identical across input channels. Shape ``(count, kernel, kernel, channels)``.
    """
    half = (kernel - 1) / 2.0
    yy, xx = np.mgrid[0:kernel, 0:kernel] - half
    sigma = max(kernel / 4.0, 0.75)
    orientations = (count + 1) // 2
    out = []
    for k in range(count):
        theta = math.pi * (k // 2) / orientations
        u = -xx * math.sin(theta) + yy * math.cos(theta)
        envelope = np.exp(-(xx**2 + yy**2) / (2 * sigma**2))
        if k % 2 == 0:
            f = u * envelope  # odd: first derivative across the stripe
        else:
            f = (1 - (u / sigma) ** 2) * envelope  # even: second derivative
        f = f - f.mean()
        f = f / np.linalg.norm(f)
        out.append(np.repeat(f[:, :, None], channels, axis=2) / math.sqrt(channels))
    return np.stack(out).astype(np.float32)


def edge_filter_bundle(arch: ArchitectureSpec, seed: int = 0, upto: int | None = None) -> WeightBundle:
    """Bundle whose first conv layer holds analytic oriented-edge filters.

    Deeper layers are seeded Gaussian draws (the same recipe as the random
    net but from an unrelated stream). Tagged as pretrained.
    """
    upto = arch.N if upto is None else upto
    first = arch.learned_layers[1]
    if first.kind is not LayerKind.CONVOLUTION:
        raise ValueError("first learned layer must be a convolution")
    w_shape, b_shape = arch.weight_shapes[1]
    tensors = {1: LayerWeights(oriented_edge_filters(w_shape[0], w_shape[1], w_shape[3]),
                               np.zeros(b_shape, dtype=np.float32))}
    deep_seed = derive_seed(seed, "edge-bundle-deep-layers")
    for k in range(2, upto + 1):
        tensors[k] = random_layer(arch, deep_seed, k)
    return WeightBundle(Provenance(PRETRAINED, 0, "synthetic oriented-edge filters"), tensors)

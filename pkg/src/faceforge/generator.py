"""Image/latent types, the generator contract, and a desk-scale toy generator.

The attack searches a style latent space: an L x 512 code whose rows feed
successive generator layers (shallow rows move coarse attributes, deep rows
fine ones).  Real style-based generators plug in through
:class:`GeneratorHandle`; the bundled :class:`ToyGenerator` is a small linear
pyramid with a sigmoid output, which keeps everything differentiable and
invertible by least squares so the full attack loop can run in CI.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

import numpy as np
import torch
from PIL import Image

from .errors import DimensionError, ValidationError

STYLE_DIM = 512

_DTYPE = torch.float64


def _as_tensor(values) -> torch.Tensor:
    if isinstance(values, torch.Tensor):
        return values.to(_DTYPE)
    return torch.as_tensor(np.asarray(values), dtype=_DTYPE)


@dataclass(frozen=True)
class FaceImage:
    """An RGB face image with pixels in [0, 1], stored H x W x 3 float64."""

    pixels: torch.Tensor

    def __post_init__(self):
        px = _as_tensor(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise DimensionError(f"expected H x W x 3 pixels, got shape {tuple(px.shape)}")
        if px.shape[0] < 8 or px.shape[1] < 8:
            raise ValidationError(f"image too small: {tuple(px.shape[:2])}, need H, W >= 8")
        if not torch.isfinite(px).all():
            raise ValidationError("image contains non-finite values")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ValidationError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)

    @property
    def resolution(self) -> tuple[int, int]:
        return (int(self.pixels.shape[0]), int(self.pixels.shape[1]))

    def chw(self) -> torch.Tensor:
        """Channel-first view for convolution-style ops."""
        return self.pixels.permute(2, 0, 1)

    @staticmethod
    def from_chw(chw: torch.Tensor) -> "FaceImage":
        return FaceImage(chw.permute(1, 2, 0))


@dataclass(frozen=True)
class StyleLatent:
    """An L x 512 style code; row m drives generator layer m."""

    codes: torch.Tensor

    def __post_init__(self):
        codes = _as_tensor(self.codes)
        if codes.ndim != 2 or codes.shape[1] != STYLE_DIM:
            raise DimensionError(f"expected L x {STYLE_DIM} codes, got shape {tuple(codes.shape)}")
        if not torch.isfinite(codes).all():
            raise ValidationError("style latent contains non-finite values")
        object.__setattr__(self, "codes", codes)

    @property
    def layer_count(self) -> int:
        return int(self.codes.shape[0])

    @staticmethod
    def zeros(layer_count: int) -> "StyleLatent":
        return StyleLatent(torch.zeros(layer_count, STYLE_DIM, dtype=_DTYPE))


@dataclass(frozen=True)
class NoiseStack:
    """Per-layer stochastic-detail maps; one (3, r, r) array per generator layer."""

    layers: tuple[torch.Tensor, ...]

    def __post_init__(self):
        layers = tuple(_as_tensor(a) for a in self.layers)
        for i, a in enumerate(layers):
            if not torch.isfinite(a).all():
                raise ValidationError(f"noise layer {i} contains non-finite values")
        object.__setattr__(self, "layers", layers)

    @staticmethod
    def zeros_like(generator: "GeneratorHandle") -> "NoiseStack":
        return NoiseStack(
            tuple(torch.zeros(3, r, r, dtype=_DTYPE) for r in generator.layer_resolutions)
        )


class GeneratorHandle(abc.ABC):
    """Contract for a style-based generator bound to the attack.

    Implementations must be pure: same (latent, noise) in, bitwise-same
    image out, and the synthesis path must be differentiable with respect
    to the latent codes.  Handles are immutable after construction and may
    be shared read-only across workers.
    """

    @property
    @abc.abstractmethod
    def layer_count(self) -> int: ...

    @property
    @abc.abstractmethod
    def resolution(self) -> int: ...

    @property
    @abc.abstractmethod
    def layer_resolutions(self) -> tuple[int, ...]: ...

    @abc.abstractmethod
    def _synthesize(self, latent: StyleLatent, noise: NoiseStack) -> FaceImage: ...

    @abc.abstractmethod
    def _invert(self, image: FaceImage) -> tuple[StyleLatent, NoiseStack]: ...


class ToyGenerator(GeneratorHandle):
    """Linear feature-pyramid generator: fast, invertible, differentiable.

    Layer m maps its 512-dim code row through a fixed seeded matrix onto a
    3 x r_m x r_m grid, adds a fixed bias grid plus the layer's noise map,
    nearest-neighbor-upsamples the running feature map, and a final sigmoid
    squashes to [0, 1].  Because everything before the sigmoid is affine in
    the latent, inversion is a single least-squares solve.
    """

    def __init__(self, seed: int = 0, layer_count: int = 4, resolution: int = 32):
        if resolution % (1 << (layer_count - 1)) != 0:
            raise ValidationError("resolution must be divisible by 2**(layer_count-1)")
        self._layer_count = layer_count
        self._resolution = resolution
        base = resolution >> (layer_count - 1)
        self._layer_res = tuple(base << m for m in range(layer_count))
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(STYLE_DIM)
        self._maps = []
        self._biases = []
        for r in self._layer_res:
            self._maps.append(
                torch.as_tensor(rng.normal(0.0, scale, size=(3 * r * r, STYLE_DIM)), dtype=_DTYPE)
            )
            self._biases.append(
                torch.as_tensor(rng.normal(0.0, 0.3, size=(3, r, r)), dtype=_DTYPE)
            )
        self._pinv: torch.Tensor | None = None
        self._const_offset: torch.Tensor | None = None

    @property
    def layer_count(self) -> int:
        return self._layer_count

    @property
    def resolution(self) -> int:
        return self._resolution

    @property
    def layer_resolutions(self) -> tuple[int, ...]:
        return self._layer_res

    def _upsample_to(self, grid: torch.Tensor, r: int) -> torch.Tensor:
        factor = r // grid.shape[-1]
        if factor == 1:
            return grid
        return grid.repeat_interleave(factor, dim=-2).repeat_interleave(factor, dim=-1)

    def _synthesize(self, latent: StyleLatent, noise: NoiseStack) -> FaceImage:
        h = None
        for m, r in enumerate(self._layer_res):
            contrib = (self._maps[m] @ latent.codes[m]).reshape(3, r, r)
            contrib = contrib + self._biases[m] + noise.layers[m]
            h = contrib if h is None else self._upsample_to(h, r) + contrib
        return FaceImage.from_chw(torch.sigmoid(h))

    def _design_matrix(self) -> torch.Tensor:
        """Pre-sigmoid pixels as an affine function of the flattened latent."""
        if self._pinv is None:
            R = self._resolution
            cols = []
            offset = torch.zeros(3, R, R, dtype=_DTYPE)
            for m, r in enumerate(self._layer_res):
                block = self._maps[m].T.reshape(STYLE_DIM, 3, r, r)
                block = self._upsample_to(block, R).reshape(STYLE_DIM, 3 * R * R)
                cols.append(block.T)
                offset = offset + self._upsample_to(self._biases[m], R)
            design = torch.cat(cols, dim=1)
            self._const_offset = offset.reshape(-1)
            self._pinv = torch.linalg.pinv(design)
        return self._pinv

    def _invert(self, image: FaceImage) -> tuple[StyleLatent, NoiseStack]:
        pinv = self._design_matrix()
        px = image.chw().reshape(-1).clamp(1e-12, 1.0 - 1e-12)
        u = torch.log(px) - torch.log1p(-px)
        flat = pinv @ (u - self._const_offset)
        latent = StyleLatent(flat.reshape(self._layer_count, STYLE_DIM))
        return latent, NoiseStack.zeros_like(self)


def synthesize(generator: GeneratorHandle, latent: StyleLatent, noise: NoiseStack) -> FaceImage:
    """Render a style latent to an image; pure and differentiable in the latent.

    Raises:
        DimensionError: latent/noise layer structure does not match the generator.
        ValidationError: propagated from latent construction (non-finite codes).
    """
    if latent.layer_count != generator.layer_count:
        raise DimensionError(
            f"latent has {latent.layer_count} layers, generator expects {generator.layer_count}"
        )
    if len(noise.layers) != generator.layer_count:
        raise DimensionError(
            f"noise stack has {len(noise.layers)} layers, generator expects {generator.layer_count}"
        )
    for i, (layer, r) in enumerate(zip(noise.layers, generator.layer_resolutions)):
        if tuple(layer.shape) != (3, r, r):
            raise DimensionError(
                f"noise layer {i} has shape {tuple(layer.shape)}, expected (3, {r}, {r})"
            )
    return generator._synthesize(latent, noise)


def invert(generator: GeneratorHandle, image: FaceImage) -> tuple[StyleLatent, NoiseStack]:
    """Recover (latent, noise) so that synthesize approximately reconstructs the image.

    The noise stack returned is the generator's initial (zero) noise; the
    attack keeps it frozen and only optimizes the style codes.

    Raises:
        DimensionError: image resolution differs from the generator output.
        ConvergenceError: optimization-based adapters that fail to converge.
    """
    if image.resolution != (generator.resolution, generator.resolution):
        raise DimensionError(
            f"image resolution {image.resolution} does not match generator "
            f"{generator.resolution} x {generator.resolution}"
        )
    return generator._invert(image)


def load_image(path) -> FaceImage:
    """Load an 8-bit RGB image file, mapping pixel values linearly to [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return FaceImage(arr)


def save_image(image: FaceImage, path) -> None:
    """Write an image as lossless 8-bit RGB PNG."""
    arr = (image.pixels.detach().numpy() * 255.0).round().astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")

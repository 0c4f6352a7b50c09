"""Face-recognition encoder contract, toy models, and FAR-based calibration.

A recognizer exposes two heads: `embed` produces a unit-norm feature vector
used for verification, `classify` produces an identity softmax vector used
as category-level guidance for the impersonation objective.  Verification
thresholds come from calibrating impostor-pair similarity scores at a fixed
false-acceptance rate (0.01 by default).
"""

from __future__ import annotations

import abc
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np
import torch

from .errors import DimensionError, ValidationError
from .generator import FaceImage, _as_tensor

_DTYPE = torch.float64


@dataclass(frozen=True)
class EmbeddingVector:
    """Unit-norm facial feature vector."""

    values: torch.Tensor

    def __post_init__(self):
        values = _as_tensor(self.values)
        if values.ndim != 1:
            raise DimensionError(f"embedding must be 1-D, got shape {tuple(values.shape)}")
        if not torch.isfinite(values).all():
            raise ValidationError("embedding contains non-finite values")
        norm = float(torch.linalg.vector_norm(values))
        if abs(norm - 1.0) > 1e-6:
            raise ValidationError(f"embedding norm {norm:.8f} is not 1 within 1e-6")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class SoftmaxVector:
    """Identity-class probability vector (the guidance signal v)."""

    probs: torch.Tensor

    def __post_init__(self):
        probs = _as_tensor(self.probs)
        if probs.ndim != 1:
            raise DimensionError(f"softmax vector must be 1-D, got shape {tuple(probs.shape)}")
        if not torch.isfinite(probs).all():
            raise ValidationError("softmax vector contains non-finite values")
        if probs.min() < 0:
            raise ValidationError("softmax vector has negative entries")
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-6:
            raise ValidationError(f"softmax vector sums to {total:.8f}, not 1 within 1e-6")
        object.__setattr__(self, "probs", probs)

    @property
    def dim(self) -> int:
        return int(self.probs.shape[0])


class FrModel(abc.ABC):
    """Face-recognition model contract.

    Both heads must be differentiable with respect to input pixels so the
    attack can backpropagate through them.  Models are immutable after
    construction; embed/classify are safe to call concurrently.
    """

    name: str
    input_resolution: int
    embedding_dim: int
    class_count: int

    def embed(self, image: FaceImage) -> EmbeddingVector:
        self._check_resolution(image)
        return EmbeddingVector(self._embed(image.chw()))

    def classify(self, image: FaceImage) -> SoftmaxVector:
        self._check_resolution(image)
        return SoftmaxVector(self._classify(image.chw()))

    def _check_resolution(self, image: FaceImage) -> None:
        r = self.input_resolution
        if image.resolution != (r, r):
            raise DimensionError(
                f"model '{self.name}' expects {r} x {r} input, got {image.resolution}"
            )

    @abc.abstractmethod
    def _embed(self, chw: torch.Tensor) -> torch.Tensor: ...

    @abc.abstractmethod
    def _classify(self, chw: torch.Tensor) -> torch.Tensor: ...


class ToyFrModel(FrModel):
    """Convolution-free toy recognizer: random projection, tanh, L2-normalize.

    Distinct seeds give distinct decision surfaces, standing in for distinct
    architectures during desk-scale runs.
    """

    def __init__(
        self,
        name: str,
        seed: int,
        input_resolution: int = 32,
        hidden: int = 64,
        embedding_dim: int = 32,
        class_count: int = 16,
    ):
        self.name = name
        self.input_resolution = input_resolution
        self.embedding_dim = embedding_dim
        self.class_count = class_count
        n_in = 3 * input_resolution * input_resolution
        rng = np.random.default_rng(seed)
        self._w1 = torch.as_tensor(
            rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(hidden, n_in)), dtype=_DTYPE
        )
        self._b1 = torch.as_tensor(rng.normal(0.0, 0.1, size=hidden), dtype=_DTYPE)
        self._w2 = torch.as_tensor(
            rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(embedding_dim, hidden)), dtype=_DTYPE
        )
        self._wc = torch.as_tensor(
            rng.normal(0.0, 1.0, size=(class_count, embedding_dim)), dtype=_DTYPE
        )
        self._bc = torch.as_tensor(rng.normal(0.0, 0.1, size=class_count), dtype=_DTYPE)

    def _features(self, chw: torch.Tensor) -> torch.Tensor:
        z = torch.tanh(self._w1 @ chw.reshape(-1) + self._b1)
        return self._w2 @ z

    def _embed(self, chw: torch.Tensor) -> torch.Tensor:
        e = self._features(chw)
        return e / torch.linalg.vector_norm(e)

    def _classify(self, chw: torch.Tensor) -> torch.Tensor:
        logits = self._wc @ self._embed(chw) + self._bc
        return torch.softmax(logits, dim=0)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity of two embeddings; symmetric, in [-1, 1]."""
    if a.dim != b.dim:
        raise DimensionError(f"embedding dims differ: {a.dim} vs {b.dim}")
    value = float(torch.dot(a.values, b.values))
    return max(-1.0, min(1.0, value))


def calibrate_threshold(impostor_scores, far: float = 0.01) -> float:
    """Pick the verification threshold achieving at most the given FAR.

    Returns the smallest observed score s such that the fraction of impostor
    scores strictly greater than s is <= far.  Strict inequality mirrors the
    strict comparison used by verification itself.
    """
    scores = sorted(float(s) for s in impostor_scores)
    if not scores:
        raise ValidationError("impostor score list is empty")
    if not 0.0 < far < 1.0:
        raise ValidationError(f"far must lie in (0, 1), got {far}")
    n = len(scores)
    # scores[i] has exactly (n - j) strictly-greater entries where j is the
    # index one past the last duplicate of scores[i].
    j = 0
    for i, s in enumerate(scores):
        j = max(j, i + 1)
        while j < n and scores[j] == s:
            j += 1
        if (n - j) / n <= far:
            return s
    return scores[-1]


def verify(model: FrModel, a: FaceImage, b: FaceImage, threshold: float) -> bool:
    """True iff the two faces verify as the same identity under the model."""
    return cosine_similarity(model.embed(a), model.embed(b)) > threshold


class ThresholdTable:
    """Model-name -> verification-threshold map, persistable as JSON."""

    def __init__(self, thresholds: dict[str, float]):
        for name, tau in thresholds.items():
            if not -1.0 < float(tau) < 1.0:
                raise ValidationError(f"threshold for '{name}' must lie in (-1, 1), got {tau}")
        self._thresholds = {name: float(tau) for name, tau in thresholds.items()}

    def __getitem__(self, name: str) -> float:
        return self._thresholds[name]

    def __contains__(self, name: str) -> bool:
        return name in self._thresholds

    def as_dict(self) -> dict[str, float]:
        return dict(self._thresholds)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self._thresholds, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ThresholdTable":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    @classmethod
    def defaults(cls) -> "ThresholdTable":
        """Shipped thresholds for the four reference recognizers (0.01 FAR)."""
        text = resources.files("faceforge.data").joinpath("default_thresholds.json").read_text()
        return cls(json.loads(text))

"""Zero-shot scene grounding: embeds observations and text descriptions,
scores cosine similarity, recognizes objects by argmax, and localizes them
from synthesized bounding boxes.

No real image model runs here.  The default provider hashes each label to a
seeded unit vector and perturbs image embeddings with isotropic Gaussian
noise, giving a tunable recognition-accuracy knob; a real encoder can be
attached behind the same provider interface, or precomputed embeddings can
be loaded from a YAML file.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np
import yaml

from .world import DEFAULT_FOV, SensorSnapshot, WorldModel, wrap_angle

NORM_TOL = 1e-6


class PerceptionError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVec:
    values: np.ndarray
    normalized: bool = True

    def __post_init__(self) -> None:
        if self.normalized:
            norm = float(np.linalg.norm(self.values))
            if abs(norm - 1.0) > NORM_TOL:
                raise PerceptionError(f"vector marked normalized has norm {norm}")

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass
class DescriptionSet:
    """Ordered, unique textual descriptions and their tokenized forms."""

    descriptions: list[str]
    tokens: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.descriptions:
            raise PerceptionError("description set must not be empty")
        if len(set(self.descriptions)) != len(self.descriptions):
            raise PerceptionError("descriptions must be unique")
        if not self.tokens:
            self.tokens = [d.strip().lower() for d in self.descriptions]
        if len(self.tokens) != len(self.descriptions):
            raise PerceptionError("tokens must align with descriptions")

    def __len__(self) -> int:
        return len(self.descriptions)


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    source_image_size: tuple[int, int]  # (w, h) pixels

    def __post_init__(self) -> None:
        w, h = self.source_image_size
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise PerceptionError("bbox must have positive extent")
        if self.x_min < 0 or self.y_min < 0 or self.x_max > w or self.y_max > h:
            raise PerceptionError("bbox outside image bounds")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2


@dataclass(frozen=True)
class Detection:
    label: str
    score: float
    x: float
    y: float
    stamp: float

    def to_payload(self) -> dict:
        return {"label": self.label, "score": self.score, "x": self.x,
                "y": self.y, "stamp": self.stamp}


@dataclass(frozen=True)
class Crop:
    """Ground-truth stand-in for an image crop of one scene object."""

    label: str
    sigma: float = 0.0


class EmbeddingProvider(Protocol):
    dim: int

    def encode_text(self, token: str) -> FeatureVec: ...

    def encode_image(self, crop: Crop) -> FeatureVec: ...


class MockEmbeddingProvider:
    """Deterministic label-hash embeddings with tunable image noise.

    encode_text maps each token to a fixed unit vector seeded from the token;
    encode_image returns the true label's vector plus isotropic Gaussian noise
    (crop.sigma), renormalized.  Noise draws come from the provider's own
    seeded generator, so runs are reproducible.
    """

    def __init__(self, dim: int = 64, seed: int = 7) -> None:
        if dim < 2:
            raise PerceptionError("embedding dimension must be >= 2")
        self.dim = dim
        self.seed = seed
        self._noise_rng = np.random.default_rng(seed)
        self._text_cache: dict[str, FeatureVec] = {}

    def encode_text(self, token: str) -> FeatureVec:
        cached = self._text_cache.get(token)
        if cached is not None:
            return cached
        token_seed = zlib.crc32(token.encode("utf-8")) ^ (self.seed * 0x9E3779B1)
        rng = np.random.default_rng(token_seed & 0xFFFFFFFF)
        vec = rng.standard_normal(self.dim)
        vec /= np.linalg.norm(vec)
        fv = FeatureVec(values=vec)
        self._text_cache[token] = fv
        return fv

    def encode_image(self, crop: Crop) -> FeatureVec:
        base = self.encode_text(crop.label).values
        if crop.sigma <= 0:
            return FeatureVec(values=base.copy())
        noisy = base + self._noise_rng.normal(0.0, crop.sigma, self.dim)
        norm = np.linalg.norm(noisy)
        if norm == 0.0:
            return FeatureVec(values=base.copy())
        return FeatureVec(values=noisy / norm)


class FileEmbeddingProvider(MockEmbeddingProvider):
    """Provider backed by a label -> vector file (e.g. real encoder output,
    exported offline); unlisted labels fall back to hashed vectors."""

    def __init__(self, path: str | Path, seed: int = 7) -> None:
        doc = yaml.safe_load(Path(path).read_text())
        if not isinstance(doc, dict) or not doc.get("embeddings"):
            raise PerceptionError(f"embedding file {path} needs an 'embeddings' mapping")
        vectors = {}
        dims = set()
        for label, values in doc["embeddings"].items():
            vec = np.asarray(values, dtype=float)
            norm = np.linalg.norm(vec)
            if norm == 0:
                raise PerceptionError(f"zero embedding for label {label!r}")
            vectors[str(label)] = vec / norm
            dims.add(len(vec))
        if len(dims) != 1:
            raise PerceptionError(f"inconsistent embedding dimensions: {sorted(dims)}")
        super().__init__(dim=dims.pop(), seed=seed)
        self._text_cache = {k: FeatureVec(values=v) for k, v in vectors.items()}


def encode_text(provider: EmbeddingProvider, dset: DescriptionSet) -> list[FeatureVec]:
    """One normalized vector per token, order-aligned with the set."""
    out = []
    for token in dset.tokens:
        fv = provider.encode_text(token)
        if fv.dim != provider.dim:
            raise PerceptionError(
                f"provider returned dim {fv.dim}, configured {provider.dim}")
        out.append(fv)
    return out


def encode_image(provider: EmbeddingProvider, crop: Crop) -> FeatureVec:
    return provider.encode_image(crop)


def similarity_scores(f_img: FeatureVec, f_texts: Sequence[FeatureVec]) -> list[float]:
    """Dot products (cosine, since vectors are unit norm), order-aligned."""
    scores = []
    for ft in f_texts:
        if ft.dim != f_img.dim:
            raise PerceptionError(f"dimension mismatch: {f_img.dim} vs {ft.dim}")
        scores.append(float(np.dot(f_img.values, ft.values)))
    return scores


def recognize(scores: Sequence[float], dset: DescriptionSet) -> tuple[str, float]:
    """Description with the highest score; ties go to the lowest index."""
    if len(scores) == 0:
        raise PerceptionError("cannot recognize from empty scores")
    if len(scores) != len(dset):
        raise PerceptionError("scores must align with the description set")
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return dset.descriptions[best], float(scores[best])


@dataclass(frozen=True)
class CameraModel:
    """Synthetic pinhole-ish camera relating (bearing, range) to boxes.

    Horizontal pixel position is linear in bearing across the FOV; box height
    encodes range through the apparent angular size of a nominal object half
    height.  synthesize_bbox and bearing_range are exact inverses for ranges
    at or beyond the sensor's minimum range.
    """

    width: int = 640
    height: int = 480
    fov: float = DEFAULT_FOV
    fy: float = 433.0
    obj_half_height: float = 0.3

    def synthesize_bbox(self, bearing: float, rng: float) -> BBox:
        if rng <= 0:
            raise PerceptionError("range must be > 0")
        half_fov = self.fov / 2
        cx = (self.width / 2) * (1.0 - bearing / half_fov)
        half_h = self.fy * math.atan2(self.obj_half_height, rng)
        cy = self.height / 2
        half_w = min(half_h, cx, self.width - cx)
        half_w = max(half_w, 1e-6)
        return BBox(
            x_min=cx - half_w, y_min=cy - half_h,
            x_max=cx + half_w, y_max=cy + half_h,
            source_image_size=(self.width, self.height),
        )

    def bearing_range(self, bbox: BBox) -> tuple[float, float]:
        cx, _ = bbox.center
        bearing = (1.0 - 2.0 * cx / self.width) * (self.fov / 2)
        half_h = (bbox.y_max - bbox.y_min) / 2
        rng = self.obj_half_height / math.tan(half_h / self.fy)
        return bearing, rng


def localize(bbox: BBox, snapshot: SensorSnapshot,
             camera: Optional[CameraModel] = None) -> tuple[float, float]:
    """World position of the box's center ray composed with the robot pose."""
    camera = camera or CameraModel()
    bearing, rng = camera.bearing_range(bbox)
    x, y, theta = snapshot.pose
    return x + rng * math.cos(theta + bearing), y + rng * math.sin(theta + bearing)


def perceive(provider: EmbeddingProvider, snapshot: SensorSnapshot,
             dset: DescriptionSet, sigma: float = 0.0,
             camera: Optional[CameraModel] = None,
             stamp: float = 0.0) -> list[Detection]:
    """Recognition pipeline over every visible object in the snapshot."""
    camera = camera or CameraModel()
    f_texts = encode_text(provider, dset)
    detections = []
    for vis in snapshot.visible:
        bbox = camera.synthesize_bbox(vis.bearing, vis.range)
        f_img = provider.encode_image(Crop(label=vis.label, sigma=sigma))
        scores = similarity_scores(f_img, f_texts)
        label, score = recognize(scores, dset)
        x, y = localize(bbox, snapshot, camera)
        detections.append(Detection(label=label, score=score, x=x, y=y, stamp=stamp))
    return detections


def perceive_and_publish(provider: EmbeddingProvider, snapshot: SensorSnapshot,
                         dset: DescriptionSet, bus, sigma: float = 0.0,
                         camera: Optional[CameraModel] = None) -> list[Detection]:
    stamp = bus.clock.now()
    detections = perceive(provider, snapshot, dset, sigma, camera, stamp)
    bus.publish("detections", [d.to_payload() for d in detections])
    return detections


class PerceptionNode:
    """Runs the recognition pipeline on the newest sensor snapshot each tick."""

    def __init__(self, provider: EmbeddingProvider, dset: DescriptionSet, bus,
                 sigma: float = 0.0, camera: Optional[CameraModel] = None) -> None:
        self.provider = provider
        self.dset = dset
        self.bus = bus
        self.sigma = sigma
        self.camera = camera or CameraModel()
        self._sub = bus.subscribe("sensors")

    def tick(self) -> Optional[list[Detection]]:
        env = self._sub.latest()
        if env is None:
            return None
        snapshot = SensorSnapshot.from_payload(env.payload, stamp=env.stamp)
        return perceive_and_publish(self.provider, snapshot, self.dset, self.bus,
                                    self.sigma, self.camera)


OIA_POSITION_THRESHOLD = 0.5  # meters


def score_detections(detections: Sequence[Detection], objects,
                     pos_threshold: float = OIA_POSITION_THRESHOLD) -> list[bool]:
    """Per-detection correctness against ground-truth scene objects.

    A detection counts as correct when its label matches the nearest object's
    label and the position error is under the threshold.
    """
    out = []
    for det in detections:
        if not objects:
            out.append(False)
            continue
        nearest = min(objects, key=lambda o: math.hypot(o.x - det.x, o.y - det.y))
        err = math.hypot(nearest.x - det.x, nearest.y - det.y)
        out.append(det.label == nearest.label and err < pos_threshold)
    return out


def description_set_for_world(world: WorldModel) -> DescriptionSet:
    """Default description set: the labels present in the world file."""
    labels = world.object_labels()
    if not labels:
        labels = ["object"]
    return DescriptionSet(descriptions=labels)


def mc_recognition_accuracy(provider: MockEmbeddingProvider, labels: Sequence[str],
                            sigma: float, trials: int, seed: int = 99) -> float:
    """Monte-Carlo estimate of argmax recognition accuracy at a noise level.

    Uses its own generator so calibration does not disturb the provider's
    noise stream.
    """
    dset = DescriptionSet(descriptions=list(labels))
    texts = np.stack([provider.encode_text(t).values for t in dset.tokens])
    rng = np.random.default_rng(seed)
    hits = 0
    for i in range(trials):
        k = i % len(labels)
        noisy = texts[k] + rng.normal(0.0, sigma, provider.dim)
        norm = np.linalg.norm(noisy)
        if norm > 0:
            noisy = noisy / norm
        hits += int(np.argmax(texts @ noisy) == k)
    return hits / trials


def calibrate_sigma(provider: MockEmbeddingProvider, labels: Sequence[str],
                    target_accuracy: float, trials: int = 4000,
                    iterations: int = 18, seed: int = 99) -> float:
    """Noise level whose Monte-Carlo recognition accuracy hits the target.

    Accuracy decreases monotonically from 1.0 (sigma 0) toward 1/n, so a
    bisection on sigma converges; the target must lie in that open interval.
    """
    n = len(labels)
    if not (1.0 / n < target_accuracy < 1.0):
        raise PerceptionError(
            f"target accuracy must be in (1/{n}, 1), got {target_accuracy}")
    lo, hi = 0.0, 1.0
    while mc_recognition_accuracy(provider, labels, hi, trials, seed) > target_accuracy:
        hi *= 2.0
        if hi > 64:
            raise PerceptionError("calibration failed to bracket the target")
    for _ in range(iterations):
        mid = (lo + hi) / 2
        if mc_recognition_accuracy(provider, labels, mid, trials, seed) > target_accuracy:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2

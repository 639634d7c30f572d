"""Domain vocabulary: object classes, modality views, pairings, scenes, config.

All containers are frozen dataclasses. Coordinates are stored as tuples so a
view is hashable and safe to share; ``ModalityView.points()`` gives the
``(n, d)`` float array used by the numeric modules. Row ``i`` of every
matrix built from a view refers to ``view.objects[i]``, never to the id.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class SensAlignError(Exception):
    """Base error. ``stage`` is the pipeline stage label used by the CLI."""

    stage = "core"

    def __init__(self, message, stage=None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage

    def with_stage(self, stage):
        """Return a copy of this error re-labelled with an outer stage."""
        err = type(self)(str(self), stage=stage)
        err.__cause__ = self
        return err


class ParameterError(SensAlignError, ValueError):
    stage = "parameter"


class InputError(SensAlignError, ValueError):
    stage = "input"


class NumericalError(SensAlignError, ArithmeticError):
    stage = "numerical"


class StructuralError(SensAlignError):
    """Raised when the joint graph cannot supply the requested embedding."""

    stage = "structure"


class ContractError(SensAlignError, ValueError):
    stage = "contract"


class GenerationError(SensAlignError, RuntimeError):
    stage = "generate"


class ObjectClass(str, enum.Enum):
    CAR = "Car"
    PERSON = "Person"
    UNKNOWN = "Unknown"


class Modality(str, enum.Enum):
    CAMERA = "camera"
    LIDAR = "lidar"
    BSM = "bsm"

    @property
    def dimension(self):
        return 2 if self is Modality.CAMERA else 3


@dataclass(frozen=True)
class DetectedObject:
    id: int
    cls: ObjectClass
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "cls", ObjectClass(self.cls))
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))


@dataclass(frozen=True)
class ModalityView:
    modality: Modality
    dimension: int
    objects: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "modality", Modality(self.modality))
        object.__setattr__(self, "objects", tuple(self.objects))

    def __len__(self):
        return len(self.objects)

    def points(self) -> np.ndarray:
        if not self.objects:
            return np.zeros((0, self.dimension))
        return np.array([o.coords for o in self.objects], dtype=np.float64)

    def classes(self) -> list:
        return [o.cls for o in self.objects]

    @classmethod
    def from_points(cls, modality, points, classes=None, first_id=0):
        """Build a view from an ``(n, d)`` array; classes default to Car."""
        modality = Modality(modality)
        pts = np.asarray(points, dtype=np.float64)
        if classes is None:
            classes = [ObjectClass.CAR] * len(pts)
        objs = tuple(
            DetectedObject(first_id + i, c, tuple(p)) for i, (p, c) in enumerate(zip(pts, classes))
        )
        return cls(modality, modality.dimension, objs)


@dataclass(frozen=True)
class PairedSet:
    """Known correspondences as ``(source_index, target_index)`` tuples."""

    pairs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((int(s), int(t)) for s, t in self.pairs))

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def sources(self):
        return [s for s, _ in self.pairs]

    @property
    def targets(self):
        return [t for _, t in self.pairs]

    def reversed(self) -> "PairedSet":
        return PairedSet(tuple((t, s) for s, t in self.pairs))

    def violations(self, n_source, n_target, label="pairs"):
        out = []
        if not self.pairs:
            out.append(f"{label}: at least one pair required")
        for side, idx, n in (("source", self.sources, n_source), ("target", self.targets, n_target)):
            if len(set(idx)) != len(idx):
                out.append(f"{label}: repeated {side} index")
            for i in idx:
                if not 0 <= i < n:
                    out.append(f"{label}: {side} index {i} out of range [0, {n})")
        return out


@dataclass(frozen=True)
class Scene:
    id: str
    camera: ModalityView
    lidar: ModalityView
    bsm: ModalityView
    paired_camera_lidar: PairedSet
    paired_camera_bsm: PairedSet
    # (camera_index, lidar_index, bsm_index); any entry may be None
    ground_truth: Optional[tuple] = None

    def __post_init__(self):
        if self.ground_truth is not None:
            gt = tuple(tuple(None if v is None else int(v) for v in row) for row in self.ground_truth)
            object.__setattr__(self, "ground_truth", gt)

    def truth_map(self, target: Modality) -> Optional[dict]:
        """Map camera index -> partner index in ``target`` (None if partnerless)."""
        if self.ground_truth is None:
            return None
        col = 1 if Modality(target) is Modality.LIDAR else 2
        out = {i: None for i in range(len(self.camera))}
        for row in self.ground_truth:
            if row[0] is not None:
                out[row[0]] = row[col]
        return out


@dataclass(frozen=True)
class AlignmentConfig:
    k: int = 3
    l: int = 2
    lambda_x: float = 1.0
    lambda_y: float = 1.0
    zero_tol: float = 1e-9
    unmapped_factor: float = 2.0
    gram_reg: float = 1e-3

    def __post_init__(self):
        if int(self.k) < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if int(self.l) < 1:
            raise ParameterError(f"l must be >= 1, got {self.l}")
        if self.lambda_x < 0 or self.lambda_y < 0 or self.lambda_x + self.lambda_y <= 0:
            raise ParameterError("lambda_x, lambda_y must be non-negative with a positive sum")
        if not self.unmapped_factor > 0:
            raise ParameterError(f"unmapped_factor must be positive, got {self.unmapped_factor}")
        if self.gram_reg < 0:
            raise ParameterError(f"gram_reg must be non-negative, got {self.gram_reg}")
        if self.zero_tol < 0:
            raise ParameterError(f"zero_tol must be non-negative, got {self.zero_tol}")


def _view_violations(view: ModalityView, label: str) -> list:
    out = []
    expected = view.modality.dimension
    if view.dimension != expected:
        out.append(f"{label}: dimension {view.dimension} but {view.modality.value} views have dimension {expected}")
    seen = set()
    for pos, obj in enumerate(view.objects):
        tag = f"{label}[{pos}] (id {obj.id})"
        if not isinstance(obj.id, int) or obj.id < 0:
            out.append(f"{tag}: id must be a non-negative integer")
        if obj.id in seen:
            out.append(f"{tag}: duplicate id")
        seen.add(obj.id)
        if len(obj.coords) != view.dimension:
            out.append(f"{tag}: coords length {len(obj.coords)} != view dimension {view.dimension}")
        if not all(math.isfinite(c) for c in obj.coords):
            out.append(f"{tag}: non-finite coordinate")
        if obj.cls is ObjectClass.UNKNOWN and view.modality is not Modality.LIDAR:
            out.append(f"{tag}: class Unknown only allowed in lidar views")
        if view.modality is Modality.BSM and obj.cls is not ObjectClass.CAR:
            out.append(f"{tag}: bsm views may only contain Car objects, found {obj.cls.value}")
    return out


def validate_scene(scene: Scene) -> list:
    """Return one human-readable description per invariant violation."""
    out = []
    out += _view_violations(scene.camera, "camera")
    out += _view_violations(scene.lidar, "lidar")
    out += _view_violations(scene.bsm, "bsm")
    for view, want in ((scene.camera, Modality.CAMERA), (scene.lidar, Modality.LIDAR), (scene.bsm, Modality.BSM)):
        if view.modality is not want:
            out.append(f"{want.value}: view declares modality {view.modality.value}")
    out += scene.paired_camera_lidar.violations(len(scene.camera), len(scene.lidar), "paired.camera_lidar")
    out += scene.paired_camera_bsm.violations(len(scene.camera), len(scene.bsm), "paired.camera_bsm")
    if scene.ground_truth is not None:
        sizes = (len(scene.camera), len(scene.lidar), len(scene.bsm))
        names = ("camera", "lidar", "bsm")
        for col in range(3):
            vals = [row[col] for row in scene.ground_truth if len(row) == 3 and row[col] is not None]
            if len(set(vals)) != len(vals):
                out.append(f"ground_truth: {names[col]} column repeats an index")
            for v in vals:
                if not 0 <= v < sizes[col]:
                    out.append(f"ground_truth: {names[col]} index {v} out of range")
        for r, row in enumerate(scene.ground_truth):
            if len(row) != 3:
                out.append(f"ground_truth[{r}]: expected 3 entries, got {len(row)}")
            elif all(v is None for v in row):
                out.append(f"ground_truth[{r}]: all entries absent")
    return out


def as_points(points: Sequence) -> np.ndarray:
    """Coerce a list of vectors to a 2-D float array, checking dimensions agree."""
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=np.float64)
        if arr.ndim != 2:
            raise InputError(f"expected a 2-D point array, got shape {arr.shape}")
        return arr
    dims = {len(p) for p in points}
    if len(dims) > 1:
        raise InputError(f"mixed point dimensions {sorted(dims)}")
    return np.array([tuple(p) for p in points], dtype=np.float64).reshape(len(points), -1)

"""Minimal V2V Basic Safety Messages mirrored from Lidar-detected cars."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DetectedObject, InputError, Modality, ModalityView, ObjectClass


@dataclass(frozen=True)
class BsmRecord:
    """Position-only safety message: emitting object id and sensor-relative xyz."""

    source_id: int
    position: tuple
    cls: ObjectClass = ObjectClass.CAR


def bsm_records(lidar: ModalityView, noise_sigma: float = 0.0, seed: int = 0) -> list:
    if lidar.modality is not Modality.LIDAR or lidar.dimension != 3:
        raise InputError(
            f"BSMs are synthesized from a 3-D lidar view, got {lidar.modality.value} (dimension {lidar.dimension})",
            stage="bsm",
        )
    if noise_sigma < 0:
        raise InputError(f"noise_sigma must be non-negative, got {noise_sigma}", stage="bsm")
    cars = [o for o in lidar.objects if o.cls is ObjectClass.CAR]
    pos = np.array([o.coords for o in cars], dtype=np.float64).reshape(len(cars), 3)
    if noise_sigma > 0:
        pos = pos + np.random.default_rng(seed).normal(0.0, noise_sigma, size=pos.shape)
    return [BsmRecord(o.id, tuple(float(v) for v in p)) for o, p in zip(cars, pos)]


def synthesize_bsms(lidar: ModalityView, noise_sigma: float = 0.0, seed: int = 0, first_id=None) -> ModalityView:
    """One BSM object per Lidar car, in Lidar order; persons and unknowns emit nothing.

    Positions are the Lidar positions plus isotropic Gaussian noise of
    standard deviation ``noise_sigma``. New object ids start at ``first_id``
    (default: one past the largest Lidar id).
    """
    records = bsm_records(lidar, noise_sigma, seed)
    if first_id is None:
        first_id = max((o.id for o in lidar.objects), default=-1) + 1
    objs = tuple(DetectedObject(first_id + i, ObjectClass.CAR, r.position) for i, r in enumerate(records))
    return ModalityView(Modality.BSM, 3, objs)

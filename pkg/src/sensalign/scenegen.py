"""Synthetic road scenes with known cross-modal ground truth.

Coordinates are in the shared sensor frame: x right, y down, z forward, in
meters. Camera and Lidar sit at the origin; the camera looks along +z.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bsm import synthesize_bsms
from .core import (
    DetectedObject,
    GenerationError,
    Modality,
    ModalityView,
    ObjectClass,
    PairedSet,
    ParameterError,
    Scene,
)

# independent random streams spawned from the config seed, in this order
STREAMS = (
    "population",
    "lidar_dropout",
    "lidar_noise",
    "camera_dropout",
    "camera_noise",
    "hidden",
    "bsm_noise",
    "pairs",
)

MAX_TRIES = 2000


def stream_rngs(seed: int) -> dict:
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}


@dataclass(frozen=True)
class SceneGenConfig:
    n_cars: int = 14
    n_persons: int = 2
    n_unknown: int = 0
    region: tuple = ((-25.0, 25.0), (0.5, 1.2), (-30.0, 60.0))
    camera_fov_deg: float = 90.0
    focal_px: float = 720.0
    image_size: tuple = (1242, 375)
    camera_dropout: float = 0.0
    lidar_dropout: float = 0.0
    n_hidden_cars: int = 0
    position_noise: dict = field(default_factory=lambda: {"camera": 0.0, "lidar": 0.0, "bsm": 0.0})
    min_separation: float = 1.0
    extra_pairs: int = 2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "region", tuple(tuple(float(v) for v in ax) for ax in self.region))
        object.__setattr__(self, "image_size", tuple(int(v) for v in self.image_size))
        noise = {"camera": 0.0, "lidar": 0.0, "bsm": 0.0}
        noise.update({k: float(v) for k, v in dict(self.position_noise).items()})
        object.__setattr__(self, "position_noise", noise)
        self.validate()

    def validate(self):
        for name in ("n_cars", "n_persons", "n_unknown", "n_hidden_cars", "extra_pairs"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ParameterError(f"{name} must be a non-negative integer, got {v}", stage="config:" + name)
        if self.n_cars + self.n_persons + self.n_unknown + self.n_hidden_cars == 0:
            raise ParameterError("scene has zero objects", stage="config:n_cars")
        for name in ("camera_dropout", "lidar_dropout"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must be in [0, 1], got {v}", stage="config:" + name)
        if not 0.0 < self.camera_fov_deg < 180.0:
            raise ParameterError(f"camera_fov_deg must be in (0, 180), got {self.camera_fov_deg}", stage="config:camera_fov_deg")
        if not self.focal_px > 0:
            raise ParameterError(f"focal_px must be positive, got {self.focal_px}", stage="config:focal_px")
        if len(self.image_size) != 2 or min(self.image_size) <= 0:
            raise ParameterError(f"image_size must be two positive integers, got {self.image_size}", stage="config:image_size")
        if len(self.region) != 3 or any(len(ax) != 2 or ax[0] > ax[1] for ax in self.region):
            raise ParameterError(f"region must be three (lo, hi) pairs, got {self.region}", stage="config:region")
        for k, v in self.position_noise.items():
            if k not in ("camera", "lidar", "bsm"):
                raise ParameterError(f"unknown modality {k!r}", stage="config:position_noise")
            if v < 0:
                raise ParameterError(f"position_noise.{k} must be non-negative", stage="config:position_noise")
        if self.min_separation < 0:
            raise ParameterError("min_separation must be non-negative", stage="config:min_separation")

    def to_dict(self):
        d = asdict(self)
        d["region"] = [list(ax) for ax in self.region]
        d["image_size"] = list(self.image_size)
        return d

    @classmethod
    def from_dict(cls, data: dict):
        known = cls.__dataclass_fields__
        for key in data:
            if key not in known:
                raise ParameterError(f"unknown config field {key!r}", stage=f"config:{key}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ParameterError):
                raise
            raise ParameterError(str(exc), stage="config") from exc


def project_camera(point3d, focal_px: float, image_size, fov_deg=None):
    """Pinhole projection to pixels, or ``None`` when behind or outside the image."""
    x, y, z = (float(v) for v in point3d)
    if z <= 0:
        return None
    if fov_deg is not None and abs(math.degrees(math.atan2(x, z))) > fov_deg / 2.0:
        return None
    w, h = image_size
    u = w / 2.0 + focal_px * x / z
    v = h / 2.0 + focal_px * y / z
    if not (0.0 <= u <= w and 0.0 <= v <= h):
        return None
    return (u, v)


def sample_positions(n, region, min_separation, rng, existing=None):
    """Uniform positions in ``region`` with pairwise separation ``>= min_separation``."""
    lo = np.array([ax[0] for ax in region])
    hi = np.array([ax[1] for ax in region])
    placed = [] if existing is None else [np.asarray(p) for p in existing]
    out = []
    for i in range(n):
        for _ in range(MAX_TRIES):
            p = lo + (hi - lo) * rng.random(3)
            if all(np.linalg.norm(p - q) >= min_separation for q in placed):
                break
        else:
            raise GenerationError(
                f"could not place object {i} with {min_separation} m separation after {MAX_TRIES} tries; "
                "enlarge the region or reduce the object count"
            )
        placed.append(p)
        out.append(p)
    return np.array(out).reshape(n, 3)


def _hidden_positions(n, region, min_separation, rng, existing):
    # ring just beyond the farthest horizontal corner of the lidar region
    r_max = max(math.hypot(x, z) for x in region[0] for z in region[2])
    placed = [np.asarray(p) for p in existing]
    out = []
    for i in range(n):
        for _ in range(MAX_TRIES):
            phi = rng.uniform(0.0, 2.0 * math.pi)
            r = rng.uniform(1.1, 1.5) * r_max
            y = rng.uniform(region[1][0], region[1][1])
            p = np.array([r * math.sin(phi), y, r * math.cos(phi)])
            if all(np.linalg.norm(p - q) >= min_separation for q in placed):
                break
        else:
            raise GenerationError(f"could not place hidden car {i}")
        placed.append(p)
        out.append(p)
    return np.array(out).reshape(n, 3)


def _depth_proxy_pick(camera, truth, target):
    if truth:
        ranges = {
            c: float(np.linalg.norm(target.objects[t].coords))
            for c, t in sorted(truth.items())
            if t is not None and c < len(camera)
        }
        if ranges:
            best = max(ranges.values())
            return min(c for c, r in ranges.items() if r == best)
    v = [o.coords[1] for o in camera.objects]
    return int(np.argmin(v))


def select_paired(camera: ModalityView, target: ModalityView, extra_pairs_from_truth: int = 0, ground_truth=None, seed: int = 0) -> PairedSet:
    """Bootstrap supervision: farthest-object pair plus random true pairs.

    The first pair joins the camera object deepest in the background with the
    target object at the largest range. The camera depth proxy is the range
    of the object's true partner when ``ground_truth`` (camera index ->
    target index or None) is given, otherwise the smallest image row.
    """
    if len(camera) == 0 or len(target) == 0:
        raise ParameterError("select_paired needs non-empty views", stage="pairs")
    cam = _depth_proxy_pick(camera, ground_truth, target)
    ranges = np.linalg.norm(target.points(), axis=1)
    tgt = int(np.flatnonzero(ranges == ranges.max())[0])
    pairs = [(cam, tgt)]
    if extra_pairs_from_truth > 0:
        if ground_truth is None:
            raise ParameterError("extra pairs need ground truth", stage="pairs")
        cands = [(c, t) for c, t in sorted(ground_truth.items()) if t is not None and c != cam and t != tgt]
        take = min(int(extra_pairs_from_truth), len(cands))
        rng = np.random.default_rng(seed)
        for i in rng.choice(len(cands), size=take, replace=False):
            pairs.append(cands[int(i)])
    return PairedSet(tuple(pairs))


def generate_scene(config: SceneGenConfig, scene_id=None) -> Scene:
    cfg = config
    rng = stream_rngs(cfg.seed)
    classes = (
        [ObjectClass.CAR] * cfg.n_cars
        + [ObjectClass.PERSON] * cfg.n_persons
        + [ObjectClass.UNKNOWN] * cfg.n_unknown
    )
    classes = [classes[i] for i in rng["population"].permutation(len(classes))]
    truth_pos = sample_positions(len(classes), cfg.region, cfg.min_separation, rng["population"])

    # lidar: every entity, minus dropout, plus noise
    lidar_of = {}
    lidar_pts, lidar_cls = [], []
    for e, (p, c) in enumerate(zip(truth_pos, classes)):
        drop = rng["lidar_dropout"].random() < cfg.lidar_dropout
        jitter = rng["lidar_noise"].normal(0.0, 1.0, 3) * cfg.position_noise["lidar"]
        if not drop:
            lidar_of[e] = len(lidar_pts)
            lidar_pts.append(p + jitter)
            lidar_cls.append(c)

    # camera: entities in frame (Unknown is lidar-only), minus dropout, plus pixel noise
    cam_of = {}
    cam_pts, cam_cls = [], []
    for e, (p, c) in enumerate(zip(truth_pos, classes)):
        if c is ObjectClass.UNKNOWN:
            continue
        uv = project_camera(p, cfg.focal_px, cfg.image_size, cfg.camera_fov_deg)
        if uv is None:
            continue
        drop = rng["camera_dropout"].random() < cfg.camera_dropout
        jitter = rng["camera_noise"].normal(0.0, 1.0, 2) * cfg.position_noise["camera"]
        if not drop:
            cam_of[e] = len(cam_pts)
            cam_pts.append(np.asarray(uv) + jitter)
            cam_cls.append(c)

    n_cam, n_lid = len(cam_pts), len(lidar_pts)
    camera = ModalityView(
        Modality.CAMERA, 2, tuple(DetectedObject(i, c, tuple(p)) for i, (p, c) in enumerate(zip(cam_pts, cam_cls)))
    )
    lidar = ModalityView(
        Modality.LIDAR, 3, tuple(DetectedObject(n_cam + i, c, tuple(p)) for i, (p, c) in enumerate(zip(lidar_pts, lidar_cls)))
    )

    bsm_seed = int(rng["bsm_noise"].integers(2**63 - 1))
    mirrored = synthesize_bsms(lidar, cfg.position_noise["bsm"], bsm_seed, first_id=n_cam + n_lid)
    hidden = _hidden_positions(cfg.n_hidden_cars, cfg.region, cfg.min_separation, rng["hidden"], truth_pos)
    first_hidden = n_cam + n_lid + len(mirrored)
    bsm = ModalityView(
        Modality.BSM,
        3,
        mirrored.objects
        + tuple(DetectedObject(first_hidden + i, ObjectClass.CAR, tuple(p)) for i, p in enumerate(hidden)),
    )

    # bsm index of each lidar car, in lidar order
    bsm_of_lidar = {}
    for li, c in enumerate(lidar_cls):
        if c is ObjectClass.CAR:
            bsm_of_lidar[li] = len(bsm_of_lidar)
    truth = []
    for e in range(len(classes)):
        ci, li = cam_of.get(e), lidar_of.get(e)
        bi = bsm_of_lidar.get(li) if li is not None else None
        if ci is None and li is None:
            continue
        truth.append((ci, li, bi))
    for h in range(len(hidden)):
        truth.append((None, None, len(mirrored) + h))

    if n_cam == 0:
        raise GenerationError("no object is visible to the camera; cannot pair views")
    if n_lid == 0 or len(bsm) == 0:
        raise GenerationError("lidar or bsm view is empty; cannot pair views")
    cl_truth = {ci: li for ci, li, _ in truth if ci is not None}
    cb_truth = {ci: bi for ci, _, bi in truth if ci is not None}
    pair_rng = rng["pairs"]
    cl = select_paired(camera, lidar, cfg.extra_pairs, cl_truth, int(pair_rng.integers(2**63 - 1)))
    cb = select_paired(camera, bsm, cfg.extra_pairs, cb_truth, int(pair_rng.integers(2**63 - 1)))
    sid = scene_id if scene_id is not None else f"synthetic-{cfg.seed}"
    return Scene(sid, camera, lidar, bsm, cl, cb, tuple(truth))


def rigid_twin(points, rng, translation_scale=10.0):
    """Return ``(rotated+translated points in shuffled order, perm)``; row ``i`` of the
    result is source point ``perm[i]``."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    t = rng.normal(size=3) * translation_scale
    perm = rng.permutation(len(points))
    moved = (np.asarray(points) @ q.T + t)[perm]
    return moved, perm

"""Semi-supervised alignment of two views through a shared spectral embedding.

The two view Laplacians are glued along the paired objects: each pair
becomes a single row of the joint matrix, so paired objects receive
identical embedding coordinates by construction. Row layout of the joint
matrix is ``[paired | unpaired source | unpaired target]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .core import (
    AlignmentConfig,
    ContractError,
    Modality,
    ModalityView,
    ObjectClass,
    PairedSet,
    ParameterError,
    Scene,
    SensAlignError,
    StructuralError,
)
from .graph import build_laplacian, build_weight_matrix


@dataclass(frozen=True, eq=False)
class JointLaplacian:
    matrix: np.ndarray
    p: int
    q_x: int
    q_y: int
    lambda_x: float
    lambda_y: float
    # per joint row: ("paired", s, t), ("source", s, None) or ("target", None, t)
    row_origin: tuple
    source_rows: np.ndarray  # source view index -> joint row
    target_rows: np.ndarray  # target view index -> joint row

    @property
    def size(self):
        return self.p + self.q_x + self.q_y

    def assemble(self, f, g) -> np.ndarray:
        """Stack per-view vectors into the joint layout (uses paired values of ``f``)."""
        f = np.asarray(f, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        h = np.empty((self.size,) + f.shape[1:])
        h[self.source_rows] = f
        unpaired_t = self.target_rows[self.target_rows >= self.p + self.q_x]
        t_idx = np.flatnonzero(self.target_rows >= self.p + self.q_x)
        h[unpaired_t] = g[t_idx]
        return h

    def split(self, h):
        """Read per-view vectors ``(f, g)`` back out of a joint vector or matrix."""
        h = np.asarray(h)
        return h[self.source_rows], h[self.target_rows]


@dataclass(eq=False)
class AlignmentResult:
    embedding: np.ndarray            # joint-order rows, l columns
    eigenvalues: np.ndarray
    correspondences: list            # (source_index, target_index, distance)
    unmapped_source: list
    unmapped_target: list
    error: Optional[float]
    joint: JointLaplacian
    source_embedding: np.ndarray     # rows addressed by source view index
    target_embedding: np.ndarray
    source_modality: str = "source"
    target_modality: str = "target"
    warnings: list = field(default_factory=list)

    def match_of(self, source_index):
        for s, t, _ in self.correspondences:
            if s == source_index:
                return t
        return None


def build_joint_laplacian(Lx, Ly, pairs, lambda_x=1.0, lambda_y=1.0) -> JointLaplacian:
    Lx = np.asarray(Lx, dtype=np.float64)
    Ly = np.asarray(Ly, dtype=np.float64)
    pairs = pairs if isinstance(pairs, PairedSet) else PairedSet(tuple(pairs))
    if len(pairs) == 0:
        raise ParameterError("at least one pair required", stage="joint")
    problems = pairs.violations(Lx.shape[0], Ly.shape[0])
    if problems:
        raise ParameterError("; ".join(problems), stage="joint")

    P_x = np.array(pairs.sources, dtype=np.int64)
    P_y = np.array(pairs.targets, dtype=np.int64)
    Q_x = np.setdiff1d(np.arange(Lx.shape[0]), P_x)
    Q_y = np.setdiff1d(np.arange(Ly.shape[0]), P_y)
    p, qx, qy = len(P_x), len(Q_x), len(Q_y)
    n = p + qx + qy
    sP, sX, sY = slice(0, p), slice(p, p + qx), slice(p + qx, n)

    Z = np.zeros((n, n))
    Z[sP, sP] = lambda_x * Lx[np.ix_(P_x, P_x)] + lambda_y * Ly[np.ix_(P_y, P_y)]
    Z[sP, sX] = lambda_x * Lx[np.ix_(P_x, Q_x)]
    Z[sX, sP] = lambda_x * Lx[np.ix_(Q_x, P_x)]
    Z[sX, sX] = lambda_x * Lx[np.ix_(Q_x, Q_x)]
    Z[sP, sY] = lambda_y * Ly[np.ix_(P_y, Q_y)]
    Z[sY, sP] = lambda_y * Ly[np.ix_(Q_y, P_y)]
    Z[sY, sY] = lambda_y * Ly[np.ix_(Q_y, Q_y)]

    source_rows = np.empty(Lx.shape[0], dtype=np.int64)
    source_rows[P_x] = np.arange(p)
    source_rows[Q_x] = np.arange(p, p + qx)
    target_rows = np.empty(Ly.shape[0], dtype=np.int64)
    target_rows[P_y] = np.arange(p)
    target_rows[Q_y] = np.arange(p + qx, n)
    origin = (
        [("paired", int(s), int(t)) for s, t in zip(P_x, P_y)]
        + [("source", int(s), None) for s in Q_x]
        + [("target", None, int(t)) for t in Q_y]
    )
    return JointLaplacian(Z, p, qx, qy, float(lambda_x), float(lambda_y), tuple(origin), source_rows, target_rows)


def eigen_symmetric(M):
    """All eigenpairs of a symmetric matrix, eigenvalues ascending."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {M.shape}", stage="eigen")
    scale = max(1.0, float(np.abs(M).max())) if M.size else 1.0
    asym = float(np.abs(M - M.T).max()) if M.size else 0.0
    if asym > 1e-10 * scale:
        raise ContractError(f"matrix is not symmetric (max |M - M^T| = {asym:.3e})", stage="eigen")
    return _kernels.eigh(0.5 * (M + M.T))


def select_embedding(eigenvalues, eigenvectors, l: int, zero_tol: float = 1e-9):
    """Pick the ``l`` eigenvectors with the smallest eigenvalues above the zero cut.

    Eigenvalues at or below ``zero_tol * max_eigenvalue`` are treated as zero
    (one per connected component) and skipped. Each returned column has its
    largest-magnitude entry made positive.

    Returns ``(columns, values, n_zero)``.
    """
    vals = np.asarray(eigenvalues, dtype=np.float64)
    vecs = np.asarray(eigenvectors, dtype=np.float64)
    top = float(vals.max()) if vals.size else 0.0
    cut = zero_tol * top
    nonzero = np.flatnonzero(vals > cut) if top > 0 else np.array([], dtype=np.int64)
    n_zero = int(vals.size - nonzero.size)
    if nonzero.size < l:
        raise StructuralError(
            f"need {l} non-zero eigenvalues but only {nonzero.size} exist; "
            f"joint graph has {n_zero} connected components",
            stage="select",
        )
    pick = nonzero[np.argsort(vals[nonzero], kind="stable")[:l]]
    cols = vecs[:, pick].copy()
    for c in range(cols.shape[1]):
        j = int(np.argmax(np.abs(cols[:, c])))
        if cols[j, c] < 0:
            cols[:, c] = -cols[:, c]
    return cols, vals[pick].copy(), n_zero


ZERO_DISTANCE_RTOL = 1e-9


def _compatible(a, b):
    if a is None or b is None:
        return True
    a, b = ObjectClass(a), ObjectClass(b)
    return a == b or ObjectClass.UNKNOWN in (a, b)


def match_correspondences(
    source_embedding,
    target_embedding,
    pairs,
    unmapped_factor: float = 2.0,
    source_classes=None,
    target_classes=None,
):
    """Nearest-neighbor matching in the embedding space.

    Paired sources map to their partner at distance 0. Every other source is
    matched to the closest class-compatible target (ties go to the lower
    target index). A source or unpaired target is reported unmapped when it
    has no compatible counterpart, or when its nearest cross-set distance is
    above ``unmapped_factor`` times the median of those distances.

    Returns ``(correspondences, unmapped_source, unmapped_target)``.
    """
    F = np.atleast_2d(np.asarray(source_embedding, dtype=np.float64))
    G = np.atleast_2d(np.asarray(target_embedding, dtype=np.float64))
    pairs = pairs if isinstance(pairs, PairedSet) else PairedSet(tuple(pairs))
    nx, ny = F.shape[0], G.shape[0]
    sc = list(source_classes) if source_classes is not None else [None] * nx
    tc = list(target_classes) if target_classes is not None else [None] * ny
    ok = np.array([[_compatible(a, b) for b in tc] for a in sc], dtype=bool).reshape(nx, ny)

    dist = np.sqrt(((F[:, None, :] - G[None, :, :]) ** 2).sum(axis=-1))
    dist = np.where(ok, dist, np.inf)
    paired_s = dict(pairs.pairs)
    paired_t = set(pairs.targets)

    # distances this small relative to the embedding scale count as zero
    scale = max(np.linalg.norm(F, axis=1).max(initial=0.0), np.linalg.norm(G, axis=1).max(initial=0.0))
    floor = ZERO_DISTANCE_RTOL * scale

    def threshold(values):
        finite = [v for v in values if math.isfinite(v)]
        if math.isinf(unmapped_factor) or not finite:
            return math.inf
        return max(unmapped_factor * float(np.median(finite)), floor)

    best_t = np.argmin(dist, axis=1) if ny else np.zeros(nx, dtype=int)
    best_d = dist[np.arange(nx), best_t] if ny else np.full(nx, np.inf)
    free_s = [i for i in range(nx) if i not in paired_s]
    thr_s = threshold([best_d[i] for i in free_s])

    corr, unmapped_s = [], []
    for i in range(nx):
        if i in paired_s:
            corr.append((i, paired_s[i], 0.0))
        elif math.isfinite(best_d[i]) and best_d[i] <= thr_s:
            corr.append((i, int(best_t[i]), float(best_d[i])))
        else:
            unmapped_s.append(i)

    near_s = dist.min(axis=0) if nx else np.full(ny, np.inf)
    free_t = [j for j in range(ny) if j not in paired_t]
    thr_t = threshold([near_s[j] for j in free_t])
    unmapped_t = [j for j in free_t if not (math.isfinite(near_s[j]) and near_s[j] <= thr_t)]
    return corr, unmapped_s, unmapped_t


def mapping_error(correspondences, ground_truth, n_source=None, unmapped_source=()):
    """Fraction of source objects whose match disagrees with the ground truth.

    ``ground_truth`` maps source index -> true target index, or ``None`` for
    a source with no counterpart (for which being unmapped is correct).
    Returns ``None`` when no ground truth is available.
    """
    if ground_truth is None:
        return None
    truth = dict(ground_truth) if not isinstance(ground_truth, dict) else ground_truth
    matched = {int(s): int(t) for s, t, *_ in correspondences}
    sources = set(matched) | {int(i) for i in unmapped_source}
    x = n_source if n_source is not None else len(sources)
    if x == 0:
        return 0.0
    wrong = 0
    for i in range(x):
        partner = truth.get(i)
        if i in matched:
            wrong += matched[i] != partner
        else:
            wrong += partner is not None
    return wrong / x


def evaluate_objective(f, g, Wx, Wy, pairs, lambda_x=1.0, lambda_y=1.0, mu=0.0) -> float:
    """Soft-constrained alignment cost for per-view embeddings ``f`` and ``g``.

    Each undirected neighbor edge contributes once, weighted by the
    symmetrized weight magnitude, so the first two terms equal
    ``lambda_x f'L_x f + lambda_y g'L_y g`` for the Laplacians used in
    alignment. The last term is ``mu * sum |f_s - g_t|^2`` over pairs.
    """
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    f2 = f.reshape(len(f), -1)
    g2 = g.reshape(len(g), -1)

    def smooth(v, W):
        A = np.abs(np.asarray(W, dtype=np.float64))
        d2 = ((v[:, None, :] - v[None, :, :]) ** 2).sum(axis=-1)
        return 0.5 * float((d2 * A).sum())

    pairs = pairs if isinstance(pairs, PairedSet) else PairedSet(tuple(pairs))
    penalty = sum(float(((f2[s] - g2[t]) ** 2).sum()) for s, t in pairs)
    return lambda_x * smooth(f2, Wx) + lambda_y * smooth(g2, Wy) + mu * penalty


def align(
    source_view: ModalityView,
    target_view: ModalityView,
    pairs,
    config: AlignmentConfig = AlignmentConfig(),
    truth=None,
) -> AlignmentResult:
    """Align two views; ``truth`` (source index -> target index or None) enables the error."""
    pairs = pairs if isinstance(pairs, PairedSet) else PairedSet(tuple(pairs))
    graphs = []
    for label, view in (("source", source_view), ("target", target_view)):
        n = len(view)
        if n < 2:
            raise ParameterError(f"{label} view has {n} objects; need at least 2", stage=f"graph:{label}")
        try:
            graphs.append(build_weight_matrix(view, min(config.k, n - 1), config.gram_reg))
        except SensAlignError as exc:
            raise exc.with_stage(f"graph:{label}") from exc

    Lx, Ly = (build_laplacian(gr) for gr in graphs)
    joint = build_joint_laplacian(Lx, Ly, pairs, config.lambda_x, config.lambda_y)
    vals, vecs = eigen_symmetric(joint.matrix)
    E, evals, n_zero = select_embedding(vals, vecs, config.l, config.zero_tol)
    warns = []
    if n_zero > 1:
        warns.append(f"joint graph is disconnected ({n_zero} components); component indicators discarded")

    F, G = joint.split(E)
    corr, um_s, um_t = match_correspondences(
        F, G, pairs, config.unmapped_factor, source_view.classes(), target_view.classes()
    )
    err = mapping_error(corr, truth, len(source_view), um_s) if truth is not None else None
    return AlignmentResult(
        embedding=E,
        eigenvalues=evals,
        correspondences=corr,
        unmapped_source=um_s,
        unmapped_target=um_t,
        error=err,
        joint=joint,
        source_embedding=F,
        target_embedding=G,
        source_modality=source_view.modality.value,
        target_modality=target_view.modality.value,
        warnings=warns,
    )


def align_scene(scene: Scene, config: AlignmentConfig = AlignmentConfig()):
    """Run the camera-Lidar and camera-BSM alignments of one scene."""
    cl = align(scene.camera, scene.lidar, scene.paired_camera_lidar, config, scene.truth_map(Modality.LIDAR))
    cb = align(scene.camera, scene.bsm, scene.paired_camera_bsm, config, scene.truth_map(Modality.BSM))
    return cl, cb


REPORT_CLASSES = (ObjectClass.CAR, ObjectClass.PERSON)


def unmapped_report(result_cl: AlignmentResult, result_cb: AlignmentResult, scene: Scene) -> dict:
    """Unmapped object counts per modality and class (Unknown excluded).

    Camera objects count when unmapped in both alignments; Lidar objects when
    unmapped in camera-Lidar; BSM objects when unmapped in camera-BSM.
    """
    camera = set(result_cl.unmapped_source) & set(result_cb.unmapped_source)
    sets = {
        Modality.CAMERA: (scene.camera, camera),
        Modality.LIDAR: (scene.lidar, set(result_cl.unmapped_target)),
        Modality.BSM: (scene.bsm, set(result_cb.unmapped_target)),
    }
    report = {}
    for modality, (view, idx) in sets.items():
        counts = {c.value: 0 for c in REPORT_CLASSES}
        for i in idx:
            cls = view.objects[i].cls
            if cls in REPORT_CLASSES:
                counts[cls.value] += 1
        report[modality.value] = counts
    return report

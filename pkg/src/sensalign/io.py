"""JSON scene/result files and the CSV aggregate.

Floats are written with ``repr`` precision so scenes round-trip exactly.
"""
from __future__ import annotations

import csv
import io
import json
import os
import statistics
import tempfile
from pathlib import Path

from .alignment import AlignmentResult
from .core import DetectedObject, InputError, Modality, ModalityView, ObjectClass, PairedSet, Scene

VIEW_KEYS = ("camera", "lidar", "bsm")


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _view_to_dict(view: ModalityView) -> dict:
    return {
        "dimension": view.dimension,
        "objects": [{"id": o.id, "class": o.cls.value, "coords": list(o.coords)} for o in view.objects],
    }


def _view_from_dict(modality: str, data: dict) -> ModalityView:
    objs = tuple(DetectedObject(int(o["id"]), ObjectClass(o["class"]), tuple(o["coords"])) for o in data["objects"])
    return ModalityView(Modality(modality), int(data["dimension"]), objs)


def scene_to_dict(scene: Scene, meta=None) -> dict:
    out = {
        "id": scene.id,
        "views": {
            "camera": _view_to_dict(scene.camera),
            "lidar": _view_to_dict(scene.lidar),
            "bsm": _view_to_dict(scene.bsm),
        },
        "paired": {
            "camera_lidar": [list(p) for p in scene.paired_camera_lidar],
            "camera_bsm": [list(p) for p in scene.paired_camera_bsm],
        },
    }
    if scene.ground_truth is not None:
        out["ground_truth"] = [list(row) for row in scene.ground_truth]
    if meta:
        out["meta"] = meta
    return out


def scene_from_dict(data: dict) -> Scene:
    try:
        views = data["views"]
        gt = data.get("ground_truth")
        return Scene(
            id=str(data["id"]),
            camera=_view_from_dict("camera", views["camera"]),
            lidar=_view_from_dict("lidar", views["lidar"]),
            bsm=_view_from_dict("bsm", views["bsm"]),
            paired_camera_lidar=PairedSet(tuple(tuple(p) for p in data["paired"]["camera_lidar"])),
            paired_camera_bsm=PairedSet(tuple(tuple(p) for p in data["paired"]["camera_bsm"])),
            ground_truth=None if gt is None else tuple(tuple(r) for r in gt),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed scene document: {exc!r}", stage="parse") from exc


def save_scene(scene: Scene, path, meta=None):
    atomic_write_text(path, dumps(scene_to_dict(scene, meta)))


def load_scene(path) -> Scene:
    try:
        text = Path(path).read_text(encoding="utf-8")
        data = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read scene {path}: {exc}", stage="read") from exc
    return scene_from_dict(data)


def _class_counts(view: ModalityView, indices) -> dict:
    counts = {"Car": 0, "Person": 0}
    for i in indices:
        c = view.objects[i].cls.value
        if c in counts:
            counts[c] += 1
    return counts


def alignment_to_dict(res: AlignmentResult, source: ModalityView, target: ModalityView) -> dict:
    rows = []
    for (kind, s, t), coords in zip(res.joint.row_origin, res.embedding):
        rows.append({"role": kind, "source_index": s, "target_index": t, "coords": [float(c) for c in coords]})
    return {
        "source": res.source_modality,
        "target": res.target_modality,
        "blocks": {"p": res.joint.p, "q_x": res.joint.q_x, "q_y": res.joint.q_y},
        "eigenvalues": [float(v) for v in res.eigenvalues],
        "embedding": rows,
        "matches": [[int(s), int(t), float(d)] for s, t, d in res.correspondences],
        "unmapped": {
            "source": [int(i) for i in res.unmapped_source],
            "target": [int(i) for i in res.unmapped_target],
            "source_by_class": _class_counts(source, res.unmapped_source),
            "target_by_class": _class_counts(target, res.unmapped_target),
        },
        "error": None if res.error is None else float(res.error),
        "warnings": list(res.warnings),
    }


CSV_COLUMNS = (
    "scene_id",
    "alignment",
    "error",
    "median_error",
    "matches",
    "unmapped_camera_car",
    "unmapped_camera_person",
    "unmapped_lidar_car",
    "unmapped_lidar_person",
    "unmapped_bsm_car",
    "unmapped_bsm_person",
)


def aggregate_rows(results) -> list:
    """One CSV row per (scene, alignment) plus a trailing summary row."""
    rows = []
    for doc in results:
        for key in ("camera_lidar", "camera_bsm"):
            a = doc[key]
            row = dict.fromkeys(CSV_COLUMNS, "")
            row.update(scene_id=doc["scene_id"], alignment=key, matches=len(a["matches"]))
            row["error"] = "" if a["error"] is None else repr(float(a["error"]))
            for side in ("source", "target"):
                mod = a[side]
                for cls, n in a["unmapped"][f"{side}_by_class"].items():
                    row[f"unmapped_{mod}_{cls.lower()}"] = n
            rows.append(row)
    errors = [float(r["error"]) for r in rows if r["error"] != ""]
    summary = dict.fromkeys(CSV_COLUMNS, "")
    summary.update(scene_id="summary", alignment="all", matches=sum(r["matches"] for r in rows))
    if errors:
        summary["error"] = repr(statistics.fmean(errors))
        summary["median_error"] = repr(float(statistics.median(errors)))
    for col in CSV_COLUMNS[5:]:
        summary[col] = sum(r[col] for r in rows if r[col] != "")
    rows.append(summary)
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()

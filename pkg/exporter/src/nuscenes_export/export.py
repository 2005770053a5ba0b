"""Key-frame export into the openloop JSONL sample schema.

A key-frame is exportable when its scene provides 3 earlier and 6 later
key-frames.  All poses and boxes are expressed in the frame of the current
key-frame's ego pose; kinematics come from the nearest CAN bus pose record.
Samples without CAN coverage are skipped and counted in the manifest.

The command field is intentionally omitted: the consuming loader derives it
from the future trajectory.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

from nuscenes_export.tables import Tables, load_can_pose
from nuscenes_export.transform import quaternion_yaw, to_ego_frame, wrap_angle

HISTORY_LEN = 4
FUTURE_LEN = 6

DEFAULT_CLASS_PREFIXES = ("vehicle.", "human.pedestrian")

# Ego footprint convention used by the grid-collision evaluation downstream.
EGO_LENGTH = 4.08
EGO_WIDTH = 1.85


@dataclass(frozen=True)
class ExportConfig:
    dataset_root: str
    split: str = "all"  # train | val | all
    output_path: str = "export.jsonl"
    version: str = "v1.0-trainval"
    class_prefixes: tuple[str, ...] = DEFAULT_CLASS_PREFIXES
    scenes_file: str | None = None  # explicit scene-name list, one per line

    def __post_init__(self) -> None:
        if self.split not in ("train", "val", "all"):
            raise ValueError(f"split must be train/val/all, got {self.split!r}")
        if not os.path.isdir(self.dataset_root):
            raise FileNotFoundError(f"dataset root not found: {self.dataset_root}")


def _resolve_scene_names(cfg: ExportConfig, available: list[str]) -> tuple[list[str], str]:
    """Scene names for the split plus a note on how they were resolved."""
    if cfg.scenes_file:
        with open(cfg.scenes_file, "r", encoding="utf-8") as f:
            wanted = [line.strip() for line in f if line.strip()]
        return sorted(set(wanted) & set(available)), f"scenes_file:{cfg.scenes_file}"
    if cfg.split == "all":
        return sorted(available), "all"
    try:
        from nuscenes.utils import splits  # optional devkit
    except ImportError as exc:
        raise RuntimeError(
            f"split {cfg.split!r} needs the official scene lists: install the "
            "nuscenes devkit or pass an explicit scenes file"
        ) from exc
    wanted = set(getattr(splits, cfg.split))
    return sorted(wanted & set(available)), "nuscenes.utils.splits"


def _ego_state(tables: Tables, sample: dict) -> tuple[float, float, float]:
    pose = tables.ego_pose_at(sample)
    x, y = pose["translation"][0], pose["translation"][1]
    return x, y, quaternion_yaw(pose["rotation"])


def _nearest_can_record(records: list[dict], timestamp: int) -> tuple[dict | None, float]:
    """Nearest pose record and the yaw acceleration around it."""
    if not records:
        return None, 0.0
    idx = min(range(len(records)), key=lambda i: abs(records[i]["utime"] - timestamp))
    rec = records[idx]
    lo = max(idx - 1, 0)
    hi = min(idx + 1, len(records) - 1)
    if hi == lo:
        return rec, 0.0
    dt = (records[hi]["utime"] - records[lo]["utime"]) * 1e-6
    if dt <= 0.0:
        return rec, 0.0
    beta = (records[hi]["rotation_rate"][2] - records[lo]["rotation_rate"][2]) / dt
    return rec, beta


def _box_in_frame(ann: dict, ref: tuple[float, float, float]) -> dict:
    cx, cy = to_ego_frame(ann["translation"][0], ann["translation"][1], *ref)
    heading = wrap_angle(quaternion_yaw(ann["rotation"]) - ref[2])
    width, length = ann["size"][0], ann["size"][1]
    return {"cx": cx, "cy": cy, "heading": heading, "length": length, "width": width}


def export(cfg: ExportConfig) -> dict:
    """Run the export; returns the manifest (also written next to the output)."""
    tables = Tables(cfg.dataset_root, cfg.version)
    names = [s["name"] for s in tables.scenes]
    scene_names, split_source = _resolve_scene_names(cfg, names)
    scenes = sorted(
        (s for s in tables.scenes if s["name"] in set(scene_names)),
        key=lambda s: s["name"],
    )

    counts = {
        "exported": 0,
        "skipped_short_history": 0,
        "skipped_short_future": 0,
        "skipped_no_can": 0,
    }
    out_dir = os.path.dirname(os.path.abspath(cfg.output_path))
    os.makedirs(out_dir, exist_ok=True)

    with open(cfg.output_path, "w", encoding="utf-8", newline="\n") as out:
        for scene in scenes:
            samples = tables.scene_samples(scene)
            can_records = load_can_pose(cfg.dataset_root, scene["name"])
            states = [_ego_state(tables, s) for s in samples]
            for i, sample in enumerate(samples):
                if i < HISTORY_LEN - 1:
                    counts["skipped_short_history"] += 1
                    continue
                if i + FUTURE_LEN > len(samples) - 1:
                    counts["skipped_short_future"] += 1
                    continue
                rec, beta = _nearest_can_record(can_records, sample["timestamp"])
                if rec is None:
                    counts["skipped_no_can"] += 1
                    continue
                ref = states[i]
                history = []
                for j in range(i - HISTORY_LEN + 1, i + 1):
                    hx, hy = to_ego_frame(states[j][0], states[j][1], *ref)
                    history.append([hx, hy, wrap_angle(states[j][2] - ref[2])])
                future = []
                obstacles = []
                for j in range(i + 1, i + 1 + FUTURE_LEN):
                    fx, fy = to_ego_frame(states[j][0], states[j][1], *ref)
                    future.append([fx, fy, wrap_angle(states[j][2] - ref[2])])
                    frame_boxes = [
                        _box_in_frame(ann, ref)
                        for ann in tables.annotations_at(samples[j])
                        if tables.category_of(ann).startswith(tuple(cfg.class_prefixes))
                    ]
                    obstacles.append(frame_boxes)
                obj = {
                    "sample_id": sample["token"],
                    "history": history,
                    "kinematics": {
                        "vx": rec["vel"][0],
                        "vy": rec["vel"][1],
                        "omega": rec["rotation_rate"][2],
                        "ax": rec["accel"][0],
                        "ay": rec["accel"][1],
                        "beta": beta,
                    },
                    "gt_future": future,
                    "obstacles": obstacles,
                }
                out.write(json.dumps(obj, separators=(",", ":")))
                out.write("\n")
                counts["exported"] += 1

    manifest = {
        "tool": "nuscenes-export",
        "config": {
            "dataset_root": cfg.dataset_root,
            "version": cfg.version,
            "split": cfg.split,
            "scenes_file": cfg.scenes_file,
            "class_prefixes": list(cfg.class_prefixes),
            "output_path": cfg.output_path,
        },
        "split_source": split_source,
        "n_scenes": len(scenes),
        "counts": counts,
        "kinematics_channels": {
            "vx_vy": "pose.vel[0:2] (nearest record)",
            "omega": "pose.rotation_rate[2] (nearest record)",
            "ax_ay": "pose.accel[0:2] (nearest record)",
            "beta": "finite difference of pose.rotation_rate[2] over neighbor records",
        },
        "ego_pose_source": "key-frame sample_data row nearest the sample timestamp",
        "ego_box_convention": {"length": EGO_LENGTH, "width": EGO_WIDTH},
    }
    manifest_path = cfg.output_path + ".manifest.json"
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest

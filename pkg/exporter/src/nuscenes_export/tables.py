"""Minimal reader for the nuScenes relational metadata tables.

Only the tables and fields the exporter needs; no devkit dependency.
"""

from __future__ import annotations

import json
import os


class Tables:
    """Indexed access to scene/sample/ego_pose/annotation records."""

    def __init__(self, root: str, version: str):
        self.root = root
        self.version = version
        table_dir = os.path.join(root, version)
        if not os.path.isdir(table_dir):
            raise FileNotFoundError(f"no table directory at {table_dir}")

        self.scenes = self._load(table_dir, "scene")
        self.samples = {r["token"]: r for r in self._load(table_dir, "sample")}
        self.ego_poses = {r["token"]: r for r in self._load(table_dir, "ego_pose")}
        categories = {r["token"]: r["name"] for r in self._load(table_dir, "category")}
        self.instance_category = {
            r["token"]: categories[r["category_token"]]
            for r in self._load(table_dir, "instance")
        }

        self.annotations_by_sample: dict[str, list[dict]] = {}
        for r in self._load(table_dir, "sample_annotation"):
            self.annotations_by_sample.setdefault(r["sample_token"], []).append(r)
        # stable order for byte-identical re-exports
        for anns in self.annotations_by_sample.values():
            anns.sort(key=lambda a: a["token"])

        self.keyframe_data_by_sample: dict[str, list[dict]] = {}
        for r in self._load(table_dir, "sample_data"):
            if r.get("is_key_frame"):
                self.keyframe_data_by_sample.setdefault(r["sample_token"], []).append(r)

    @staticmethod
    def _load(table_dir: str, name: str) -> list[dict]:
        path = os.path.join(table_dir, f"{name}.json")
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)

    def scene_samples(self, scene: dict) -> list[dict]:
        """Key-frames of a scene in temporal order, following the next-chain."""
        out = []
        token = scene["first_sample_token"]
        while token:
            sample = self.samples[token]
            out.append(sample)
            token = sample["next"]
        return out

    def ego_pose_at(self, sample: dict) -> dict:
        """Ego pose of the sample's reference key-frame data.

        Among the sample's key-frame sensor rows, the one whose timestamp
        matches the sample timestamp most closely (exact for the reference
        lidar sweep).
        """
        rows = self.keyframe_data_by_sample.get(sample["token"])
        if not rows:
            raise KeyError(f"sample {sample['token']} has no key-frame sample_data")
        best = min(rows, key=lambda r: abs(r["timestamp"] - sample["timestamp"]))
        return self.ego_poses[best["ego_pose_token"]]

    def annotations_at(self, sample: dict) -> list[dict]:
        return self.annotations_by_sample.get(sample["token"], [])

    def category_of(self, annotation: dict) -> str:
        return self.instance_category[annotation["instance_token"]]


def load_can_pose(root: str, scene_name: str) -> list[dict]:
    """CAN bus pose stream for a scene, sorted by utime; [] when absent."""
    path = os.path.join(root, "can_bus", f"{scene_name}_pose.json")
    if not os.path.exists(path):
        return []
    with open(path, "r", encoding="utf-8") as f:
        records = json.load(f)
    return sorted(records, key=lambda r: r["utime"])

"""Fabricated miniature nuScenes root: two scenes of key-frames on known
trajectories, a handful of annotated boxes, and CAN pose streams."""

import json
import math
import os

import pytest

VERSION = "v1.0-mini"
STEP_US = 500_000  # 2 Hz key-frames


def yaw_quaternion(yaw):
    return [math.cos(0.5 * yaw), 0.0, 0.0, math.sin(0.5 * yaw)]


def scene_motion(scene_index, k):
    """Global pose of key-frame k: scene 0 drives straight, scene 1 arcs."""
    if scene_index == 0:
        return 100.0 + 4.0 * k, 200.0, 0.0
    radius, omega = 40.0, 0.1
    t = 0.5 * k
    return (
        -50.0 + radius * math.sin(omega * t),
        30.0 + radius * (1.0 - math.cos(omega * t)),
        omega * t,
    )


def build_mini_root(root, n_samples=12, with_can=(True, True)):
    table_dir = os.path.join(root, VERSION)
    os.makedirs(table_dir, exist_ok=True)
    os.makedirs(os.path.join(root, "can_bus"), exist_ok=True)

    scenes, samples, sample_data, ego_poses = [], [], [], []
    annotations, instances, categories = [], [], []
    categories = [
        {"token": "cat-vehicle", "name": "vehicle.car"},
        {"token": "cat-ped", "name": "human.pedestrian.adult"},
        {"token": "cat-barrier", "name": "movable_object.barrier"},
    ]
    instances = [
        {"token": "inst-car", "category_token": "cat-vehicle"},
        {"token": "inst-ped", "category_token": "cat-ped"},
        {"token": "inst-barrier", "category_token": "cat-barrier"},
    ]

    for sc in range(2):
        name = f"scene-{sc:04d}"
        tokens = [f"{name}-s{k:02d}" for k in range(n_samples)]
        scenes.append(
            {
                "token": f"{name}-tok",
                "name": name,
                "nbr_samples": n_samples,
                "first_sample_token": tokens[0],
                "last_sample_token": tokens[-1],
            }
        )
        base_time = 1_000_000_000 + sc * 60_000_000
        for k, token in enumerate(tokens):
            ts = base_time + k * STEP_US
            samples.append(
                {
                    "token": token,
                    "timestamp": ts,
                    "scene_token": f"{name}-tok",
                    "prev": tokens[k - 1] if k > 0 else "",
                    "next": tokens[k + 1] if k < n_samples - 1 else "",
                }
            )
            x, y, yaw = scene_motion(sc, k)
            pose_token = f"{token}-ep"
            ego_poses.append(
                {
                    "token": pose_token,
                    "timestamp": ts,
                    "translation": [x, y, 0.0],
                    "rotation": yaw_quaternion(yaw),
                }
            )
            sample_data.append(
                {
                    "token": f"{token}-sd",
                    "sample_token": token,
                    "ego_pose_token": pose_token,
                    "timestamp": ts,
                    "is_key_frame": True,
                }
            )
            # one parked car 5 m left of the lane at every frame of scene 0,
            # a pedestrian and an ignored barrier at frame 6
            if sc == 0:
                annotations.append(
                    {
                        "token": f"{token}-ann-car",
                        "sample_token": token,
                        "instance_token": "inst-car",
                        "translation": [150.0, 205.0, 0.0],
                        "size": [1.9, 4.5, 1.6],  # w, l, h
                        "rotation": yaw_quaternion(0.0),
                    }
                )
                if k == 6:
                    annotations.append(
                        {
                            "token": f"{token}-ann-ped",
                            "sample_token": token,
                            "instance_token": "inst-ped",
                            "translation": [130.0, 196.0, 0.0],
                            "size": [0.6, 0.7, 1.8],
                            "rotation": yaw_quaternion(1.0),
                        }
                    )
                    annotations.append(
                        {
                            "token": f"{token}-ann-bar",
                            "sample_token": token,
                            "instance_token": "inst-barrier",
                            "translation": [131.0, 196.0, 0.0],
                            "size": [0.5, 2.0, 1.0],
                            "rotation": yaw_quaternion(0.0),
                        }
                    )

        if with_can[sc]:
            records = []
            for k in range(n_samples * 10):
                t = base_time + k * 50_000  # 20 Hz stream
                if sc == 0:
                    vel, rr, acc = [8.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]
                else:
                    vel = [4.0, 0.0, 0.0]
                    rr = [0.0, 0.0, 0.1 + 1e-4 * k]  # slowly rising yaw rate
                    acc = [0.0, 0.4, 0.0]
                records.append(
                    {
                        "utime": t,
                        "pos": [0.0, 0.0, 0.0],
                        "orientation": [1.0, 0.0, 0.0, 0.0],
                        "vel": vel,
                        "rotation_rate": rr,
                        "accel": acc,
                    }
                )
            path = os.path.join(root, "can_bus", f"{name}_pose.json")
            with open(path, "w", encoding="utf-8") as f:
                json.dump(records, f)

    def dump(name, rows):
        with open(os.path.join(table_dir, f"{name}.json"), "w", encoding="utf-8") as f:
            json.dump(rows, f)

    dump("scene", scenes)
    dump("sample", samples)
    dump("sample_data", sample_data)
    dump("ego_pose", ego_poses)
    dump("sample_annotation", annotations)
    dump("instance", instances)
    dump("category", categories)
    return root


@pytest.fixture
def mini_root(tmp_path):
    return build_mini_root(str(tmp_path / "nuscenes"))


@pytest.fixture
def mini_root_missing_can(tmp_path):
    return build_mini_root(str(tmp_path / "nuscenes_nocan"), with_can=(True, False))

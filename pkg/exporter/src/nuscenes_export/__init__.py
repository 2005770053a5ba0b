"""nuScenes to JSONL sample exporter.

Walks the key-frames of each scene, emits one sample per frame that has a
full 4-frame history and 6-frame future, with all poses and annotation
boxes expressed in the current ego frame, and kinematics taken from the
CAN bus expansion.  Output follows the openloop dataset schema byte for
byte; the navigation command is left out and derived by the loader.
"""

__version__ = "0.1.0"

from nuscenes_export.export import ExportConfig, export

__all__ = ["ExportConfig", "export", "__version__"]

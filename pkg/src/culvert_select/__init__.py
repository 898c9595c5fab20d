"""Informative frame-pair selection for repetitive pipe-interior video."""

from .bench import BenchReport, bench
from .config import parse_config
from .errors import CulvertError
from .features import compute_descriptors, detect_keypoints, match_descriptors
from .flow import average_motion, track_points
from .geometry2d import estimate_similarity, pair_geometry
from .imageio import Frame, FrameSequence, build_pyramid, load_sequence
from .metrics import psnr, ssim
from .selection import PairStats, SelectionConfig, SelectionResult, evaluate_pair, score_pair, select
from .sim3 import Pose, Sim3Transform, align_trajectories, normalize_trajectory, umeyama
from .synth import SceneConfig, ray_cylinder_intersect, render_scene

__version__ = "0.1.0"

__all__ = [
    "BenchReport", "CulvertError", "Frame", "FrameSequence", "PairStats", "Pose", "SceneConfig",
    "SelectionConfig", "SelectionResult", "Sim3Transform", "align_trajectories", "average_motion",
    "bench", "build_pyramid", "compute_descriptors", "detect_keypoints", "estimate_similarity",
    "evaluate_pair", "load_sequence", "match_descriptors", "normalize_trajectory", "pair_geometry",
    "parse_config", "psnr", "ray_cylinder_intersect", "render_scene", "score_pair", "select", "ssim",
    "track_points", "umeyama",
]

from .assets import (default_assets, load_human_assets, load_scene_assets, make_body, make_room,
                     write_asset_library)
from .compose import (ComposedScene, PlacementError, SynthConfig, find_floor, place_humans,
                      sample_cameras)
from .noise import NoiseConfig, simulate_kinect_noise
from .pipeline import (compose_scene, filter_sparse, generate_dataset, generate_labeled_scene,
                       load_scene_bodies, render_scene, scene_rng)

__all__ = [
    "ComposedScene", "NoiseConfig", "PlacementError", "SynthConfig", "compose_scene",
    "default_assets", "filter_sparse", "find_floor", "generate_dataset", "generate_labeled_scene",
    "load_human_assets", "load_scene_assets", "load_scene_bodies", "make_body", "make_room",
    "place_humans", "render_scene", "sample_cameras", "scene_rng", "simulate_kinect_noise",
    "write_asset_library",
]

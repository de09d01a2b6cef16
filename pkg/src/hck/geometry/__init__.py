from .bvh import DistanceAccelerator, build_distance_accelerator, point_to_mesh_distance
from .camera import (CameraModel, DepthImage, IndexImage, Projection, backproject_depth,
                     backproject_pixels, project_points)
from .cloud import BACKGROUND, HUMAN, LabeledPointCloud
from .lift import dilate_labels, intersect_instance_semantic, project_2d_mask_to_3d
from .mesh import TriangleMesh, box_mesh, grid_mesh, icosphere, load_mesh, merge_meshes, save_mesh
from .raster import RenderResult, rasterize_meshes

__all__ = [
    "BACKGROUND", "HUMAN", "CameraModel", "DepthImage", "DistanceAccelerator", "IndexImage",
    "LabeledPointCloud", "Projection", "RenderResult", "TriangleMesh", "backproject_depth",
    "backproject_pixels", "box_mesh", "build_distance_accelerator", "dilate_labels", "grid_mesh",
    "icosphere", "intersect_instance_semantic", "load_mesh", "merge_meshes", "point_to_mesh_distance",
    "project_2d_mask_to_3d", "project_points", "rasterize_meshes", "save_mesh",
]

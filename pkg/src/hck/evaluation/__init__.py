from .metrics import (ApConfig, EvalReport, ap_suite, average_precision, compare_label_sets,
                      iou_matrix, mask_iou, match_predictions, merge_reports, pr_curve_csv,
                      semantic_part_miou)
from .occlusion import (OcclusionConfig, SceneOcclusion, bucket_counts, mesh_pixel_area,
                        occlusion_levels, scene_occlusion, splat_mask, visibility_ratio)

__all__ = [
    "ApConfig", "EvalReport", "OcclusionConfig", "SceneOcclusion", "ap_suite", "average_precision",
    "bucket_counts", "compare_label_sets", "iou_matrix", "mask_iou", "match_predictions",
    "merge_reports", "mesh_pixel_area", "occlusion_levels", "pr_curve_csv", "scene_occlusion",
    "semantic_part_miou", "splat_mask", "visibility_ratio",
]

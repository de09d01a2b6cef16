from .pseudo import (FittedBody, LabelConfig, assign_and_merge_parts, body_distances, pseudo_label,
                     refine_with_released_masks, segment_human_points)
from .taxonomy import (FINAL_PARTS, MERGE_GROUPS, SMPL, SMPLX, SMPLX_PARTS, BodyPartTaxonomy,
                       build_taxonomy)

__all__ = [
    "FINAL_PARTS", "MERGE_GROUPS", "SMPL", "SMPLX", "SMPLX_PARTS", "BodyPartTaxonomy", "FittedBody",
    "LabelConfig", "assign_and_merge_parts", "body_distances", "build_taxonomy", "pseudo_label",
    "refine_with_released_masks", "segment_human_points",
]

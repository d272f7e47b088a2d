from lesiontrack.acsm.params import SimilarityParams, SimilarityValue
from lesiontrack.acsm.measure import (
    acsm_2d,
    acsm_3d,
    k_map_2d,
    k_map_3d,
    largest_match_2d,
    largest_match_3d,
    patch_match_2d,
    patch_match_3d,
)
from lesiontrack.acsm.oracle import acsm_2d_oracle, acsm_3d_oracle, k_map_oracle

__all__ = [
    "SimilarityParams",
    "SimilarityValue",
    "acsm_2d",
    "acsm_2d_oracle",
    "acsm_3d",
    "acsm_3d_oracle",
    "k_map_2d",
    "k_map_3d",
    "k_map_oracle",
    "largest_match_2d",
    "largest_match_3d",
    "patch_match_2d",
    "patch_match_3d",
]

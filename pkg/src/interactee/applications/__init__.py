"""Downstream uses of predicted interactee boxes."""
from .captions import CaptionedExample, CaptionRetriever, bleu, retrieve_captions, tokenize
from .importance import SceneObject, rank_importance
from .priming import Detection, enlarge_box, prime_detections
from .seam_carving import (
    boost_energy,
    find_min_horizontal_seam,
    find_min_vertical_seam,
    gradient_energy,
    luminance,
    retarget,
)

__all__ = [
    "CaptionRetriever",
    "CaptionedExample",
    "Detection",
    "SceneObject",
    "bleu",
    "boost_energy",
    "enlarge_box",
    "find_min_horizontal_seam",
    "find_min_vertical_seam",
    "gradient_energy",
    "luminance",
    "prime_detections",
    "rank_importance",
    "retarget",
    "retrieve_captions",
    "tokenize",
]

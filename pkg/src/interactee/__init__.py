"""Category-independent prediction of where a person's interactee is."""

__version__ = "0.1.0"

from .consensus import consensus_box, mean_shift
from .evaluation import EvalRecord, evaluate, near_person_baseline, random_baseline
from .features import BlockNormalizer, DescriptorBlock, DescriptorVector, Layout, assemble
from .geometry import (
    BoundingBox,
    LocalizationParams,
    PersonInstance,
    denormalize_to_box,
    iou,
    normalize_localization,
    person_scale,
)
from .interaction_types import InteractionTypeQuantizer
from .knn import InteracteeKNNRegressor
from .mdn import MixtureDensityRegressor

__all__ = [
    "BlockNormalizer",
    "BoundingBox",
    "DescriptorBlock",
    "DescriptorVector",
    "EvalRecord",
    "InteracteeKNNRegressor",
    "InteractionTypeQuantizer",
    "Layout",
    "LocalizationParams",
    "MixtureDensityRegressor",
    "PersonInstance",
    "assemble",
    "consensus_box",
    "denormalize_to_box",
    "evaluate",
    "iou",
    "mean_shift",
    "near_person_baseline",
    "normalize_localization",
    "person_scale",
    "random_baseline",
]

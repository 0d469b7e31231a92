"""Human-object interaction post-processing toolkit.

Two-direction spatial encodings, a small interaction head, exclusive
object regrouping and role mAP evaluation.
"""

from .config import Config, ValidationError
from .evaluation import EvalResult, GtTriplet, HoiTriplet, average_precision, map_role, match
from .geometry import (BBox, BinaryMask, HumanParts, KeypointSet, ObjectParts, PolygonMask,
                       generate_human_parts, generate_object_parts, iou, rasterize, union_box)
from .head import HeadConfig, HeadParams, PairBatch, PairLabels, forward, loss, loss_and_grad, train_toy
from .regroup import (ActionPrior, RegroupConfig, ScoreTensor, compute_exclusive_prior, exclusive_regroup,
                      fuse_scores, max_object_select)
from .spatial import make_coord_map, offset_maps, pair_masks, roi_crop, skeleton_map

__version__ = "0.1.0"

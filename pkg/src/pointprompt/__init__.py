"""Point-marker visual prompts for region-level multimodal models.

Any region annotation (point, box or mask) is reduced to one or more
representative points, rendered as an opaque marker onto the image, and used
to build instruction data or to query a model during evaluation.
"""
from .errors import (BackendError, BackendTimeout, BoxTooSmall, DecodeError, DegenerateGrid, EmptyRegion,
                     InvalidBox, InvalidKernelSpec, OutOfBounds, PointPromptError, UnnamedColor,
                     ValidationError)
from .raster import (Point, StructuringElement, argmax_distance, connected_component, dilate,
                     distance_transform, gaussian_blur_threshold, make_kernel)
from .geometry import (BBox, BoxRegion, GridSpec, MaskRegion, PointRegion, box_centroid, box_grid_points,
                       disentangle, mask_center, point_of_point)
from .render import NAMED_COLORS, PromptStyle, render_marker, render_multi
from .manifest import Category, Manifest, MaskRef, Region, Sample
from .degrade import BoxShrinkParams, ScribbleParams, build_benchmark, degrade_box, degrade_mask
from .dataset import InstructionSample, PromptTemplate, build_dataset, convert_label_maps, region_descriptor
from .gateway import ChatRequest, ChatResponse, HashedBagEmbedder, HttpGateway, MockGateway, match_category
from .evaluation import EvalConfig, EvalReport, VoteConfig, compute_miou, evaluate, vote_infer

__version__ = "0.1.0"

"""diecam: facet-based machining analysis for forging die surface models.

The pipeline runs mesh -> per-facet contact indicators -> feed-direction
continuity -> feature segmentation -> tool and strategy association -> an
ordered, estimated process plan. The same core backs a CLI (``diecam``) and
an HTTP service (``diecam serve``).
"""

from .association import (
    CuttingTool,
    MachiningFeature,
    MachiningStrategy,
    TechnologicalData,
    compute_pitch,
    junction_check,
    make_machining_feature,
    select_strategy,
    select_tool,
    technological_data_from_dict,
    tool_library_from_json,
)
from .errors import DiecamError
from .indicators import (
    ContactMapConfig,
    ContinuityParams,
    FeedDirection,
    ToolAxis,
    classify_contact,
    classify_continuity,
    compute_indicators,
    continuity_residuals,
    effective_radius,
)
from .mesh import (
    CleaningOptions,
    TriMesh,
    load_stl,
    load_stl_bytes,
    mesh_from_triangles,
    write_stl,
)
from .pipeline import (
    AnalysisStages,
    PipelineConfig,
    canonical_json,
    default_technological_data,
    default_tool_library,
    mesh_sha256,
    run_plan,
)
from .planner import build_sequence, order_process
from .segmentation import (
    GeometricFeature,
    SegmentationResult,
    feature_relations,
    grow_elementary_features,
    protrusion_containment,
)
from .session import AnalysisSession, SessionStore

__version__ = "0.1.0"

__all__ = [
    "AnalysisSession",
    "AnalysisStages",
    "CleaningOptions",
    "ContactMapConfig",
    "ContinuityParams",
    "CuttingTool",
    "DiecamError",
    "FeedDirection",
    "GeometricFeature",
    "MachiningFeature",
    "MachiningStrategy",
    "PipelineConfig",
    "SegmentationResult",
    "SessionStore",
    "TechnologicalData",
    "ToolAxis",
    "TriMesh",
    "build_sequence",
    "canonical_json",
    "classify_contact",
    "classify_continuity",
    "compute_indicators",
    "compute_pitch",
    "continuity_residuals",
    "default_technological_data",
    "default_tool_library",
    "effective_radius",
    "feature_relations",
    "grow_elementary_features",
    "junction_check",
    "load_stl",
    "load_stl_bytes",
    "make_machining_feature",
    "mesh_from_triangles",
    "mesh_sha256",
    "order_process",
    "protrusion_containment",
    "run_plan",
    "select_strategy",
    "select_tool",
    "technological_data_from_dict",
    "tool_library_from_json",
    "write_stl",
    "__version__",
]

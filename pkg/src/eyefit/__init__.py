"""eyefit: landmark-driven 3D head reconstruction and virtual eyewear try-on."""

from .displacement import DisplacementMap, apply_displacement, load_displacement_png
from .errors import EyefitError
from .fitting import (
    FitConfig,
    FitResult,
    Observation2D,
    WeakPerspectiveCamera,
    fit_landmarks2d,
    fit_landmarks3d,
    parse_landmarks_json,
    project,
    residuals,
)
from .geometry import Similarity3, apply_transform, rodrigues, umeyama, vertex_normals
from .glb import Material, Scene, SceneNode, merge_scene, read_glb, validate_glb, write_glb
from .headmodel import (
    HeadModelAsset,
    ParamVector,
    decode,
    embed_landmarks,
    eye_centers,
    load_asset,
    save_asset,
)
from .mesh import Mesh, merge_meshes
from .metrics import (
    ErrorCurve,
    ErrorSummary,
    align_rigid_landmarks,
    cumulative_curve,
    scan_to_mesh_distances,
    summarize,
)
from .obj import parse_obj
from .placement import (
    AnchorFrame,
    EyewearAsset,
    FitParams,
    compute_placement,
    head_anchor_frame,
    load_eyewear_asset,
    place_eyewear,
    resolve_clearance,
    save_eyewear_asset,
)

__version__ = "0.1.0"
